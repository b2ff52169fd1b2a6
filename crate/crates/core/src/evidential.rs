//! The NIG evidential representation, its uncertainty terms and the
//! training objective.
//!
//! Every loss here comes in two flavours: a plain value function, and a
//! `*_grad` variant returning the partial derivatives with respect to
//! `(gamma, upsilon, alpha, beta)`. The network chains the latter through its
//! output activation.

use serde::{Deserialize, Serialize};

use crate::special::{ln_gamma, psi, StudentTParams};
use crate::{Error, Result};

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// Hyper-parameters of a normal-inverse-gamma distribution.
///
/// `mu ~ N(gamma, sigma2 / upsilon)`, `sigma2 ~ InvGamma(alpha, beta)`, with
/// `upsilon > 0`, `alpha > 1` and `beta > 0` so every moment used below is
/// finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NigParams {
    gamma: f64,
    upsilon: f64,
    alpha: f64,
    beta: f64,
}

impl NigParams {
    pub fn new(gamma: f64, upsilon: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::domain(format!("gamma must be finite, got {gamma}")));
        }
        if !(upsilon > 0.0 && upsilon.is_finite()) {
            return Err(Error::domain(format!("upsilon must be > 0, got {upsilon}")));
        }
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("alpha must be > 1, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!("beta must be > 0, got {beta}")));
        }
        Ok(Self {
            gamma,
            upsilon,
            alpha,
            beta,
        })
    }

    /// Skips validation. Only the output activation uses this, and it
    /// guarantees the invariants by construction.
    pub(crate) fn new_unchecked(gamma: f64, upsilon: f64, alpha: f64, beta: f64) -> Self {
        debug_assert!(upsilon > 0.0 && alpha > 1.0 && beta > 0.0);
        Self {
            gamma,
            upsilon,
            alpha,
            beta,
        }
    }

    /// `(gamma, upsilon, alpha, beta)`
    pub fn params(&self) -> (f64, f64, f64, f64) {
        (self.gamma, self.upsilon, self.alpha, self.beta)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn upsilon(&self) -> f64 {
        self.upsilon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// The marginal of `y` after integrating out `(mu, sigma2)`:
    /// `St(y | gamma, beta(1+upsilon)/(upsilon alpha), 2 alpha)`.
    pub fn predictive(&self) -> StudentTParams {
        StudentTParams::new(
            2.0 * self.alpha,
            self.gamma,
            self.beta * (1.0 + self.upsilon) / (self.upsilon * self.alpha),
        )
        .expect("valid NIG parameters give a valid Student-t")
    }
}

/// Closed-form moments of the predictive distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    /// `E[y] = E[mu] = gamma`
    pub mean: f64,
    /// `E[sigma2]`
    pub aleatoric: f64,
    /// `Var[mu]`
    pub epistemic: f64,
    /// `Var[y]`, equal to `aleatoric + epistemic`.
    pub total: f64,
}

pub fn uncertainty(omega: &NigParams) -> UncertaintyReport {
    let (gamma, upsilon, alpha, beta) = omega.params();
    let aleatoric = beta / (alpha - 1.0);
    let epistemic = aleatoric / upsilon;
    UncertaintyReport {
        mean: gamma,
        aleatoric,
        epistemic,
        total: aleatoric + epistemic,
    }
}

pub fn predictive_logpdf(y: f64, omega: &NigParams) -> f64 {
    omega.predictive().ln_pdf(y)
}

/// Reciprocal of the total predictive variance.
pub fn phi(omega: &NigParams) -> f64 {
    let (_, upsilon, alpha, beta) = omega.params();
    upsilon * (alpha - 1.0) / (beta * (1.0 + upsilon))
}

/// The labels a set of annotators gave one item for one attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LabelSet {
    values: Vec<f64>,
}

impl LabelSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("label set must contain at least one label"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("label {v} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population variance (`1/M` normaliser).
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|y| (y - m).powi(2)).sum::<f64>() / self.values.len() as f64
    }
}

impl TryFrom<Vec<f64>> for LabelSet {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<LabelSet> for Vec<f64> {
    fn from(l: LabelSet) -> Self {
        l.values
    }
}

/// Mean negative log marginal likelihood over every individual label.
pub fn nll_per_observation(labels: &LabelSet, omega: &NigParams) -> f64 {
    let t = omega.predictive();
    -labels.values().iter().map(|&y| t.ln_pdf(y)).sum::<f64>() / labels.len() as f64
}

/// Negative log marginal likelihood of the averaged label only.
pub fn nll_averaged(labels: &LabelSet, omega: &NigParams) -> f64 {
    -predictive_logpdf(labels.mean(), omega)
}

pub fn reg_mu(labels: &LabelSet, omega: &NigParams) -> f64 {
    phi(omega) * (labels.mean() - omega.gamma).abs()
}

pub fn reg_sigma(labels: &LabelSet, omega: &NigParams) -> f64 {
    phi(omega) * (labels.variance() - uncertainty(omega).aleatoric).abs()
}

/// Which data-fit term to train on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NllKind {
    /// Every annotator label contributes.
    #[default]
    PerObservation,
    /// Only the averaged label contributes.
    Averaged,
}

/// Switches for the loss variants used in ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossConfig {
    pub nll: NllKind,
    pub reg_sigma: bool,
    /// Treat the uncertainty weight as a constant when differentiating.
    pub detach_phi: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            nll: NllKind::PerObservation,
            reg_sigma: true,
            detach_phi: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub nll: f64,
    pub reg_mu: f64,
    pub reg_sigma: f64,
    pub total: f64,
}

/// Partial derivatives with respect to `(gamma, upsilon, alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NigGrad {
    pub d_gamma: f64,
    pub d_upsilon: f64,
    pub d_alpha: f64,
    pub d_beta: f64,
}

impl NigGrad {
    fn add_scaled(&mut self, other: &NigGrad, s: f64) {
        self.d_gamma += s * other.d_gamma;
        self.d_upsilon += s * other.d_upsilon;
        self.d_alpha += s * other.d_alpha;
        self.d_beta += s * other.d_beta;
    }
}

/// `-ln p(y | omega)` and its gradient.
pub fn neg_log_marginal_grad(y: f64, omega: &NigParams) -> (f64, NigGrad) {
    let (gamma, upsilon, alpha, beta) = omega.params();
    let r = y - gamma;
    let big_omega = 2.0 * beta * (1.0 + upsilon);
    let d = upsilon * r * r + big_omega;
    let a_half = alpha + 0.5;
    let log_p = ln_gamma(a_half) - ln_gamma(alpha) + 0.5 * (upsilon.ln() - LN_PI)
        + alpha * big_omega.ln()
        - a_half * d.ln();
    let grad = NigGrad {
        d_gamma: -2.0 * a_half * upsilon * r / d,
        d_upsilon: -(0.5 / upsilon + alpha / (1.0 + upsilon) - a_half * (r * r + 2.0 * beta) / d),
        d_alpha: -(psi(a_half) - psi(alpha) + big_omega.ln() - d.ln()),
        d_beta: -(alpha / beta - 2.0 * a_half * (1.0 + upsilon) / d),
    };
    (-log_p, grad)
}

fn nll_grad(labels: &LabelSet, omega: &NigParams, kind: NllKind) -> (f64, NigGrad) {
    match kind {
        NllKind::Averaged => neg_log_marginal_grad(labels.mean(), omega),
        NllKind::PerObservation => {
            let inv_m = 1.0 / labels.len() as f64;
            let mut value = 0.0;
            let mut grad = NigGrad::default();
            for &y in labels.values() {
                let (v, g) = neg_log_marginal_grad(y, omega);
                value += inv_m * v;
                grad.add_scaled(&g, inv_m);
            }
            (value, grad)
        }
    }
}

fn phi_grad(omega: &NigParams) -> NigGrad {
    let (_, upsilon, alpha, beta) = omega.params();
    let p = phi(omega);
    NigGrad {
        d_gamma: 0.0,
        d_upsilon: (alpha - 1.0) / (beta * (1.0 + upsilon).powi(2)),
        d_alpha: upsilon / (beta * (1.0 + upsilon)),
        d_beta: -p / beta,
    }
}

// Subgradient 0 at the kink.
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Value and gradient of `attribute_loss_with`.
pub fn attribute_loss_grad(
    labels: &LabelSet,
    omega: &NigParams,
    lambda: f64,
    cfg: &LossConfig,
) -> (LossBreakdown, NigGrad) {
    let (_, _, alpha, beta) = omega.params();
    let (nll, mut grad) = nll_grad(labels, omega, cfg.nll);

    let p = phi(omega);
    let dp = if cfg.detach_phi {
        NigGrad::default()
    } else {
        phi_grad(omega)
    };

    let err_mu = labels.mean() - omega.gamma;
    let reg_mu = p * err_mu.abs();
    let mut reg = NigGrad::default();
    reg.add_scaled(&dp, err_mu.abs());
    reg.d_gamma -= p * sign(err_mu);

    let mut reg_sigma = 0.0;
    if cfg.reg_sigma {
        let aleatoric = beta / (alpha - 1.0);
        let err_sigma = labels.variance() - aleatoric;
        reg_sigma = p * err_sigma.abs();
        reg.add_scaled(&dp, err_sigma.abs());
        // d aleatoric / d alpha = -beta/(alpha-1)^2, d aleatoric / d beta = 1/(alpha-1)
        let s = -p * sign(err_sigma);
        reg.d_alpha += s * (-beta / (alpha - 1.0).powi(2));
        reg.d_beta += s / (alpha - 1.0);
    }

    grad.add_scaled(&reg, lambda);
    let breakdown = LossBreakdown {
        nll,
        reg_mu,
        reg_sigma,
        total: nll + lambda * (reg_mu + reg_sigma),
    };
    (breakdown, grad)
}

/// Per-attribute loss under an explicit variant configuration.
pub fn attribute_loss_with(
    labels: &LabelSet,
    omega: &NigParams,
    lambda: f64,
    cfg: &LossConfig,
) -> LossBreakdown {
    let nll = match cfg.nll {
        NllKind::PerObservation => nll_per_observation(labels, omega),
        NllKind::Averaged => nll_averaged(labels, omega),
    };
    let mu = reg_mu(labels, omega);
    let sigma = if cfg.reg_sigma {
        reg_sigma(labels, omega)
    } else {
        0.0
    };
    LossBreakdown {
        nll,
        reg_mu: mu,
        reg_sigma: sigma,
        total: nll + lambda * (mu + sigma),
    }
}

/// Per-observation NLL plus `lambda` times both calibration regularisers.
pub fn attribute_loss(labels: &LabelSet, omega: &NigParams, lambda: f64) -> LossBreakdown {
    attribute_loss_with(labels, omega, lambda, &LossConfig::default())
}

pub(crate) fn check_weights(epsilons: &[f64], lambdas: &[f64], n: usize) -> Result<()> {
    if epsilons.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: epsilons.len(),
            context: "attribute weights",
        });
    }
    if lambdas.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: lambdas.len(),
            context: "regulariser coefficients",
        });
    }
    let sum: f64 = epsilons.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || epsilons.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::config(format!(
            "attribute weights must be nonnegative and sum to 1, got sum {sum}"
        )));
    }
    if lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::config("regulariser coefficients must be finite and >= 0"));
    }
    Ok(())
}

/// Weighted sum of the per-attribute losses for one item.
pub fn multi_attribute_loss(
    item_labels: &[LabelSet],
    omegas: &[NigParams],
    epsilons: &[f64],
    lambdas: &[f64],
) -> Result<f64> {
    multi_attribute_loss_with(item_labels, omegas, epsilons, lambdas, &LossConfig::default())
}

pub fn multi_attribute_loss_with(
    item_labels: &[LabelSet],
    omegas: &[NigParams],
    epsilons: &[f64],
    lambdas: &[f64],
    cfg: &LossConfig,
) -> Result<f64> {
    let n = item_labels.len();
    if omegas.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: omegas.len(),
            context: "predicted NIG parameters",
        });
    }
    check_weights(epsilons, lambdas, n)?;
    Ok(item_labels
        .iter()
        .zip(omegas)
        .zip(epsilons.iter().zip(lambdas))
        .map(|((labels, omega), (eps, lambda))| {
            eps * attribute_loss_with(labels, omega, *lambda, cfg).total
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NLL_REF: f64 = 0.980_829_253_0;

    fn unit() -> NigParams {
        NigParams::new(0.0, 1.0, 2.0, 1.0).unwrap()
    }

    fn labels(v: &[f64]) -> LabelSet {
        LabelSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(NigParams::new(0.0, 0.0, 2.0, 1.0).is_err());
        assert!(NigParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(NigParams::new(0.0, 1.0, 2.0, 0.0).is_err());
        assert!(NigParams::new(f64::INFINITY, 1.0, 2.0, 1.0).is_err());
        assert!(LabelSet::new(vec![]).is_err());
        assert!(LabelSet::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn uncertainty_examples() {
        let u = uncertainty(&unit());
        assert_eq!((u.mean, u.aleatoric, u.epistemic, u.total), (0.0, 1.0, 1.0, 2.0));
        let u = uncertainty(&NigParams::new(3.0, 10.0, 2.0, 1.0).unwrap());
        assert_eq!(u.mean, 3.0);
        assert!((u.aleatoric - 1.0).abs() < 1e-15);
        assert!((u.epistemic - 0.1).abs() < 1e-15);
        assert!((u.total - 1.1).abs() < 1e-15);
    }

    #[test]
    fn phi_examples() {
        assert!((phi(&unit()) - 0.5).abs() < 1e-15);
        let p = phi(&NigParams::new(0.0, 10.0, 2.0, 1.0).unwrap());
        assert!((p - 10.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn predictive_examples() {
        assert!((predictive_logpdf(0.0, &unit()) + NLL_REF).abs() < 1e-10);
        let o = NigParams::new(0.8, 0.4, 1.6, 2.0).unwrap();
        let at_mode = predictive_logpdf(0.8, &o);
        for y in [-3.0, 0.0, 0.79, 0.81, 5.0] {
            assert!(predictive_logpdf(y, &o) < at_mode);
        }
    }

    #[test]
    fn nll_examples() {
        let o = unit();
        assert!((nll_per_observation(&labels(&[0.0]), &o) - NLL_REF).abs() < 1e-10);
        assert!((nll_per_observation(&labels(&[0.0, 0.0, 0.0]), &o) - NLL_REF).abs() < 1e-10);
        assert_eq!(
            nll_per_observation(&labels(&[-1.0, 1.0]), &o),
            nll_per_observation(&labels(&[1.0, -1.0]), &o)
        );
        assert!((nll_averaged(&labels(&[-1.0, 1.0]), &o) - NLL_REF).abs() < 1e-10);
        assert!(nll_averaged(&labels(&[-1.0, 1.0]), &o) <= nll_per_observation(&labels(&[-1.0, 1.0]), &o));
        let o2 = NigParams::new(0.3, 2.0, 1.5, 0.2).unwrap();
        assert_eq!(nll_averaged(&labels(&[0.9]), &o2), nll_per_observation(&labels(&[0.9]), &o2));
    }

    #[test]
    fn regulariser_examples() {
        let o = unit();
        assert_eq!(reg_mu(&labels(&[0.0]), &o), 0.0);
        assert!((reg_mu(&labels(&[1.0]), &o) - 0.5).abs() < 1e-15);
        let doubled = NigParams::new(0.0, 1.0, 2.0, 2.0).unwrap();
        assert!((reg_mu(&labels(&[1.0]), &doubled) - 0.25).abs() < 1e-15);

        assert_eq!(reg_sigma(&labels(&[-1.0, 1.0]), &o), 0.0);
        assert!((reg_sigma(&labels(&[0.0, 0.0]), &o) - 0.5).abs() < 1e-15);
        // Single annotator: sample variance is zero, penalty is phi * E[sigma2].
        let o3 = NigParams::new(0.0, 3.0, 2.5, 0.6).unwrap();
        let want = phi(&o3) * uncertainty(&o3).aleatoric;
        assert!((reg_sigma(&labels(&[4.0]), &o3) - want).abs() < 1e-15);
    }

    #[test]
    fn attribute_loss_examples() {
        let o = unit();
        let l = labels(&[0.0]);
        let b = attribute_loss(&l, &o, 0.0);
        assert_eq!(b.total, b.nll);
        let b = attribute_loss(&l, &o, 0.1);
        assert!((b.total - 1.030_829_253_0).abs() < 1e-10);
        assert_eq!(b.reg_mu, 0.0);
        assert!((b.reg_sigma - 0.5).abs() < 1e-15);
    }

    #[test]
    fn multi_attribute_examples() {
        let l = labels(&[0.2, -0.4, 1.0]);
        let o = NigParams::new(0.1, 0.7, 2.2, 0.9).unwrap();
        let single = attribute_loss(&l, &o, 0.1).total;
        let one = multi_attribute_loss(std::slice::from_ref(&l), &[o], &[1.0], &[0.1]).unwrap();
        assert!((one - single).abs() < 1e-15);

        let third = 1.0 / 3.0;
        let three = multi_attribute_loss(
            &[l.clone(), l.clone(), l.clone()],
            &[o, o, o],
            &[third, third, third],
            &[0.1, 0.1, 0.1],
        )
        .unwrap();
        assert!((three - single).abs() < 1e-14);

        assert!(multi_attribute_loss(std::slice::from_ref(&l), &[o, o], &[1.0], &[0.1]).is_err());
        assert!(multi_attribute_loss(&[l.clone(), l], &[o, o], &[0.6, 0.6], &[0.1, 0.1]).is_err());
    }

    fn fd_check(f: impl Fn(&NigParams) -> f64, o: &NigParams, g: &NigGrad) {
        let (ga, up, al, be) = o.params();
        let h = 1e-6;
        let num = |d: [f64; 4]| {
            let p = NigParams::new(ga + d[0] * h, up + d[1] * h, al + d[2] * h, be + d[3] * h).unwrap();
            let m = NigParams::new(ga - d[0] * h, up - d[1] * h, al - d[2] * h, be - d[3] * h).unwrap();
            (f(&p) - f(&m)) / (2.0 * h)
        };
        let pairs = [
            (g.d_gamma, num([1.0, 0.0, 0.0, 0.0]), "gamma"),
            (g.d_upsilon, num([0.0, 1.0, 0.0, 0.0]), "upsilon"),
            (g.d_alpha, num([0.0, 0.0, 1.0, 0.0]), "alpha"),
            (g.d_beta, num([0.0, 0.0, 0.0, 1.0]), "beta"),
        ];
        for (analytic, numeric, name) in pairs {
            let scale = analytic.abs().max(numeric.abs()).max(1e-3);
            assert!(
                (analytic - numeric).abs() / scale < 1e-6,
                "d/d{name}: analytic {analytic} vs numeric {numeric}"
            );
        }
    }

    #[test]
    fn student_t_nll_gradient_term_by_term() {
        for &(y, o) in &[
            (0.3, NigParams::new(0.0, 1.0, 2.0, 1.0).unwrap()),
            (-2.0, NigParams::new(0.5, 0.2, 1.3, 3.0).unwrap()),
            (4.0, NigParams::new(-1.0, 7.0, 6.0, 0.1).unwrap()),
        ] {
            let (v, g) = neg_log_marginal_grad(y, &o);
            assert!((v + predictive_logpdf(y, &o)).abs() < 1e-12);
            fd_check(|p| -predictive_logpdf(y, p), &o, &g);
        }
    }

    #[test]
    fn attribute_loss_gradient_all_variants() {
        let l = labels(&[0.4, 1.5, -0.2, 0.9]);
        let o = NigParams::new(0.1, 0.8, 1.7, 0.6).unwrap();
        for nll in [NllKind::PerObservation, NllKind::Averaged] {
            for reg_sigma in [true, false] {
                let cfg = LossConfig {
                    nll,
                    reg_sigma,
                    detach_phi: false,
                };
                let (b, g) = attribute_loss_grad(&l, &o, 0.3, &cfg);
                assert!((b.total - attribute_loss_with(&l, &o, 0.3, &cfg).total).abs() < 1e-12);
                fd_check(|p| attribute_loss_with(&l, p, 0.3, &cfg).total, &o, &g);
            }
        }
    }

    #[test]
    fn detached_phi_drops_weight_derivative() {
        let l = labels(&[0.4, 1.5]);
        let o = NigParams::new(0.1, 0.8, 1.7, 0.6).unwrap();
        let cfg = LossConfig {
            detach_phi: true,
            ..LossConfig::default()
        };
        let (_, g) = attribute_loss_grad(&l, &o, 1.0, &cfg);
        let (_, g_nll) = attribute_loss_grad(&l, &o, 0.0, &cfg);
        // Only the regulariser's explicit dependence on upsilon is through phi.
        assert_eq!(g.d_upsilon, g_nll.d_upsilon);
    }

    fn arb_nig() -> impl Strategy<Value = NigParams> {
        (-5.0..5.0f64, 1e-3..50.0f64, 1.0001..30.0f64, 1e-3..20.0f64)
            .prop_map(|(g, u, a, b)| NigParams::new(g, u, a, b).unwrap())
    }

    proptest! {
        #[test]
        fn total_is_sum_of_parts(o in arb_nig()) {
            let u = uncertainty(&o);
            prop_assert!((u.total - (u.aleatoric + u.epistemic)).abs() <= 1e-12 * u.total.max(1.0));
            prop_assert!(u.aleatoric > 0.0 && u.epistemic > 0.0);
            prop_assert!((phi(&o) * u.total - 1.0).abs() < 1e-14);
        }

        #[test]
        fn nll_permutation_invariant(o in arb_nig(), mut ys in proptest::collection::vec(-5.0..5.0f64, 1..8)) {
            let a = nll_per_observation(&labels(&ys), &o);
            ys.reverse();
            ys.rotate_left(1);
            let b = nll_per_observation(&labels(&ys), &o);
            prop_assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn regularisers_nonnegative_and_loss_monotone_in_lambda(
            o in arb_nig(),
            ys in proptest::collection::vec(-5.0..5.0f64, 1..8),
            l1 in 0.0..1.0f64,
            dl in 0.0..1.0f64,
        ) {
            let l = labels(&ys);
            prop_assert!(reg_mu(&l, &o) >= 0.0);
            prop_assert!(reg_sigma(&l, &o) >= 0.0);
            prop_assert!(attribute_loss(&l, &o, l1 + dl).total >= attribute_loss(&l, &o, l1).total);
        }
    }
}
