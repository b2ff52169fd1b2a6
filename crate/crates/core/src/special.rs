//! Scalar special functions and log-densities.
//!
//! Everything here works in `f64` and is a pure function of its inputs.

use std::f64::consts::PI;

use crate::evidential::NigParams;
use crate::quadrature::{integrate_real_line, QuadOptions};
use crate::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const LN_PI: f64 = 1.144_729_885_849_400_2;

// Lanczos approximation, g = 7, n = 9 (Godfrey's coefficients).
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma(x))
}

/// Unchecked `ln Γ(x)`; callers guarantee `x > 0`.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx).
        return LN_PI - (PI * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + acc.ln()
}

/// The digamma function `ψ(x) = d/dx ln Γ(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("digamma requires x > 0, got {x}")));
    }
    Ok(psi(x))
}

pub(crate) fn psi(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    // Asymptotic series in 1/x^2 with Bernoulli coefficients.
    let tail = r
        * (1.0 / 12.0
            - r * (1.0 / 120.0 - r * (1.0 / 252.0 - r * (1.0 / 240.0 - r * (1.0 / 132.0)))));
    shift + x.ln() - 0.5 / x - tail
}

/// `ln(1 + e^x)`, stable for large `|x|`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid; the derivative of [`softplus`].
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Student-t in (location, squared scale, degrees of freedom) form.
///
/// `scale` multiplies the squared deviation, so the density is
/// `Γ((ν+1)/2) / (Γ(ν/2) √(πνs)) · (1 + (t-r)²/(νs))^(-(ν+1)/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentTParams {
    dof: f64,
    loc: f64,
    scale: f64,
}

impl StudentTParams {
    pub fn new(dof: f64, loc: f64, scale: f64) -> Result<Self> {
        if !(dof > 0.0 && dof.is_finite()) {
            return Err(Error::domain(format!("student-t dof must be positive, got {dof}")));
        }
        if !loc.is_finite() {
            return Err(Error::domain(format!("student-t loc must be finite, got {loc}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::domain(format!("student-t scale must be positive, got {scale}")));
        }
        Ok(Self { dof, loc, scale })
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn loc(&self) -> f64 {
        self.loc
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn ln_pdf(&self, t: f64) -> f64 {
        let nu = self.dof;
        let z = (t - self.loc).powi(2) / (nu * self.scale);
        ln_gamma(0.5 * (nu + 1.0))
            - ln_gamma(0.5 * nu)
            - 0.5 * (LN_PI + (nu * self.scale).ln())
            - 0.5 * (nu + 1.0) * z.ln_1p()
    }
}

pub fn student_t_logpdf(t: f64, p: &StudentTParams) -> f64 {
    p.ln_pdf(t)
}

pub fn gaussian_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    -LN_SQRT_2PI - 0.5 * var.ln() - 0.5 * (x - mean).powi(2) / var
}

/// Inverse-gamma log-density with shape `a` and rate `b`.
pub fn invgamma_logpdf(x: f64, a: f64, b: f64) -> f64 {
    a * b.ln() - ln_gamma(a) - (a + 1.0) * x.ln() - b / x
}

/// Log-density of the NIG prior at `(mu, sigma2)`.
pub fn nig_logpdf(mu: f64, sigma2: f64, omega: &NigParams) -> Result<f64> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) || !mu.is_finite() {
        return Err(Error::domain(format!(
            "NIG density needs finite mu and sigma2 > 0, got ({mu}, {sigma2})"
        )));
    }
    let (gamma, upsilon, alpha, beta) = omega.params();
    Ok(alpha * beta.ln() + 0.5 * upsilon.ln()
        - ln_gamma(alpha)
        - LN_SQRT_2PI
        - 0.5 * sigma2.ln()
        - (alpha + 1.0) * sigma2.ln()
        - (2.0 * beta + upsilon * (gamma - mu).powi(2)) / (2.0 * sigma2))
}

/// Log marginal likelihood `ln ∫∫ N(y|μ,σ²) NIG(μ,σ²|Ω) dμ dσ²` by nested
/// adaptive quadrature.
///
/// Slow; this is the reference the closed-form Student-t is checked against.
/// The outer integral runs over `u = ln σ²`.
pub fn marginal_oracle(y: f64, omega: &NigParams) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::domain("marginal_oracle needs finite y"));
    }
    let (gamma, upsilon, alpha, beta) = omega.params();
    let inner_opts = QuadOptions {
        rel_tol: 1e-12,
        abs_tol: 1e-280,
        ..QuadOptions::default()
    };
    let outer_opts = QuadOptions {
        rel_tol: 1e-8,
        abs_tol: 0.0,
        ..QuadOptions::default()
    };

    let mut inner_failure = None;
    let mu_center = (y + upsilon * gamma) / (1.0 + upsilon);
    let outer = |u: f64| -> f64 {
        let sigma2 = u.exp();
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return 0.0;
        }
        let mu_scale = (sigma2 / (1.0 + upsilon)).sqrt();
        let joint = |mu: f64| {
            let prior = match nig_logpdf(mu, sigma2, omega) {
                Ok(v) => v,
                Err(_) => return 0.0,
            };
            (gaussian_logpdf(y, mu, sigma2) + prior).exp()
        };
        match integrate_real_line(joint, mu_center, mu_scale, inner_opts) {
            Ok(r) => r.value * sigma2,
            Err(e) => {
                inner_failure.get_or_insert(e);
                0.0
            }
        }
    };

    let post_alpha = alpha + 0.5;
    let post_beta = beta + upsilon * (y - gamma).powi(2) / (2.0 * (1.0 + upsilon));
    let u_center = (post_beta / post_alpha).ln();
    let u_scale = 1.0 / post_alpha.sqrt();
    let result = integrate_real_line(outer, u_center, u_scale, outer_opts);
    if let Some(e) = inner_failure {
        return Err(e);
    }
    let r = result?;
    if !(r.value > 0.0) {
        return Err(Error::Quadrature {
            estimate: r.value,
            error: r.error,
        });
    }
    Ok(r.value.ln())
}
