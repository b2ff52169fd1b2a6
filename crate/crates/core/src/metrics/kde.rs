use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::evidential::LabelSet;
use crate::{Error, Result};

/// Smallest bandwidth a rule may produce; keeps degenerate sample sets
/// (all samples equal) scorable.
pub const BANDWIDTH_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`, floored at [`BANDWIDTH_FLOOR`].
    Silverman,
    Fixed(f64),
}

/// One-dimensional Gaussian kernel density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKde {
    samples: Vec<f64>,
    bandwidth: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => 0.0,
    };
    (0.9 * spread * n.powf(-0.2)).max(BANDWIDTH_FLOOR)
}

impl GaussianKde {
    pub fn new(samples: Vec<f64>, bandwidth: Bandwidth) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::domain(format!("KDE needs at least 2 samples, got {}", samples.len())));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::domain("KDE samples must be finite"));
        }
        let h = match bandwidth {
            Bandwidth::Silverman => silverman_bandwidth(&samples),
            Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
            Bandwidth::Fixed(h) => return Err(Error::domain(format!("bandwidth must be positive, got {h}"))),
        };
        Ok(Self { samples, bandwidth: h })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Log density, evaluated with log-sum-exp so far tails stay finite.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let exps: Vec<f64> = self.samples.iter().map(|s| -0.5 * ((x - s) / h).powi(2)).collect();
        let top = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = exps.iter().map(|e| (e - top).exp()).sum();
        top + sum.ln() - (self.samples.len() as f64).ln() - h.ln() - 0.5 * (2.0 * PI).ln()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }
}

/// KDE-based `(NLL(avg), NLL(all))` for sample-based predictions, averaged
/// over items.
pub fn nll_kde(samples: &[Vec<f64>], labels: &[&LabelSet], bandwidth: Bandwidth) -> Result<(f64, f64)> {
    if samples.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: samples.len(),
            context: "sample sets vs items",
        });
    }
    if labels.is_empty() {
        return Err(Error::Empty("nll_kde input"));
    }
    let (mut avg, mut all) = (0.0, 0.0);
    for (s, l) in samples.iter().zip(labels) {
        let kde = GaussianKde::new(s.clone(), bandwidth)?;
        avg -= kde.ln_pdf(l.mean());
        all -= l.values().iter().map(|&y| kde.ln_pdf(y)).sum::<f64>() / l.len() as f64;
    }
    let n = labels.len() as f64;
    Ok((avg / n, all / n))
}
