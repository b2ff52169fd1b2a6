//! Evaluation metrics: CCC and RMSE on the mean prediction, NLL of the
//! averaged and of every individual label, KDE scoring for sample-based
//! models, and reject-option curves.

mod kde;
mod reject;

pub use kde::{nll_kde, Bandwidth, GaussianKde, BANDWIDTH_FLOOR};
pub use reject::{reject_curve, reject_curve_scored, RejectCurve, RejectPoint, ScoredPrediction};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::evidential::{nll_per_observation, predictive_logpdf, LabelSet, NigParams};
use crate::{Error, Result};

fn check_lengths(a: usize, b: usize, context: &'static str) -> Result<()> {
    if a != b {
        return Err(Error::Dimension {
            expected: a,
            got: b,
            context,
        });
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Concordance correlation coefficient with population (1/T) moments:
/// `2 cov / (var_hyp + var_ref + (mean_hyp - mean_ref)^2)`.
///
/// Two identical constant sequences give 1; otherwise a zero covariance
/// gives 0.
pub fn ccc(hyp: &[f64], reference: &[f64]) -> Result<f64> {
    check_lengths(hyp.len(), reference.len(), "ccc sequence length")?;
    if hyp.len() < 2 {
        return Err(Error::domain("ccc needs at least two points"));
    }
    let (mh, mr) = (mean(hyp), mean(reference));
    let n = hyp.len() as f64;
    let (mut cov, mut vh, mut vr) = (0.0, 0.0, 0.0);
    for (h, r) in hyp.iter().zip(reference) {
        cov += (h - mh) * (r - mr);
        vh += (h - mh).powi(2);
        vr += (r - mr).powi(2);
    }
    let denom = (vh + vr) / n + (mh - mr).powi(2);
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((2.0 * cov / n / denom).clamp(-1.0, 1.0))
}

pub fn rmse(hyp: &[f64], reference: &[f64]) -> Result<f64> {
    check_lengths(hyp.len(), reference.len(), "rmse sequence length")?;
    if hyp.is_empty() {
        return Err(Error::Empty("rmse input"));
    }
    Ok(mean(&hyp.iter().zip(reference).map(|(h, r)| (h - r).powi(2)).collect::<Vec<_>>()).sqrt())
}

/// Pearson correlation; 0 when either sequence is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a.len(), b.len(), "pearson sequence length")?;
    if a.len() < 2 {
        return Err(Error::domain("pearson needs at least two points"));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (va * vb).sqrt())
}

/// Mean over items of `-ln q(mean label)`.
pub fn nll_avg(predictions: &[NigParams], labels: &[&LabelSet]) -> Result<f64> {
    check_lengths(predictions.len(), labels.len(), "predictions vs items")?;
    if labels.is_empty() {
        return Err(Error::Empty("nll_avg input"));
    }
    let total: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(o, l)| -predictive_logpdf(l.mean(), o))
        .sum();
    Ok(total / labels.len() as f64)
}

/// Mean over items of the per-item mean of `-ln q(y_m)`; every item counts
/// once regardless of how many labels it has.
pub fn nll_all(predictions: &[NigParams], labels: &[&LabelSet]) -> Result<f64> {
    check_lengths(predictions.len(), labels.len(), "predictions vs items")?;
    if labels.is_empty() {
        return Err(Error::Empty("nll_all input"));
    }
    let total: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(o, l)| nll_per_observation(l, o))
        .sum();
    Ok(total / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSummary {
    pub attribute: String,
    pub ccc: f64,
    pub rmse: f64,
    pub nll_avg: f64,
    pub nll_all: f64,
}

/// Per-attribute CCC / RMSE / NLL(avg) / NLL(all).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalSummary {
    pub attributes: Vec<AttributeSummary>,
}

impl EvalSummary {
    pub fn get(&self, attribute: &str) -> Option<&AttributeSummary> {
        self.attributes.iter().find(|a| a.attribute == attribute)
    }

    /// Unweighted means across attributes, as an `AttributeSummary` named
    /// `"mean"`.
    pub fn overall(&self) -> AttributeSummary {
        let n = self.attributes.len().max(1) as f64;
        let avg = |f: fn(&AttributeSummary) -> f64| self.attributes.iter().map(f).sum::<f64>() / n;
        AttributeSummary {
            attribute: "mean".into(),
            ccc: avg(|a| a.ccc),
            rmse: avg(|a| a.rmse),
            nll_avg: avg(|a| a.nll_avg),
            nll_all: avg(|a| a.nll_all),
        }
    }

    /// Tab-separated table with a header row and one row per attribute.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("attribute\tccc\trmse\tnll_avg\tnll_all\n");
        for a in &self.attributes {
            writeln!(out, "{}\t{}\t{}\t{}\t{}", a.attribute, a.ccc, a.rmse, a.nll_avg, a.nll_all).unwrap();
        }
        out
    }
}

/// Summary for an evidential model: `predictions[item][attribute]`.
pub fn evaluate_evidential(
    attributes: &[String],
    predictions: &[Vec<NigParams>],
    items: &[Vec<&LabelSet>],
) -> Result<EvalSummary> {
    check_lengths(items.len(), predictions.len(), "predictions vs items")?;
    let mut summary = EvalSummary::default();
    for (n, name) in attributes.iter().enumerate() {
        let omegas: Vec<NigParams> = predictions.iter().map(|p| p[n]).collect();
        let labels: Vec<&LabelSet> = items.iter().map(|l| l[n]).collect();
        let means: Vec<f64> = omegas.iter().map(NigParams::gamma).collect();
        let refs: Vec<f64> = labels.iter().map(|l| l.mean()).collect();
        summary.attributes.push(AttributeSummary {
            attribute: name.clone(),
            ccc: ccc(&means, &refs)?,
            rmse: rmse(&means, &refs)?,
            nll_avg: nll_avg(&omegas, &labels)?,
            nll_all: nll_all(&omegas, &labels)?,
        });
    }
    Ok(summary)
}

/// Summary for a sample-based model: `samples[item][attribute]` holds that
/// item's prediction samples. The point prediction is the sample mean and
/// densities come from a KDE over the samples.
pub fn evaluate_samples(
    attributes: &[String],
    samples: &[Vec<Vec<f64>>],
    items: &[Vec<&LabelSet>],
    bandwidth: Bandwidth,
) -> Result<EvalSummary> {
    check_lengths(items.len(), samples.len(), "samples vs items")?;
    let mut summary = EvalSummary::default();
    for (n, name) in attributes.iter().enumerate() {
        let per_item: Vec<Vec<f64>> = samples.iter().map(|s| s[n].clone()).collect();
        let labels: Vec<&LabelSet> = items.iter().map(|l| l[n]).collect();
        let means: Vec<f64> = per_item.iter().map(|s| mean(s)).collect();
        let refs: Vec<f64> = labels.iter().map(|l| l.mean()).collect();
        let (avg, all) = nll_kde(&per_item, &labels, bandwidth)?;
        summary.attributes.push(AttributeSummary {
            attribute: name.clone(),
            ccc: ccc(&means, &refs)?,
            rmse: rmse(&means, &refs)?,
            nll_avg: avg,
            nll_all: all,
        });
    }
    Ok(summary)
}
