use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::rmse;
use crate::evidential::{uncertainty, LabelSet, NigParams};
use crate::{Error, Result};

/// One item as the reject option sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub id: String,
    /// Predicted mean.
    pub prediction: f64,
    /// Reference value, the averaged label.
    pub reference: f64,
    /// Predicted total variance; larger is rejected first.
    pub uncertainty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectPoint {
    pub fraction: f64,
    pub coverage: f64,
    pub retained: usize,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RejectCurve {
    pub points: Vec<RejectPoint>,
}

impl RejectCurve {
    /// `fraction, coverage, retained, rmse` rows with a header.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("fraction\tcoverage\tretained\trmse\n");
        for p in &self.points {
            writeln!(out, "{}\t{}\t{}\t{}", p.fraction, p.coverage, p.retained, p.rmse).unwrap();
        }
        out
    }
}

/// Rejects the most uncertain share of items for each fraction and reports
/// RMSE on the rest.
///
/// Items are ranked by uncertainty, largest first; equal uncertainties are
/// rejected in ascending id order. At fraction `f` the first
/// `floor(f * n)` ranked items are dropped, so `ceil((1 - f) * n)` remain.
/// Fractions must be strictly increasing within `[0, 1)`.
pub fn reject_curve_scored(items: &[ScoredPrediction], fractions: &[f64]) -> Result<RejectCurve> {
    if items.is_empty() {
        return Err(Error::Empty("reject curve input"));
    }
    if fractions.iter().any(|f| !(0.0..1.0).contains(f)) {
        return Err(Error::config("reject fractions must lie in [0, 1)"));
    }
    if fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("reject fractions must be strictly increasing"));
    }
    let mut ranked: Vec<&ScoredPrediction> = items.iter().collect();
    ranked.sort_by(|a, b| b.uncertainty.total_cmp(&a.uncertainty).then_with(|| a.id.cmp(&b.id)));

    let n = ranked.len();
    let mut points = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        // Guard against products like 0.7 * 10 = 7.000000000000001.
        let rejected = ((fraction * n as f64) + 1e-9).floor() as usize;
        let kept = &ranked[rejected.min(n - 1)..];
        let hyp: Vec<f64> = kept.iter().map(|s| s.prediction).collect();
        let reference: Vec<f64> = kept.iter().map(|s| s.reference).collect();
        points.push(RejectPoint {
            fraction,
            coverage: 1.0 - fraction,
            retained: kept.len(),
            rmse: rmse(&hyp, &reference)?,
        });
    }
    Ok(RejectCurve { points })
}

/// Reject curve for evidential predictions, ranked by total variance and
/// scored as RMSE of the predicted mean against the averaged label.
pub fn reject_curve(
    ids: &[&str],
    predictions: &[NigParams],
    labels: &[&LabelSet],
    fractions: &[f64],
) -> Result<RejectCurve> {
    if ids.len() != predictions.len() || labels.len() != predictions.len() {
        return Err(Error::Dimension {
            expected: predictions.len(),
            got: if ids.len() != predictions.len() { ids.len() } else { labels.len() },
            context: "reject curve inputs",
        });
    }
    let scored: Vec<ScoredPrediction> = ids
        .iter()
        .zip(predictions)
        .zip(labels)
        .map(|((id, o), l)| {
            let u = uncertainty(o);
            ScoredPrediction {
                id: id.to_string(),
                prediction: u.mean,
                reference: l.mean(),
                uncertainty: u.total,
            }
        })
        .collect();
    reject_curve_scored(&scored, fractions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> Vec<ScoredPrediction> {
        // Errors 1..=10, uncertainty equal to the absolute error.
        (0..10)
            .map(|i| ScoredPrediction {
                id: format!("i{i}"),
                prediction: (i + 1) as f64 * if i % 2 == 0 { 1.0 } else { -1.0 },
                reference: 0.0,
                uncertainty: (i + 1) as f64,
            })
            .collect()
    }

    fn brute_force(items: &[ScoredPrediction], keep: usize) -> f64 {
        let mut errs: Vec<f64> = items.iter().map(|s| (s.prediction - s.reference).abs()).collect();
        errs.sort_by(f64::total_cmp);
        (errs[..keep].iter().map(|e| e * e).sum::<f64>() / keep as f64).sqrt()
    }

    #[test]
    fn zero_fraction_is_corpus_rmse() {
        let items = fixture();
        let c = reject_curve_scored(&items, &[0.0]).unwrap();
        assert_eq!(c.points.len(), 1);
        assert_eq!(c.points[0].retained, 10);
        assert!((c.points[0].rmse - brute_force(&items, 10)).abs() < 1e-12);
    }

    #[test]
    fn perfectly_ranked_fixture_is_monotone() {
        let items = fixture();
        let fractions: Vec<f64> = (0..10).map(|k| k as f64 / 10.0).collect();
        let c = reject_curve_scored(&items, &fractions).unwrap();
        for (k, p) in c.points.iter().enumerate() {
            assert_eq!(p.retained, 10 - k);
            assert!((p.rmse - brute_force(&items, 10 - k)).abs() < 1e-12);
            assert!((p.coverage - (1.0 - p.fraction)).abs() < 1e-15);
        }
        assert!(c.points.windows(2).all(|w| w[1].rmse <= w[0].rmse));
    }

    #[test]
    fn retained_count_is_ceiling() {
        let items = fixture();
        for f in [0.05, 0.15, 0.33, 0.7, 0.95] {
            let c = reject_curve_scored(&items, &[f]).unwrap();
            assert_eq!(c.points[0].retained, ((1.0 - f) * 10.0 - 1e-9).ceil() as usize, "f={f}");
        }
    }

    #[test]
    fn ties_reject_lower_ids_first() {
        let items: Vec<ScoredPrediction> = ["c", "a", "b"]
            .iter()
            .enumerate()
            .map(|(i, id)| ScoredPrediction {
                id: id.to_string(),
                prediction: i as f64,
                reference: 0.0,
                uncertainty: 1.0,
            })
            .collect();
        // Rejecting one of three drops "a" (prediction 1.0).
        let c = reject_curve_scored(&items, &[0.34]).unwrap();
        assert!((c.points[0].rmse - (4.0f64 / 2.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bad_inputs() {
        assert!(reject_curve_scored(&[], &[0.0]).is_err());
        assert!(reject_curve_scored(&fixture(), &[1.0]).is_err());
        assert!(reject_curve_scored(&fixture(), &[0.2, 0.1]).is_err());
    }

    #[test]
    fn evidential_wrapper_ranks_by_total_variance() {
        let preds = [
            NigParams::new(1.0, 1.0, 2.0, 5.0).unwrap(),
            NigParams::new(0.1, 1.0, 2.0, 0.5).unwrap(),
        ];
        let l0 = LabelSet::new(vec![0.0]).unwrap();
        let l1 = LabelSet::new(vec![0.0, 0.0]).unwrap();
        let c = reject_curve(&["x", "y"], &preds, &[&l0, &l1], &[0.0, 0.5]).unwrap();
        assert!((c.points[0].rmse - (1.01f64 / 2.0).sqrt()).abs() < 1e-12);
        assert!((c.points[1].rmse - 0.1).abs() < 1e-12);
    }
}
