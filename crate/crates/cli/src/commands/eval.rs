use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::anyhow;
use serde::{Deserialize, Serialize};

use evireg::baselines::{ensemble_predict, mc_dropout_predict};
use evireg::data;
use evireg::evidential::uncertainty;
use evireg::metrics::Bandwidth;
use evireg::metrics::{evaluate_evidential, evaluate_samples, pearson, rmse};
use evireg::net::{Checkpoint, ModelKind};
use evireg::{EvalSummary, LabelSet, SyntheticTruth};

use super::{ensure_dir, fmt_opt, loading, write_text};
use crate::settings::{write_echo, EvalSettings};
use crate::{usage, CliError, CliResult};

/// One `(item, attribute)` row of `predictions.tsv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub attribute: String,
    pub n_labels: usize,
    pub ybar: f64,
    /// Population variance of the item's labels.
    pub label_var: f64,
    pub mean: f64,
    /// Only evidential models split the variance.
    pub aleatoric: Option<f64>,
    pub epistemic: Option<f64>,
    /// Predicted total variance; the sample variance for sample-based models.
    pub total: f64,
    pub true_mean: Option<f64>,
    pub true_var: Option<f64>,
}

/// Agreement between predictions and the synthetic ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub attribute: String,
    /// RMSE of the predicted mean against the true mean.
    pub mean_rmse: f64,
    pub mean_pearson: f64,
    /// Pearson correlation of the predicted noise variance (aleatoric for
    /// evidential models, sample variance otherwise) with the true variance.
    pub var_pearson: f64,
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub summary: EvalSummary,
    pub rows: Vec<PredictionRow>,
    pub calibration: Option<Vec<CalibrationRow>>,
    pub summary_path: PathBuf,
    pub predictions_path: PathBuf,
    pub calibration_path: Option<PathBuf>,
    pub echo: PathBuf,
}

fn population_variance(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
}

fn predictions_tsv(rows: &[PredictionRow], with_truth: bool) -> String {
    let mut out = String::from("id\tattribute\tn_labels\tybar\tlabel_var\tmean\taleatoric\tepistemic\ttotal");
    out.push_str(if with_truth { "\ttrue_mean\ttrue_var\n" } else { "\n" });
    for r in rows {
        write!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.id,
            r.attribute,
            r.n_labels,
            r.ybar,
            r.label_var,
            r.mean,
            fmt_opt(r.aleatoric),
            fmt_opt(r.epistemic),
            r.total
        )
        .unwrap();
        if with_truth {
            write!(out, "\t{}\t{}", fmt_opt(r.true_mean), fmt_opt(r.true_var)).unwrap();
        }
        out.push('\n');
    }
    out
}

fn calibration_tsv(rows: &[CalibrationRow]) -> String {
    let mut out = String::from("attribute\tmean_rmse\tmean_pearson\tvar_pearson\n");
    for r in rows {
        writeln!(out, "{}\t{}\t{}\t{}", r.attribute, r.mean_rmse, r.mean_pearson, r.var_pearson).unwrap();
    }
    out
}

fn attach_truth(rows: &mut [PredictionRow], truth: &SyntheticTruth) -> CliResult<()> {
    let lookup = truth.lookup();
    for row in rows {
        let column = truth
            .attributes
            .iter()
            .position(|a| *a == row.attribute)
            .ok_or_else(|| CliError::Runtime(anyhow!("truth file has no attribute {:?}", row.attribute)))?;
        let (mean, var) = lookup
            .get(row.id.as_str())
            .ok_or_else(|| CliError::Runtime(anyhow!("truth file has no item {:?}", row.id)))?;
        row.true_mean = Some(mean[column]);
        row.true_var = Some(var[column]);
    }
    Ok(())
}

fn calibration(attributes: &[String], rows: &[PredictionRow]) -> CliResult<Vec<CalibrationRow>> {
    attributes
        .iter()
        .map(|attr| {
            let sel: Vec<&PredictionRow> = rows.iter().filter(|r| &r.attribute == attr).collect();
            let mean: Vec<f64> = sel.iter().map(|r| r.mean).collect();
            let true_mean: Vec<f64> = sel.iter().map(|r| r.true_mean.unwrap_or(f64::NAN)).collect();
            let var: Vec<f64> = sel.iter().map(|r| r.aleatoric.unwrap_or(r.total)).collect();
            let true_var: Vec<f64> = sel.iter().map(|r| r.true_var.unwrap_or(f64::NAN)).collect();
            Ok(CalibrationRow {
                attribute: attr.clone(),
                mean_rmse: rmse(&mean, &true_mean)?,
                mean_pearson: pearson(&mean, &true_mean)?,
                var_pearson: pearson(&var, &true_var)?,
            })
        })
        .collect()
}

/// Scores a checkpoint and writes `summary.tsv`, `predictions.tsv`,
/// `calibration.tsv` (with a truth file) and `eval.config.toml`.
///
/// Evidential checkpoints use the Student-t predictive density; ensembles
/// and MC-dropout checkpoints are scored by KDE over their samples.
pub fn cmd_eval(settings: &EvalSettings) -> CliResult<EvalOutcome> {
    let bandwidth = match settings.bandwidth {
        None => Bandwidth::Silverman,
        Some(h) if h > 0.0 && h.is_finite() => Bandwidth::Fixed(h),
        Some(h) => return Err(usage(format!("bandwidth must be positive, got {h}"))),
    };
    if settings.passes < 2 {
        return Err(usage("--passes must be at least 2"));
    }
    let checkpoint = loading(&settings.model, Checkpoint::load(&settings.model))?;
    let nets = loading(&settings.model, checkpoint.networks())?;
    let dataset = loading(&settings.data, data::load_with_attributes(&settings.data, &checkpoint.attributes))?;
    if dataset.feature_dim() != nets[0].input_dim() {
        return Err(CliError::Runtime(anyhow!(
            "model expects {} features, data has {}",
            nets[0].input_dim(),
            dataset.feature_dim()
        )));
    }
    let attributes = &checkpoint.attributes;
    let labels: Vec<Vec<&LabelSet>> = dataset.items.iter().map(|i| i.labels.iter().collect()).collect();

    let mut rows = Vec::with_capacity(dataset.len() * attributes.len());
    let summary = match checkpoint.kind {
        ModelKind::Evidential => {
            let predictions = dataset
                .items
                .iter()
                .map(|i| nets[0].predict(&i.features))
                .collect::<evireg::Result<Vec<_>>>()?;
            for (item, omegas) in dataset.items.iter().zip(&predictions) {
                for ((attr, omega), l) in attributes.iter().zip(omegas).zip(&item.labels) {
                    let u = uncertainty(omega);
                    rows.push(PredictionRow {
                        id: item.id.clone(),
                        attribute: attr.clone(),
                        n_labels: l.len(),
                        ybar: l.mean(),
                        label_var: l.variance(),
                        mean: u.mean,
                        aleatoric: Some(u.aleatoric),
                        epistemic: Some(u.epistemic),
                        total: u.total,
                        true_mean: None,
                        true_var: None,
                    });
                }
            }
            evaluate_evidential(attributes, &predictions, &labels)?
        }
        ModelKind::Ensemble | ModelKind::McDropout => {
            let samples = dataset
                .items
                .iter()
                .enumerate()
                .map(|(n, i)| match checkpoint.kind {
                    ModelKind::Ensemble => ensemble_predict(&nets, &i.features),
                    _ => mc_dropout_predict(&nets[0], &i.features, settings.passes, settings.mc_seed.wrapping_add(n as u64)),
                })
                .collect::<evireg::Result<Vec<_>>>()?;
            for (item, per_attr) in dataset.items.iter().zip(&samples) {
                for ((attr, s), l) in attributes.iter().zip(per_attr).zip(&item.labels) {
                    rows.push(PredictionRow {
                        id: item.id.clone(),
                        attribute: attr.clone(),
                        n_labels: l.len(),
                        ybar: l.mean(),
                        label_var: l.variance(),
                        mean: s.iter().sum::<f64>() / s.len() as f64,
                        aleatoric: None,
                        epistemic: None,
                        total: population_variance(s),
                        true_mean: None,
                        true_var: None,
                    });
                }
            }
            evaluate_samples(attributes, &samples, &labels, bandwidth)?
        }
    };

    let calibration = match &settings.truth {
        None => None,
        Some(path) => {
            attach_truth(&mut rows, &loading(path, SyntheticTruth::load(path))?)?;
            Some(calibration(attributes, &rows)?)
        }
    };

    let dir = &settings.out;
    ensure_dir(dir)?;
    let summary_path = dir.join("summary.tsv");
    let predictions_path = dir.join("predictions.tsv");
    write_text(&summary_path, &summary.to_tsv())?;
    write_text(&predictions_path, &predictions_tsv(&rows, calibration.is_some()))?;
    let calibration_path = match &calibration {
        None => None,
        Some(c) => {
            let p = dir.join("calibration.tsv");
            write_text(&p, &calibration_tsv(c))?;
            Some(p)
        }
    };
    Ok(EvalOutcome {
        summary,
        rows,
        calibration,
        summary_path,
        predictions_path,
        calibration_path,
        echo: write_echo(dir, "eval", settings)?,
    })
}
