use std::fmt::Write as _;
use std::path::PathBuf;

use evireg::baselines::{ensemble_seeds, train_ensemble_with_seeds, train_point, BaselineConfig};
use evireg::data;
use evireg::net::{train, Checkpoint, ModelKind, TrainReport};
use evireg::{HeadKind, LossConfig, Network, NllKind, TrainConfig};

use super::{ensure_dir, fmt_opt, loading, write_text};
use crate::settings::{write_echo, ModelChoice, TrainSettings};
use crate::{usage, CliResult};

#[derive(Debug, Clone)]
pub struct TrainOutputs {
    pub checkpoint: PathBuf,
    pub trace: PathBuf,
    pub echo: PathBuf,
}

fn train_config(settings: &TrainSettings, n_attributes: usize) -> CliResult<TrainConfig> {
    let lambdas = match settings.lambda.len() {
        1 => vec![settings.lambda[0]; n_attributes],
        n if n == n_attributes => settings.lambda.clone(),
        n => return Err(usage(format!("--lambda takes 1 or {n_attributes} values, got {n}"))),
    };
    let epsilons = match &settings.epsilon {
        None => vec![1.0 / n_attributes as f64; n_attributes],
        Some(e) if e.len() == n_attributes => e.clone(),
        Some(e) => return Err(usage(format!("--epsilon takes {n_attributes} values, got {}", e.len()))),
    };
    Ok(TrainConfig {
        epochs: settings.epochs,
        batch_size: settings.batch_size,
        learning_rate: settings.learning_rate,
        seed: settings.seed,
        epsilons,
        lambdas,
        loss: LossConfig {
            nll: if settings.avg_nll { NllKind::Averaged } else { NllKind::PerObservation },
            reg_sigma: !settings.no_reg_sigma,
            detach_phi: settings.detach_phi,
        },
        patience: settings.patience,
    })
}

fn trace_tsv(reports: &[TrainReport]) -> String {
    let mut out = String::from("member\tepoch\ttrain_loss\tval_loss\n");
    for (member, report) in reports.iter().enumerate() {
        for e in &report.epochs {
            writeln!(out, "{member}\t{}\t{}\t{}", e.epoch, e.train_loss, fmt_opt(e.val_loss)).unwrap();
        }
    }
    out
}

/// Trains the selected model and writes `model.json` (checkpoint),
/// `trace.tsv` (per-epoch losses) and `train.config.toml`.
pub fn cmd_train(settings: &TrainSettings) -> CliResult<TrainOutputs> {
    if settings.model == ModelChoice::Ensemble && settings.members < 2 {
        return Err(usage("an ensemble needs --members >= 2"));
    }
    let dropout = settings.dropout_rate();
    if !(0.0..1.0).contains(&dropout) {
        return Err(usage(format!("dropout must lie in [0, 1), got {dropout}")));
    }
    let train_set = loading(&settings.train, data::load(&settings.train))?;
    let validation = settings
        .val
        .as_ref()
        .map(|p| loading(p, data::load_with_attributes(p, &train_set.attributes)))
        .transpose()?;
    let cfg = train_config(settings, train_set.n_attributes())?;

    let (kind, nets, reports) = match settings.model {
        ModelChoice::Evidential => {
            let net = Network::new(
                train_set.feature_dim(),
                &settings.hidden,
                train_set.n_attributes(),
                HeadKind::Evidential,
                dropout,
                settings.seed,
            )?;
            let (net, report) = train(net, &train_set, validation.as_ref(), &cfg)?;
            (ModelKind::Evidential, vec![net], vec![report])
        }
        ModelChoice::Ensemble | ModelChoice::McDropout => {
            let baseline = BaselineConfig {
                hidden: settings.hidden.clone(),
                dropout,
                train: cfg,
            };
            if settings.model == ModelChoice::Ensemble {
                let seeds = ensemble_seeds(settings.seed, settings.members);
                let members = train_ensemble_with_seeds(&seeds, &train_set, validation.as_ref(), &baseline)?;
                let (nets, reports) = members.into_iter().unzip();
                (ModelKind::Ensemble, nets, reports)
            } else {
                let (net, report) = train_point(&train_set, validation.as_ref(), &baseline)?;
                (ModelKind::McDropout, vec![net], vec![report])
            }
        }
    };

    let dir = &settings.out;
    ensure_dir(dir)?;
    let config = serde_json::to_value(settings).map_err(anyhow::Error::from)?;
    let checkpoint = Checkpoint::new(kind, train_set.attributes.clone(), config, &nets);
    let out = TrainOutputs {
        checkpoint: dir.join("model.json"),
        trace: dir.join("trace.tsv"),
        echo: write_echo(dir, "train", settings)?,
    };
    checkpoint.save(&out.checkpoint)?;
    write_text(&out.trace, &trace_tsv(&reports))?;
    Ok(out)
}
