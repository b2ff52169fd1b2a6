//! Resolved per-command settings and their flag/config-file sources.
//!
//! Config files are TOML with one table per command, keyed exactly like the
//! settings structs below:
//!
//! ```toml
//! [generate]
//! out = "data"
//! n_items = 5000
//!
//! [train]
//! train = "data/train.jsonl"
//! val = "data/val.jsonl"
//! model = "evidential"
//! lambda = [0.1]
//! ```
//!
//! Unknown keys are rejected. Flags override file values; boolean switches
//! can only be turned on from the command line.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use evireg::DEFAULT_ATTRIBUTES;

use crate::{usage, CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSettings {
    pub out: PathBuf,
    pub n_items: usize,
    pub dim: usize,
    pub attributes: Vec<String>,
    pub m_min: usize,
    pub m_max: usize,
    pub s0: f64,
    pub s1: f64,
    pub seed: u64,
    pub structure_seed: u64,
    /// Train / validation / test fractions.
    pub split: [f64; 3],
}

impl Default for GenerateSettings {
    fn default() -> Self {
        Self {
            out: PathBuf::from("data"),
            n_items: 2000,
            dim: 8,
            attributes: DEFAULT_ATTRIBUTES.iter().map(|s| s.to_string()).collect(),
            m_min: 3,
            m_max: 7,
            s0: 0.1,
            s1: 1.0,
            seed: 0,
            structure_seed: 7,
            split: [0.7, 0.15, 0.15],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    #[default]
    Evidential,
    Ensemble,
    McDropout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub train: PathBuf,
    pub val: Option<PathBuf>,
    pub out: PathBuf,
    pub model: ModelChoice,
    pub hidden: Vec<usize>,
    /// Defaults to 0.3, or 0.4 for `mc-dropout`.
    pub dropout: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// One value for all attributes, or one per attribute.
    pub lambda: Vec<f64>,
    /// Per-attribute weights; equal weights when absent.
    pub epsilon: Option<Vec<f64>>,
    pub no_reg_sigma: bool,
    pub avg_nll: bool,
    pub detach_phi: bool,
    pub patience: Option<usize>,
    /// Ensemble size.
    pub members: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            train: PathBuf::from("data/train.jsonl"),
            val: None,
            out: PathBuf::from("runs/model"),
            model: ModelChoice::Evidential,
            hidden: vec![128, 128],
            dropout: None,
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            lambda: vec![0.1],
            epsilon: None,
            no_reg_sigma: false,
            avg_nll: false,
            detach_phi: false,
            patience: None,
            members: evireg::baselines::DEFAULT_ENSEMBLE_SIZE,
        }
    }
}

impl TrainSettings {
    pub fn dropout_rate(&self) -> f64 {
        self.dropout.unwrap_or(match self.model {
            ModelChoice::McDropout => evireg::baselines::DEFAULT_MC_DROPOUT,
            _ => 0.3,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub model: PathBuf,
    pub data: PathBuf,
    pub truth: Option<PathBuf>,
    pub out: PathBuf,
    /// Forward passes for MC-dropout checkpoints.
    pub passes: usize,
    pub mc_seed: u64,
    /// Fixed KDE bandwidth; Silverman's rule when absent.
    pub bandwidth: Option<f64>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            model: PathBuf::from("runs/model/model.json"),
            data: PathBuf::from("data/test.jsonl"),
            truth: None,
            out: PathBuf::from("runs/eval"),
            passes: evireg::baselines::DEFAULT_MC_PASSES,
            mc_seed: 0,
            bandwidth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RejectSettings {
    pub predictions: PathBuf,
    pub out: PathBuf,
    pub fractions: Vec<f64>,
}

impl Default for RejectSettings {
    fn default() -> Self {
        Self {
            predictions: PathBuf::from("runs/eval/predictions.tsv"),
            out: PathBuf::from("runs/reject"),
            fractions: (0..=10).map(|i| i as f64 / 20.0).collect(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// TOML file with a [generate] table.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub n_items: Option<usize>,
    /// Feature width.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub attributes: Option<Vec<String>>,
    /// Fewest annotators per item.
    #[arg(long)]
    pub m_min: Option<usize>,
    /// Most annotators per item.
    #[arg(long)]
    pub m_max: Option<usize>,
    #[arg(long)]
    pub s0: Option<f64>,
    #[arg(long)]
    pub s1: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub structure_seed: Option<u64>,
    /// Three comma-separated fractions: train,val,test.
    #[arg(long, value_delimiter = ',')]
    pub split: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// TOML file with a [train] table.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelChoice>,
    /// Hidden layer widths, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Regulariser coefficient(s): one value or one per attribute.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    /// Attribute weights, one per attribute, summing to 1.
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Option<Vec<f64>>,
    /// Drop the variance regulariser.
    #[arg(long)]
    pub no_reg_sigma: bool,
    /// Fit the averaged label instead of every annotation.
    #[arg(long)]
    pub avg_nll: bool,
    /// Treat the regulariser weight as a constant in the gradient.
    #[arg(long)]
    pub detach_phi: bool,
    /// Early-stopping patience in epochs (needs --val).
    #[arg(long)]
    pub patience: Option<usize>,
    /// Ensemble size.
    #[arg(long)]
    pub members: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// TOML file with an [eval] table.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Ground-truth TSV written by `generate`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub passes: Option<usize>,
    #[arg(long)]
    pub mc_seed: Option<u64>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RejectArgs {
    /// TOML file with a [reject] table.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// predictions.tsv written by `eval`.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rejection fractions, comma-separated, strictly increasing in [0, 1).
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
}

fn load_section<T: DeserializeOwned + Default>(path: Option<&Path>, section: &str) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(anyhow::anyhow!("reading {}: {e}", path.display())))?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    match table.remove(section) {
        None => Ok(T::default()),
        Some(value) => value
            .try_into()
            .map_err(|e| usage(format!("{} [{section}]: {e}", path.display()))),
    }
}

/// Writes `<dir>/<section>.config.toml` holding `settings` under `[section]`.
pub fn write_echo<T: Serialize>(dir: &Path, section: &str, settings: &T) -> anyhow::Result<PathBuf> {
    let mut table = toml::Table::new();
    table.insert(section.to_string(), toml::Value::try_from(settings)?);
    let path = dir.join(format!("{section}.config.toml"));
    std::fs::write(&path, toml::to_string(&table)?)?;
    Ok(path)
}

macro_rules! overlay {
    ($settings:ident, $args:ident; $($field:ident),*) => {
        $(if let Some(v) = $args.$field.clone() { $settings.$field = v; })*
    };
}

impl GenerateArgs {
    pub fn resolve(&self) -> CliResult<GenerateSettings> {
        let mut s: GenerateSettings = load_section(self.config.as_deref(), "generate")?;
        overlay!(s, self; out, n_items, dim, attributes, m_min, m_max, s0, s1, seed, structure_seed);
        if let Some(split) = &self.split {
            s.split = split
                .as_slice()
                .try_into()
                .map_err(|_| usage("--split needs exactly three fractions"))?;
        }
        Ok(s)
    }
}

impl TrainArgs {
    pub fn resolve(&self) -> CliResult<TrainSettings> {
        let mut s: TrainSettings = load_section(self.config.as_deref(), "train")?;
        overlay!(s, self; train, out, model, hidden, epochs, batch_size, learning_rate, seed, lambda, members);
        if self.val.is_some() {
            s.val = self.val.clone();
        }
        if self.dropout.is_some() {
            s.dropout = self.dropout;
        }
        if self.epsilon.is_some() {
            s.epsilon = self.epsilon.clone();
        }
        if self.patience.is_some() {
            s.patience = self.patience;
        }
        s.no_reg_sigma |= self.no_reg_sigma;
        s.avg_nll |= self.avg_nll;
        s.detach_phi |= self.detach_phi;
        Ok(s)
    }
}

impl EvalArgs {
    pub fn resolve(&self) -> CliResult<EvalSettings> {
        let mut s: EvalSettings = load_section(self.config.as_deref(), "eval")?;
        overlay!(s, self; model, data, out, passes, mc_seed);
        if self.truth.is_some() {
            s.truth = self.truth.clone();
        }
        if self.bandwidth.is_some() {
            s.bandwidth = self.bandwidth;
        }
        Ok(s)
    }
}

impl RejectArgs {
    pub fn resolve(&self) -> CliResult<RejectSettings> {
        let mut s: RejectSettings = load_section(self.config.as_deref(), "reject")?;
        overlay!(s, self; predictions, out, fractions);
        Ok(s)
    }
}
