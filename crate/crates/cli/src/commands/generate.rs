use std::path::PathBuf;

use evireg::data::{self, GeneratorConfig};

use super::ensure_dir;
use crate::settings::{write_echo, GenerateSettings};
use crate::CliResult;

#[derive(Debug, Clone)]
pub struct GenerateOutputs {
    pub train: PathBuf,
    pub val: PathBuf,
    pub test: PathBuf,
    pub truth: PathBuf,
    pub echo: PathBuf,
}

/// Generates a dataset, splits it and writes `train.jsonl`, `val.jsonl`,
/// `test.jsonl` and `truth.tsv` into `settings.out`.
pub fn cmd_generate(settings: &GenerateSettings) -> CliResult<GenerateOutputs> {
    let cfg = GeneratorConfig {
        n_items: settings.n_items,
        d: settings.dim,
        attributes: settings.attributes.clone(),
        m_range: (settings.m_min, settings.m_max),
        seed: settings.seed,
        s0: settings.s0,
        s1: settings.s1,
        structure_seed: settings.structure_seed,
    };
    let (dataset, truth) = data::generate(&cfg)?;
    let (train, val, test) = data::split(&dataset, settings.split, settings.seed)?;

    let dir = &settings.out;
    ensure_dir(dir)?;
    let out = GenerateOutputs {
        train: dir.join("train.jsonl"),
        val: dir.join("val.jsonl"),
        test: dir.join("test.jsonl"),
        truth: dir.join("truth.tsv"),
        echo: write_echo(dir, "generate", settings)?,
    };
    data::save(&train, &out.train)?;
    data::save(&val, &out.val)?;
    data::save(&test, &out.test)?;
    truth.save(&out.truth)?;
    Ok(out)
}
