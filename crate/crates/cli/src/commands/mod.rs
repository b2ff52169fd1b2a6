pub mod eval;
pub mod generate;
pub mod reject;
pub mod train;

use std::path::Path;

use anyhow::Context;

pub(crate) fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub(crate) fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `NA` for missing values, shortest round-trip form otherwise.
pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// Adds the path to load failures.
pub(crate) fn loading<T>(path: &Path, result: evireg::Result<T>) -> crate::CliResult<T> {
    result.map_err(|e| match e {
        evireg::Error::Config(msg) => crate::CliError::Usage(msg),
        other => crate::CliError::Runtime(anyhow::Error::from(other).context(format!("loading {}", path.display()))),
    })
}
