use std::path::PathBuf;

use anyhow::{anyhow, Context};

use evireg::metrics::{reject_curve_scored, ScoredPrediction};
use evireg::RejectCurve;

use super::{ensure_dir, write_text};
use crate::settings::{write_echo, RejectSettings};
use crate::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct AttributeCurve {
    pub attribute: String,
    pub curve: RejectCurve,
    pub path: PathBuf,
}

/// Reads `predictions.tsv` into per-attribute scored items, in first-seen
/// attribute order.
pub fn read_predictions(text: &str) -> anyhow::Result<Vec<(String, Vec<ScoredPrediction>)>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| anyhow!("empty predictions file"))?.split('\t').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| anyhow!("predictions file has no {name:?} column"))
    };
    let (id, attr, ybar, mean, total) = (col("id")?, col("attribute")?, col("ybar")?, col("mean")?, col("total")?);
    let mut groups: Vec<(String, Vec<ScoredPrediction>)> = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != header.len() {
            return Err(anyhow!("line {}: expected {} fields, got {}", n + 2, header.len(), fields.len()));
        }
        let num = |i: usize| -> anyhow::Result<f64> {
            fields[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .with_context(|| format!("line {}: {:?} in column {:?} is not a number", n + 2, fields[i], header[i]))
        };
        let item = ScoredPrediction {
            id: fields[id].to_string(),
            prediction: num(mean)?,
            reference: num(ybar)?,
            uncertainty: num(total)?,
        };
        match groups.iter_mut().find(|(a, _)| a == fields[attr]) {
            Some((_, items)) => items.push(item),
            None => groups.push((fields[attr].to_string(), vec![item])),
        }
    }
    if groups.is_empty() {
        return Err(anyhow!("no predictions"));
    }
    Ok(groups)
}

/// Writes one `reject_<attribute>.tsv` curve per attribute into
/// `settings.out`. Items are ranked by predicted total variance.
pub fn cmd_reject(settings: &RejectSettings) -> CliResult<Vec<AttributeCurve>> {
    let text = std::fs::read_to_string(&settings.predictions)
        .with_context(|| format!("reading {}", settings.predictions.display()))?;
    let groups = read_predictions(&text).map_err(CliError::Runtime)?;
    let curves = groups
        .into_iter()
        .map(|(attribute, items)| {
            let curve = reject_curve_scored(&items, &settings.fractions)?;
            let path = settings.out.join(format!("reject_{attribute}.tsv"));
            Ok(AttributeCurve { attribute, curve, path })
        })
        .collect::<CliResult<Vec<_>>>()?;
    ensure_dir(&settings.out)?;
    for c in &curves {
        write_text(&c.path, &c.curve.to_tsv())?;
    }
    write_echo(&settings.out, "reject", settings)?;
    Ok(curves)
}
