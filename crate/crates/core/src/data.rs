//! Multi-annotator datasets: synthetic generation, JSON-lines IO, splitting.
//!
//! Record format, one item per line:
//!
//! ```text
//! {"id":"item-000001","features":[0.12,-0.5],"labels":{"valence":[3.0,4.0],"arousal":[2.5]}}
//! ```
//!
//! Every record must carry the same feature width and the same attribute
//! names. Label lists may differ in length between items and attributes.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::evidential::LabelSet;
use crate::special::sigmoid;
use crate::{Error, Result, DEFAULT_ATTRIBUTES};

/// One input with its raw annotator labels, one [`LabelSet`] per attribute
/// in the owning dataset's attribute order.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedItem {
    pub id: String,
    pub features: Vec<f64>,
    pub labels: Vec<LabelSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub attributes: Vec<String>,
    pub items: Vec<AnnotatedItem>,
}

impl Dataset {
    pub fn new(attributes: Vec<String>, items: Vec<AnnotatedItem>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::config("dataset needs at least one attribute"));
        }
        let width = items.first().map(|i| i.features.len());
        for item in &items {
            if Some(item.features.len()) != width {
                return Err(Error::Dimension {
                    expected: width.unwrap_or(0),
                    got: item.features.len(),
                    context: "feature width",
                });
            }
            if item.labels.len() != attributes.len() {
                return Err(Error::Dimension {
                    expected: attributes.len(),
                    got: item.labels.len(),
                    context: "label sets per item",
                });
            }
        }
        Ok(Self { attributes, items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.items.first().map_or(0, |i| i.features.len())
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            attributes: self.attributes.clone(),
            items: indices.iter().map(|&i| self.items[i].clone()).collect(),
        }
    }

    /// Averaged label per item for attribute `n`.
    pub fn mean_labels(&self, n: usize) -> Vec<f64> {
        self.items.iter().map(|i| i.labels[n].mean()).collect()
    }
}

/// Ground truth behind a synthetic dataset, aligned with its items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub attributes: Vec<String>,
    pub ids: Vec<String>,
    /// `true_mean[item][attribute]`
    pub true_mean: Vec<Vec<f64>>,
    /// `true_var[item][attribute]`, always positive.
    pub true_var: Vec<Vec<f64>>,
}

impl SyntheticTruth {
    /// `(true_mean, true_var)` per attribute for an item id.
    pub fn lookup(&self) -> HashMap<&str, (&[f64], &[f64])> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), (self.true_mean[i].as_slice(), self.true_var[i].as_slice())))
            .collect()
    }

    /// Tab-separated `id, attribute, true_mean, true_var`, one row per pair.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        writeln!(w, "id\tattribute\ttrue_mean\ttrue_var")?;
        for (i, id) in self.ids.iter().enumerate() {
            for (n, attr) in self.attributes.iter().enumerate() {
                writeln!(w, "{id}\t{attr}\t{}\t{}", self.true_mean[i][n], self.true_var[i][n])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut attributes: Vec<String> = Vec::new();
        let mut ids: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut rows: Vec<HashMap<String, (f64, f64)>> = Vec::new();
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(parse_err(lineno + 1, format!("expected 4 columns, got {}", cols.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| parse_err(lineno + 1, format!("{s:?}: {e}")));
            let (mean, var) = (num(cols[2])?, num(cols[3])?);
            if !attributes.iter().any(|a| a == cols[1]) {
                attributes.push(cols[1].to_string());
            }
            let i = *index.entry(cols[0].to_string()).or_insert_with(|| {
                ids.push(cols[0].to_string());
                rows.push(HashMap::new());
                rows.len() - 1
            });
            rows[i].insert(cols[1].to_string(), (mean, var));
        }
        if ids.is_empty() {
            return Err(Error::NoRecords { path: path.to_path_buf() });
        }
        let mut true_mean = Vec::with_capacity(ids.len());
        let mut true_var = Vec::with_capacity(ids.len());
        for (id, row) in ids.iter().zip(&rows) {
            let mut m = Vec::with_capacity(attributes.len());
            let mut v = Vec::with_capacity(attributes.len());
            for a in &attributes {
                let &(mean, var) = row
                    .get(a)
                    .ok_or_else(|| parse_err(0, format!("item {id} has no truth for {a}")))?;
                m.push(mean);
                v.push(var);
            }
            true_mean.push(m);
            true_var.push(v);
        }
        Ok(Self {
            attributes,
            ids,
            true_mean,
            true_var,
        })
    }
}

/// Settings for [`generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_items: usize,
    /// Feature width.
    pub d: usize,
    pub attributes: Vec<String>,
    /// Inclusive range for the number of annotators per item.
    pub m_range: (usize, usize),
    pub seed: u64,
    /// Noise variance floor, `> 0`.
    pub s0: f64,
    /// Input-dependent noise amplitude; zero gives homoscedastic labels.
    pub s1: f64,
    /// Seeds the fixed mean/variance maps, independently of `seed`.
    pub structure_seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_items: 2000,
            d: 8,
            attributes: DEFAULT_ATTRIBUTES.iter().map(|s| s.to_string()).collect(),
            m_range: (3, 7),
            seed: 0,
            s0: 0.1,
            s1: 1.0,
            structure_seed: 7,
        }
    }
}

impl GeneratorConfig {
    fn validate(&self) -> Result<()> {
        if self.n_items == 0 {
            return Err(Error::config("n_items must be at least 1"));
        }
        if self.d == 0 {
            return Err(Error::config("feature width d must be at least 1"));
        }
        if self.attributes.is_empty() {
            return Err(Error::config("at least one attribute is required"));
        }
        let (lo, hi) = self.m_range;
        if lo < 1 || hi > 20 || lo > hi {
            return Err(Error::config(format!(
                "annotator range must satisfy 1 <= min <= max <= 20, got [{lo}, {hi}]"
            )));
        }
        if !(self.s0 > 0.0 && self.s0.is_finite()) || !(self.s1 >= 0.0 && self.s1.is_finite()) {
            return Err(Error::config("noise parameters need s0 > 0 and s1 >= 0"));
        }
        Ok(())
    }
}

/// The fixed smooth maps `x -> (true mean, true variance)` for one attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthMap {
    phases: Vec<f64>,
    var_weights: Vec<f64>,
    s0: f64,
    s1: f64,
}

impl GroundTruthMap {
    /// One map per attribute, drawn from `cfg.structure_seed`.
    pub fn for_config(cfg: &GeneratorConfig) -> Vec<GroundTruthMap> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.structure_seed);
        let w_dist = Normal::new(0.0, (12.0 / cfg.d as f64).sqrt()).expect("positive std");
        (0..cfg.attributes.len())
            .map(|_| GroundTruthMap {
                phases: (0..cfg.d).map(|_| rng.random_range(0.0..2.0 * PI)).collect(),
                var_weights: (0..cfg.d).map(|_| w_dist.sample(&mut rng)).collect(),
                s0: cfg.s0,
                s1: cfg.s1,
            })
            .collect()
    }

    /// Sum of per-dimension sinusoids, scaled to unit variance under
    /// uniform inputs on `[-1, 1]`.
    pub fn mean(&self, x: &[f64]) -> f64 {
        let scale = (2.0 / x.len() as f64).sqrt();
        scale * x.iter().zip(&self.phases).map(|(xi, p)| (PI * xi + p).sin()).sum::<f64>()
    }

    pub fn variance(&self, x: &[f64]) -> f64 {
        let z: f64 = x.iter().zip(&self.var_weights).map(|(a, b)| a * b).sum();
        self.s0 + self.s1 * sigmoid(z)
    }
}

/// Draws a synthetic multi-annotator dataset together with its ground truth.
///
/// Features are uniform on `[-1, 1]^d`; each item gets a number of
/// annotators uniform on `m_range`, and each annotator labels every
/// attribute with an independent draw from `N(true_mean(x), true_var(x))`.
pub fn generate(cfg: &GeneratorConfig) -> Result<(Dataset, SyntheticTruth)> {
    cfg.validate()?;
    let maps = GroundTruthMap::for_config(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let width = (cfg.n_items.max(2) - 1).to_string().len().max(6);

    let mut items = Vec::with_capacity(cfg.n_items);
    let mut truth = SyntheticTruth {
        attributes: cfg.attributes.clone(),
        ids: Vec::with_capacity(cfg.n_items),
        true_mean: Vec::with_capacity(cfg.n_items),
        true_var: Vec::with_capacity(cfg.n_items),
    };
    for i in 0..cfg.n_items {
        let id = format!("item-{i:0width$}");
        let features: Vec<f64> = (0..cfg.d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let m = rng.random_range(cfg.m_range.0..=cfg.m_range.1);
        let mut labels = Vec::with_capacity(maps.len());
        let mut means = Vec::with_capacity(maps.len());
        let mut vars = Vec::with_capacity(maps.len());
        for map in &maps {
            let (mu, var) = (map.mean(&features), map.variance(&features));
            let noise = Normal::new(mu, var.sqrt()).expect("positive variance");
            labels.push(LabelSet::new((0..m).map(|_| noise.sample(&mut rng)).collect())?);
            means.push(mu);
            vars.push(var);
        }
        truth.ids.push(id.clone());
        truth.true_mean.push(means);
        truth.true_var.push(vars);
        items.push(AnnotatedItem { id, features, labels });
    }
    Ok((Dataset::new(cfg.attributes.clone(), items)?, truth))
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    features: Vec<f64>,
    labels: serde_json::Map<String, serde_json::Value>,
}

/// Writes one JSON record per line.
pub fn save(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for item in &dataset.items {
        let labels = dataset
            .attributes
            .iter()
            .zip(&item.labels)
            .map(|(a, l)| (a.clone(), serde_json::Value::from(l.values().to_vec())))
            .collect();
        let rec = Record {
            id: item.id.clone(),
            features: item.features.clone(),
            labels,
        };
        serde_json::to_writer(&mut w, &rec).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a JSON-lines dataset; the attribute set and order come from the
/// first record.
pub fn load(path: &Path) -> Result<Dataset> {
    load_impl(path, None)
}

/// Like [`load`], but every record must use exactly `attributes`.
pub fn load_with_attributes(path: &Path, attributes: &[String]) -> Result<Dataset> {
    load_impl(path, Some(attributes))
}

fn load_impl(path: &Path, expected: Option<&[String]>) -> Result<Dataset> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut attributes: Option<Vec<String>> = expected.map(<[String]>::to_vec);
    let mut width: Option<usize> = None;
    let mut items = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message,
        };
        let rec: Record = serde_json::from_str(&line).map_err(|e| err(format!("malformed record: {e}")))?;

        match width {
            None => width = Some(rec.features.len()),
            Some(w) if w != rec.features.len() => {
                return Err(err(format!("feature width {} differs from {w}", rec.features.len())));
            }
            _ => {}
        }
        if rec.features.iter().any(|f| !f.is_finite()) {
            return Err(err("non-finite feature".into()));
        }
        let attrs = attributes.get_or_insert_with(|| rec.labels.keys().cloned().collect());
        if let Some(unknown) = rec.labels.keys().find(|k| !attrs.contains(k)) {
            return Err(err(format!("unknown attribute {unknown:?}")));
        }
        let mut labels = Vec::with_capacity(attrs.len());
        for a in attrs.iter() {
            let value = rec.labels.get(a).ok_or_else(|| err(format!("missing attribute {a:?}")))?;
            let values: Vec<f64> = serde_json::from_value(value.clone())
                .map_err(|e| err(format!("labels for {a:?} must be a number array: {e}")))?;
            if values.is_empty() {
                return Err(err(format!("empty label list for {a:?}")));
            }
            labels.push(LabelSet::new(values).map_err(|e| err(e.to_string()))?);
        }
        items.push(AnnotatedItem {
            id: rec.id,
            features: rec.features,
            labels,
        });
    }
    if items.is_empty() {
        return Err(Error::NoRecords { path: path.to_path_buf() });
    }
    Dataset::new(attributes.expect("set by first record"), items)
}

/// Deterministic shuffled partition into train/validation/test.
///
/// Split sizes are `round(f * n)` for train and validation with the
/// remainder going to test; items keep their original order within each
/// split.
pub fn split(dataset: &Dataset, fractions: [f64; 3], seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    if fractions.iter().any(|f| !(*f >= 0.0 && f.is_finite())) {
        return Err(Error::config("split fractions must be nonnegative"));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split fractions must sum to 1, got {sum}")));
    }
    let n = dataset.len();
    let n_train = ((fractions[0] * n as f64).round() as usize).min(n);
    let n_val = ((fractions[1] * n as f64).round() as usize).min(n - n_train);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut parts = [
        order[..n_train].to_vec(),
        order[n_train..n_train + n_val].to_vec(),
        order[n_train + n_val..].to_vec(),
    ];
    parts.iter_mut().for_each(|p| p.sort_unstable());
    Ok((dataset.subset(&parts[0]), dataset.subset(&parts[1]), dataset.subset(&parts[2])))
}
