//! Sample-based comparison systems: point networks trained with a
//! mini-batch CCC loss, used either as a deep ensemble or with Monte Carlo
//! dropout at inference.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{AnnotatedItem, Dataset};
use crate::net::{fit, HeadKind, Network, Objective, TrainConfig, TrainReport};
use crate::{Error, Result};

/// A network with one linear output per attribute.
pub type PointNet = Network;

pub const DEFAULT_ENSEMBLE_SIZE: usize = 10;
pub const DEFAULT_MC_PASSES: usize = 50;
pub const DEFAULT_MC_DROPOUT: f64 = 0.4;

/// Body shape shared by every baseline member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub train: TrainConfig,
}

/// CCC of one sequence pair and its gradient with respect to `hyp`.
pub fn ccc_with_grad(hyp: &[f64], reference: &[f64]) -> Result<(f64, Vec<f64>)> {
    if hyp.len() != reference.len() {
        return Err(Error::Dimension {
            expected: reference.len(),
            got: hyp.len(),
            context: "ccc sequence length",
        });
    }
    if hyp.len() < 2 {
        return Err(Error::domain("ccc loss needs a batch of at least 2"));
    }
    let n = hyp.len() as f64;
    let mh = hyp.iter().sum::<f64>() / n;
    let mr = reference.iter().sum::<f64>() / n;
    let (mut cov, mut vh, mut vr) = (0.0, 0.0, 0.0);
    for (h, r) in hyp.iter().zip(reference) {
        cov += (h - mh) * (r - mr);
        vh += (h - mh).powi(2);
        vr += (r - mr).powi(2);
    }
    let (cov, vh, vr) = (cov / n, vh / n, vr / n);
    let denom = vh + vr + (mh - mr).powi(2);
    if denom == 0.0 {
        return Ok((1.0, vec![0.0; hyp.len()]));
    }
    let value = 2.0 * cov / denom;
    let grad = hyp
        .iter()
        .zip(reference)
        .map(|(h, r)| {
            let d_cov = (r - mr) / n;
            let d_denom = 2.0 * (h - mh) / n + 2.0 * (mh - mr) / n;
            (2.0 * d_cov * denom - 2.0 * cov * d_denom) / (denom * denom)
        })
        .collect();
    Ok((value, grad))
}

/// `sum_n eps_n (1 - ccc_n)` over a mini-batch, `hyp[item][attribute]`.
pub fn ccc_loss(hyp: &[Vec<f64>], reference: &[Vec<f64>], epsilons: &[f64]) -> Result<f64> {
    Ok(ccc_loss_grad(hyp, reference, epsilons)?.0)
}

/// [`ccc_loss`] and its gradient with respect to every `hyp` entry.
pub fn ccc_loss_grad(
    hyp: &[Vec<f64>],
    reference: &[Vec<f64>],
    epsilons: &[f64],
) -> Result<(f64, Vec<Vec<f64>>)> {
    if hyp.len() != reference.len() {
        return Err(Error::Dimension {
            expected: reference.len(),
            got: hyp.len(),
            context: "ccc loss batch",
        });
    }
    if hyp.len() < 2 {
        return Err(Error::domain("ccc loss needs a batch of at least 2"));
    }
    let n_attr = epsilons.len();
    if let Some(row) = hyp.iter().chain(reference).find(|r| r.len() != n_attr) {
        return Err(Error::Dimension {
            expected: n_attr,
            got: row.len(),
            context: "attributes per row",
        });
    }
    let mut loss = 0.0;
    let mut grads = vec![vec![0.0; n_attr]; hyp.len()];
    for (a, &eps) in epsilons.iter().enumerate() {
        let h: Vec<f64> = hyp.iter().map(|r| r[a]).collect();
        let r: Vec<f64> = reference.iter().map(|r| r[a]).collect();
        let (c, g) = ccc_with_grad(&h, &r)?;
        loss += eps * (1.0 - c);
        for (row, gi) in grads.iter_mut().zip(g) {
            row[a] = -eps * gi;
        }
    }
    Ok((loss, grads))
}

/// Mini-batch CCC loss against the averaged labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CccObjective {
    pub epsilons: Vec<f64>,
}

fn targets(items: &[&AnnotatedItem]) -> Vec<Vec<f64>> {
    items.iter().map(|i| i.labels.iter().map(|l| l.mean()).collect()).collect()
}

impl Objective for CccObjective {
    fn min_batch(&self) -> usize {
        2
    }

    fn loss_grad(
        &self,
        net: &Network,
        batch: &[&AnnotatedItem],
        dropout_rng: &mut ChaCha8Rng,
    ) -> Result<(f64, Vec<f64>)> {
        if net.head() != HeadKind::Point {
            return Err(Error::config("CCC loss needs a point head"));
        }
        let traces = batch
            .iter()
            .map(|item| net.trace(&item.features, Some(&mut *dropout_rng)))
            .collect::<Result<Vec<_>>>()?;
        let hyp: Vec<Vec<f64>> = traces.iter().map(|t| t.output.clone()).collect();
        let (loss, d_out) = ccc_loss_grad(&hyp, &targets(batch), &self.epsilons)?;
        let mut grads = vec![0.0; net.n_params()];
        for (trace, d) in traces.iter().zip(&d_out) {
            net.backprop(trace, d, 1.0, &mut grads);
        }
        Ok((loss, grads))
    }

    fn eval_loss(&self, net: &Network, data: &Dataset) -> Result<f64> {
        let hyp = data
            .items
            .iter()
            .map(|i| net.predict_point(&i.features))
            .collect::<Result<Vec<_>>>()?;
        let items: Vec<&AnnotatedItem> = data.items.iter().collect();
        ccc_loss(&hyp, &targets(&items), &self.epsilons)
    }
}

/// Trains one point network from `cfg.train.seed`.
pub fn train_point(
    train_set: &Dataset,
    validation: Option<&Dataset>,
    cfg: &BaselineConfig,
) -> Result<(PointNet, TrainReport)> {
    let net = Network::new(
        train_set.feature_dim(),
        &cfg.hidden,
        train_set.n_attributes(),
        HeadKind::Point,
        cfg.dropout,
        cfg.train.seed,
    )?;
    let objective = CccObjective {
        epsilons: cfg.train.epsilons.clone(),
    };
    fit(net, train_set, validation, &objective, &cfg.train)
}

/// Member seeds derived from a base seed.
pub fn ensemble_seeds(base: u64, k: usize) -> Vec<u64> {
    (0..k as u64).map(|i| base.wrapping_add(i.wrapping_mul(0x9E37_79B9_7F4A_7C15))).collect()
}

/// Trains one point network per seed, returning each member with its loss
/// trace. Members are independent and train on separate threads; each
/// member's run is deterministic.
pub fn train_ensemble_with_seeds(
    seeds: &[u64],
    train_set: &Dataset,
    validation: Option<&Dataset>,
    cfg: &BaselineConfig,
) -> Result<Vec<(PointNet, TrainReport)>> {
    if seeds.len() < 2 {
        return Err(Error::config("an ensemble needs at least 2 members"));
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let mut member = cfg.clone();
                member.train.seed = seed;
                scope.spawn(move || train_point(train_set, validation, &member))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("ensemble member panicked"))
            .collect()
    })
}

pub fn train_ensemble(
    k: usize,
    train_set: &Dataset,
    validation: Option<&Dataset>,
    cfg: &BaselineConfig,
) -> Result<Vec<PointNet>> {
    let members = train_ensemble_with_seeds(&ensemble_seeds(cfg.train.seed, k), train_set, validation, cfg)?;
    Ok(members.into_iter().map(|(net, _)| net).collect())
}

/// Per-attribute samples, one per member: `result[attribute][member]`.
pub fn ensemble_predict(members: &[PointNet], features: &[f64]) -> Result<Vec<Vec<f64>>> {
    let outs = members
        .iter()
        .map(|m| m.predict_point(features))
        .collect::<Result<Vec<_>>>()?;
    Ok(transpose(outs))
}

/// `passes` train-mode forward passes with fresh dropout masks drawn from
/// `seed`: `result[attribute][pass]`.
pub fn mc_dropout_predict(net: &PointNet, features: &[f64], passes: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if passes < 2 {
        return Err(Error::config("MC dropout needs at least 2 passes"));
    }
    if net.head() != HeadKind::Point {
        return Err(Error::config("MC dropout needs a point head"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outs = (0..passes)
        .map(|_| net.forward_raw(features, Some(&mut rng)))
        .collect::<Result<Vec<_>>>()?;
    Ok(transpose(outs))
}

fn transpose(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let width = rows.first().map_or(0, Vec::len);
    (0..width).map(|a| rows.iter().map(|r| r[a]).collect()).collect()
}
