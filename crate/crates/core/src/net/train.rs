use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{backward, batch_loss, AdamState, Network};
use crate::data::{AnnotatedItem, Dataset};
use crate::evidential::{check_weights, LossConfig};
use crate::{Error, Result};

// Separate streams for shuffling and dropout so that toggling dropout does
// not change the batch order.
const SHUFFLE_STREAM: u64 = 0x5348_5546;
const DROPOUT_STREAM: u64 = 0x4452_4f50;

/// Mini-batch training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Per-attribute weights; must sum to 1.
    pub epsilons: Vec<f64>,
    /// Per-attribute regulariser coefficients.
    pub lambdas: Vec<f64>,
    pub loss: LossConfig,
    /// Stop after this many epochs without validation improvement and keep
    /// the best parameters. Ignored without a validation set.
    pub patience: Option<usize>,
}

impl TrainConfig {
    /// Equal attribute weights, `lambda = 0.1`, Adam at `1e-3`, batches of 32.
    pub fn new(n_attributes: usize) -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            epsilons: vec![1.0 / n_attributes as f64; n_attributes],
            lambdas: vec![0.1; n_attributes],
            loss: LossConfig::default(),
            patience: None,
        }
    }

    fn validate(&self, n_attributes: usize) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be positive"));
        }
        check_weights(&self.epsilons, &self.lambdas, n_attributes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (the last one unless early stopping
    /// restored an earlier one).
    pub best_epoch: usize,
}

/// A differentiable training objective over mini-batches.
pub trait Objective {
    /// Smallest usable mini-batch; smaller trailing batches are dropped.
    fn min_batch(&self) -> usize {
        1
    }

    fn loss_grad(
        &self,
        net: &Network,
        batch: &[&AnnotatedItem],
        dropout_rng: &mut ChaCha8Rng,
    ) -> Result<(f64, Vec<f64>)>;

    fn eval_loss(&self, net: &Network, data: &Dataset) -> Result<f64>;
}

/// The evidential objective: weighted sum over attributes of data fit plus
/// calibration regularisers.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidentialObjective {
    pub epsilons: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub loss: LossConfig,
}

impl From<&TrainConfig> for EvidentialObjective {
    fn from(cfg: &TrainConfig) -> Self {
        Self {
            epsilons: cfg.epsilons.clone(),
            lambdas: cfg.lambdas.clone(),
            loss: cfg.loss,
        }
    }
}

impl Objective for EvidentialObjective {
    fn loss_grad(
        &self,
        net: &Network,
        batch: &[&AnnotatedItem],
        dropout_rng: &mut ChaCha8Rng,
    ) -> Result<(f64, Vec<f64>)> {
        backward(net, batch, &self.epsilons, &self.lambdas, &self.loss, Some(dropout_rng))
    }

    fn eval_loss(&self, net: &Network, data: &Dataset) -> Result<f64> {
        let items: Vec<&AnnotatedItem> = data.items.iter().collect();
        batch_loss(net, &items, &self.epsilons, &self.lambdas, &self.loss)
    }
}

/// Trains an evidential network in place and returns it with its loss trace.
pub fn train(
    net: Network,
    train_set: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    let objective = EvidentialObjective::from(cfg);
    fit(net, train_set, validation, &objective, cfg)
}

/// Shuffled mini-batch Adam over `cfg.epochs` epochs.
///
/// Only `epochs`, `batch_size`, `learning_rate`, `seed` and `patience` are
/// read from `cfg`; the loss comes from `objective`.
pub fn fit<O: Objective + ?Sized>(
    mut net: Network,
    train_set: &Dataset,
    validation: Option<&Dataset>,
    objective: &O,
    cfg: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    if train_set.items.is_empty() {
        return Err(Error::Empty("training set"));
    }
    cfg.validate(net.n_attributes())?;
    if train_set.feature_dim() != net.input_dim() {
        return Err(Error::Dimension {
            expected: net.input_dim(),
            got: train_set.feature_dim(),
            context: "dataset feature width",
        });
    }

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ DROPOUT_STREAM);
    let mut adam = AdamState::new(net.n_params(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..train_set.items.len()).collect();
    let mut report = TrainReport::default();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < objective.min_batch() {
                continue;
            }
            let batch: Vec<&AnnotatedItem> = chunk.iter().map(|&i| &train_set.items[i]).collect();
            let (loss, grads) = objective.loss_grad(&net, &batch, &mut dropout_rng)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::domain(format!("non-finite loss or gradient at epoch {epoch}")));
            }
            adam.step(net.params_mut(), &grads)?;
            loss_sum += loss * batch.len() as f64;
            seen += batch.len();
        }
        let train_loss = if seen > 0 { loss_sum / seen as f64 } else { f64::NAN };
        let val_loss = validation.map(|v| objective.eval_loss(&net, v)).transpose()?;
        report.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        report.best_epoch = epoch;

        if let (Some(patience), Some(v)) = (cfg.patience, val_loss) {
            match &best {
                Some((b, _, _)) if v >= *b => {}
                _ => best = Some((v, epoch, net.params().to_vec())),
            }
            let (_, best_epoch, _) = best.as_ref().expect("set above");
            if epoch - best_epoch >= patience {
                break;
            }
        }
    }

    if let Some((_, epoch, params)) = best {
        net.params_mut().copy_from_slice(&params);
        report.best_epoch = epoch;
    }
    Ok((net, report))
}
