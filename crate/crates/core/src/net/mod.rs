//! Dense feed-forward network with an evidential (or point) output head.
//!
//! All parameters live in one flat `Vec<f64>`. Each layer contributes its
//! weight matrix (`rows = out`, `cols = in`, row-major) followed by its bias,
//! in layer order, with the head last. Gradients share that layout, so the
//! optimiser and the checkpoint writer never need to know about layers.

mod adam;
mod checkpoint;
mod train;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, LayerRecord, ModelKind, NetworkRecord, CHECKPOINT_FORMAT_VERSION};
pub use train::{fit, train, EpochRecord, EvidentialObjective, Objective, TrainConfig, TrainReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::AnnotatedItem;
use crate::evidential::{attribute_loss_grad, check_weights, LossConfig, NigParams};
use crate::special::{sigmoid, softplus};
use crate::{Error, Result};

/// Raw head inputs below this are clamped before the softplus so that
/// `1 + softplus(raw)` stays distinguishable from 1 in `f64`.
pub const RAW_FLOOR: f64 = -30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Four outputs `(gamma, upsilon, alpha, beta)` per attribute.
    Evidential,
    /// One value per attribute.
    Point,
}

impl HeadKind {
    pub fn width(self, n_attributes: usize) -> usize {
        match self {
            HeadKind::Evidential => 4 * n_attributes,
            HeadKind::Point => n_attributes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerShape {
    rows: usize,
    cols: usize,
    offset: usize,
}

impl LayerShape {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.rows * self.cols
    }

    fn bias(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.rows * self.cols;
        start..start + self.rows
    }

    fn len(&self) -> usize {
        self.rows * (self.cols + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    hidden: Vec<usize>,
    n_attributes: usize,
    head: HeadKind,
    dropout: f64,
    layout: Vec<LayerShape>,
    params: Vec<f64>,
}

fn build_layout(input_dim: usize, hidden: &[usize], out: usize) -> Vec<LayerShape> {
    let mut layout = Vec::with_capacity(hidden.len() + 1);
    let mut offset = 0;
    let mut cols = input_dim;
    for &rows in hidden.iter().chain(std::iter::once(&out)) {
        let shape = LayerShape { rows, cols, offset };
        offset += shape.len();
        cols = rows;
        layout.push(shape);
    }
    layout
}

impl Network {
    /// A network with every weight and bias set to zero.
    pub fn zeros(
        input_dim: usize,
        hidden: &[usize],
        n_attributes: usize,
        head: HeadKind,
        dropout: f64,
    ) -> Result<Self> {
        if input_dim == 0 || n_attributes == 0 || hidden.contains(&0) {
            return Err(Error::config("layer widths must be positive"));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::config(format!("dropout must lie in [0, 1), got {dropout}")));
        }
        let layout = build_layout(input_dim, hidden, head.width(n_attributes));
        let n_params = layout.iter().map(LayerShape::len).sum();
        Ok(Self {
            input_dim,
            hidden: hidden.to_vec(),
            n_attributes,
            head,
            dropout,
            layout,
            params: vec![0.0; n_params],
        })
    }

    /// LeCun-normal weights drawn from a seeded stream, zero biases.
    pub fn new(
        input_dim: usize,
        hidden: &[usize],
        n_attributes: usize,
        head: HeadKind,
        dropout: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut net = Self::zeros(input_dim, hidden, n_attributes, head, dropout)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for shape in net.layout.clone() {
            let normal = Normal::new(0.0, (1.0 / shape.cols as f64).sqrt()).expect("positive std");
            for w in &mut net.params[shape.weights()] {
                *w = normal.sample(&mut rng);
            }
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn n_attributes(&self) -> usize {
        self.n_attributes
    }

    pub fn head(&self) -> HeadKind {
        self.head
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn output_width(&self) -> usize {
        self.head.width(self.n_attributes)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// `(rows, cols)` of each layer, head last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        self.layout.iter().map(|s| (s.rows, s.cols)).collect()
    }

    fn check_input(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                got: features.len(),
                context: "feature vector",
            });
        }
        Ok(())
    }

    fn run<R: Rng + ?Sized>(&self, features: &[f64], mut rng: Option<&mut R>) -> Trace {
        let n_hidden = self.hidden.len();
        let mut trace = Trace {
            inputs: Vec::with_capacity(n_hidden + 1),
            pre: Vec::with_capacity(n_hidden),
            masks: Vec::with_capacity(n_hidden),
            output: Vec::new(),
        };
        let mut x = features.to_vec();
        for (l, shape) in self.layout.iter().enumerate() {
            let mut z = self.params[shape.bias()].to_vec();
            let w = &self.params[shape.weights()];
            for (r, zr) in z.iter_mut().enumerate() {
                let row = &w[r * shape.cols..(r + 1) * shape.cols];
                *zr += row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            }
            trace.inputs.push(x);
            if l == n_hidden {
                trace.output = z;
                break;
            }
            let mut a: Vec<f64> = z.iter().map(|&v| gelu(v)).collect();
            let mask = match rng.as_deref_mut() {
                Some(rng) if self.dropout > 0.0 => {
                    let keep = 1.0 / (1.0 - self.dropout);
                    let mask: Vec<f64> = (0..a.len())
                        .map(|_| if rng.random::<f64>() < self.dropout { 0.0 } else { keep })
                        .collect();
                    a.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                    Some(mask)
                }
                _ => None,
            };
            trace.pre.push(z);
            trace.masks.push(mask);
            x = a;
        }
        trace
    }

    /// Raw head outputs. `dropout_rng` switches on train-mode dropout.
    pub fn forward_raw<R: Rng + ?Sized>(
        &self,
        features: &[f64],
        dropout_rng: Option<&mut R>,
    ) -> Result<Vec<f64>> {
        self.check_input(features)?;
        Ok(self.run(features, dropout_rng).output)
    }

    /// NIG parameters per attribute. With `train_mode` set, inverted dropout
    /// masks are drawn from `rng`; in eval mode `rng` is untouched.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        features: &[f64],
        train_mode: bool,
        rng: &mut R,
    ) -> Result<Vec<NigParams>> {
        if self.head != HeadKind::Evidential {
            return Err(Error::config("forward() needs an evidential head"));
        }
        let raw = self.forward_raw(features, train_mode.then_some(rng))?;
        Ok(head_activation(&raw))
    }

    /// Eval-mode evidential prediction.
    pub fn predict(&self, features: &[f64]) -> Result<Vec<NigParams>> {
        if self.head != HeadKind::Evidential {
            return Err(Error::config("predict() needs an evidential head"));
        }
        Ok(head_activation(&self.forward_raw::<ChaCha8Rng>(features, None)?))
    }

    /// Eval-mode point prediction (point head only).
    pub fn predict_point(&self, features: &[f64]) -> Result<Vec<f64>> {
        if self.head != HeadKind::Point {
            return Err(Error::config("predict_point() needs a point head"));
        }
        self.forward_raw::<ChaCha8Rng>(features, None)
    }

    /// Backpropagates `d_output` through one recorded pass, accumulating
    /// `scale * dL/dparams` into `grads`.
    fn accumulate(&self, trace: &Trace, d_output: &[f64], scale: f64, grads: &mut [f64]) {
        let mut delta = d_output.to_vec();
        for l in (0..self.layout.len()).rev() {
            let shape = self.layout[l];
            let input = &trace.inputs[l];
            {
                let (gw, gb) = grads[shape.offset..shape.offset + shape.len()].split_at_mut(shape.rows * shape.cols);
                for (r, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let sd = scale * d;
                    gb[r] += sd;
                    for (g, &x) in gw[r * shape.cols..(r + 1) * shape.cols].iter_mut().zip(input) {
                        *g += sd * x;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[shape.weights()];
            let mut d_in = vec![0.0; shape.cols];
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (di, &wv) in d_in.iter_mut().zip(&w[r * shape.cols..(r + 1) * shape.cols]) {
                    *di += d * wv;
                }
            }
            let pre = &trace.pre[l - 1];
            if let Some(mask) = &trace.masks[l - 1] {
                d_in.iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
            }
            d_in.iter_mut().zip(pre).for_each(|(v, &z)| *v *= gelu_grad(z));
            delta = d_in;
        }
    }

    /// Records a forward pass for later backpropagation.
    pub(crate) fn trace<R: Rng + ?Sized>(&self, features: &[f64], dropout_rng: Option<&mut R>) -> Result<Trace> {
        self.check_input(features)?;
        Ok(self.run(features, dropout_rng))
    }

    pub(crate) fn backprop(&self, trace: &Trace, d_output: &[f64], scale: f64, grads: &mut [f64]) {
        debug_assert_eq!(d_output.len(), self.output_width());
        debug_assert_eq!(grads.len(), self.params.len());
        self.accumulate(trace, d_output, scale, grads);
    }

    pub(crate) fn from_parts(
        input_dim: usize,
        hidden: Vec<usize>,
        n_attributes: usize,
        head: HeadKind,
        dropout: f64,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut net = Self::zeros(input_dim, &hidden, n_attributes, head, dropout)?;
        if params.len() != net.params.len() {
            return Err(Error::Dimension {
                expected: net.params.len(),
                got: params.len(),
                context: "parameter vector",
            });
        }
        net.params = params;
        Ok(net)
    }

    pub(crate) fn layer_slices(&self) -> Vec<(usize, usize, &[f64], &[f64])> {
        self.layout
            .iter()
            .map(|s| (s.rows, s.cols, &self.params[s.weights()], &self.params[s.bias()]))
            .collect()
    }
}

/// One recorded forward pass.
pub(crate) struct Trace {
    /// Input to each layer (post-dropout for hidden layers).
    inputs: Vec<Vec<f64>>,
    /// Hidden pre-activations.
    pre: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
    pub(crate) output: Vec<f64>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

/// Tanh approximation of GELU.
fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_K * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

fn positive(raw: f64) -> (f64, f64) {
    if raw > RAW_FLOOR {
        (softplus(raw), sigmoid(raw))
    } else {
        (softplus(RAW_FLOOR), 0.0)
    }
}

/// Maps raw head outputs `[gamma, upsilon, alpha, beta] * N` onto valid NIG
/// parameters: identity on gamma, softplus on the rest, plus one on alpha.
pub fn head_activation(raw: &[f64]) -> Vec<NigParams> {
    assert_eq!(raw.len() % 4, 0, "evidential head width must be a multiple of 4");
    raw.chunks_exact(4)
        .map(|c| {
            let (upsilon, _) = positive(c[1]);
            let (alpha, _) = positive(c[2]);
            let (beta, _) = positive(c[3]);
            NigParams::new_unchecked(c[0], upsilon, 1.0 + alpha, beta)
        })
        .collect()
}

/// Derivatives of [`head_activation`] with respect to each raw output.
fn head_activation_grad(raw: &[f64]) -> Vec<f64> {
    raw.chunks_exact(4)
        .flat_map(|c| [1.0, positive(c[1]).1, positive(c[2]).1, positive(c[3]).1])
        .collect()
}

/// Batch-mean evidential loss and its exact gradient with respect to every
/// network parameter.
///
/// With `dropout_rng` set the pass runs in train mode; masks are drawn in
/// item order, so reseeding the generator reproduces them exactly.
pub fn backward<R: Rng + ?Sized>(
    net: &Network,
    batch: &[&AnnotatedItem],
    epsilons: &[f64],
    lambdas: &[f64],
    cfg: &LossConfig,
    mut dropout_rng: Option<&mut R>,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    if net.head != HeadKind::Evidential {
        return Err(Error::config("evidential loss needs an evidential head"));
    }
    check_weights(epsilons, lambdas, net.n_attributes)?;
    let scale = 1.0 / batch.len() as f64;
    let mut grads = vec![0.0; net.params.len()];
    let mut loss = 0.0;
    for item in batch {
        if item.labels.len() != net.n_attributes {
            return Err(Error::Dimension {
                expected: net.n_attributes,
                got: item.labels.len(),
                context: "attributes per item",
            });
        }
        let trace = net.trace(&item.features, dropout_rng.as_deref_mut())?;
        let omegas = head_activation(&trace.output);
        let act_grad = head_activation_grad(&trace.output);
        let mut d_out = vec![0.0; trace.output.len()];
        for (n, (labels, omega)) in item.labels.iter().zip(&omegas).enumerate() {
            let (b, g) = attribute_loss_grad(labels, omega, lambdas[n], cfg);
            let eps = epsilons[n];
            loss += scale * eps * b.total;
            let o = 4 * n;
            d_out[o] = eps * g.d_gamma * act_grad[o];
            d_out[o + 1] = eps * g.d_upsilon * act_grad[o + 1];
            d_out[o + 2] = eps * g.d_alpha * act_grad[o + 2];
            d_out[o + 3] = eps * g.d_beta * act_grad[o + 3];
        }
        net.backprop(&trace, &d_out, scale, &mut grads);
    }
    Ok((loss, grads))
}

/// Batch-mean evidential loss without gradients.
pub fn batch_loss(
    net: &Network,
    batch: &[&AnnotatedItem],
    epsilons: &[f64],
    lambdas: &[f64],
    cfg: &LossConfig,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut total = 0.0;
    for item in batch {
        let omegas = net.predict(&item.features)?;
        total += crate::evidential::multi_attribute_loss_with(&item.labels, &omegas, epsilons, lambdas, cfg)?;
    }
    Ok(total / batch.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidential::LabelSet;
    use proptest::prelude::*;

    #[test]
    fn zero_network_outputs_softplus_zero() {
        let net = Network::zeros(5, &[7, 3], 3, HeadKind::Evidential, 0.3).unwrap();
        let out = net.predict(&[0.3, -1.0, 2.0, 0.0, 1.0]).unwrap();
        let ln2 = 2f64.ln();
        assert_eq!(out.len(), 3);
        for o in out {
            assert_eq!(o.params(), (0.0, ln2, 1.0 + ln2, ln2));
        }
    }

    #[test]
    fn layout_is_contiguous() {
        let net = Network::zeros(3, &[4], 2, HeadKind::Evidential, 0.0).unwrap();
        assert_eq!(net.layer_shapes(), vec![(4, 3), (8, 4)]);
        assert_eq!(net.n_params(), 4 * 4 + 8 * 5);
        assert_eq!(net.output_width(), 8);
        let point = Network::zeros(3, &[4], 2, HeadKind::Point, 0.0).unwrap();
        assert_eq!(point.output_width(), 2);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Network::zeros(0, &[4], 1, HeadKind::Point, 0.0).is_err());
        assert!(Network::zeros(2, &[4], 1, HeadKind::Point, 1.0).is_err());
        let net = Network::new(3, &[4], 1, HeadKind::Evidential, 0.0, 1).unwrap();
        assert!(matches!(net.predict(&[1.0, 2.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn eval_mode_is_deterministic_and_train_mode_is_seeded() {
        let net = Network::new(4, &[16, 16], 2, HeadKind::Evidential, 0.5, 9).unwrap();
        let x = [0.1, 0.2, -0.3, 0.9];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(net.forward(&x, false, &mut rng).unwrap(), net.forward(&x, false, &mut rng).unwrap());
        let a = net.forward(&x, true, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = net.forward(&x, true, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let c = net.forward(&x, true, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn head_clamps_very_negative_raw() {
        let out = head_activation(&[5.0, -1e3, -1e3, -1e3]);
        let (_, u, a, b) = out[0].params();
        assert!(u > 0.0 && a > 1.0 && b > 0.0);
    }

    fn item(features: Vec<f64>, labels: Vec<Vec<f64>>) -> AnnotatedItem {
        AnnotatedItem {
            id: "x".into(),
            features,
            labels: labels.into_iter().map(|l| LabelSet::new(l).unwrap()).collect(),
        }
    }

    #[test]
    fn duplicating_batch_leaves_loss_and_grads_unchanged() {
        let net = Network::new(3, &[6], 2, HeadKind::Evidential, 0.0, 2).unwrap();
        let a = item(vec![0.1, -0.5, 0.7], vec![vec![0.2, 0.9], vec![-1.0, 0.1, 0.3]]);
        let b = item(vec![0.9, 0.4, -0.2], vec![vec![1.5], vec![0.0, 0.5]]);
        let eps = [0.5, 0.5];
        let lam = [0.1, 0.1];
        let cfg = LossConfig::default();
        let (l1, g1) = backward::<ChaCha8Rng>(&net, &[&a, &b], &eps, &lam, &cfg, None).unwrap();
        let (l2, g2) = backward::<ChaCha8Rng>(&net, &[&a, &b, &a, &b], &eps, &lam, &cfg, None).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (x, y) in g1.iter().zip(&g2) {
            assert!((x - y).abs() < 1e-13 * x.abs().max(1.0));
        }
        let direct = batch_loss(&net, &[&a, &b], &eps, &lam, &cfg).unwrap();
        assert!((direct - l1).abs() < 1e-13);
    }

    #[test]
    fn empty_batch_rejected() {
        let net = Network::new(3, &[6], 1, HeadKind::Evidential, 0.0, 2).unwrap();
        let r = backward::<ChaCha8Rng>(&net, &[], &[1.0], &[0.1], &LossConfig::default(), None);
        assert!(matches!(r, Err(Error::Empty(_))));
    }

    proptest! {
        #[test]
        fn head_outputs_always_valid(raw in proptest::collection::vec(-1e3..1e3f64, 12)) {
            for o in head_activation(&raw) {
                let (g, u, a, b) = o.params();
                prop_assert!(g.is_finite());
                prop_assert!(u > 0.0 && u.is_finite());
                prop_assert!(a > 1.0 && a.is_finite());
                prop_assert!(b > 0.0 && b.is_finite());
                prop_assert!(NigParams::new(g, u, a, b).is_ok());
            }
        }
    }
}
