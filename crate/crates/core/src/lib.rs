//! Evidential regression over multi-annotator labels.
//!
//! A feed-forward network predicts, for each target attribute, the four
//! hyper-parameters `(gamma, upsilon, alpha, beta)` of a normal-inverse-gamma
//! (NIG) prior over the mean and variance of the Gaussian that generated the
//! annotators' labels. Marginalising the Gaussian gives a Student-t
//! predictive density, and the NIG moments give closed-form aleatoric,
//! epistemic and total uncertainty.
//!
//! Module map:
//!
//! - [`special`]: log-gamma, digamma, softplus, Student-t and NIG log-densities,
//!   plus a quadrature oracle for the marginal likelihood.
//! - [`evidential`]: [`NigParams`], the uncertainty decomposition and every
//!   loss term together with its analytic gradient.
//! - [`net`]: the network, evidential/point heads, backprop, Adam, training
//!   and checkpoints.
//! - [`data`]: synthetic multi-annotator generator, JSON-lines IO, splits.
//! - [`metrics`]: CCC, RMSE, NLL(avg)/NLL(all), KDE scoring, reject curves.
//! - [`baselines`]: CCC-loss point networks, deep ensembles and MC dropout.

pub mod baselines;
pub mod data;
pub mod error;
pub mod evidential;
pub mod metrics;
pub mod net;
pub mod quadrature;
pub mod special;

pub use data::{AnnotatedItem, Dataset, SyntheticTruth};
pub use error::{Error, Result};
pub use evidential::{LabelSet, LossBreakdown, LossConfig, NigParams, NllKind, UncertaintyReport};
pub use metrics::{EvalSummary, RejectCurve};
pub use net::{AdamState, HeadKind, Network, TrainConfig};
pub use special::StudentTParams;

/// Attribute names used when none are given.
pub const DEFAULT_ATTRIBUTES: [&str; 3] = ["valence", "arousal", "dominance"];
