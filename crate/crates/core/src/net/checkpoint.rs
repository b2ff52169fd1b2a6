//! Versioned JSON checkpoint container.
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "kind": "evidential" | "ensemble" | "mc_dropout",
//!   "attributes": ["valence", ...],
//!   "config": { ...resolved training config echo... },
//!   "networks": [
//!     { "input_dim": d, "hidden": [h1, ...], "n_attributes": N,
//!       "head": "evidential" | "point", "dropout": p,
//!       "layers": [ { "rows": r, "cols": c,
//!                     "weights": [r*c values, row-major], "bias": [r values] }, ... ] }
//!   ]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so save then load is
//! bit-exact and identical models give identical bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HeadKind, Network};
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// One network with an evidential head.
    Evidential,
    /// Independently seeded point networks.
    Ensemble,
    /// One point network sampled with dropout at inference.
    McDropout,
}

impl ModelKind {
    pub fn head(self) -> HeadKind {
        match self {
            ModelKind::Evidential => HeadKind::Evidential,
            ModelKind::Ensemble | ModelKind::McDropout => HeadKind::Point,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub n_attributes: usize,
    pub head: HeadKind,
    pub dropout: f64,
    pub layers: Vec<LayerRecord>,
}

impl From<&Network> for NetworkRecord {
    fn from(net: &Network) -> Self {
        Self {
            input_dim: net.input_dim(),
            hidden: net.hidden().to_vec(),
            n_attributes: net.n_attributes(),
            head: net.head(),
            dropout: net.dropout(),
            layers: net
                .layer_slices()
                .into_iter()
                .map(|(rows, cols, w, b)| LayerRecord {
                    rows,
                    cols,
                    weights: w.to_vec(),
                    bias: b.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<NetworkRecord> for Network {
    type Error = Error;

    fn try_from(rec: NetworkRecord) -> Result<Self> {
        let expected = Network::zeros(rec.input_dim, &rec.hidden, rec.n_attributes, rec.head, rec.dropout)
            .map_err(|e| Error::Checkpoint(e.to_string()))?
            .layer_shapes();
        let got: Vec<(usize, usize)> = rec.layers.iter().map(|l| (l.rows, l.cols)).collect();
        if expected != got {
            return Err(Error::Checkpoint(format!("layer shapes {got:?} do not match header {expected:?}")));
        }
        let mut params = Vec::new();
        for l in rec.layers {
            if l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(Error::Checkpoint(format!("layer {}x{} has wrong parameter count", l.rows, l.cols)));
            }
            params.extend(l.weights);
            params.extend(l.bias);
        }
        Network::from_parts(rec.input_dim, rec.hidden, rec.n_attributes, rec.head, rec.dropout, params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub kind: ModelKind,
    pub attributes: Vec<String>,
    pub config: serde_json::Value,
    pub networks: Vec<NetworkRecord>,
}

impl Checkpoint {
    pub fn new(kind: ModelKind, attributes: Vec<String>, config: serde_json::Value, nets: &[Network]) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            kind,
            attributes,
            config,
            networks: nets.iter().map(NetworkRecord::from).collect(),
        }
    }

    pub fn networks(&self) -> Result<Vec<Network>> {
        let nets = self
            .networks
            .iter()
            .cloned()
            .map(Network::try_from)
            .collect::<Result<Vec<_>>>()?;
        if nets.is_empty() {
            return Err(Error::Checkpoint("no networks".into()));
        }
        if let Some(n) = nets.iter().find(|n| n.head() != self.kind.head()) {
            return Err(Error::Checkpoint(format!("{:?} checkpoint holds a {:?} head", self.kind, n.head())));
        }
        Ok(nets)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("checkpoint serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {CHECKPOINT_FORMAT_VERSION})",
                ckpt.format_version
            )));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let net = Network::new(3, &[5, 4], 2, HeadKind::Evidential, 0.3, 11).unwrap();
        let ckpt = Checkpoint::new(
            ModelKind::Evidential,
            vec!["a".into(), "b".into()],
            serde_json::json!({"seed": 11}),
            std::slice::from_ref(&net),
        );
        let text = ckpt.to_json();
        let back = Checkpoint::from_json(&text).unwrap();
        assert_eq!(back, ckpt);
        let restored = back.networks().unwrap().remove(0);
        for (a, b) in net.params().iter().zip(restored.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn rejects_wrong_version_and_shapes() {
        let net = Network::new(2, &[3], 1, HeadKind::Point, 0.0, 1).unwrap();
        let mut ckpt = Checkpoint::new(ModelKind::Ensemble, vec!["a".into()], serde_json::Value::Null, &[net]);
        ckpt.format_version = 99;
        assert!(Checkpoint::from_json(&ckpt.to_json()).is_err());
        ckpt.format_version = CHECKPOINT_FORMAT_VERSION;
        ckpt.networks[0].layers[0].bias.pop();
        assert!(ckpt.networks().is_err());
    }

    #[test]
    fn kind_must_match_head() {
        let net = Network::new(2, &[3], 1, HeadKind::Point, 0.0, 1).unwrap();
        let ckpt = Checkpoint::new(ModelKind::Evidential, vec!["a".into()], serde_json::Value::Null, &[net]);
        assert!(ckpt.networks().is_err());
    }
}
