//! Network models used for system identification.
//!
//! Parameters live in flat lists of [`ParamMatrix`] slots (weight matrices,
//! plus optional bias rows), each carrying a boolean mask: entries whose mask
//! is `false` are pruned — they stay exactly zero through forward passes,
//! gradients, and optimizer steps. All matrices are stored input×output, so
//! a forward step is `a.dot(&w)`.

pub mod lstm;
pub mod mlp;
pub mod optim;
pub mod rnn;

pub use lstm::{LstmNetwork, LstmSpec};
pub use mlp::{MlpNetwork, MlpSpec};
pub use optim::{cosine_lr, AdamState};

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("non-finite gradient in slot {slot:?}")]
    NonFiniteGradient { slot: String },
    #[error("expected {expected} gradient matrices, got {got}")]
    GradientCount { got: usize, expected: usize },
    #[error("regressor dimension {got} does not match network input {expected}")]
    InputDim { got: usize, expected: usize },
    #[error("snapshot error: {0}")]
    Snapshot(#[from] serde_json::Error),
    #[error("{0}")]
    BadSpec(String),
}

/// Scalar activation with first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl ActivationKind {
    pub fn value(self, h: f64) -> f64 {
        match self {
            ActivationKind::Identity => h,
            ActivationKind::Relu => h.max(0.0),
            ActivationKind::Tanh => h.tanh(),
            ActivationKind::Sigmoid => 1.0 / (1.0 + (-h).exp()),
        }
    }

    pub fn deriv(self, h: f64) -> f64 {
        match self {
            ActivationKind::Identity => 1.0,
            ActivationKind::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Tanh => 1.0 - h.tanh().powi(2),
            ActivationKind::Sigmoid => {
                let s = self.value(h);
                s * (1.0 - s)
            }
        }
    }

    /// Second derivative; zero almost everywhere for relu (and at the kink,
    /// by the usual subgradient convention).
    pub fn second_deriv(self, h: f64) -> f64 {
        match self {
            ActivationKind::Identity | ActivationKind::Relu => 0.0,
            ActivationKind::Tanh => {
                let t = h.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            ActivationKind::Sigmoid => {
                let s = self.value(h);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
        }
    }
}

impl std::str::FromStr for ActivationKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "linear" => Ok(ActivationKind::Identity),
            "relu" => Ok(ActivationKind::Relu),
            "tanh" => Ok(ActivationKind::Tanh),
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            other => Err(format!("unknown activation {other:?}")),
        }
    }
}

/// One parameter matrix (or bias row) with its pruning mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamMatrix {
    pub name: String,
    pub values: Array2<f64>,
    /// `false` marks a pruned entry; pruned entries are pinned at zero.
    pub mask: Array2<bool>,
    /// Rows of this matrix index regressor entries directly (first layer /
    /// input-side matrices). Used for structured input selection.
    pub input_facing: bool,
}

impl ParamMatrix {
    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize, input_facing: bool) -> Self {
        ParamMatrix {
            name: name.into(),
            values: Array2::zeros((rows, cols)),
            mask: Array2::from_elem((rows, cols), true),
            input_facing,
        }
    }

    /// Seeds entries uniformly in ±1/√fan_in, where fan_in is the row count.
    pub fn init_uniform(&mut self, rng: &mut ChaCha8Rng) {
        let scale = 1.0 / (self.values.nrows() as f64).sqrt();
        for v in self.values.iter_mut() {
            *v = rng.random_range(-scale..scale);
        }
        self.apply_mask();
    }

    /// Pins pruned entries at zero.
    pub fn apply_mask(&mut self) {
        ndarray::Zip::from(&mut self.values)
            .and(&self.mask)
            .for_each(|v, &m| {
                if !m {
                    *v = 0.0;
                }
            });
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn pruned_count(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }
}

/// Architecture description, kept alongside reports for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Mlp(MlpSpec),
    Lstm(LstmSpec),
}

impl ModelSpec {
    pub fn input_dim(&self) -> usize {
        match self {
            ModelSpec::Mlp(s) => s.input_dim,
            ModelSpec::Lstm(s) => s.input_dim,
        }
    }
}

/// A trained (or training) network of either supported family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Network {
    Mlp(MlpNetwork),
    Lstm(LstmNetwork),
}

/// Rolling state carried through a one-step or free-run simulation.
#[derive(Debug, Clone)]
pub enum SimState {
    Stateless,
    Recurrent { h: Array1<f64>, c: Array1<f64> },
}

impl Network {
    /// Builds a freshly initialised network from a spec; weights are seeded
    /// uniformly in ±1/√fan_in, biases (when enabled) start at zero.
    pub fn init(spec: &ModelSpec, seed: u64) -> Network {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match spec {
            ModelSpec::Mlp(s) => Network::Mlp(MlpNetwork::init(s, &mut rng)),
            ModelSpec::Lstm(s) => Network::Lstm(LstmNetwork::init(s, &mut rng)),
        }
    }

    pub fn spec(&self) -> ModelSpec {
        match self {
            Network::Mlp(n) => ModelSpec::Mlp(n.spec()),
            Network::Lstm(n) => ModelSpec::Lstm(n.spec()),
        }
    }

    pub fn slots(&self) -> &[ParamMatrix] {
        match self {
            Network::Mlp(n) => &n.slots,
            Network::Lstm(n) => &n.slots,
        }
    }

    pub fn slots_mut(&mut self) -> &mut [ParamMatrix] {
        match self {
            Network::Mlp(n) => &mut n.slots,
            Network::Lstm(n) => &mut n.slots,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Network::Mlp(n) => n.input_dim,
            Network::Lstm(n) => n.input_dim,
        }
    }

    pub fn param_total(&self) -> usize {
        self.slots().iter().map(|s| s.len()).sum()
    }

    pub fn apply_masks(&mut self) {
        for s in self.slots_mut() {
            s.apply_mask();
        }
    }

    /// Regressor indices whose weights are fully pruned in every
    /// input-facing matrix — inputs the model no longer reads.
    pub fn pruned_regressors(&self) -> Vec<usize> {
        let slots = self.slots();
        let input_slots: Vec<&ParamMatrix> =
            slots.iter().filter(|s| s.input_facing).collect();
        if input_slots.is_empty() {
            return Vec::new();
        }
        (0..self.input_dim())
            .filter(|&r| {
                input_slots
                    .iter()
                    .all(|s| s.mask.row(r).iter().all(|&m| !m))
            })
            .collect()
    }

    /// One-step-ahead predictions over a regressor matrix. The LSTM starts
    /// from zero state and walks the rows in order.
    pub fn predict_series(&self, z: &Array2<f64>) -> Result<Array1<f64>, ModelError> {
        if z.ncols() != self.input_dim() {
            return Err(ModelError::InputDim {
                got: z.ncols(),
                expected: self.input_dim(),
            });
        }
        Ok(match self {
            Network::Mlp(n) => n.forward_batch(z),
            Network::Lstm(n) => n.forward(z).0,
        })
    }

    pub fn sim_state(&self) -> SimState {
        match self {
            Network::Mlp(_) => SimState::Stateless,
            Network::Lstm(n) => SimState::Recurrent {
                h: Array1::zeros(n.hidden),
                c: Array1::zeros(n.hidden),
            },
        }
    }

    /// Advances the simulation one step and returns the prediction.
    pub fn step_sim(&self, state: &mut SimState, z: ArrayView1<f64>) -> f64 {
        match (self, state) {
            (Network::Mlp(n), SimState::Stateless) => n.forward_one(z),
            (Network::Lstm(n), SimState::Recurrent { h, c }) => n.step(z, h, c),
            _ => panic!("simulation state does not match network family"),
        }
    }

    /// All parameters flattened slot by slot in row-major order.
    pub fn params_flat(&self) -> Vec<f64> {
        self.slots()
            .iter()
            .flat_map(|s| s.values.iter().copied())
            .collect()
    }

    /// Writes back a vector produced by [`Self::params_flat`].
    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let total = self.param_total();
        assert_eq!(flat.len(), total, "flat parameter length mismatch");
        let mut it = flat.iter();
        for s in self.slots_mut() {
            for w in s.values.iter_mut() {
                *w = *it.next().unwrap();
            }
        }
    }

    /// Self-describing snapshot, lossless for all weights and masks.
    pub fn to_snapshot_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_snapshot_json(text: &str) -> Result<Network, ModelError> {
        Ok(serde_json::from_str(text)?)
    }
}
