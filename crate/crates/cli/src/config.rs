//! Experiment configuration: one TOML file with flat typed sections, parsed
//! up front and validated as a whole so every problem is reported before any
//! training starts.

use std::path::Path;

use bayesid::data::RegressorConfig;
use bayesid::models::{ActivationKind, LstmSpec, MlpSpec, ModelSpec};
use bayesid::sbl::IdentificationConfig;
use serde::{Deserialize, Serialize};

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    #[serde(default)]
    pub split: SplitSection,
    pub regressors: RegressorConfig,
    pub model: ModelSection,
    #[serde(default)]
    pub identification: IdentificationSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Where the input–output record comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    /// Two-channel CSV file on disk.
    Csv,
    /// Built-in seeded linear ARX generator.
    Arx,
    /// Built-in seeded two-tank-like nonlinear generator.
    Tanks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub kind: DatasetKind,
    /// CSV only: file to read.
    pub path: Option<String>,
    /// CSV only: column names.
    pub u_column: String,
    pub y_column: String,
    pub time_column: Option<String>,
    /// Generators only: record length.
    pub samples: usize,
    /// Generators only: noise/input seed.
    pub seed: u64,
    /// Generators only: output noise standard deviation.
    pub noise_std: f64,
    /// ARX only: output-lag coefficients (y(t−1), y(t−2), …).
    pub a: Vec<f64>,
    /// ARX only: input-lag coefficients (u(t−1), u(t−2), …).
    pub b: Vec<f64>,
    /// Remove per-channel means before splitting.
    pub detrend: bool,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            kind: DatasetKind::Arx,
            path: None,
            u_column: "u".into(),
            y_column: "y".into(),
            time_column: None,
            samples: 800,
            seed: 1,
            noise_std: 0.01,
            a: vec![1.2, -0.5],
            b: vec![0.5, 0.25],
            detrend: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    /// Fraction of the record used for estimation; the rest validates.
    pub estimation_fraction: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            estimation_fraction: 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Lstm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    /// Hidden-layer widths; LSTM models take exactly one entry.
    pub units: Vec<usize>,
    /// Activation of every MLP hidden layer (the output is linear).
    #[serde(default = "default_activation")]
    pub activation: ActivationKind,
    #[serde(default = "default_true")]
    pub biases: bool,
}

fn default_activation() -> ActivationKind {
    ActivationKind::Tanh
}

fn default_true() -> bool {
    true
}

impl ModelSection {
    /// Concrete architecture for a given regressor width.
    pub fn to_spec(&self, input_dim: usize) -> ModelSpec {
        match self.kind {
            ModelKind::Mlp => ModelSpec::Mlp(MlpSpec {
                input_dim,
                hidden: self
                    .units
                    .iter()
                    .map(|&n| (n, self.activation))
                    .collect(),
                output_activation: ActivationKind::Identity,
                biases: self.biases,
            }),
            ModelKind::Lstm => ModelSpec::Lstm(LstmSpec {
                input_dim,
                hidden: self.units.first().copied().unwrap_or(0),
                biases: self.biases,
            }),
        }
    }
}

/// The identification loop's knobs plus the CLI-level worker count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct IdentificationSection {
    #[serde(flatten)]
    pub core: IdentificationConfig,
    /// Worker threads for the repeat pool; 0 means
    /// min(repeats, available parallelism).
    #[serde(default)]
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMode {
    /// Bands around one-step-ahead predictions on measured lags.
    OneStep,
    /// Bands around free-run trajectories (one weight draw per trajectory).
    FreeRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    /// Monte-Carlo draws behind each band.
    pub mc_samples: usize,
    pub seed: u64,
    pub mode: BandMode,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            mc_samples: 200,
            seed: 0,
            mode: BandMode::OneStep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Artifact directory; the BAYESID_OUTPUT_DIR environment variable
    /// overrides it.
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into() }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig, toml::de::Error> {
        toml::from_str(text)
    }

    /// Every violation that would stop `run`, in section order. An empty
    /// list means the experiment is runnable.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ds = &self.dataset;
        match ds.kind {
            DatasetKind::Csv => match &ds.path {
                None => out.push("dataset.path is required when dataset.kind = \"csv\"".into()),
                Some(p) => {
                    if !Path::new(p).exists() {
                        out.push(format!("dataset.path does not exist: {p}"));
                    }
                }
            },
            DatasetKind::Arx => {
                if ds.a.is_empty() && ds.b.is_empty() {
                    out.push("dataset.a and dataset.b cannot both be empty".into());
                }
            }
            DatasetKind::Tanks => {}
        }
        if ds.kind != DatasetKind::Csv {
            let needed = self.regressors.l_u.max(self.regressors.l_y) + 2;
            if ds.samples < needed {
                out.push(format!(
                    "dataset.samples = {} is too short for the requested lags (need at least {needed})",
                    ds.samples
                ));
            }
            if !ds.noise_std.is_finite() || ds.noise_std < 0.0 {
                out.push(format!(
                    "dataset.noise_std must be finite and nonnegative, got {}",
                    ds.noise_std
                ));
            }
        }
        let f = self.split.estimation_fraction;
        if !(f > 0.0 && f < 1.0) {
            out.push(format!(
                "split.estimation_fraction must lie strictly between 0 and 1, got {f}"
            ));
        }
        if self.model.units.is_empty() {
            out.push("model.units must list at least one layer width".into());
        } else if self.model.units.iter().any(|&n| n == 0) {
            out.push("model.units entries must be positive".into());
        }
        if self.model.kind == ModelKind::Lstm && self.model.units.len() != 1 {
            out.push(format!(
                "model.units: single recurrent layer only, got {} entries",
                self.model.units.len()
            ));
        }
        if let Err(e) = self.identification.core.validate() {
            out.push(format!("identification: {e}"));
        }
        if self.simulation.mc_samples < 2 {
            out.push(format!(
                "simulation.mc_samples must be at least 2, got {}",
                self.simulation.mc_samples
            ));
        }
        if self.output.dir.is_empty() {
            out.push("output.dir must not be empty".into());
        }
        out
    }
}

/// Stable 64-bit FNV-1a digest of any serialisable value's canonical JSON,
/// printed as 16 hex characters. Used to identify configs in comparison
/// tables.
pub fn digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serialises");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in json.bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}
