//! Verb implementations: run an experiment end to end, validate a config,
//! compare finished reports, and re-simulate a saved model.
//!
//! Human-readable progress goes to standard error; machine artifacts go to
//! files under the output directory. A successful `run` always emits the
//! same file set: `report.json`, `best_model.json`, `masks/cycle_NN.csv`,
//! and `simulation.csv`.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use bayesid::data::{build_regressors, ChannelOffsets, RegressionMatrix, TimeSeriesDataset};
use bayesid::prediction::{free_run_bands, one_step_bands, PosteriorModel, PredictiveBand};
use bayesid::sbl::{run_identification, BestModel, IdentificationReport, SblError};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::config::{digest, BandMode, DatasetKind, ExperimentConfig};
use crate::generators;

/// Environment variable that overrides `[output] dir`.
pub const OUTPUT_DIR_ENV: &str = "BAYESID_OUTPUT_DIR";

/// Everything a finished run wrote, as stored in `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Echo of the experiment configuration the run used.
    pub experiment: ExperimentConfig,
    /// Per-repeat, per-cycle outcome plus the winning model.
    pub report: IdentificationReport,
    /// Relative path of the best-model snapshot, when one exists.
    pub best_model_path: Option<String>,
}

/// Builds or loads the configured record.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<TimeSeriesDataset> {
    let ds = &cfg.dataset;
    let mut record = match ds.kind {
        DatasetKind::Csv => {
            let path = ds
                .path
                .as_ref()
                .ok_or_else(|| anyhow!("dataset.path is required for csv datasets"))?;
            let schema = bayesid::data::CsvSchema {
                u_column: ds.u_column.clone(),
                y_column: ds.y_column.clone(),
                time_column: ds.time_column.clone(),
            };
            bayesid::data::load_csv(path, &schema)
                .with_context(|| format!("reading {path}"))?
        }
        DatasetKind::Arx => generators::arx(ds.samples, ds.seed, ds.noise_std, &ds.a, &ds.b),
        DatasetKind::Tanks => generators::tanks(ds.samples, ds.seed, ds.noise_std),
    };
    if ds.detrend {
        record.detrend();
    }
    Ok(record)
}

/// The artifact directory, honouring the environment override.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    match std::env::var(OUTPUT_DIR_ENV) {
        Ok(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(&cfg.output.dir),
    }
}

fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    ExperimentConfig::from_toml(&text)
        .map_err(|e| anyhow!("config {} does not parse: {e}", path.display()))
}

/// `validate` verb: print one diagnostic per line; empty output means the
/// config is runnable. Exit 0 when runnable, 2 otherwise.
pub fn validate(config_path: &Path) -> Result<u8> {
    let cfg = parse_config(config_path)?;
    let diags = cfg.diagnostics();
    for d in &diags {
        println!("{d}");
    }
    Ok(if diags.is_empty() { 0 } else { 2 })
}

/// `run` verb. Exit 0 on success, 3 when every repeat diverged; config
/// problems surface as errors (exit 2).
pub fn run(config_path: &Path) -> Result<u8> {
    let cfg = parse_config(config_path)?;
    let diags = cfg.diagnostics();
    if !diags.is_empty() {
        bail!("invalid config:\n{}", diags.join("\n"));
    }

    let dataset = load_dataset(&cfg)?;
    let n_est = (dataset.len() as f64 * cfg.split.estimation_fraction).round() as usize;
    let (est_ds, val_ds) = dataset.split(n_est)?;
    let lags = cfg.regressors;
    let est = build_regressors(&est_ds, &lags)?;
    let val = build_regressors(&val_ds, &lags)?;
    let spec = cfg.model.to_spec(lags.dimension());

    let requested = cfg.identification.workers;
    let parallelism = std::thread::available_parallelism().map_or(1, usize::from);
    let workers = if requested == 0 {
        cfg.identification.core.repeats.min(parallelism).max(1)
    } else {
        requested
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")?;
    let id_report = pool
        .install(|| run_identification(&cfg.identification.core, &est, &val, &lags, &spec))
        .map_err(|e: SblError| anyhow!("identification setup failed: {e}"))?;

    for rec in &id_report.repeats {
        for c in &rec.cycles {
            eprintln!(
                "repeat {} cycle {}: train_loss {:.4e} val_rmse {:.4e} sparsity {:.1}%",
                rec.repeat,
                c.cycle,
                c.train_loss,
                c.val_rmse,
                100.0 * c.sparsity
            );
        }
        if let Some(msg) = &rec.diverged {
            eprintln!("repeat {} diverged: {msg}", rec.repeat);
        }
    }

    let out = output_dir(&cfg);
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let best_model_path = id_report.best.as_ref().map(|_| "best_model.json".to_string());
    let run_report = RunReport {
        experiment: cfg.clone(),
        report: id_report,
        best_model_path,
    };
    write_json(&out.join("report.json"), &run_report)?;

    let Some(best) = &run_report.report.best else {
        eprintln!("all repeats diverged; no model to report");
        return Ok(3);
    };

    let pm = PosteriorModel {
        network: best.network.clone(),
        variances: best.variances.clone(),
        zeta: best.zeta,
    };
    write_json(&out.join("best_model.json"), &pm)?;
    write_masks(
        &out.join("masks"),
        &run_report.report.repeats[best.repeat].cycle_masks,
        best,
    )?;
    let sim = simulate_bands(&cfg, &pm, &val_ds, &val)?;
    write_simulation(&out.join("simulation.csv"), &sim)?;

    eprintln!(
        "best model: repeat {} cycle {} val_rmse {:.4e} sparsity {:.1}% -> {}",
        best.repeat,
        best.cycle,
        best.val_rmse,
        100.0 * best.sparsity,
        out.display()
    );
    Ok(0)
}

/// `simulate` verb: load a saved posterior snapshot, rebuild the configured
/// dataset, and write a fresh bands CSV into the output directory.
pub fn simulate(model_path: &Path, config_path: &Path) -> Result<u8> {
    let cfg = parse_config(config_path)?;
    let pm: PosteriorModel = serde_json::from_str(
        &fs::read_to_string(model_path)
            .with_context(|| format!("reading model {}", model_path.display()))?,
    )
    .map_err(|e| anyhow!("model snapshot {} does not parse: {e}", model_path.display()))?;

    let dataset = load_dataset(&cfg)?;
    let lags = cfg.regressors;
    if pm.network.input_dim() != lags.dimension() {
        bail!(
            "model expects {} regressors but the lag structure gives {}",
            pm.network.input_dim(),
            lags.dimension()
        );
    }
    let rows = build_regressors(&dataset, &lags)?;
    let sim = simulate_bands(&cfg, &pm, &dataset, &rows)?;
    let out = output_dir(&cfg);
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_simulation(&out.join("simulation.csv"), &sim)?;
    eprintln!("wrote {}", out.join("simulation.csv").display());
    Ok(0)
}

/// `compare` verb: table of finished runs, best validation RMSE ascending.
pub fn compare(report_paths: &[PathBuf]) -> Result<String> {
    if report_paths.is_empty() {
        bail!("compare needs at least one report");
    }
    struct Row {
        rmse: f64,
        sparsity: Option<f64>,
        digest: String,
        path: String,
    }
    let mut rows = Vec::with_capacity(report_paths.len());
    for path in report_paths {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading report {}", path.display()))?;
        let report: RunReport = serde_json::from_str(&text)
            .map_err(|e| anyhow!("report {} does not parse: {e}", path.display()))?;
        let (rmse, sparsity) = match &report.report.best {
            Some(b) => (b.val_rmse, Some(b.sparsity)),
            None => (f64::INFINITY, None),
        };
        rows.push(Row {
            rmse,
            sparsity,
            digest: digest(&report.experiment),
            path: path.display().to_string(),
        });
    }
    rows.sort_by(|a, b| {
        a.rmse
            .partial_cmp(&b.rmse)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.path.cmp(&b.path))
    });

    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:<9} {:<16} {}\n",
        "val_rmse", "sparsity", "config", "report"
    ));
    for r in rows {
        let rmse = if r.rmse.is_finite() {
            format!("{:.6}", r.rmse)
        } else {
            "diverged".to_string()
        };
        let sp = match r.sparsity {
            Some(s) => format!("{:.2}%", 100.0 * s),
            None => "-".to_string(),
        };
        out.push_str(&format!("{rmse:<12} {sp:<9} {:<16} {}\n", r.digest, r.path));
    }
    Ok(out)
}

/// One simulation row of the bands CSV.
pub struct SimRow {
    pub t: f64,
    pub u: f64,
    pub y_true: f64,
    pub y_mean: f64,
    pub y_std: f64,
}

/// Predictive band over a dataset's regressor rows, mapped back to plant
/// units (the detrending offsets are re-added to inputs, measurements, and
/// predictive means; spreads are shift-invariant).
fn simulate_bands(
    cfg: &ExperimentConfig,
    pm: &PosteriorModel,
    ds: &TimeSeriesDataset,
    rows: &RegressionMatrix,
) -> Result<Vec<SimRow>> {
    let off = ds.offsets.unwrap_or(ChannelOffsets { u: 0.0, y: 0.0 });
    let sim = cfg.simulation;
    let (band, start): (PredictiveBand, usize) = match sim.mode {
        BandMode::OneStep => (
            one_step_bands(pm, &rows.z, sim.mc_samples, sim.seed)?,
            rows.first_index,
        ),
        BandMode::FreeRun => {
            let s0 = cfg.regressors.l_u.max(cfg.regressors.l_y);
            let u = ndarray::Array1::from_vec(ds.u.clone());
            (
                free_run_bands(pm, u.view(), &ds.y[..s0], &cfg.regressors, sim.mc_samples, sim.seed)?,
                s0,
            )
        }
    };
    let mut out = Vec::with_capacity(band.mean.len());
    for k in 0..band.mean.len() {
        let s = start + k;
        out.push(SimRow {
            t: ds.time[s],
            u: ds.u[s] + off.u,
            y_true: ds.y[s] + off.y,
            y_mean: band.mean[k] + off.y,
            y_std: band.std[k],
        });
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serialising artifact")?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// One CSV of 0/1 per cycle for the winning repeat: 1 = weight still live.
fn write_masks(dir: &Path, cycle_masks: &[Vec<Array2<bool>>], best: &BestModel) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let names: Vec<&str> = best
        .network
        .slots()
        .iter()
        .map(|s| s.name.as_str())
        .collect();
    for (cycle, masks) in cycle_masks.iter().enumerate() {
        let path = dir.join(format!("cycle_{cycle:02}.csv"));
        let mut f = fs::File::create(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        writeln!(f, "matrix,row,col,live")?;
        for (name, mask) in names.iter().zip(masks) {
            for ((r, c), &m) in mask.indexed_iter() {
                writeln!(f, "{name},{r},{c},{}", u8::from(m))?;
            }
        }
    }
    Ok(())
}

fn write_simulation(path: &Path, rows: &[SimRow]) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    writeln!(f, "t,u,y_true,y_mean,y_std")?;
    for r in rows {
        writeln!(f, "{},{},{},{},{}", r.t, r.u, r.y_true, r.y_mean, r.y_std)?;
    }
    Ok(())
}
