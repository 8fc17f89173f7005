//! Time-series ingestion and regressor construction.
//!
//! A dataset is a single-input/single-output record sampled on a uniform
//! grid. Multi-output plants are handled upstream by building one dataset
//! (and one model) per output channel.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors produced while loading or shaping data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("column {name:?} not found in header {header:?}")]
    MissingColumn { name: String, header: Vec<String> },
    #[error("non-numeric value {value:?} at data row {row}, column {column:?}")]
    NonNumeric {
        value: String,
        row: usize,
        column: String,
    },
    #[error("dataset is empty")]
    Empty,
    #[error("series of length {len} too short for lags l_u={l_u}, l_y={l_y}")]
    SeriesTooShort { len: usize, l_u: usize, l_y: usize },
    #[error("split point {n_est} outside (0, {len})")]
    BadSplit { n_est: usize, len: usize },
}

/// Mean levels removed from the two channels by [`TimeSeriesDataset::detrend`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelOffsets {
    pub u: f64,
    pub y: f64,
}

/// Uniformly sampled input/output record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesDataset {
    pub time: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub sample_period: f64,
    /// Offsets already subtracted from `u`/`y`, if the record was detrended.
    pub offsets: Option<ChannelOffsets>,
}

/// Column mapping used when reading a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub u_column: String,
    pub y_column: String,
    /// Optional time column; sample indices 0,1,2,… are used when absent.
    pub time_column: Option<String>,
}

/// Lag depths for the regressor window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressorConfig {
    pub l_u: usize,
    pub l_y: usize,
}

impl RegressorConfig {
    /// Width of one regressor row: current input, `l_u` input lags and
    /// `l_y` output lags.
    pub fn dimension(&self) -> usize {
        self.l_u + self.l_y + 1
    }
}

/// Lagged design matrix with one-step-ahead targets.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionMatrix {
    /// One row per usable time step, `dimension()` columns.
    pub z: Array2<f64>,
    /// Measured output aligned with each row.
    pub targets: Array1<f64>,
    /// Index into the source series of the first target sample.
    pub first_index: usize,
}

impl TimeSeriesDataset {
    /// Builds a dataset from raw channels, with sample indices as time.
    pub fn from_channels(u: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(u.len(), y.len(), "channel lengths differ");
        let time = (0..u.len()).map(|i| i as f64).collect();
        TimeSeriesDataset {
            time,
            u,
            y,
            sample_period: 1.0,
            offsets: None,
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Removes the per-channel mean from `u` and `y` and records the offsets.
    ///
    /// Returns the offsets so a caller can map simulated outputs back to
    /// plant units by adding them again.
    pub fn detrend(&mut self) -> ChannelOffsets {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        let offsets = ChannelOffsets {
            u: mean(&self.u),
            y: mean(&self.y),
        };
        for x in &mut self.u {
            *x -= offsets.u;
        }
        for x in &mut self.y {
            *x -= offsets.y;
        }
        self.offsets = Some(match self.offsets {
            Some(prev) => ChannelOffsets {
                u: prev.u + offsets.u,
                y: prev.y + offsets.y,
            },
            None => offsets,
        });
        offsets
    }

    /// Splits the record into (estimation, validation) at sample `n_est`.
    pub fn split(&self, n_est: usize) -> Result<(TimeSeriesDataset, TimeSeriesDataset), DataError> {
        if n_est == 0 || n_est >= self.len() {
            return Err(DataError::BadSplit {
                n_est,
                len: self.len(),
            });
        }
        let cut = |v: &[f64], range: std::ops::Range<usize>| v[range].to_vec();
        let est = TimeSeriesDataset {
            time: cut(&self.time, 0..n_est),
            u: cut(&self.u, 0..n_est),
            y: cut(&self.y, 0..n_est),
            sample_period: self.sample_period,
            offsets: self.offsets,
        };
        let val = TimeSeriesDataset {
            time: cut(&self.time, n_est..self.len()),
            u: cut(&self.u, n_est..self.len()),
            y: cut(&self.y, n_est..self.len()),
            sample_period: self.sample_period,
            offsets: self.offsets,
        };
        Ok((est, val))
    }
}

/// Reads a two-channel record from a headed CSV file.
///
/// Cells must parse as finite numbers; the first offending cell is reported
/// with its data row (0-based, excluding the header) and column name.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<TimeSeriesDataset, DataError> {
    let path_str = path.as_ref().display().to_string();
    let mut reader = csv::Reader::from_path(path.as_ref()).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => DataError::Io {
            path: path_str.clone(),
            source: match e.into_kind() {
                csv::ErrorKind::Io(io) => io,
                _ => unreachable!(),
            },
        },
        _ => DataError::Csv {
            path: path_str.clone(),
            source: e,
        },
    })?;

    let header: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::Csv {
            path: path_str.clone(),
            source: e,
        })?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();

    let col_index = |name: &str| -> Result<usize, DataError> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn {
                name: name.to_string(),
                header: header.clone(),
            })
    };

    let u_idx = col_index(&schema.u_column)?;
    let y_idx = col_index(&schema.y_column)?;
    let t_idx = schema
        .time_column
        .as_deref()
        .map(col_index)
        .transpose()?;

    let mut u = Vec::new();
    let mut y = Vec::new();
    let mut time = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Csv {
            path: path_str.clone(),
            source: e,
        })?;
        let parse = |idx: usize, column: &str| -> Result<f64, DataError> {
            let raw = record.get(idx).unwrap_or("").trim();
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(DataError::NonNumeric {
                    value: raw.to_string(),
                    row,
                    column: column.to_string(),
                }),
            }
        };
        u.push(parse(u_idx, &schema.u_column)?);
        y.push(parse(y_idx, &schema.y_column)?);
        if let Some(t) = t_idx {
            time.push(parse(t, schema.time_column.as_deref().unwrap())?);
        }
    }
    if u.is_empty() {
        return Err(DataError::Empty);
    }
    if time.is_empty() {
        time = (0..u.len()).map(|i| i as f64).collect();
    }
    let sample_period = if time.len() > 1 {
        (time[time.len() - 1] - time[0]) / (time.len() - 1) as f64
    } else {
        1.0
    };
    Ok(TimeSeriesDataset {
        time,
        u,
        y,
        sample_period,
        offsets: None,
    })
}

/// Builds the lagged design matrix.
///
/// Row `k` predicts `y[s]` (with `s = first_index + k`) from
/// `[u[s], u[s-1], …, u[s-l_u], y[s-1], …, y[s-l_y]]`. Rows that would need
/// history from before the start of the record are dropped, which leaves
/// `len - max(l_u, l_y)` rows.
pub fn build_regressors(
    ds: &TimeSeriesDataset,
    cfg: &RegressorConfig,
) -> Result<RegressionMatrix, DataError> {
    let t = ds.len();
    let depth = cfg.l_u.max(cfg.l_y);
    if t <= depth + 1 {
        return Err(DataError::SeriesTooShort {
            len: t,
            l_u: cfg.l_u,
            l_y: cfg.l_y,
        });
    }
    let rows = t - depth;
    let dim = cfg.dimension();
    let mut z = Array2::zeros((rows, dim));
    let mut targets = Array1::zeros(rows);
    for k in 0..rows {
        let s = depth + k;
        for j in 0..=cfg.l_u {
            z[[k, j]] = ds.u[s - j];
        }
        for j in 1..=cfg.l_y {
            z[[k, cfg.l_u + j]] = ds.y[s - j];
        }
        targets[k] = ds.y[s];
    }
    Ok(RegressionMatrix {
        z,
        targets,
        first_index: depth,
    })
}
