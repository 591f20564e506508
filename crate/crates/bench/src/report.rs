//! Report emission.
//!
//! CSV columns, in order: `sweep_value, trials, failed_trials, mse_rotation,
//! mse_bearing, bias_rotation, bias_bearing, mse_rotation_initial,
//! mse_bearing_initial, crb_rotation, crb_bearing, sigma2_rel_error_median,
//! sigma2_rel_mse, mean_degeneracy_ratio, fallback_rate,
//! mean_pure_rotation_statistic, coplanarity, mean_runtime_us`. Absent values
//! are empty cells.
//!
//! JSON: `{"metadata": {...}, "series": [...]}` where metadata carries the
//! run config (without `output_path`), the Euler convention and the crate
//! version.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{OutputFormat, RunConfig};
use crate::error::{BenchError, Result};
use crate::monte_carlo::MetricSeries;

pub const EULER_CONVENTION: &str = "intrinsic Z-Y-X; euler_angles_deg = [roll, pitch, yaw] in degrees";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub experiment: String,
    pub base_seed: u64,
    pub euler_convention: String,
    pub generator: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub metadata: ReportMetadata,
    pub series: Vec<MetricSeries>,
}

impl JsonReport {
    pub fn new(series: &[MetricSeries], cfg: &RunConfig) -> Self {
        Self {
            metadata: ReportMetadata {
                experiment: cfg.experiment.to_string(),
                base_seed: cfg.base_seed,
                euler_convention: EULER_CONVENTION.into(),
                generator: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).into(),
                // Where the report is written is not part of the result.
                config: RunConfig {
                    output_path: None,
                    ..cfg.clone()
                },
            },
            series: series.to_vec(),
        }
    }
}

pub fn write_report<W: Write>(mut out: W, series: &[MetricSeries], cfg: &RunConfig, format: OutputFormat) -> Result<()> {
    if series.is_empty() {
        return Err(BenchError::Data("no series to report".into()));
    }
    let io = |e: std::io::Error| BenchError::io("<report>", e);
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for s in series {
                w.serialize(s).map_err(|e| BenchError::Data(e.to_string()))?;
            }
            w.flush().map_err(io)?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &JsonReport::new(series, cfg))
                .map_err(|e| BenchError::Data(e.to_string()))?;
            writeln!(out).map_err(io)?;
        }
    }
    Ok(())
}

/// Writes the report to `path`, creating or truncating it.
pub fn emit_report(series: &[MetricSeries], cfg: &RunConfig, path: &Path, format: OutputFormat) -> Result<()> {
    let mut buf = Vec::new();
    write_report(&mut buf, series, cfg, format)?;
    std::fs::write(path, buf).map_err(|e| BenchError::io(path, e))
}
