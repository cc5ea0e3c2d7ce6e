//! Error metrics, confusion matrices, and the seeded experiment runner.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::Method;
use crate::geometry::DoaGrid;

mod experiment;

pub use experiment::{
    grid_scenes, run_experiment, write_outputs, DoaSet, ExperimentConfig, ExperimentOutput,
    GridScene, GroupReport, MaskKind, SceneGrid, CONFIG_VERSION,
};

/// `|true − estimate|` on the linear [0°, 180°] domain; no wrap-around.
pub fn absolute_error(true_doa: f64, est_doa: f64) -> Result<f64> {
    for v in [true_doa, est_doa] {
        if !(0.0..=180.0).contains(&v) {
            return Err(Error::invalid(format!("DOA {v} outside [0, 180]")));
        }
    }
    Ok((true_doa - est_doa).abs())
}

/// One estimate of one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub scene_id: usize,
    pub room: usize,
    pub t60: f64,
    pub smd: f64,
    pub true_doa: f64,
    /// DOA of the interfering source, if any.
    pub interferer_doa: Option<f64>,
    pub sir_db: Option<f64>,
    pub snr_db: Option<f64>,
    pub method: Method,
    pub mask: String,
    pub frames_used: usize,
    pub est_doa: f64,
    pub ae: f64,
    /// Squared SPS discrepancy to SRP-PHAT of the clean direct target.
    pub sps_loss: f64,
}

/// Hit thresholds in degrees; both comparisons are strict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub acc_deg: f64,
    pub psacc_deg: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            acc_deg: 5.0,
            psacc_deg: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub count: usize,
    pub mae: f64,
    pub medae: f64,
    /// Percent of errors below the accuracy threshold.
    pub acc: f64,
    /// Percent of errors below the pseudo-accuracy threshold.
    pub psacc: f64,
}

pub fn summarize(records: &[EvalRecord]) -> Result<EvalReport> {
    summarize_with(records, Thresholds::default())
}

pub fn summarize_with(records: &[EvalRecord], thresholds: Thresholds) -> Result<EvalReport> {
    let errors: Vec<f64> = records.iter().map(|r| r.ae).collect();
    summarize_errors(&errors, thresholds)
}

/// Metrics over raw absolute errors.
pub fn summarize_errors(errors: &[f64], thresholds: Thresholds) -> Result<EvalReport> {
    if errors.is_empty() {
        return Err(Error::EmptyInput("no records to summarize"));
    }
    let n = errors.len() as f64;
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let medae = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    let pct = |thr: f64| 100.0 * errors.iter().filter(|&&e| e < thr).count() as f64 / n;
    Ok(EvalReport {
        count: errors.len(),
        mae: errors.iter().sum::<f64>() / n,
        medae,
        acc: pct(thresholds.acc_deg),
        psacc: pct(thresholds.psacc_deg),
    })
}

/// Counts of (true, estimated) DOA pairs binned to the nearest grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub grid: DoaGrid,
    /// Rows index the true DOA, columns the estimate.
    pub counts: Array2<u64>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.sum()
    }
}

pub fn confusion_matrix(records: &[EvalRecord], grid: &DoaGrid) -> ConfusionMatrix {
    let mut counts = Array2::<u64>::zeros((grid.len(), grid.len()));
    for r in records {
        counts[[
            grid.nearest_index(r.true_doa),
            grid.nearest_index(r.est_doa),
        ]] += 1;
    }
    ConfusionMatrix {
        grid: grid.clone(),
        counts,
    }
}
