//! Study reports: typed measurement rows, fitted slopes, bound overlays,
//! and pass/fail verdicts. A report is a pure value; emission to CSV, JSON,
//! and SVG is deterministic, so replays reproduce files byte for byte.

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Verdict { name: name.into(), pass, detail }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub name: String,
    pub slope: f64,
    pub slope_se: f64,
    pub points: usize,
}

/// One trajectory snapshot row (the `run` CSV schema).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrajRow {
    pub step: usize,
    pub energy_f: f64,
    pub risk_f0: f64,
    pub mean_sq_norm: f64,
    pub grad_norm_mean: f64,
}

/// One scaling-study cell (per N, lambda, seed).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub lambda: f64,
    pub seed: u64,
    pub bregman_per_particle: f64,
    pub bregman_stderr: f64,
    pub kl_marginal: f64,
    pub kl_stderr: f64,
}

/// One propagation-of-chaos time slice (per k, N).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PocRow {
    pub k: usize,
    pub n: usize,
    pub w2_sq_mean: f64,
    pub stderr: f64,
    pub bound_value: f64,
}

/// One convergence-study time slice.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvRow {
    pub k: usize,
    pub kl_est: f64,
    pub stderr: f64,
    pub second_moment: f64,
    pub lemma1_bound: f64,
    pub envelope: f64,
}

/// One bound-table row.
#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub kind: String,
    pub grid_value: f64,
    pub bound_value: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "schema", rename_all = "kebab-case")]
pub enum StudyData {
    Run { rows: Vec<TrajRow> },
    Scaling { rows: Vec<ScalingRow> },
    Poc { rows: Vec<PocRow> },
    Convergence { rows: Vec<ConvRow> },
    Bounds { rows: Vec<BoundRow> },
    Verify,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub kind: String,
    /// Full configuration echo; with the seed list this reproduces every
    /// number in the report.
    pub config: serde_json::Value,
    pub seed_list: Vec<u64>,
    pub data: StudyData,
    pub fits: Vec<SlopeFit>,
    pub verdicts: Vec<Verdict>,
}

impl StudyReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}
