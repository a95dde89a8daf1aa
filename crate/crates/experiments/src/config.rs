//! Experiment configuration: a flat key-value text file whose keys mirror
//! the field names below, plus command-line overrides for seed and output
//! directory. Unknown keys are rejected so typos fail loudly.
//!
//! Dataset files are delimited text with a header row; every column except
//! the last holds a feature, the last column holds the label.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use mfld_core::model::{DataPoint, Dataset, Loss, Neuron, ProblemSpec};

use crate::toys::{toy_problem, ToyId};
use crate::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    Run,
    Scaling,
    Convergence,
    Poc,
    Verify,
    Bounds,
}

impl StudyKind {
    pub fn parse(s: &str) -> Option<StudyKind> {
        match s {
            "run" => Some(StudyKind::Run),
            "scaling" => Some(StudyKind::Scaling),
            "convergence" => Some(StudyKind::Convergence),
            "poc" => Some(StudyKind::Poc),
            "verify" => Some(StudyKind::Verify),
            "bounds" => Some(StudyKind::Bounds),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StudyKind::Run => "run",
            StudyKind::Scaling => "scaling",
            StudyKind::Convergence => "convergence",
            StudyKind::Poc => "poc",
            StudyKind::Verify => "verify",
            StudyKind::Bounds => "bounds",
        }
    }
}

/// Everything a study needs; `Default` gives the documented defaults and a
/// config file overrides fields by name.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub kind: StudyKind,
    /// Built-in problem: `a` (linear-feature quadratic, 1-d), `b` (1-d tanh
    /// regression, squared loss), `c` (2-d tanh classification, logistic).
    pub toy: Option<ToyId>,
    pub neuron: Option<String>,
    pub quad_c: f64,
    pub quad_dim: usize,
    pub loss: Option<String>,
    pub dataset: Option<PathBuf>,
    pub lambda: f64,
    pub lambda_prime: f64,

    pub eta: f64,
    pub steps: usize,
    pub particles: usize,
    pub init_scale: f64,
    /// Start `run` from a binary ensemble snapshot instead of the Gaussian
    /// init law.
    pub init_ensemble: Option<PathBuf>,
    pub snapshot_every: Option<usize>,
    pub seed: u64,
    /// Number of repetitions; each gets a seed derived from `seed`.
    pub seeds: usize,

    pub n_values: Vec<usize>,
    pub lambda_values: Vec<f64>,
    /// Coarse step-size pair for the discretization-bias direction probe.
    pub eta_coarse: f64,

    pub n_ref: usize,
    pub trials: usize,
    pub burn_in_fraction: f64,
    /// Per-slice sample count for the empirical W2 estimator.
    pub w2_points: usize,
    /// Seed groups used for W2 error bars.
    pub w2_groups: usize,
    /// Sample count per k-NN KL estimate.
    pub kl_samples: usize,
    /// Stationary per-marginal KL target in nats.
    pub kl_target: f64,

    /// Bound-study constants (user-supplied where the theory leaves them
    /// abstract; prior-work constants default to 1).
    pub alpha: Option<f64>,
    pub alpha_bar: Option<f64>,
    pub delta0: f64,
    pub delta0_n: f64,
    pub c_prior: f64,
    pub c1_prior: f64,
    pub c2_prior: f64,

    pub out: PathBuf,
    /// CLI mode, not an experiment parameter; excluded from the config echo
    /// so replayed runs regenerate byte-identical files.
    #[serde(skip)]
    pub replay: bool,
    pub save_ensemble: bool,
}

impl ExperimentConfig {
    pub fn defaults(kind: StudyKind) -> Self {
        ExperimentConfig {
            kind,
            toy: None,
            neuron: None,
            quad_c: 1.0,
            quad_dim: 1,
            loss: None,
            dataset: None,
            lambda: 0.5,
            lambda_prime: 0.25,
            eta: 0.02,
            steps: 2000,
            particles: 256,
            init_scale: 1.0,
            init_ensemble: None,
            snapshot_every: None,
            seed: 42,
            seeds: match kind {
                StudyKind::Scaling | StudyKind::Poc => 8,
                _ => 4,
            },
            n_values: vec![16, 64, 256],
            lambda_values: match kind {
                StudyKind::Scaling => vec![0.25, 0.5, 1.0],
                _ => vec![],
            },
            eta_coarse: 0.2,
            n_ref: 4096,
            trials: match kind {
                StudyKind::Verify => 100_000,
                _ => 10_000,
            },
            burn_in_fraction: 0.5,
            w2_points: 512,
            w2_groups: 4,
            kl_samples: 10_000,
            kl_target: 0.02,
            alpha: None,
            alpha_bar: None,
            delta0: 1.0,
            delta0_n: 1.0,
            c_prior: 1.0,
            c1_prior: 1.0,
            c2_prior: 1.0,
            out: PathBuf::from("out"),
            replay: false,
            save_ensemble: false,
        }
    }

    /// Parse `key = value` lines; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let mut pairs = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ExperimentError::Config(format!(
                    "{}:{}: expected `key = value`",
                    path.display(),
                    lineno + 1
                ))
            })?;
            pairs.insert(key.trim().to_string(), value.trim().to_string());
        }
        for (key, value) in pairs {
            self.apply_pair(&key, &value)
                .map_err(|e| ExperimentError::Config(format!("{}: {key}: {e}", path.display())))?;
        }
        Ok(())
    }

    fn apply_pair(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse `{v}`"))
        }
        fn list<T: std::str::FromStr>(v: &str) -> Result<Vec<T>, String> {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| format!("cannot parse `{s}`")))
                .collect()
        }
        match key {
            "kind" => {
                let k = StudyKind::parse(value).ok_or(format!("unknown kind `{value}`"))?;
                if k != self.kind {
                    return Err(format!(
                        "config kind `{value}` does not match the `{}` subcommand",
                        self.kind.name()
                    ));
                }
            }
            "toy" => self.toy = Some(ToyId::parse(value).ok_or(format!("unknown toy `{value}`"))?),
            "neuron" => self.neuron = Some(value.into()),
            "quad_c" => self.quad_c = num(value)?,
            "quad_dim" => self.quad_dim = num(value)?,
            "loss" => self.loss = Some(value.into()),
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "lambda" => self.lambda = num(value)?,
            "lambda_prime" => self.lambda_prime = num(value)?,
            "eta" => self.eta = num(value)?,
            "steps" => self.steps = num(value)?,
            "particles" => self.particles = num(value)?,
            "init_scale" => self.init_scale = num(value)?,
            "init_ensemble" => self.init_ensemble = Some(PathBuf::from(value)),
            "snapshot_every" => self.snapshot_every = Some(num(value)?),
            "seed" => self.seed = num(value)?,
            "seeds" => self.seeds = num(value)?,
            "n_values" => self.n_values = list(value)?,
            "lambda_values" => self.lambda_values = list(value)?,
            "eta_coarse" => self.eta_coarse = num(value)?,
            "n_ref" => self.n_ref = num(value)?,
            "trials" => self.trials = num(value)?,
            "burn_in_fraction" => self.burn_in_fraction = num(value)?,
            "w2_points" => self.w2_points = num(value)?,
            "w2_groups" => self.w2_groups = num(value)?,
            "kl_samples" => self.kl_samples = num(value)?,
            "kl_target" => self.kl_target = num(value)?,
            "alpha" => self.alpha = Some(num(value)?),
            "alpha_bar" => self.alpha_bar = Some(num(value)?),
            "delta0" => self.delta0 = num(value)?,
            "delta0_n" => self.delta0_n = num(value)?,
            "c_prior" => self.c_prior = num(value)?,
            "c1_prior" => self.c1_prior = num(value)?,
            "c2_prior" => self.c2_prior = num(value)?,
            "out" => self.out = PathBuf::from(value),
            "save_ensemble" => self.save_ensemble = num(value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Materialize the problem: a toy, or explicit neuron/loss/dataset keys.
    pub fn problem(&self) -> Result<ProblemSpec, ExperimentError> {
        self.problem_at(self.lambda, self.lambda_prime)
    }

    /// Same problem with swept regularization weights.
    pub fn problem_at(
        &self,
        lambda: f64,
        lambda_prime: f64,
    ) -> Result<ProblemSpec, ExperimentError> {
        if let Some(toy) = self.toy {
            return Ok(toy_problem(toy, lambda, lambda_prime)?);
        }
        let neuron = match self.neuron.as_deref() {
            Some("tanh-linear") => Neuron::TanhLinear,
            Some("tanh-gated") => Neuron::TanhGated,
            Some("quadratic") => Neuron::Quadratic { c: self.quad_c, dim: self.quad_dim },
            Some(other) => {
                return Err(ExperimentError::Config(format!("unknown neuron `{other}`")))
            }
            None => return Err(ExperimentError::Config("set `toy` or `neuron`".into())),
        };
        let loss = match self.loss.as_deref() {
            Some("squared") => Loss::Squared,
            Some("logistic") => Loss::Logistic,
            Some("linear") => Loss::Linear,
            Some(other) => return Err(ExperimentError::Config(format!("unknown loss `{other}`"))),
            None => return Err(ExperimentError::Config("set `toy` or `loss`".into())),
        };
        let dataset = match &self.dataset {
            Some(path) => load_dataset(path)?,
            None => return Err(ExperimentError::Config("set `toy` or `dataset`".into())),
        };
        Ok(ProblemSpec::new(neuron, loss, dataset, lambda, lambda_prime)?)
    }

    /// Swept lambda list; defaults to the configured single lambda. The
    /// quadratic weight is held proportional: lambda' = lambda *
    /// (lambda_prime / lambda).
    pub fn lambda_sweep(&self) -> Vec<(f64, f64)> {
        let ratio = self.lambda_prime / self.lambda;
        if self.lambda_values.is_empty() {
            vec![(self.lambda, self.lambda_prime)]
        } else {
            self.lambda_values.iter().map(|l| (*l, l * ratio)).collect()
        }
    }
}

/// Load a dataset file: delimited text (comma or whitespace), one header
/// row, one row per example, feature columns then the label column.
pub fn load_dataset(path: &Path) -> Result<Dataset, ExperimentError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 0 {
            continue; // header row with column names
        }
        let fields: Vec<&str> = if line.contains(',') {
            line.split(',').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        if fields.len() < 2 {
            return Err(ExperimentError::Config(format!(
                "{}:{}: need at least one feature and a label",
                path.display(),
                lineno + 1
            )));
        }
        let mut vals = Vec::with_capacity(fields.len());
        for f in &fields {
            vals.push(f.parse::<f64>().map_err(|_| {
                ExperimentError::Config(format!(
                    "{}:{}: cannot parse `{f}`",
                    path.display(),
                    lineno + 1
                ))
            })?);
        }
        let y = vals.pop().expect("checked length");
        rows.push(DataPoint { z: vals, y });
    }
    Ok(Dataset::new(rows)?)
}
