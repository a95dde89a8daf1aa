//! Discrete-time finite-particle dynamics: noisy gradient descent on the
//! particle system,
//!
//! `x_{k+1}^i = x_k^i - eta * grad dF(mu_k)/dmu (x_k^i) + sqrt(2 lambda eta) xi_k^i`,
//!
//! with all gradients evaluated at the frozen input ensemble. Randomness is
//! counter-based per `(seed, step, particle, coordinate)`, so trajectories
//! are pure functions of `(spec, config)`, parallel evaluation order cannot
//! change results, and particle `i` of two coupled systems can share a noise
//! stream regardless of how many particles each system holds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{Ensemble, ProblemSpec};
use crate::rng::{tag, Streams};
use crate::{Error, Result};

/// Coordinates beyond this magnitude abort the run with a step index rather
/// than propagating NaN.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Initial law of the particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitLaw {
    /// `N` particles drawn i.i.d. from `N(0, scale^2 I_d)`.
    Gaussian { n: usize, scale: f64 },
    /// Start from the given ensemble.
    Explicit { ensemble: Ensemble },
}

impl InitLaw {
    pub fn particle_count(&self) -> usize {
        match self {
            InitLaw::Gaussian { n, .. } => *n,
            InitLaw::Explicit { ensemble } => ensemble.len(),
        }
    }

    /// `E ||X_0||^2` per particle (Gaussian closed form, or the empirical
    /// value of an explicit start).
    pub fn second_moment(&self, dim: usize) -> f64 {
        match self {
            InitLaw::Gaussian { scale, .. } => scale * scale * dim as f64,
            InitLaw::Explicit { ensemble } => ensemble.mean_sq_norm(),
        }
    }
}

/// Integrator configuration. The entropy weight `lambda` lives in the
/// `ProblemSpec`; duplicating it here would invite inconsistency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub eta: f64,
    pub steps: usize,
    pub seed: u64,
    pub init: InitLaw,
    /// Snapshot cadence; `None` selects `ceil(steps / 200)`.
    pub snapshot_every: Option<usize>,
}

impl IntegratorConfig {
    pub fn new(eta: f64, steps: usize, seed: u64, init: InitLaw) -> Self {
        IntegratorConfig { eta, steps, seed, init, snapshot_every: None }
    }

    pub fn validate(&self, spec: &ProblemSpec) -> Result<()> {
        if self.eta.is_nan() || self.eta < 0.0 || !self.eta.is_finite() {
            return Err(Error::InvalidParam(format!("eta must be >= 0, got {}", self.eta)));
        }
        let el = self.eta * spec.lambda_prime;
        if el >= 0.5 {
            return Err(Error::StepSizeTooLarge(el));
        }
        if self.init.particle_count() == 0 {
            return Err(Error::EmptyEnsemble);
        }
        Ok(())
    }

    pub fn cadence(&self) -> usize {
        match self.snapshot_every {
            Some(c) if c > 0 => c,
            _ => self.steps.div_ceil(200).max(1),
        }
    }
}

/// Per-snapshot diagnostics, recomputable from the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiag {
    pub energy: f64,
    pub risk: f64,
    pub mean_sq_norm: f64,
    pub grad_norm_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub ensemble: Ensemble,
    pub diag: StepDiag,
}

/// A seeded time series of ensembles with per-step diagnostics. Snapshot
/// step indices are strictly increasing; step 0 and the final step are
/// always present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory holds at least the initial snapshot")
    }

    /// `(step, mean ||x||^2)` per snapshot.
    pub fn second_moment_trace(&self) -> Vec<(usize, f64)> {
        self.snapshots.iter().map(|s| (s.step, s.diag.mean_sq_norm)).collect()
    }

    pub fn energy_trace(&self) -> Vec<(usize, f64)> {
        self.snapshots.iter().map(|s| (s.step, s.diag.energy)).collect()
    }
}

/// Noise coupling between a system and a larger reference system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMode {
    /// Each system consumes its own stream derived from the same seed.
    Independent,
    /// Particle `i` of the finite system shares the stream of particle `i`
    /// of the reference (requires identical eta and init law).
    SharedNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingPlan {
    pub mode: CouplingMode,
    pub n_ref: usize,
}

impl CouplingPlan {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.n_ref < n {
            return Err(Error::InvalidParam(format!(
                "reference particle count {} must be >= {}",
                self.n_ref, n
            )));
        }
        Ok(())
    }
}

fn init_ensemble(spec: &ProblemSpec, init: &InitLaw, streams: &Streams) -> Result<Ensemble> {
    let d = spec.param_dim();
    match init {
        InitLaw::Gaussian { n, scale } => {
            let coords: Vec<f64> = (0..*n)
                .flat_map(|i| (0..d).map(move |c| (i, c)))
                .map(|(i, c)| scale * streams.normal(tag::INIT, i as u64, c as u64, 0))
                .collect();
            Ensemble::from_flat(d, coords)
        }
        InitLaw::Explicit { ensemble } => {
            if ensemble.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: ensemble.dim() });
            }
            Ok(ensemble.clone())
        }
    }
}

/// One step of the particle dynamics with explicit noise (`N * d` standard
/// normal draws, row-major). Gradients are evaluated at the frozen input
/// ensemble; the prediction vector is computed once and shared.
pub fn mfld_step(spec: &ProblemSpec, e: &Ensemble, eta: f64, noise: &[f64]) -> Result<Ensemble> {
    let el = eta * spec.lambda_prime;
    if eta.is_nan() || eta < 0.0 || el >= 0.5 {
        return Err(Error::StepSizeTooLarge(el));
    }
    let (n, d) = (e.len(), e.dim());
    if noise.len() != n * d {
        return Err(Error::NoiseShape { expected: n * d, got: noise.len() });
    }
    let weights = spec.variation_weights(&spec.predictions(e)?);
    let sigma = (2.0 * spec.lambda * eta).sqrt();
    let mut out = vec![0.0; n * d];
    out.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
        let x = e.particle(i);
        spec.gradient_at(&weights, x, row);
        for c in 0..d {
            row[c] = x[c] - eta * row[c] + sigma * noise[i * d + c];
        }
    });
    Ok(Ensemble::from_flat_unchecked(d, out))
}

fn diagnostics_for(spec: &ProblemSpec, e: &Ensemble) -> StepDiag {
    let pred = spec.predictions(e).expect("ensemble validated at init");
    let weights = spec.variation_weights(&pred);
    let risk = spec.risk_from(&pred);
    let d = e.dim();
    let grad_norm_sum: f64 = e
        .iter()
        .map(|x| {
            let mut g = vec![0.0; d];
            spec.gradient_at(&weights, x, &mut g);
            g.iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .sum();
    StepDiag {
        energy: risk + spec.lambda_prime * e.mean_sq_norm(),
        risk,
        mean_sq_norm: e.mean_sq_norm(),
        grad_norm_mean: grad_norm_sum / e.len() as f64,
    }
}

fn guard(e: &Ensemble, step: usize) -> Result<()> {
    let m = e.max_abs_coord();
    if m.is_nan() || m > DIVERGENCE_LIMIT {
        return Err(Error::Diverged { step, limit: DIVERGENCE_LIMIT });
    }
    Ok(())
}

struct Driver<'a> {
    spec: &'a ProblemSpec,
    eta: f64,
    sigma: f64,
    streams: Streams,
}

impl Driver<'_> {
    fn advance(&self, e: &Ensemble, step: usize) -> Ensemble {
        let d = e.dim();
        let weights = self.spec.variation_weights(&self.spec.predictions(e).expect("valid"));
        let mut out = vec![0.0; e.len() * d];
        out.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
            let x = e.particle(i);
            self.spec.gradient_at(&weights, x, row);
            for c in 0..d {
                let xi = self.streams.normal(tag::STEP, step as u64, i as u64, c as u64);
                row[c] = x[c] - self.eta * row[c] + self.sigma * xi;
            }
        });
        Ensemble::from_flat_unchecked(d, out)
    }
}

/// Run the dynamics for `cfg.steps` steps. A deterministic function of
/// `(spec, cfg)` including the seed; snapshots are recorded at the cadence
/// plus the initial and final states.
pub fn run_mfld(spec: &ProblemSpec, cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate(spec)?;
    let streams = Streams::new(cfg.seed);
    let driver =
        Driver { spec, eta: cfg.eta, sigma: (2.0 * spec.lambda * cfg.eta).sqrt(), streams };
    let cadence = cfg.cadence();
    let mut e = init_ensemble(spec, &cfg.init, &streams)?;
    guard(&e, 0)?;
    let mut snapshots =
        vec![Snapshot { step: 0, diag: diagnostics_for(spec, &e), ensemble: e.clone() }];
    for k in 0..cfg.steps {
        e = driver.advance(&e, k);
        let step = k + 1;
        guard(&e, step)?;
        if step % cadence == 0 || step == cfg.steps {
            snapshots.push(Snapshot { step, diag: diagnostics_for(spec, &e), ensemble: e.clone() });
        }
    }
    Ok(Trajectory { snapshots })
}

/// Advance an `N`-particle system and an `n_ref`-particle reference in
/// lockstep. Under shared noise both systems read the stream keyed by
/// `(seed, step, particle)`, so particle `i < N` of both consumes identical
/// draws each step; in independent mode the reference reads a disjoint
/// stream derived from the same seed.
pub fn run_coupled(
    spec: &ProblemSpec,
    cfg: &IntegratorConfig,
    plan: &CouplingPlan,
) -> Result<(Trajectory, Trajectory)> {
    cfg.validate(spec)?;
    plan.validate(cfg.init.particle_count())?;
    let ref_init = match &cfg.init {
        InitLaw::Gaussian { scale, .. } => InitLaw::Gaussian { n: plan.n_ref, scale: *scale },
        InitLaw::Explicit { .. } => {
            return Err(Error::InvalidParam(
                "coupled runs require a Gaussian init law shared by both systems".into(),
            ))
        }
    };
    let ref_cfg = IntegratorConfig {
        eta: cfg.eta,
        steps: cfg.steps,
        seed: match plan.mode {
            CouplingMode::SharedNoise => cfg.seed,
            CouplingMode::Independent => Streams::new(cfg.seed).child(1).seed(),
        },
        init: ref_init,
        snapshot_every: cfg.snapshot_every,
    };
    let main = run_mfld(spec, cfg)?;
    let reference = run_mfld(spec, &ref_cfg)?;
    Ok((main, reference))
}

/// Standalone form of the per-snapshot second-moment trace.
pub fn second_moment_trace(traj: &Trajectory) -> Vec<(usize, f64)> {
    traj.second_moment_trace()
}

pub mod io {
    //! Binary ensemble snapshots: a 16-byte header (magic `MFE1`, particle
    //! count, dimension, reserved word; u32 little-endian) followed by
    //! row-major `N x d` little-endian f64 coordinates.

    use std::io::{Read, Write};
    use std::path::Path;

    use super::*;

    pub const MAGIC: [u8; 4] = *b"MFE1";

    pub fn write_ensemble(path: &Path, e: &Ensemble) -> Result<()> {
        let mut buf = Vec::with_capacity(16 + e.as_flat().len() * 8);
        buf.extend_from_slice(&MAGIC);
        buf.extend_from_slice(&(e.len() as u32).to_le_bytes());
        buf.extend_from_slice(&(e.dim() as u32).to_le_bytes());
        buf.extend_from_slice(&0u32.to_le_bytes());
        for v in e.as_flat() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn read_ensemble(path: &Path) -> Result<Ensemble> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 16 || bytes[0..4] != MAGIC {
            return Err(Error::Format(format!("{}: not an ensemble snapshot", path.display())));
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let expected = 16 + n * d * 8;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "{}: expected {} bytes for {}x{}, got {}",
                path.display(),
                expected,
                n,
                d,
                bytes.len()
            )));
        }
        let coords = bytes[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ensemble::from_flat(d, coords)
    }
}
