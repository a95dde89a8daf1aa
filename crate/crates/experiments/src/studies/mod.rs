//! The five study kinds behind the CLI subcommands, plus shared plumbing:
//! derived per-repetition seeds, stationary reference pools, and surrogate
//! LSI constants for bound overlays.

use mfld_core::dynamics::{run_mfld, InitLaw, IntegratorConfig, Trajectory};
use mfld_core::model::{Ensemble, ProblemSpec};
use mfld_core::rng::Streams;

use crate::config::{ExperimentConfig, StudyKind};
use crate::report::StudyReport;
use crate::{ExperimentError, Result};

pub mod bounds_study;
pub mod convergence;
pub mod poc;
pub mod run;
pub mod scaling;
pub mod verify;

/// Distinct derived seeds, one per repetition.
pub fn derived_seeds(seed: u64, count: usize) -> Vec<u64> {
    let root = Streams::new(seed);
    (0..count).map(|i| root.child(i as u64).seed()).collect()
}

pub fn integrator(cfg: &ExperimentConfig, n: usize, seed: u64) -> IntegratorConfig {
    IntegratorConfig {
        eta: cfg.eta,
        steps: cfg.steps,
        seed,
        init: InitLaw::Gaussian { n, scale: cfg.init_scale },
        snapshot_every: cfg.snapshot_every,
    }
}

/// Integrator for the `run` study, honoring an explicit binary snapshot
/// when configured.
pub fn run_integrator(cfg: &ExperimentConfig, seed: u64) -> Result<IntegratorConfig> {
    let init = match &cfg.init_ensemble {
        Some(path) => InitLaw::Explicit { ensemble: mfld_core::dynamics::io::read_ensemble(path)? },
        None => InitLaw::Gaussian { n: cfg.particles, scale: cfg.init_scale },
    };
    Ok(IntegratorConfig {
        eta: cfg.eta,
        steps: cfg.steps,
        seed,
        init,
        snapshot_every: cfg.snapshot_every,
    })
}

/// Steps at or past the burn-in cut.
pub fn post_burn_in(traj: &Trajectory, fraction: f64) -> Vec<&mfld_core::dynamics::Snapshot> {
    let cut = (traj.last().step as f64 * fraction) as usize;
    traj.snapshots.iter().filter(|s| s.step >= cut && s.step > 0).collect()
}

/// Pool the particles of all post-burn-in snapshots into one ensemble, the
/// long-run stationary proxy.
pub fn stationary_pool(
    spec: &ProblemSpec,
    traj: &Trajectory,
    fraction: f64,
) -> Result<Ensemble> {
    let snaps = post_burn_in(traj, fraction);
    if snaps.is_empty() {
        return Err(ExperimentError::Precondition(
            "no post-burn-in snapshots; increase steps or snapshot cadence".into(),
        ));
    }
    let d = spec.param_dim();
    let mut coords = Vec::new();
    for s in snaps {
        coords.extend_from_slice(s.ensemble.as_flat());
    }
    Ok(Ensemble::from_flat(d, coords)?)
}

/// Run the reference system and pool it.
pub fn reference_pool(
    spec: &ProblemSpec,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(Ensemble, Trajectory)> {
    let traj = run_mfld(spec, &integrator(cfg, cfg.n_ref, seed))?;
    let pool = stationary_pool(spec, &traj, cfg.burn_in_fraction)?;
    Ok((pool, traj))
}

/// Uniform-LSI surrogate for the proximal Gibbs family: the bounded risk
/// part perturbs the strongly log-concave quadratic reference, so
/// `alpha >= (2 lambda'/lambda) exp(-4 b_inf / lambda)` with `b_inf` the
/// sup-norm of the risk first variation. Exact (Bakry-Emery) when the
/// bounded part vanishes.
pub fn alpha_uniform_surrogate(spec: &ProblemSpec) -> f64 {
    let b_h = spec.neuron.output_bound().unwrap_or(0.0);
    let b_inf = spec.loss.deriv_bound(b_h, spec.data.max_abs_label()) * b_h;
    (2.0 * spec.lambda_prime / spec.lambda) * (-4.0 * b_inf / spec.lambda).exp()
}

/// Dispatch a study by its configured kind.
pub fn run_study(cfg: &ExperimentConfig) -> Result<StudyReport> {
    match cfg.kind {
        StudyKind::Run => run::study_run(cfg),
        StudyKind::Scaling => scaling::study_scaling(cfg),
        StudyKind::Convergence => convergence::study_convergence(cfg),
        StudyKind::Poc => poc::study_poc(cfg),
        StudyKind::Verify => verify::study_verify(cfg),
        StudyKind::Bounds => bounds_study::study_bounds(cfg),
    }
}
