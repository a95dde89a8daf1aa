//! Plain trajectory run: integrate the configured problem once, record the
//! per-snapshot diagnostics as the trajectory CSV, and optionally dump the
//! final ensemble in the binary snapshot format.

use mfld_core::dynamics::{io, run_mfld};

use crate::config::ExperimentConfig;
use crate::report::{StudyData, StudyReport, TrajRow, Verdict};
use crate::studies::run_integrator;
use crate::Result;

pub fn study_run(cfg: &ExperimentConfig) -> Result<StudyReport> {
    let spec = cfg.problem()?;
    let traj = run_mfld(&spec, &run_integrator(cfg, cfg.seed)?)?;
    let rows: Vec<TrajRow> = traj
        .snapshots
        .iter()
        .map(|s| TrajRow {
            step: s.step,
            energy_f: s.diag.energy,
            risk_f0: s.diag.risk,
            mean_sq_norm: s.diag.mean_sq_norm,
            grad_norm_mean: s.diag.grad_norm_mean,
        })
        .collect();
    if cfg.save_ensemble {
        std::fs::create_dir_all(&cfg.out)
            .map_err(|e| crate::ExperimentError::Io(format!("{}: {e}", cfg.out.display())))?;
        io::write_ensemble(&cfg.out.join("final_ensemble.bin"), &traj.last().ensemble)?;
    }
    let final_energy = traj.last().diag.energy;
    let verdicts = vec![Verdict::new(
        "run_completed",
        final_energy.is_finite(),
        format!("{} steps, final energy_f {final_energy}", traj.last().step),
    )];
    Ok(StudyReport {
        kind: "run".into(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        seed_list: vec![cfg.seed],
        data: StudyData::Run { rows },
        fits: vec![],
        verdicts,
    })
}
