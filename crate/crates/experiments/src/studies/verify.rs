//! Identity-verification suite over the three built-in toys: the bridge
//! identity, Bregman nonnegativity and the quadratic-loss closed form, both
//! objective-gap identities, the KL upper bound's nonnegative right-hand
//! side, the variance step behind the particle error bound, and a
//! finite-difference battery on the Wasserstein gradient (with a sign-flip
//! negative control that must fail).
//!
//! None of the checks estimates entropy or KL in dN dimensions; identities
//! are exercised with product measures whose entropy tensorizes.

use mfld_core::diagnostics::{
    bregman, bridge_residual, kl_knn, prop1_gap_check, prop1_gap_check_closed,
    prop2_inequality_check, variance_bound_mc, AnalyticGaussian, GaussianSampler, MeasureStats,
    PointSampler, PoolSampler, DEFAULT_K,
};
use mfld_core::dynamics::run_mfld;
use mfld_core::model::{Ensemble, Functional, Loss, ProblemSpec};
use mfld_core::rng::{tag, Streams};

use crate::config::ExperimentConfig;
use crate::report::{StudyData, StudyReport, Verdict};
use crate::studies::{integrator, post_burn_in, reference_pool};
use crate::toys::{toy_problem, ToyId};
use crate::Result;

pub const BRIDGE_TOL: f64 = 1e-9;
pub const BRIDGE_TOL_LINEAR: f64 = 1e-12;
pub const GRADIENT_FD_TOL: f64 = 1e-6;
const FD_STEP: f64 = 1e-5;

fn random_ensemble(spec: &ProblemSpec, s: &Streams, run: u64, n: usize, scale: f64) -> Ensemble {
    let d = spec.param_dim();
    Ensemble::from_flat(
        d,
        (0..n * d).map(|i| scale * s.normal(tag::ORACLE, run, i as u64, 0)).collect(),
    )
    .expect("finite draws")
}

/// Max |gradient - central difference of the first variation| over probes;
/// the gradient function is injectable so a corrupted one can serve as the
/// negative control.
pub fn gradient_fd_battery<G>(spec: &ProblemSpec, seed: u64, probes: usize, grad: G) -> f64
where
    G: Fn(&ProblemSpec, &Ensemble, &[f64]) -> Vec<f64>,
{
    let s = Streams::new(seed);
    let d = spec.param_dim();
    let mut worst = 0.0f64;
    for p in 0..probes {
        let e = random_ensemble(spec, &s, p as u64, 6, 1.0);
        let x: Vec<f64> =
            (0..d).map(|c| 1.5 * s.normal(tag::ORACLE, 500 + p as u64, c as u64, 1)).collect();
        let g = grad(spec, &e, &x);
        for c in 0..d {
            let mut xp = x.clone();
            xp[c] += FD_STEP;
            let mut xm = x.clone();
            xm[c] -= FD_STEP;
            let fd = (spec.first_variation(&e, &xp, Functional::Full).unwrap()
                - spec.first_variation(&e, &xm, Functional::Full).unwrap())
                / (2.0 * FD_STEP);
            worst = worst.max((g[c] - fd).abs());
        }
    }
    worst
}

/// Bridge-identity battery: `count` random (spec, base, probes) draws.
/// Returns the worst residual.
pub fn bridge_battery(specs: &[ProblemSpec], seed: u64, count: usize) -> Result<f64> {
    let s = Streams::new(seed);
    let mut worst = 0.0f64;
    for i in 0..count {
        let spec = &specs[i % specs.len()];
        let base = MeasureStats::from_ensemble(
            spec,
            &random_ensemble(spec, &s, 10_000 + i as u64, 6, 1.0),
        )?;
        let probes: Vec<Ensemble> = (0..4)
            .map(|p| random_ensemble(spec, &s, 20_000 + (i * 8 + p) as u64, 5 + (i % 4), 1.2))
            .collect();
        worst = worst.max(bridge_residual(spec, &base, &probes)?);
    }
    Ok(worst)
}

pub fn study_verify(cfg: &ExperimentConfig) -> Result<StudyReport> {
    let lambda = cfg.lambda;
    let ratio = cfg.lambda_prime / cfg.lambda;
    let toy_a = toy_problem(ToyId::A, lambda, lambda * ratio)?;
    let toy_b = toy_problem(ToyId::B, lambda, lambda * ratio)?;
    let toy_c = toy_problem(ToyId::C, lambda, lambda * ratio)?;
    let nonlinear = [toy_b.clone(), toy_c.clone()];
    let mut verdicts = Vec::new();
    let root = Streams::new(cfg.seed);

    // Bridge identity on nonlinear losses, and tighter on the linear toy.
    let worst = bridge_battery(&nonlinear, root.child(1).seed(), 50)?;
    verdicts.push(Verdict::new(
        "bridge_identity",
        worst < BRIDGE_TOL,
        format!("worst residual {worst:.3e} over 50 draws (tolerance {BRIDGE_TOL:.0e})"),
    ));
    let worst_lin = bridge_battery(std::slice::from_ref(&toy_a), root.child(2).seed(), 10)?;
    verdicts.push(Verdict::new(
        "bridge_identity_linear",
        worst_lin < BRIDGE_TOL_LINEAR,
        format!("worst residual {worst_lin:.3e} (tolerance {BRIDGE_TOL_LINEAR:.0e})"),
    ));

    // Bregman battery: nonnegativity, self-divergence, quadratic closed form.
    {
        let s = root.child(3);
        let mut min_val = f64::INFINITY;
        let mut worst_gap = 0.0f64;
        let mut self_ok = true;
        for i in 0..500u64 {
            let spec = &nonlinear[(i % 2) as usize];
            let a = MeasureStats::from_ensemble(spec, &random_ensemble(spec, &s, i, 6, 1.3))?;
            let b =
                MeasureStats::from_ensemble(spec, &random_ensemble(spec, &s, 1000 + i, 9, 1.3))?;
            let v = bregman(spec, &a, &b)?;
            min_val = min_val.min(v);
            if bregman(spec, &a, &a)? != 0.0 {
                self_ok = false;
            }
            if spec.loss == Loss::Squared {
                let closed: f64 = a
                    .predictions
                    .iter()
                    .zip(&b.predictions)
                    .map(|(pa, pb)| (pa - pb) * (pa - pb))
                    .sum::<f64>()
                    / (2.0 * spec.data.len() as f64);
                let scale = closed.abs().max(1e-2);
                worst_gap = worst_gap.max((v - closed).abs() / scale);
            }
        }
        verdicts.push(Verdict::new(
            "bregman_nonnegative",
            min_val >= -1e-12 && self_ok,
            format!("minimum over 500 random pairs {min_val:.3e}; self-divergence exactly 0"),
        ));
        verdicts.push(Verdict::new(
            "bregman_quadratic_closed_form",
            worst_gap <= 1e-12,
            format!("worst scaled deviation {worst_gap:.3e} from the prediction-gap formula"),
        ));
    }

    // Objective-gap identities: closed forms on the linear toy, Monte Carlo
    // on all three.
    {
        let rho = AnalyticGaussian::new(vec![0.3], vec![0.8])?;
        let mu = AnalyticGaussian::new(vec![-0.2], vec![1.2])?;
        let closed = prop1_gap_check_closed(&toy_a, &rho, &mu)?;
        let worst = closed
            .gap_vs_mean_field
            .residual
            .abs()
            .max(closed.gap_vs_tensorized_gibbs.residual.abs());
        verdicts.push(Verdict::new(
            "objective_gap_identities_closed_form",
            worst < 1e-6,
            format!("worst closed-form residual {worst:.3e} on the linear toy"),
        ));

        let mut all_ok = true;
        let mut detail = String::new();
        for (name, spec) in [("a", &toy_a), ("b", &toy_b), ("c", &toy_c)] {
            let d = spec.param_dim();
            let rho = AnalyticGaussian::new(vec![0.3; d], vec![0.8; d])?;
            let mu = AnalyticGaussian::new(vec![-0.2; d], vec![1.2; d])?;
            let rep =
                prop1_gap_check(spec, &rho, &mu, 8, cfg.trials, root.child(40).child(name.len() as u64).seed())?;
            let ok = rep.gap_vs_mean_field.within(3.0) && rep.gap_vs_tensorized_gibbs.within(3.0);
            if !ok {
                all_ok = false;
            }
            detail.push_str(&format!(
                "toy {name}: residuals {:.3e}/{:.3e} (se {:.3e}/{:.3e}); ",
                rep.gap_vs_mean_field.residual,
                rep.gap_vs_tensorized_gibbs.residual,
                rep.gap_vs_mean_field.mc_standard_error,
                rep.gap_vs_tensorized_gibbs.mc_standard_error
            ));
        }
        verdicts.push(Verdict::new("objective_gap_identities_mc", all_ok, detail));
    }

    // KL-bound right-hand side: exact zero on the linear toy; soft
    // nonnegativity with stationary ensembles on toy b.
    {
        let star_var = toy_a.lambda / (2.0 * (1.0 + toy_a.lambda_prime));
        let star = AnalyticGaussian::isotropic(1, star_var.sqrt())?;
        let s = root.child(50);
        let stationary: Vec<Ensemble> = (0..64)
            .map(|t| {
                Ensemble::from_flat(1, (0..16).map(|j| star.draw(&s, t * 16 + j)[0]).collect())
            })
            .collect::<mfld_core::Result<_>>()?;
        let rep_a =
            prop2_inequality_check(&toy_a, &star, &stationary, cfg.trials.max(200), s.seed())?;

        let n_small = 16;
        let mut small_cfg = cfg.clone();
        small_cfg.particles = n_small;
        let traj = run_mfld(&toy_b, &integrator(&small_cfg, n_small, root.child(51).seed()))?;
        let snaps = post_burn_in(&traj, cfg.burn_in_fraction);
        let ensembles: Vec<Ensemble> = snaps.iter().map(|s| s.ensemble.clone()).collect();
        // mu set to a Gaussian proxy of the stationary marginal (pooled
        // moments of the run).
        let pooled: Vec<f64> =
            ensembles.iter().flat_map(|e| e.as_flat().iter().copied()).collect();
        let pm = pooled.iter().sum::<f64>() / pooled.len() as f64;
        let pv = pooled.iter().map(|x| (x - pm) * (x - pm)).sum::<f64>()
            / (pooled.len() - 1) as f64;
        let mu_b = AnalyticGaussian::new(vec![pm], vec![pv])?;
        let rep_b = prop2_inequality_check(
            &toy_b,
            &mu_b,
            &ensembles,
            cfg.trials.max(200),
            root.child(52).seed(),
        )?;
        verdicts.push(Verdict::new(
            "kl_bound_rhs_nonnegative",
            rep_a.rhs_estimate == 0.0 && rep_a.pass && rep_b.pass,
            format!(
                "linear toy rhs {:.3e}; toy b rhs {:.4} (se {:.4})",
                rep_a.rhs_estimate, rep_b.rhs_estimate, rep_b.stderr
            ),
        ));
    }

    // Variance step: the N-particle prediction variance under a stationary
    // proxy stays below R^2 / N.
    {
        let mut all_ok = true;
        let mut detail = String::new();
        let (pool, _) = reference_pool(&toy_b, cfg, root.child(60).seed())?;
        let sampler = PoolSampler::new(pool);
        for n in [4usize, 16, 64] {
            let rep = variance_bound_mc(
                &toy_b,
                &sampler,
                n,
                &toy_b.data.point(0).z,
                cfg.trials.max(1000),
                root.child(61 + n as u64).seed(),
            )?;
            if !rep.pass {
                all_ok = false;
            }
            detail.push_str(&format!(
                "N {n}: {:.5} vs bound {:.5}; ",
                rep.estimate, rep.bound
            ));
        }
        verdicts.push(Verdict::new("variance_step_bound", all_ok, detail));
    }

    // Gradient battery, with the sign-flip negative control.
    {
        let mut worst = 0.0f64;
        for (i, spec) in [&toy_a, &toy_b, &toy_c].iter().enumerate() {
            worst = worst.max(gradient_fd_battery(spec, cfg.seed ^ i as u64, 34, |s, e, x| {
                s.wasserstein_gradient(e, x).unwrap()
            }));
        }
        verdicts.push(Verdict::new(
            "gradient_matches_finite_differences",
            worst < GRADIENT_FD_TOL,
            format!("worst deviation {worst:.3e} over 100+ probes (tolerance {GRADIENT_FD_TOL:.0e})"),
        ));
        let corrupted = gradient_fd_battery(&toy_b, cfg.seed, 10, |s, e, x| {
            s.wasserstein_gradient(e, x).unwrap().iter().map(|g| -g).collect()
        });
        verdicts.push(Verdict::new(
            "negative_control_detects_corruption",
            corrupted >= GRADIENT_FD_TOL,
            format!("sign-flipped gradient deviates by {corrupted:.3e}, correctly failing"),
        ));
    }

    // Marginal-KL estimator sanity against the Gaussian oracle: four
    // independent replicates at 10^4 samples each, averaged.
    {
        let g = AnalyticGaussian::standard(1);
        let shifted = AnalyticGaussian::new(vec![1.0], vec![1.0])?;
        let s = root.child(70);
        let draw_set = |salt: u64, gg: &AnalyticGaussian, m: usize| -> Result<Ensemble> {
            let sampler = GaussianSampler(gg.clone());
            let sub = s.child(salt);
            let mut coords = Vec::with_capacity(m);
            for i in 0..m {
                coords.push(sampler.draw(&sub, i as u64)[0]);
            }
            Ok(Ensemble::from_flat(1, coords)?)
        };
        let mut zero = 0.0;
        let mut half = 0.0;
        let folds = 4u64;
        for f in 0..folds {
            let p = draw_set(10 + f, &g, 10_000)?;
            let q = draw_set(20 + f, &g, 10_000)?;
            let q2 = draw_set(30 + f, &shifted, 10_000)?;
            zero += kl_knn(&p, &q, DEFAULT_K)?.estimate;
            half += kl_knn(&p, &q2, DEFAULT_K)?.estimate;
        }
        zero /= folds as f64;
        half /= folds as f64;
        verdicts.push(Verdict::new(
            "knn_kl_matches_gaussian_oracle",
            zero.abs() < 0.05 && (half - 0.5).abs() < 0.05,
            format!("known-zero estimate {zero:.4}; half-nat case {half:.4}"),
        ));
    }

    Ok(StudyReport {
        kind: "verify".into(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        seed_list: vec![cfg.seed],
        data: StudyData::Verify,
        fits: vec![],
        verdicts,
    })
}
