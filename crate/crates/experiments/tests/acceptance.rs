//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities (run with `--nocapture` to see them). Studies
//! shared between criteria are computed once behind `LazyLock`.
//!
//! Tolerances and thresholds are pinned here in code; nothing is deferred
//! to later calibration.

use std::sync::LazyLock;

use mfld_core::bounds::{
    convergence_envelope, delta_eta, delta_eta_n, lsi_holley_stroock, new_poc_bound,
    prior_discrete_bound, prior_poc_bound, BoundInputs, EnvelopeKind,
};
use mfld_core::diagnostics::{
    bregman, bregman_mc_bound, prop1_gap_check, prop1_gap_check_closed, variance_bound_mc,
    AnalyticGaussian, MeasureStats, PoolSampler,
};
use mfld_core::dynamics::run_mfld;
use mfld_core::model::{Ensemble, Loss};
use mfld_core::rng::{tag, Streams};

use mfld_experiments::config::{ExperimentConfig, StudyKind};
use mfld_experiments::emit::{emit_report, render_report};
use mfld_experiments::report::{StudyData, StudyReport};
use mfld_experiments::studies::verify::{bridge_battery, BRIDGE_TOL};
use mfld_experiments::studies::{integrator, reference_pool, run_study};
use mfld_experiments::toys::{toy_problem, ToyId};

const MASTER_SEED: u64 = 42;

fn scaling_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(StudyKind::Scaling);
    cfg.toy = Some(ToyId::B);
    cfg.lambda = 0.5;
    cfg.lambda_prime = 0.25;
    cfg.lambda_values = vec![0.25, 0.5, 1.0];
    cfg.n_values = vec![16, 64, 256, 1024];
    cfg.seeds = 5;
    cfg.eta = 0.02;
    cfg.steps = 3000;
    cfg.snapshot_every = Some(100);
    cfg.n_ref = 4096;
    cfg.trials = 10_000;
    cfg.seed = MASTER_SEED;
    cfg
}

fn convergence_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(StudyKind::Convergence);
    cfg.toy = Some(ToyId::A);
    cfg.lambda = 0.5;
    cfg.lambda_prime = 0.5;
    cfg.eta = 0.004;
    cfg.steps = 8000;
    cfg.snapshot_every = Some(200);
    cfg.particles = 2500;
    cfg.seeds = 4;
    cfg.eta_coarse = 0.2;
    cfg.kl_target = 0.02;
    cfg.seed = MASTER_SEED;
    cfg
}

fn poc_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(StudyKind::Poc);
    cfg.toy = Some(ToyId::B);
    cfg.lambda = 0.5;
    cfg.lambda_prime = 0.25;
    cfg.n_values = vec![16, 64, 256];
    cfg.seeds = 32;
    cfg.w2_groups = 4;
    cfg.w2_points = 512;
    cfg.eta = 0.02;
    cfg.steps = 3000;
    cfg.snapshot_every = Some(100);
    cfg.n_ref = 4096;
    cfg.seed = MASTER_SEED;
    cfg
}

static SCALING: LazyLock<StudyReport> =
    LazyLock::new(|| run_study(&scaling_config()).expect("scaling study runs"));
static CONVERGENCE: LazyLock<StudyReport> =
    LazyLock::new(|| run_study(&convergence_config()).expect("convergence study runs"));
static POC: LazyLock<StudyReport> =
    LazyLock::new(|| run_study(&poc_config()).expect("poc study runs"));

fn assert_verdict(report: &StudyReport, name: &str) {
    let v = report
        .verdicts
        .iter()
        .find(|v| v.name == name)
        .unwrap_or_else(|| panic!("missing verdict {name}"));
    assert!(v.pass, "{name}: {}", v.detail);
}

fn random_ensemble(spec: &mfld_core::model::ProblemSpec, s: &Streams, run: u64, n: usize) -> Ensemble {
    let d = spec.param_dim();
    Ensemble::from_flat(
        d,
        (0..n * d).map(|i| 1.3 * s.normal(tag::ORACLE, run, i as u64, 0)).collect(),
    )
    .unwrap()
}

/// Criterion 1: exact identity suite within 10 seconds.
#[test]
fn criterion_1_identity_suite() {
    let start = std::time::Instant::now();
    let toy_a = toy_problem(ToyId::A, 0.5, 0.25).unwrap();
    let toy_b = toy_problem(ToyId::B, 0.5, 0.25).unwrap();
    let toy_c = toy_problem(ToyId::C, 0.5, 0.25).unwrap();

    // Bridge identity across 50 random draws including nonlinear losses.
    let worst_bridge =
        bridge_battery(&[toy_b.clone(), toy_c.clone(), toy_a.clone()], MASTER_SEED, 50).unwrap();
    assert!(worst_bridge < BRIDGE_TOL, "bridge residual {worst_bridge}");

    // Bregman properties on 500 random pairs.
    let s = Streams::new(MASTER_SEED ^ 0xb7);
    let mut min_val = f64::INFINITY;
    let mut worst_quad = 0.0f64;
    for i in 0..500u64 {
        let spec = if i % 2 == 0 { &toy_b } else { &toy_c };
        let a = MeasureStats::from_ensemble(spec, &random_ensemble(spec, &s, i, 6)).unwrap();
        let b = MeasureStats::from_ensemble(spec, &random_ensemble(spec, &s, 1000 + i, 9)).unwrap();
        let v = bregman(spec, &a, &b).unwrap();
        min_val = min_val.min(v);
        assert_eq!(bregman(spec, &a, &a).unwrap(), 0.0);
        if spec.loss == Loss::Squared {
            let closed: f64 = a
                .predictions
                .iter()
                .zip(&b.predictions)
                .map(|(pa, pb)| (pa - pb) * (pa - pb))
                .sum::<f64>()
                / (2.0 * spec.data.len() as f64);
            worst_quad = worst_quad.max((v - closed).abs() / closed.abs().max(1e-2));
        }
    }
    assert!(min_val >= -1e-12, "bregman minimum {min_val}");
    assert!(worst_quad <= 1e-12, "quadratic closed-form deviation {worst_quad}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 10, "identity suite took {elapsed:?}");
    println!(
        "PASS criterion 1: bridge residual {worst_bridge:.2e}, bregman min {min_val:.2e}, \
         quadratic deviation {worst_quad:.2e} in {elapsed:?}"
    );
}

/// Criterion 2: statistical objective-gap identities, 20 seeds per toy at
/// 10^5 trials, both identities within 3 standard errors; closed forms give
/// 1e-6 on the linear toy.
#[test]
fn criterion_2_objective_gap_identities() {
    let start = std::time::Instant::now();
    let rho1 = AnalyticGaussian::new(vec![0.3], vec![0.8]).unwrap();
    let mu1 = AnalyticGaussian::new(vec![-0.2], vec![1.2]).unwrap();
    let toy_a = toy_problem(ToyId::A, 0.5, 0.25).unwrap();
    let closed = prop1_gap_check_closed(&toy_a, &rho1, &mu1).unwrap();
    let worst_closed = closed
        .gap_vs_mean_field
        .residual
        .abs()
        .max(closed.gap_vs_tensorized_gibbs.residual.abs());
    assert!(worst_closed < 1e-6, "closed-form residual {worst_closed}");

    let mut worst_sigma = 0.0f64;
    for (name, id) in [("a", ToyId::A), ("b", ToyId::B), ("c", ToyId::C)] {
        let spec = toy_problem(id, 0.5, 0.25).unwrap();
        let d = spec.param_dim();
        let rho = AnalyticGaussian::new(vec![0.3; d], vec![0.8; d]).unwrap();
        let mu = AnalyticGaussian::new(vec![-0.2; d], vec![1.2; d]).unwrap();
        let root = Streams::new(MASTER_SEED ^ 0x9a1).child(name.len() as u64);
        for seed_idx in 0..20u64 {
            let rep =
                prop1_gap_check(&spec, &rho, &mu, 8, 100_000, root.child(seed_idx).seed()).unwrap();
            for (eq, gap) in
                [("22", &rep.gap_vs_mean_field), ("23", &rep.gap_vs_tensorized_gibbs)]
            {
                let sigmas = gap.residual.abs() / gap.mc_standard_error;
                worst_sigma = worst_sigma.max(sigmas);
                assert!(
                    gap.within(3.0),
                    "toy {name} seed {seed_idx} identity {eq}: residual {} vs se {}",
                    gap.residual,
                    gap.mc_standard_error
                );
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "identity check took {elapsed:?}");
    println!(
        "PASS criterion 2: closed-form residual {worst_closed:.2e}; worst MC residual \
         {worst_sigma:.2} sigma over 120 checks in {elapsed:?}"
    );
}

/// Criterion 3: variance / Bregman chain behind the particle error bound.
#[test]
fn criterion_3_variance_bregman_chain() {
    let start = std::time::Instant::now();
    let spec = toy_problem(ToyId::B, 0.5, 0.25).unwrap();
    let mut cfg = scaling_config();
    cfg.steps = 3000;
    let (pool, _) = reference_pool(&spec, &cfg, Streams::new(MASTER_SEED ^ 0x33).seed()).unwrap();
    let stats = MeasureStats::from_ensemble(&spec, &pool).unwrap();
    let sampler = PoolSampler::new(pool);

    let mut var_line = String::new();
    for n in [4usize, 16, 64, 256] {
        let rep = variance_bound_mc(
            &spec,
            &sampler,
            n,
            &spec.data.point(1).z,
            20_000,
            MASTER_SEED ^ n as u64,
        )
        .unwrap();
        assert!(
            rep.pass,
            "variance bound at N = {n}: {} vs {} + 3 * {}",
            rep.estimate, rep.bound, rep.stderr
        );
        var_line.push_str(&format!("N{n}: {:.5} <= {:.5}; ", rep.estimate, rep.bound));
    }

    let mut estimates = Vec::new();
    for n in [4usize, 16, 64, 256] {
        let rep = bregman_mc_bound(&spec, &sampler, &stats, n, 20_000, MASTER_SEED ^ (n as u64) << 8)
            .unwrap();
        assert!(rep.pass, "N E[B_F] at N = {n}: {} vs bound {}", rep.estimate, rep.bound);
        estimates.push((n, rep.estimate, rep.stderr));
    }
    for i in 0..estimates.len() {
        for j in (i + 1)..estimates.len() {
            let (ni, gi, si) = estimates[i];
            let (nj, gj, sj) = estimates[j];
            assert!(
                (gi - gj).abs() <= 3.0 * (si + sj),
                "N-stability: g({ni}) = {gi} vs g({nj}) = {gj} with 3(se_i + se_j) = {}",
                3.0 * (si + sj)
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "chain check took {elapsed:?}");
    println!(
        "PASS criterion 3: {var_line}rescaled Bregman stable across N \
         ({:?}) in {elapsed:?}",
        estimates.iter().map(|(n, g, _)| format!("{n}:{g:.4}")).collect::<Vec<_>>()
    );
}

/// Criterion 4: the headline O(1/N) scaling with the lambda-freeness probe.
#[test]
fn criterion_4_scaling_headline() {
    let start = std::time::Instant::now();
    let report = &*SCALING;
    for lambda in [0.25, 0.5, 1.0] {
        assert_verdict(report, &format!("slope_minus_one_lambda_{lambda}"));
    }
    assert_verdict(report, "gap_below_lr2_over_2");
    assert_verdict(report, "gap_independent_of_lambda");
    assert_verdict(report, "runs_stationary");
    let slopes: Vec<String> =
        report.fits.iter().map(|f| format!("{:.3}", f.slope)).collect();
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 1200, "scaling study took {elapsed:?}");
    println!("PASS criterion 4: slopes {slopes:?} within -1.0 +- 0.15; lambda sweep flat in {elapsed:?}");
}

/// Criterion 5: sampling guarantee on the closed-form oracle problem.
#[test]
fn criterion_5_sampling_guarantee() {
    let start = std::time::Instant::now();
    let report = &*CONVERGENCE;
    assert_verdict(report, "stationary_kl_below_target");
    assert_verdict(report, "kl_below_envelope_asymptote");
    assert_verdict(report, "stationary_variance_matches_target");
    assert_verdict(report, "halving_eta_reduces_kl_excess");
    // Initial slice: the particles at k = 0 are exact draws from the init
    // law, so the row-0 estimate must agree with the closed-form
    // KL(init || target) up to the estimator's own tolerance. That
    // tolerance is measured here with the same estimator on exact oracle
    // draws of the same size (the k-NN estimator biases low for KL this
    // large, so a fixed percentage would be arbitrary).
    let rows = match &report.data {
        StudyData::Convergence { rows } => rows,
        _ => panic!("wrong schema"),
    };
    let cfg = convergence_config();
    let init = AnalyticGaussian::isotropic(1, cfg.init_scale).unwrap();
    let target_var = cfg.lambda / (2.0 * (1.0 + cfg.lambda_prime));
    let target = AnalyticGaussian::isotropic(1, target_var.sqrt()).unwrap();
    let oracle = init.kl(&target).unwrap();
    let k0 = &rows[0];
    let (cal_est, cal_se) = {
        use mfld_experiments::stats::mean_se;
        let s = Streams::new(MASTER_SEED ^ 0x5ca1e);
        let per_fold = (cfg.kl_samples / 4).max(2500);
        let mut ests = Vec::new();
        for f in 0..4u64 {
            let draw = |salt: u64, g: &AnalyticGaussian| {
                let sub = s.child(salt);
                Ensemble::from_flat(1, (0..per_fold).map(|i| g.draw(&sub, i as u64)[0]).collect())
                    .unwrap()
            };
            let p = draw(10 + f, &init);
            let q = draw(20 + f, &target);
            ests.push(mfld_core::diagnostics::kl_knn(&p, &q, 5).unwrap().estimate);
        }
        mean_se(&ests)
    };
    let estimator_bias = (cal_est - oracle).abs();
    assert!(
        (k0.kl_est - oracle).abs() <= estimator_bias + 3.0 * (k0.stderr + cal_se),
        "k=0 estimate {} vs oracle {oracle} (estimator's own value on exact draws: {cal_est})",
        k0.kl_est
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "convergence study took {elapsed:?}");
    println!(
        "PASS criterion 5: stationary KL, variance, and eta-bias checks hold; \
         k=0 estimate {:.3} vs oracle {oracle:.3} in {elapsed:?}",
        k0.kl_est
    );
}

/// Criterion 6: uniform second-moment bound along the acceptance runs.
#[test]
fn criterion_6_second_moment_bound() {
    let report = &*CONVERGENCE;
    assert_verdict(report, "second_moment_bound");
    // Same inequality along a representative nonlinear acceptance run.
    let spec = toy_problem(ToyId::B, 0.5, 0.25).unwrap();
    let cfg = scaling_config();
    let traj = run_mfld(&spec, &integrator(&cfg, 256, MASTER_SEED ^ 0x66)).unwrap();
    let m1 = spec.m1_global().unwrap();
    let d = spec.param_dim() as f64;
    let init_m = cfg.init_scale * cfg.init_scale * d;
    let bound = init_m
        + (1.0 / spec.lambda_prime) * (m1 * m1 / (4.0 * spec.lambda_prime) + spec.lambda * d);
    let slack = 5.0 * (2.0f64 / 256.0).sqrt() * init_m.max(1.0);
    for (step, m) in traj.second_moment_trace() {
        assert!(m <= bound + slack, "step {step}: {m} > {bound} + {slack}");
    }
    println!("PASS criterion 6: second-moment trace bounded (toy a study and toy b run)");
}

/// Criterion 7: Wasserstein propagation of chaos direction.
#[test]
fn criterion_7_wasserstein_poc() {
    let start = std::time::Instant::now();
    let report = &*POC;
    assert_verdict(report, "plateau_decreases_with_n");
    assert_verdict(report, "curve_below_w2_envelope");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 1800, "poc study took {elapsed:?}");
    let detail = &report.verdicts[0].detail;
    println!("PASS criterion 7: {detail} in {elapsed:?}");
}

/// Criterion 8: bound calculators against hand-computed spot values.
#[test]
fn criterion_8_bound_calculators() {
    let start = std::time::Instant::now();
    assert_eq!(new_poc_bound(1.0, 1.0, 100).unwrap(), 0.005);
    assert_eq!(new_poc_bound(0.0, f64::INFINITY, 3).unwrap(), 0.0);
    assert_eq!(new_poc_bound(1.0, 2.0, 50).unwrap(), 2.0 * new_poc_bound(1.0, 2.0, 100).unwrap());
    assert_eq!(prior_poc_bound(1.0, 1.0, 100, 1.0).unwrap(), 0.01);
    assert_eq!(lsi_holley_stroock(0.5, 0.25, 7, 0.0).unwrap(), 1.0);
    assert_eq!(lsi_holley_stroock(1.0, 1.0, 1, 1.0).unwrap(), 2.0 * (-4.0f64).exp());
    assert_eq!(delta_eta_n(0.0, 0.7, 0.2, 4, 1.0, 1.0, 2.0), 0.0);
    assert_eq!(delta_eta(0.0, 0.7, 0.2, 4, 1.0, 1.0, 2.0), 0.0);
    // Hand-computed delta_eta^N at simple inputs: eta 0.1, lambda 1,
    // lambda' 0.5, d 1, M1 = M2 = 1, E||X0||^2 = 1:
    //   16 * 0.1 * (1 + 0.25) * (0.1 + 1) = 2.2
    //   64 * 0.01 * 0.25 * 1.25 * (1 + (1/2 + 1) / 0.5) = 0.8
    assert!((delta_eta_n(0.1, 1.0, 0.5, 1, 1.0, 1.0, 1.0) - 3.0).abs() < 1e-12);
    // and the mean-field variant:
    //   8 * 0.1 * 1.25 * (0.2 + 2) = 2.2; 32 * 0.01 * 0.25 * 1.25 * 4 = 0.4
    assert!((delta_eta(0.1, 1.0, 0.5, 1, 1.0, 1.0, 1.0) - 2.6).abs() < 1e-12);
    // Prior discrete rate drops its exponential term as k grows.
    let asym = prior_discrete_bound(0.5, 0.3, 0.01, 1e15, 64, 1.0, 1.0, 2.0).unwrap();
    let expect = (0.5 * 0.01 + 0.0001) / (0.5 * 0.3) + 0.5 / (0.3 * 64.0);
    assert!((asym - expect).abs() < 1e-12);

    // Exact alpha/alpha_bar/lambda independence of the particle error term.
    let base = new_poc_bound(1.0, 1.0, 128).unwrap();
    for scale in [1e-4, 1e-1, 1.0, 1e3] {
        let inputs = BoundInputs {
            lambda: scale,
            lambda_prime: 0.25 / 4.0,
            eta: 0.0,
            n: 128,
            dim: 1,
            smoothness: 1.0,
            r_bound: 1.0,
            m1: 1.0,
            m2: 1.0,
            alpha: Some(scale),
            alpha_bar: Some(scale),
            f0_sup: Some(1.0),
            delta0_n: Some(0.0),
            delta0: Some(0.0),
            init_second_moment: 1.0,
            c_prior: 1.0,
            c1_prior: 1.0,
            c2_prior: 1.0,
        };
        let curve = convergence_envelope(EnvelopeKind::DiscreteN, &inputs, &[1e9]).unwrap();
        assert_eq!(curve.points[0].1, base);
    }

    // Envelope endpoints: exponential equals one at k = 0, drops at the
    // asymptote; curves monotone non-increasing.
    let inputs = BoundInputs {
        lambda: 0.5,
        lambda_prime: 0.25,
        eta: 0.02,
        n: 64,
        dim: 1,
        smoothness: 1.0,
        r_bound: 1.0,
        m1: 1.2,
        m2: 1.1,
        alpha: Some(0.8),
        alpha_bar: Some(0.6),
        f0_sup: Some(1.0),
        delta0_n: Some(1.5),
        delta0: Some(1.0),
        init_second_moment: 1.0,
        c_prior: 1.0,
        c1_prior: 1.0,
        c2_prior: 1.0,
    };
    let den = delta_eta_n(0.02, 0.5, 0.25, 1, 1.2, 1.1, 1.0);
    let curve =
        convergence_envelope(EnvelopeKind::DiscreteN, &inputs, &[0.0, 1e12]).unwrap();
    let poc = new_poc_bound(1.0, 1.0, 64).unwrap();
    assert!((curve.points[0].1 - (poc + den / (2.0 * 0.6 * 0.5) + 1.5)).abs() < 1e-12);
    assert!((curve.points[1].1 - (poc + den / (2.0 * 0.6 * 0.5))).abs() < 1e-12);
    for kind in [
        EnvelopeKind::ContinuousN,
        EnvelopeKind::DiscreteN,
        EnvelopeKind::SamplingKl,
        EnvelopeKind::W2Poc,
        EnvelopeKind::TvPoc,
    ] {
        let grid: Vec<f64> = (0..50).map(|i| i as f64 * 40.0).collect();
        let curve = convergence_envelope(kind, &inputs, &grid).unwrap();
        for w in curve.points.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-15);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_millis() < 1000, "bound calculators took {elapsed:?}");
    println!("PASS criterion 8: spot values, LSI-freeness, and monotonicity exact in {elapsed:?}");
}

/// Criterion 9: byte-identical replay for every study kind.
#[test]
fn criterion_9_replay_determinism() {
    let start = std::time::Instant::now();
    let tmp = std::env::temp_dir().join("mfld_acceptance_replay");
    let _ = std::fs::remove_dir_all(&tmp);

    // Heavy studies: regenerate from scratch and compare to the shared run.
    for (name, cfg, first) in [
        ("scaling", scaling_config(), &*SCALING),
        ("convergence", convergence_config(), &*CONVERGENCE),
        ("poc", poc_config(), &*POC),
    ] {
        let again = run_study(&cfg).expect("rerun");
        let a = render_report(first).unwrap();
        let b = render_report(&again).unwrap();
        assert_eq!(a, b, "{name}: regenerated files differ");
        let dir = tmp.join(name);
        emit_report(first, &dir, false).unwrap();
        emit_report(&again, &dir, true).unwrap();
    }

    // Light studies end to end, twice through the emitter.
    for kind in [StudyKind::Run, StudyKind::Verify, StudyKind::Bounds] {
        let mut cfg = ExperimentConfig::defaults(kind);
        cfg.toy = Some(ToyId::B);
        cfg.steps = 200;
        cfg.particles = 32;
        cfg.trials = 2000;
        cfg.seed = MASTER_SEED;
        let dir = tmp.join(kind.name());
        let first = run_study(&cfg).unwrap();
        emit_report(&first, &dir, false).unwrap();
        let again = run_study(&cfg).unwrap();
        emit_report(&again, &dir, true).unwrap();
    }
    let elapsed = start.elapsed();
    println!("PASS criterion 9: byte-identical replays for all six study kinds in {elapsed:?}");
}
