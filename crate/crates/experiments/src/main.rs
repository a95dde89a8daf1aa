//! `mfld` command-line interface: run the dynamics or one of the studies
//! from a key-value config file, emit deterministic CSV/JSON/SVG reports,
//! and exit nonzero unless every asserted verdict passes.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};

use mfld_experiments::config::{ExperimentConfig, StudyKind};
use mfld_experiments::emit::emit_report;
use mfld_experiments::studies::run_study;

const USAGE: &str = "\
usage: mfld <run|convergence|scaling|poc|verify|bounds> [options]

options:
  --config <path>   key-value config file (keys mirror the config fields;
                    `key = value` lines, `#` comments)
  --seed <u64>      override the master seed
  --out <dir>       override the output directory
  --replay          regenerate outputs and require byte-identical files

environment:
  MFLD_THREADS      worker thread count (default: all cores)

Dataset files are delimited text (comma or whitespace) with one header row;
every column except the last is a feature, the last column is the label.
For the logistic loss labels must be +1 or -1.

Subcommands:
  run          integrate once; trajectory CSV (step, energy_f, risk_f0,
               mean_sq_norm, grad_norm_mean), config sidecar, optional
               binary ensemble snapshot (set `save_ensemble = true`)
  convergence  per-marginal KL to the analytic optimum along the run
               (linear-feature problem), envelope overlay, second-moment
               bound, step-size bias probe
  scaling      rescaled Bregman gap and marginal KL vs particle count,
               log-log slope fit, lambda-sweep stability probe
  poc          coupled-run marginal W2^2 vs the reference system over time,
               plateau ordering in N, Wasserstein envelope overlay
  verify       identity suite: bridge residual, Bregman properties,
               objective-gap identities, KL-bound sign, variance step,
               gradient finite differences with a negative control
  bounds       evaluate every bound formula on a grid and spot-check the
               calculators
";

fn parse_args() -> anyhow::Result<ExperimentConfig> {
    let mut args = std::env::args().skip(1);
    let sub = match args.next() {
        Some(s) => s,
        None => bail!("missing subcommand\n{USAGE}"),
    };
    if sub == "--help" || sub == "-h" || sub == "help" {
        println!("{USAGE}");
        std::process::exit(0);
    }
    let kind = StudyKind::parse(&sub).with_context(|| format!("unknown subcommand `{sub}`\n{USAGE}"))?;
    let mut cfg = ExperimentConfig::defaults(kind);
    let mut config_path: Option<PathBuf> = None;
    let mut seed: Option<u64> = None;
    let mut out: Option<PathBuf> = None;
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--config" => {
                config_path =
                    Some(PathBuf::from(args.next().context("--config needs a path")?))
            }
            "--seed" => {
                seed = Some(
                    args.next()
                        .context("--seed needs a value")?
                        .parse()
                        .context("--seed must be a u64")?,
                )
            }
            "--out" => out = Some(PathBuf::from(args.next().context("--out needs a path")?)),
            "--replay" => cfg.replay = true,
            other => bail!("unknown argument `{other}`\n{USAGE}"),
        }
    }
    if let Some(path) = config_path {
        cfg.apply_file(&path)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out = o;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("MFLD_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cfg = match parse_args() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let report = match run_study(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match emit_report(&report, &cfg.out, cfg.replay) {
        Ok(paths) => {
            for p in &paths {
                println!("wrote {}", p.display());
            }
            if cfg.replay {
                println!("replay verified: {} files byte-identical", paths.len());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    for v in &report.verdicts {
        println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
