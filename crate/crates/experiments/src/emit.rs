//! Report emission. Every file is rendered to a string first (CSV tables,
//! `verdicts.json`, `config.json`, and an SVG plot when the study has data
//! to draw), then written or — under `--replay` — compared byte-for-byte
//! against what is already on disk.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::report::{StudyData, StudyReport};
use crate::svg::{Plot, Series};
use crate::ExperimentError;

/// File name and full contents, ready to write or diff.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub name: String,
    pub contents: String,
}

fn f(v: f64) -> String {
    // Shortest round-trip formatting: stable across runs of the same build
    // and exact under re-parsing.
    format!("{v}")
}

fn csv_of(report: &StudyReport) -> (String, String) {
    let mut s = String::new();
    match &report.data {
        StudyData::Run { rows } => {
            s.push_str("step,energy_f,risk_f0,mean_sq_norm,grad_norm_mean\n");
            for r in rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    r.step,
                    f(r.energy_f),
                    f(r.risk_f0),
                    f(r.mean_sq_norm),
                    f(r.grad_norm_mean)
                );
            }
            ("run.csv".into(), s)
        }
        StudyData::Scaling { rows } => {
            s.push_str("N,lambda,seed,bregman_per_particle,bregman_stderr,kl_marginal,kl_stderr\n");
            for r in rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    r.n,
                    f(r.lambda),
                    r.seed,
                    f(r.bregman_per_particle),
                    f(r.bregman_stderr),
                    f(r.kl_marginal),
                    f(r.kl_stderr)
                );
            }
            ("scaling.csv".into(), s)
        }
        StudyData::Poc { rows } => {
            s.push_str("k,N,w2_sq_mean,stderr,bound_value\n");
            for r in rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    r.k,
                    r.n,
                    f(r.w2_sq_mean),
                    f(r.stderr),
                    f(r.bound_value)
                );
            }
            ("poc.csv".into(), s)
        }
        StudyData::Convergence { rows } => {
            s.push_str("k,kl_est,stderr,second_moment,lemma1_bound,envelope\n");
            for r in rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    r.k,
                    f(r.kl_est),
                    f(r.stderr),
                    f(r.second_moment),
                    f(r.lemma1_bound),
                    f(r.envelope)
                );
            }
            ("convergence.csv".into(), s)
        }
        StudyData::Bounds { rows } => {
            s.push_str("kind,grid_value,bound_value\n");
            for r in rows {
                let _ = writeln!(s, "{},{},{}", r.kind, f(r.grid_value), f(r.bound_value));
            }
            ("bounds.csv".into(), s)
        }
        StudyData::Verify => ("verify.csv".into(), "check,pass,detail\n".to_string()),
    }
}

fn plot_of(report: &StudyReport) -> Option<Rendered> {
    let annotations: Vec<String> = report
        .fits
        .iter()
        .map(|fit| format!("{}: slope {:.3} +- {:.3}", fit.name, fit.slope, 2.0 * fit.slope_se))
        .collect();
    let plot = match &report.data {
        StudyData::Run { rows } if !rows.is_empty() => Plot {
            title: "energy along the run".into(),
            x_label: "step".into(),
            y_label: "energy_f".into(),
            log_x: false,
            log_y: false,
            series: vec![Series {
                name: "energy_f".into(),
                points: rows.iter().map(|r| (r.step as f64, r.energy_f)).collect(),
                dashed: false,
            }],
            annotations,
        },
        StudyData::Scaling { rows } if !rows.is_empty() => {
            // Mean per (N, lambda) on log-log axes.
            let mut lambdas: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
            lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
            lambdas.dedup();
            let mut series = Vec::new();
            for lam in lambdas {
                let mut ns: Vec<usize> =
                    rows.iter().filter(|r| r.lambda == lam).map(|r| r.n).collect();
                ns.sort_unstable();
                ns.dedup();
                let pts: Vec<(f64, f64)> = ns
                    .iter()
                    .map(|n| {
                        let vals: Vec<f64> = rows
                            .iter()
                            .filter(|r| r.lambda == lam && r.n == *n)
                            .map(|r| r.bregman_per_particle)
                            .collect();
                        (*n as f64, vals.iter().sum::<f64>() / vals.len() as f64)
                    })
                    .collect();
                series.push(Series {
                    name: format!("lambda = {lam}"),
                    points: pts,
                    dashed: false,
                });
            }
            Plot {
                title: "per-particle Bregman gap vs N".into(),
                x_label: "N".into(),
                y_label: "E[B_F] per particle".into(),
                log_x: true,
                log_y: true,
                series,
                annotations,
            }
        }
        StudyData::Poc { rows } if !rows.is_empty() => {
            let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
            ns.sort_unstable();
            ns.dedup();
            let mut series: Vec<Series> = ns
                .iter()
                .map(|n| Series {
                    name: format!("N = {n}"),
                    points: rows
                        .iter()
                        .filter(|r| r.n == *n)
                        .map(|r| (r.k as f64, r.w2_sq_mean))
                        .collect(),
                    dashed: false,
                })
                .collect();
            if let Some(n0) = ns.first() {
                series.push(Series {
                    name: format!("bound (N = {n0})"),
                    points: rows
                        .iter()
                        .filter(|r| r.n == *n0)
                        .map(|r| (r.k as f64, r.bound_value))
                        .collect(),
                    dashed: true,
                });
            }
            Plot {
                title: "marginal W2^2 to the reference system".into(),
                x_label: "k".into(),
                y_label: "W2^2".into(),
                log_x: false,
                log_y: true,
                series,
                annotations,
            }
        }
        StudyData::Convergence { rows } if !rows.is_empty() => Plot {
            title: "per-marginal KL to the analytic target".into(),
            x_label: "k".into(),
            y_label: "KL (nats)".into(),
            log_x: false,
            log_y: false,
            series: vec![
                Series {
                    name: "kl_est".into(),
                    points: rows.iter().map(|r| (r.k as f64, r.kl_est)).collect(),
                    dashed: false,
                },
                Series {
                    name: "envelope".into(),
                    points: rows.iter().map(|r| (r.k as f64, r.envelope)).collect(),
                    dashed: true,
                },
            ],
            annotations,
        },
        StudyData::Bounds { rows } if !rows.is_empty() => {
            let mut kinds: Vec<&str> = rows.iter().map(|r| r.kind.as_str()).collect();
            kinds.sort_unstable();
            kinds.dedup();
            let series = kinds
                .iter()
                .map(|k| Series {
                    name: k.to_string(),
                    points: rows
                        .iter()
                        .filter(|r| r.kind == *k)
                        .map(|r| (r.grid_value, r.bound_value))
                        .collect(),
                    dashed: false,
                })
                .collect();
            Plot {
                title: "bound envelopes".into(),
                x_label: "t or k".into(),
                y_label: "bound".into(),
                log_x: false,
                log_y: true,
                series,
                annotations,
            }
        }
        _ => return None,
    };
    Some(Rendered {
        name: format!("{}.svg", report.kind),
        contents: plot.render(),
    })
}

/// Render the full deterministic file set for a report.
pub fn render_report(report: &StudyReport) -> Result<Vec<Rendered>, ExperimentError> {
    let mut files = Vec::new();
    let (csv_name, csv) = csv_of(report);
    files.push(Rendered { name: csv_name, contents: csv });
    let verdicts = serde_json::json!({
        "kind": report.kind,
        "all_pass": report.all_pass(),
        "verdicts": report.verdicts,
        "fits": report.fits,
        "seed_list": report.seed_list,
    });
    files.push(Rendered {
        name: "verdicts.json".into(),
        contents: format!("{:#}\n", verdicts),
    });
    files.push(Rendered {
        name: "config.json".into(),
        contents: format!("{:#}\n", report.config),
    });
    if let Some(p) = plot_of(report) {
        files.push(p);
    }
    Ok(files)
}

/// Write (or, under replay, verify) the rendered files. Returns the list of
/// emitted paths; replay mismatches are errors naming the offending file.
pub fn emit_report(
    report: &StudyReport,
    dir: &Path,
    replay: bool,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let files = render_report(report)?;
    std::fs::create_dir_all(dir)
        .map_err(|e| ExperimentError::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for file in &files {
        let path = dir.join(&file.name);
        if replay && path.exists() {
            let existing = std::fs::read_to_string(&path)
                .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
            if existing != file.contents {
                return Err(ExperimentError::ReplayMismatch(path.display().to_string()));
            }
        } else {
            std::fs::write(&path, &file.contents)
                .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        }
        written.push(path);
    }
    Ok(written)
}
