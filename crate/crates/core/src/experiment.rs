//! n-sweeps of the full pipeline and their output files.
//!
//! A run directory holds `results.csv` (one row per Uzawa step and `n`),
//! `table.txt` (error/rate blocks per step), `manifest.toml` (resolved
//! parameters and diagnostics, loadable as a config) and, on request,
//! `trace.csv` with the greedy iterations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::RunConfig;
use crate::dictionary::DictionaryGrid;
use crate::error::{Error, Result};
use crate::forms::EnergyForm;
use crate::metrics::{attach_rates, rate, ErrorRecord};
use crate::problem::make_paper_problem;
use crate::quadrature::QuadratureSet;
use crate::scan::CandidateScanner;
use crate::uzawa::{StepRecord, UzawaConfig, UzawaRun};

pub const CSV_SCHEMA: &str = "# fnm-csv schema 1";
pub const CSV_HEADER: &str = "step,n,delta,l2,h1_semi,h1_full,rate_h1,boundary_violation,lambda_diag,wall_ms";
pub const TRACE_HEADER: &str =
    "step,n,iteration,omega,b,score,correlation,objective,jitter,pivot_ratio,orthogonality,coefficient_mass";

#[derive(Debug, Clone, Serialize)]
pub struct JitterEvent {
    pub step: usize,
    pub n: usize,
    pub iteration: usize,
    pub jitter: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub step: usize,
    pub n: usize,
    pub iterations: usize,
    pub final_objective: f64,
    pub coefficient_mass: f64,
    pub max_orthogonality: f64,
    pub monotone: bool,
    pub wall_ms: f64,
}

/// Everything a sweep produced. `rows` are ordered by `(step, n)` and carry
/// rates; `failure` is set when the sweep stopped early.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub config: RunConfig,
    pub delta: f64,
    pub rows: Vec<StepRecord>,
    pub summaries: Vec<RunSummary>,
    pub jitter_events: Vec<JitterEvent>,
    pub total_wall_ms: f64,
    pub failure: Option<String>,
}

impl SweepReport {
    /// Rows of one Uzawa step, in increasing `n`.
    pub fn step_rows(&self, step: usize) -> impl Iterator<Item = &StepRecord> {
        self.rows.iter().filter(move |r| r.step == step)
    }

    pub fn errors(&self, step: usize) -> Vec<ErrorRecord> {
        self.step_rows(step).filter_map(|r| r.errors).collect()
    }
}

/// Runs the sweep without touching the file system. `progress` sees each
/// step record as soon as it is available.
pub fn run_sweep(cfg: &RunConfig, progress: &mut dyn FnMut(&StepRecord)) -> Result<SweepReport> {
    let start = Instant::now();
    let problem = make_paper_problem(cfg.problem.dim, cfg.problem.a0)?;
    let quad = QuadratureSet::build(&problem.domain, &cfg.quadrature_config())?;
    let error_quad = if cfg.quadrature.error_refine {
        Some(QuadratureSet::build(&problem.domain, &cfg.quadrature_config().refined())?)
    } else {
        None
    };
    let grid = DictionaryGrid::for_domain(&problem.domain, cfg.solver.k, &cfg.grid_config())?;
    let delta = cfg.delta();
    let form = EnergyForm::new(&problem, &quad, delta, cfg.solver.boundary_mass)?;
    let scanner = CandidateScanner::new(&form, &grid);
    let run = UzawaRun {
        problem: &problem,
        quad: &quad,
        grid: &grid,
        error_quad: error_quad.as_ref(),
        initial_lambda: None,
    };

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut jitter_events = Vec::new();
    let mut failure = None;
    for &n in &cfg.solver.n_list {
        let ucfg = UzawaConfig {
            n,
            steps: cfg.solver.steps,
            delta,
            normalize: cfg.solver.normalize,
            boundary_mass: cfg.solver.boundary_mass,
            warm_start: cfg.solver.warm_start,
        };
        let state = match run.run_with(&form, &scanner, &ucfg) {
            Ok(s) => s,
            Err(e) => {
                failure = Some(format!("n = {n}: {e}"));
                break;
            }
        };
        for rec in state.histories {
            for r in &rec.trace.records {
                if r.jitter > 0.0 {
                    jitter_events.push(JitterEvent {
                        step: rec.step,
                        n,
                        iteration: r.iteration,
                        jitter: r.jitter,
                    });
                }
            }
            let last = rec.trace.records.last();
            summaries.push(RunSummary {
                step: rec.step,
                n,
                iterations: rec.trace.records.len(),
                final_objective: last.map_or(0.0, |r| r.objective),
                coefficient_mass: last.map_or(0.0, |r| r.coefficient_mass),
                max_orthogonality: rec.trace.records.iter().map(|r| r.orthogonality).fold(0.0, f64::max),
                monotone: rec.trace.is_monotone(1e-10),
                wall_ms: rec.wall_ms,
            });
            progress(&rec);
            rows.push(rec);
        }
    }
    rows.sort_by_key(|r| (r.step, r.n));
    summaries.sort_by_key(|s| (s.step, s.n));
    jitter_events.sort_by_key(|e| (e.step, e.n, e.iteration));
    for step in 1..=cfg.solver.steps {
        let idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].step == step && rows[i].errors.is_some()).collect();
        let mut errs: Vec<ErrorRecord> = idx.iter().map(|&i| rows[i].errors.unwrap()).collect();
        attach_rates(&mut errs);
        for (i, e) in idx.into_iter().zip(errs) {
            rows[i].errors = Some(e);
        }
    }
    Ok(SweepReport {
        config: cfg.clone(),
        delta,
        rows,
        summaries,
        jitter_events,
        total_wall_ms: start.elapsed().as_secs_f64() * 1e3,
        failure,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn format_csv(rows: &[StepRecord], timing: bool) -> String {
    let mut out = format!("{CSV_SCHEMA}\n{CSV_HEADER}\n");
    for r in rows {
        let e = r.errors;
        let wall = if timing { format!("{:e}", r.wall_ms) } else { String::new() };
        let _ = writeln!(
            out,
            "{},{},{:e},{},{},{},{},{:e},{},{}",
            r.step,
            r.n,
            r.delta,
            opt(e.map(|e| e.l2)),
            opt(e.map(|e| e.h1_semi)),
            opt(e.map(|e| e.h1_full)),
            opt(e.and_then(|e| e.rate_h1)),
            r.boundary_violation,
            opt(r.lambda_diag),
            wall
        );
    }
    out
}

pub fn format_trace(rows: &[StepRecord]) -> String {
    let mut out = format!("{CSV_SCHEMA}\n{TRACE_HEADER}\n");
    for r in rows {
        for t in &r.trace.records {
            let omega: Vec<String> = t.neuron.omega.iter().map(|w| format!("{w:e}")).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.step,
                r.n,
                t.iteration,
                omega.join(" "),
                t.neuron.b,
                t.score,
                t.correlation,
                t.objective,
                t.jitter,
                t.pivot_ratio,
                t.orthogonality,
                t.coefficient_mass
            );
        }
    }
    out
}

/// Human-readable blocks, one per Uzawa step: `n`, L² error and rate, H¹
/// error and rate.
pub fn format_table(report: &SweepReport) -> String {
    let cfg = &report.config;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}: d = {}, a0 = {}, k = {}, delta = {:.6e}, steps = {}",
        cfg.name, cfg.problem.dim, cfg.problem.a0, cfg.solver.k, report.delta, cfg.solver.steps
    );
    for step in 1..=cfg.solver.steps {
        let rows: Vec<&StepRecord> = report.step_rows(step).collect();
        if rows.is_empty() {
            continue;
        }
        let _ = writeln!(out, "\nu^{step}");
        let _ = writeln!(out, "{:>6}  {:>13}  {:>6}  {:>13}  {:>6}  {:>11}", "n", "L2 error", "rate", "H1 error", "rate", "bdry viol");
        let mut prev: Option<ErrorRecord> = None;
        for r in rows {
            let Some(e) = r.errors else {
                let _ = writeln!(out, "{:>6}  {:>13}  {:>6}  {:>13}  {:>6}  {:>11.4e}", r.n, "-", "", "-", "", r.boundary_violation);
                continue;
            };
            let l2_rate = prev.filter(|p| e.n == 2 * p.n).and_then(|p| rate(p.l2, e.l2));
            let fmt_rate = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{:>6}  {:>13.6e}  {:>6}  {:>13.6e}  {:>6}  {:>11.4e}",
                e.n,
                e.l2,
                fmt_rate(l2_rate),
                e.h1_full,
                fmt_rate(e.rate_h1),
                r.boundary_violation
            );
            prev = Some(e);
        }
    }
    if let Some(f) = &report.failure {
        let _ = writeln!(out, "\nsweep stopped early: {f}");
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    manifest_schema: u32,
    version: &'static str,
    status: String,
    delta: f64,
    bias_bound: f64,
    threads: usize,
    total_wall_ms: f64,
    config: RunConfig,
    runs: &'a [RunSummary],
    jitter_events: &'a [JitterEvent],
}

pub fn format_manifest(report: &SweepReport) -> String {
    let m = Manifest {
        manifest_schema: 1,
        version: env!("CARGO_PKG_VERSION"),
        status: report.failure.clone().map_or_else(|| "complete".to_string(), |f| format!("failed: {f}")),
        delta: report.delta,
        bias_bound: report.config.dictionary.bias_bound,
        threads: rayon::current_num_threads(),
        total_wall_ms: report.total_wall_ms,
        config: report.config.pinned(),
        runs: &report.summaries,
        jitter_events: &report.jitter_events,
    };
    toml::to_string(&m).expect("manifest serializes")
}

/// Paths of the files written for one run.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub csv: PathBuf,
    pub table: PathBuf,
    pub manifest: PathBuf,
    pub trace: Option<PathBuf>,
}

pub fn write_artifacts(report: &SweepReport, dir: &Path) -> Result<Artifacts> {
    fs::create_dir_all(dir)?;
    let art = Artifacts {
        csv: dir.join("results.csv"),
        table: dir.join("table.txt"),
        manifest: dir.join("manifest.toml"),
        trace: report.config.output.trace.then(|| dir.join("trace.csv")),
    };
    fs::write(&art.csv, format_csv(&report.rows, report.config.output.timing))?;
    fs::write(&art.table, format_table(report))?;
    fs::write(&art.manifest, format_manifest(report))?;
    if let Some(p) = &art.trace {
        fs::write(p, format_trace(&report.rows))?;
    }
    Ok(art)
}

/// Runs the sweep and writes its artifacts to `cfg.output.dir`. A sweep that
/// stops early still writes everything computed so far, then reports the
/// failure as an error.
pub fn run_experiment(cfg: &RunConfig, progress: &mut dyn FnMut(&StepRecord)) -> Result<(SweepReport, Artifacts)> {
    let report = run_sweep(cfg, progress)?;
    let art = write_artifacts(&report, &cfg.output.dir)?;
    match &report.failure {
        Some(f) => Err(Error::Contract(format!("sweep failed ({f}); partial results in {}", art.csv.display()))),
        None => Ok((report, art)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate_config;

    fn tiny(extra: &str) -> RunConfig {
        let text = format!(
            "[solver]\nn_list = [4, 8]\n[quadrature]\ncells_per_axis = 200\n[dictionary]\nn_b = 201\nbias_bound = 1.0\n{extra}"
        );
        validate_config(&text, None).unwrap()
    }

    #[test]
    fn csv_layout_and_order() {
        let cfg = tiny("");
        let rep = run_sweep(&cfg, &mut |_| {}).unwrap();
        let csv = format_csv(&rep.rows, false);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_SCHEMA);
        assert_eq!(lines[1], CSV_HEADER);
        assert_eq!(lines.len(), 2 + 4);
        let keys: Vec<(String, String)> = lines[2..]
            .iter()
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                assert_eq!(f.len(), 10);
                assert_eq!(f[9], "");
                (f[0].to_string(), f[1].to_string())
            })
            .collect();
        assert_eq!(keys, [("1", "4"), ("1", "8"), ("2", "4"), ("2", "8")].map(|(a, b)| (a.to_string(), b.to_string())));
        // First row of each step has no rate; the second does.
        assert_eq!(lines[2].split(',').nth(6), Some(""));
        assert!(!lines[3].split(',').nth(6).unwrap().is_empty());
        // Floats round-trip exactly.
        let h1: f64 = lines[3].split(',').nth(5).unwrap().parse().unwrap();
        assert_eq!(h1, rep.rows[1].errors.unwrap().h1_full);
    }

    #[test]
    fn single_n_has_no_rates() {
        let cfg = validate_config(
            "[solver]\nn_list = [8]\n[quadrature]\ncells_per_axis = 200\n[dictionary]\nn_b = 101\n",
            None,
        )
        .unwrap();
        let rep = run_sweep(&cfg, &mut |_| {}).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert!(rep.rows.iter().all(|r| r.errors.unwrap().rate_h1.is_none()));
        let table = format_table(&rep);
        assert!(table.contains("u^1") && table.contains("u^2"));
    }

    #[test]
    fn artifacts_are_written_and_manifest_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny("[output]\ntrace = true\n");
        cfg.output.dir = dir.path().to_path_buf();
        let (rep, art) = run_experiment(&cfg, &mut |_| {}).unwrap();
        let trace = fs::read_to_string(art.trace.unwrap()).unwrap();
        assert_eq!(trace.lines().count(), 2 + 2 * (4 + 8));
        let manifest = fs::read_to_string(&art.manifest).unwrap();
        let again = crate::config::load_config(&manifest, None).unwrap();
        assert_eq!(again, cfg.pinned());
        assert_eq!(again.delta(), rep.delta);
    }
}
