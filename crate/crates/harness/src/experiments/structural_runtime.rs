//! Solver time with and without knowledge of the totally stubborn agents.
//!
//! The full pipeline searches every agent's levels within the window around
//! its planted level. The reduced pipeline pins the stubborn agents and
//! collapses each (community, initial value) group into one representative.

use std::path::Path;
use std::time::Instant;

use fj_core::network::{block_weighted_adjacency, row_normalize, Communities};
use fj_core::verify::{
    encode_smtlib, real_variable_count, reduce_problem, run_solver, smt_for_reduced, smt_verify, SolverConfig,
    Status, ToleranceMode,
};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::instances::{stream, stubborn_instance};
use crate::report::{median, write_csv, write_text, Outcome};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub seed: u64,
    pub n: usize,
    pub horizon: usize,
    pub d_x: u32,
    pub d_lambda: u32,
    pub window: String,
    pub stubborn: usize,
    pub groups: usize,
    pub engine: String,
    pub full_status: Status,
    pub reduced_status: Status,
    pub full_real_vars: usize,
    pub reduced_real_vars: usize,
    pub verdicts_equal: bool,
    /// Set when either run ended without a SAT/UNSAT answer.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub seed: u64,
    pub full_seconds: f64,
    pub reduced_seconds: f64,
    pub spawn_overhead_seconds: f64,
    pub full_net_seconds: f64,
    pub reduced_net_seconds: f64,
}

/// Median wall time of a solver run on an empty script.
pub fn spawn_overhead(solver: &SolverConfig, runs: usize) -> Result<f64> {
    let times: Vec<f64> = (0..runs.max(1))
        .map(|_| {
            let start = Instant::now();
            run_solver("(set-logic QF_LIRA)\n(check-sat)\n", solver).map(|_| start.elapsed().as_secs_f64())
        })
        .collect::<fj_core::Result<_>>()?;
    Ok(median(&times))
}

/// Runs both pipelines for one seed at the first grid resolution.
pub fn seed_run(cfg: &ExperimentConfig, seed: u64, overhead: f64) -> Result<(RuntimeRow, TimingRow)> {
    let n = cfg.n;
    let communities = Communities::two_halves(n);
    let [w_in, w_out] = &cfg.block_weights;
    let w = row_normalize(&block_weighted_adjacency(n, &w_in.0, &w_out.0, &communities)?)?;
    let (d_x, d_lambda) = (cfg.d_x[0], cfg.d_lambda[0]);
    let mut rng = stream(seed, 1);
    let inst = stubborn_instance(
        w,
        communities.clone(),
        d_x,
        d_lambda,
        cfg.horizon,
        cfg.stubborn_fraction,
        &cfg.lambda_window.0,
        &mut rng,
    )?;
    let reduced = reduce_problem(&inst.problem, &communities, &inst.stubborn)?;
    let solver = cfg.solver_config();
    let mode = ToleranceMode::Kappa;

    let start = Instant::now();
    let full = smt_verify(&inst.problem, mode, &solver)?;
    let full_seconds = full.solve_seconds.unwrap_or_else(|| start.elapsed().as_secs_f64());
    let start = Instant::now();
    let red = reduced.smt_verify(mode, &solver)?;
    let reduced_seconds = red.solve_seconds.unwrap_or_else(|| start.elapsed().as_secs_f64());

    let row = RuntimeRow {
        seed,
        n,
        horizon: cfg.horizon,
        d_x,
        d_lambda,
        window: cfg.lambda_window.to_string(),
        stubborn: inst.stubborn.len(),
        groups: reduced.reduction.groups.len(),
        engine: "smt".into(),
        full_status: full.status,
        reduced_status: red.status,
        full_real_vars: real_variable_count(&encode_smtlib(&inst.problem, mode)),
        reduced_real_vars: real_variable_count(&smt_for_reduced(&reduced, mode)),
        verdicts_equal: full.status == red.status,
        flagged: full.status == Status::Inconclusive || red.status == Status::Inconclusive,
    };
    let timing = TimingRow {
        seed,
        full_seconds,
        reduced_seconds,
        spawn_overhead_seconds: overhead,
        full_net_seconds: (full_seconds - overhead).max(0.0),
        reduced_net_seconds: (reduced_seconds - overhead).max(0.0),
    };
    Ok((row, timing))
}

fn report(cfg: &ExperimentConfig, rows: &[RuntimeRow], timing: &[TimingRow], overhead: f64) -> String {
    let full: Vec<f64> = timing.iter().map(|t| t.full_net_seconds).collect();
    let red: Vec<f64> = timing.iter().map(|t| t.reduced_net_seconds).collect();
    let faster = timing.iter().filter(|t| t.reduced_seconds < t.full_seconds).count();
    let mut s = String::new();
    s.push_str("# Structural reduction runtime\n\n");
    s.push_str("## Methodology\n\n");
    s.push_str(&format!(
        "- Solver command: `{}`, timeout {} s per query.\n",
        cfg.solver, cfg.solver_timeout_secs
    ));
    s.push_str("- Seeds run one after another so timings do not compete for cores.\n");
    s.push_str("- Each time is the wall clock from process spawn to the parsed answer.\n");
    s.push_str(&format!(
        "- Spawn overhead is the median time of an empty `(check-sat)` run ({overhead:.4} s) and is subtracted in the net columns.\n"
    ));
    s.push_str("- Absolute times depend on the machine; only the comparison between the two pipelines is meaningful.\n\n");
    s.push_str("## Summary\n\n");
    s.push_str(&format!(
        "- n = {}, T = {}, d_x = {}, d_lambda = {}, stubborn fraction {}, window {}.\n",
        cfg.n, cfg.horizon, cfg.d_x[0], cfg.d_lambda[0], cfg.stubborn_fraction, cfg.lambda_window
    ));
    s.push_str(&format!(
        "- Verdicts equal on {}/{} seeds; {} consistent in the full pipeline.\n",
        rows.iter().filter(|r| r.verdicts_equal).count(),
        rows.len(),
        rows.iter().filter(|r| r.full_status == Status::Consistent).count()
    ));
    if !full.is_empty() {
        s.push_str(&format!(
            "- Median net time: full {:.3} s, reduced {:.3} s; reduced faster on {faster}/{} seeds.\n",
            median(&full),
            median(&red),
            timing.len()
        ));
    }
    s
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let solver = cfg.solver_config();
    if !solver.available() {
        return Err(HarnessError::Config(format!("solver `{}` is not available", cfg.solver)));
    }
    let overhead = spawn_overhead(&solver, 5)?;
    let mut rows = Vec::new();
    let mut timing = Vec::new();
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    for &seed in &seeds {
        let (r, t) = seed_run(cfg, seed, overhead)?;
        rows.push(r);
        timing.push(t);
    }
    let csv = out.join("structural_runtime.csv");
    let times = out.join("structural_runtime_timing.csv");
    let md = out.join("structural_runtime.md");
    write_csv(&csv, &rows)?;
    write_csv(&times, &timing)?;
    write_text(&md, &report(cfg, &rows, &timing, overhead))?;
    let mut outcome = Outcome {
        files: vec![csv, times, md],
        ..Outcome::default()
    };
    for r in &rows {
        if !r.verdicts_equal {
            outcome.failures.push(format!(
                "seed {}: full {} vs reduced {}",
                r.seed, r.full_status, r.reduced_status
            ));
        }
        if r.reduced_real_vars >= r.full_real_vars {
            outcome.failures.push(format!(
                "seed {}: reduced encoding has {} real variables, full {}",
                r.seed, r.reduced_real_vars, r.full_real_vars
            ));
        }
        if r.flagged {
            outcome.notes.push(format!("seed {}: solver gave no answer", r.seed));
        }
    }
    Ok(outcome)
}
