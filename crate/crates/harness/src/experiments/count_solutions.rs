//! Number of abstract configurations consistent with planted observations
//! when every level must lie within `ε_Λ` of the planted stubbornness.

use std::path::Path;

use fj_core::abstraction::{AbstractConfig, AbstractGrid};
use fj_core::rational;
use fj_core::verify::{
    count_solutions, count_with_enumeration, count_with_solver, CountEngine, EnumerationOptions, ToleranceMode,
    VerificationProblem,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{EngineSelection, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::instances::{planted_problem, random_abstract, sbm_pair, stream};
use crate::report::{write_csv, Outcome};

pub const UNCONSTRAINED: &str = "none";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRow {
    pub seed: u64,
    pub n: usize,
    pub horizon: usize,
    pub d_x: u32,
    pub d_lambda: u32,
    pub kappa: String,
    /// Window half-width as an exact rational, or `none` without a window.
    pub eps_lambda: String,
    pub engine: String,
    pub count: u64,
}

/// The planted problem of one seed and grid.
pub fn planted(cfg: &ExperimentConfig, seed: u64, d_x: u32, d_lambda: u32) -> Result<(VerificationProblem, AbstractConfig)> {
    let (w, _) = sbm_pair(cfg.n, cfg.sbm.p_in, cfg.sbm.p_out, seed)?;
    let grid = AbstractGrid::new(d_x, d_lambda, w, 0.0)?;
    let mut rng = stream(seed, 1);
    let config = random_abstract(&grid, &mut rng);
    let problem = planted_problem(
        &grid,
        &config,
        cfg.horizon,
        cfg.kappa.0.clone(),
        cfg.delta.0.clone(),
        cfg.gamma.0.clone(),
    )?;
    Ok((problem, config))
}

fn engines(cfg: &ExperimentConfig) -> Vec<(&'static str, CountEngine)> {
    let mut out = Vec::new();
    if cfg.engine.uses_enumeration() {
        out.push((
            "enumeration",
            CountEngine::Enumeration(EnumerationOptions {
                cap: cfg.enumeration_cap as u128,
                max_witnesses: 0,
            }),
        ));
    }
    if cfg.engine.uses_smt() {
        out.push(("smt", CountEngine::Smt(cfg.solver_config())));
    }
    out
}

fn grid_rows(cfg: &ExperimentConfig, seed: u64, d_x: u32, d_lambda: u32) -> Result<Vec<CountRow>> {
    let (problem, config) = planted(cfg, seed, d_x, d_lambda)?;
    let lambda_hat = config.lambda_exact(&problem.grid);
    let row = |eps: String, engine: &str, count: u64| CountRow {
        seed,
        n: cfg.n,
        horizon: cfg.horizon,
        d_x,
        d_lambda,
        kappa: cfg.kappa.to_string(),
        eps_lambda: eps,
        engine: engine.into(),
        count,
    };
    let mut rows = Vec::new();
    for (name, engine) in engines(cfg) {
        for eps in &cfg.eps_lambda {
            let count = count_solutions(&problem, &lambda_hat, &eps.0, &engine)?;
            rows.push(row(eps.to_string(), name, count));
        }
        let total = match &engine {
            CountEngine::Enumeration(opts) => count_with_enumeration(&problem, ToleranceMode::Kappa, opts)?,
            CountEngine::Smt(solver) => count_with_solver(&problem, ToleranceMode::Kappa, solver)?,
        };
        rows.push(row(UNCONSTRAINED.into(), name, total));
    }
    Ok(rows)
}

pub fn rows(cfg: &ExperimentConfig) -> Result<Vec<CountRow>> {
    let tasks: Vec<(u64, u32, u32)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| cfg.d_x.iter().flat_map(move |&dx| cfg.d_lambda.iter().map(move |&dl| (s, dx, dl))))
        .collect();
    let per: Vec<Vec<CountRow>> = tasks
        .par_iter()
        .map(|&(s, dx, dl)| grid_rows(cfg, s, dx, dl))
        .collect::<Result<_>>()?;
    let mut rows: Vec<CountRow> = per.into_iter().flatten().collect();
    let eps_key = |e: &str| -> (bool, rational::Rational) {
        match rational::parse_rational(e) {
            Ok(v) => (false, v),
            Err(_) => (true, rational::int(0)),
        }
    };
    rows.sort_by(|a, b| {
        (a.seed, a.d_x, a.d_lambda, &a.engine, eps_key(&a.eps_lambda)).cmp(&(
            b.seed,
            b.d_x,
            b.d_lambda,
            &b.engine,
            eps_key(&b.eps_lambda),
        ))
    });
    Ok(rows)
}

/// Properties the counts must have; one message per violation.
pub fn check(rows: &[CountRow], engine: EngineSelection) -> Vec<String> {
    let mut problems = Vec::new();
    let mut groups: Vec<(u64, u32, u32, String)> = rows
        .iter()
        .map(|r| (r.seed, r.d_x, r.d_lambda, r.engine.clone()))
        .collect();
    groups.dedup();
    for (seed, d_x, d_lambda, name) in &groups {
        let sel: Vec<&CountRow> = rows
            .iter()
            .filter(|r| (&r.seed, &r.d_x, &r.d_lambda, &r.engine) == (seed, d_x, d_lambda, name))
            .collect();
        let windowed: Vec<&&CountRow> = sel.iter().filter(|r| r.eps_lambda != UNCONSTRAINED).collect();
        for pair in windowed.windows(2) {
            if pair[1].count < pair[0].count {
                problems.push(format!(
                    "seed {seed} d_x {d_x} d_lambda {d_lambda} {name}: count drops from {} to {} between eps {} and {}",
                    pair[0].count, pair[1].count, pair[0].eps_lambda, pair[1].eps_lambda
                ));
            }
        }
        let total = sel.iter().find(|r| r.eps_lambda == UNCONSTRAINED).map(|r| r.count);
        let at_one = sel.iter().find(|r| r.eps_lambda == "1").map(|r| r.count);
        if let (Some(total), Some(at_one)) = (total, at_one) {
            if total != at_one {
                problems.push(format!(
                    "seed {seed} d_x {d_x} d_lambda {d_lambda} {name}: count at eps 1 is {at_one}, unconstrained {total}"
                ));
            }
        }
    }
    if engine == EngineSelection::Both {
        for r in rows.iter().filter(|r| r.engine == "enumeration") {
            let other = rows.iter().find(|o| {
                o.engine == "smt"
                    && (o.seed, o.d_x, o.d_lambda, &o.eps_lambda) == (r.seed, r.d_x, r.d_lambda, &r.eps_lambda)
            });
            match other {
                Some(o) if o.count == r.count => {}
                Some(o) => problems.push(format!(
                    "seed {} eps {}: enumeration counts {}, SMT counts {}",
                    r.seed, r.eps_lambda, r.count, o.count
                )),
                None => problems.push(format!("seed {} eps {}: no SMT row", r.seed, r.eps_lambda)),
            }
        }
    }
    problems
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    if cfg.engine.uses_enumeration() && cfg.n > 64 {
        return Err(HarnessError::Config(format!(
            "n = {} is too large for the enumeration cross-check",
            cfg.n
        )));
    }
    let rows = rows(cfg)?;
    let path = out.join("count_solutions.csv");
    write_csv(&path, &rows)?;
    Ok(Outcome {
        files: vec![path],
        notes: Vec::new(),
        failures: check(&rows, cfg.engine),
    })
}
