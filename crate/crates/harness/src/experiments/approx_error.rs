//! State and output error between a sampled concrete system and its snapped
//! abstraction, swept over grid resolutions.

use std::path::Path;

use fj_core::abstraction::{snap, AbstractGrid};
use fj_core::dynamics::{hamming, simulate};
use fj_core::linalg::distance;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::instances::{sample_concrete, sbm_pair, stream};
use crate::report::{median, write_csv, Outcome};

/// Which influence matrix the abstraction uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbstractWeights {
    True,
    Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxErrorRow {
    pub seed: u64,
    pub n: usize,
    pub horizon: usize,
    pub d_x: u32,
    pub d_lambda: u32,
    pub w_ab: AbstractWeights,
    pub p_in: f64,
    pub p_out: f64,
    pub eps_w: f64,
    pub engine: String,
    pub max_state_error: f64,
    pub max_output_error: f64,
}

fn seed_rows(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<ApproxErrorRow>> {
    let (w, w_exp) = sbm_pair(cfg.n, cfg.sbm.p_in, cfg.sbm.p_out, seed)?;
    let mut rng = stream(seed, 1);
    let (x, lambda) = sample_concrete(cfg.n, 0.0, &mut rng)?;
    let gamma = cfg.gamma.f64();
    let concrete = simulate(&x, &lambda, &w, cfg.horizon, gamma)?;
    let mut rows = Vec::new();
    for (kind, w_ab) in [(AbstractWeights::True, &w), (AbstractWeights::Expected, &w_exp)] {
        for &d_x in &cfg.d_x {
            for &d_lambda in &cfg.d_lambda {
                let grid = AbstractGrid::measured(d_x, d_lambda, w_ab.clone(), &w)?;
                let ab = snap(&x, &lambda, &grid)?.to_model(&grid)?;
                let traj = ab.simulate(cfg.horizon, gamma)?;
                let mut state = 0.0f64;
                let mut output = 0.0f64;
                for t in 1..=cfg.horizon {
                    state = state.max(distance(concrete.opinions(t), traj.opinions(t)));
                    output = output.max(hamming(&concrete.outputs[t], &traj.outputs[t])?);
                }
                rows.push(ApproxErrorRow {
                    seed,
                    n: cfg.n,
                    horizon: cfg.horizon,
                    d_x,
                    d_lambda,
                    w_ab: kind,
                    p_in: cfg.sbm.p_in,
                    p_out: cfg.sbm.p_out,
                    eps_w: grid.eps_w,
                    engine: "float-simulation".into(),
                    max_state_error: state,
                    max_output_error: output,
                });
            }
        }
    }
    Ok(rows)
}

pub fn rows(cfg: &ExperimentConfig) -> Result<Vec<ApproxErrorRow>> {
    let per_seed: Vec<Vec<ApproxErrorRow>> = cfg
        .seeds
        .par_iter()
        .map(|&s| seed_rows(cfg, s))
        .collect::<Result<_>>()?;
    let mut rows: Vec<ApproxErrorRow> = per_seed.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.w_ab, r.d_x, r.d_lambda, r.seed));
    Ok(rows)
}

/// Median of both error columns per `(w_ab, d_x, d_lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianCell {
    pub w_ab: AbstractWeights,
    pub d_x: u32,
    pub d_lambda: u32,
    pub state: f64,
    pub output: f64,
}

pub fn medians(rows: &[ApproxErrorRow]) -> Vec<MedianCell> {
    let mut keys: Vec<(AbstractWeights, u32, u32)> = rows.iter().map(|r| (r.w_ab, r.d_x, r.d_lambda)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(w_ab, d_x, d_lambda)| {
            let sel: Vec<&ApproxErrorRow> = rows
                .iter()
                .filter(|r| (r.w_ab, r.d_x, r.d_lambda) == (w_ab, d_x, d_lambda))
                .collect();
            let state: Vec<f64> = sel.iter().map(|r| r.max_state_error).collect();
            let output: Vec<f64> = sel.iter().map(|r| r.max_output_error).collect();
            MedianCell {
                w_ab,
                d_x,
                d_lambda,
                state: median(&state),
                output: median(&output),
            }
        })
        .collect()
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let rows = rows(cfg)?;
    let path = out.join("approx_error.csv");
    write_csv(&path, &rows)?;
    let mut outcome = Outcome {
        files: vec![path],
        ..Outcome::default()
    };
    for m in medians(&rows) {
        outcome.notes.push(format!(
            "w_ab={:?} d_x={} d_lambda={}: median max state error {:.4}, median max output error {:.4}",
            m.w_ab, m.d_x, m.d_lambda, m.state, m.output
        ));
    }
    Ok(outcome)
}
