//! Output distance of systems on the segment between an abstraction and the
//! concrete system, `x̌(α) = (1-α) x̌^ab + α x̌`, `λ(α)` likewise, sharing `W`.

use std::path::Path;

use fj_core::abstraction::{snap, AbstractGrid};
use fj_core::dynamics::{hamming, simulate, StubbornnessVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::instances::{sample_concrete, sbm_pair, stream};
use crate::report::{write_csv, Outcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationRow {
    pub seed: u64,
    pub n: usize,
    pub horizon: usize,
    pub d_x: u32,
    pub d_lambda: u32,
    pub alpha: f64,
    pub t: usize,
    pub engine: String,
    pub hamming: f64,
}

fn lerp(a: &[f64], b: &[f64], alpha: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(&p, &q)| ((1.0 - alpha) * p + alpha * q).clamp(0.0, 1.0))
        .collect()
}

fn seed_rows(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<InterpolationRow>> {
    let (w, _) = sbm_pair(cfg.n, cfg.sbm.p_in, cfg.sbm.p_out, seed)?;
    let mut rng = stream(seed, 1);
    let (x, lambda) = sample_concrete(cfg.n, 0.0, &mut rng)?;
    let gamma = cfg.gamma.f64();
    let reference = simulate(&x, &lambda, &w, cfg.horizon, gamma)?;
    let mut rows = Vec::new();
    for &d_x in &cfg.d_x {
        for &d_lambda in &cfg.d_lambda {
            let grid = AbstractGrid::new(d_x, d_lambda, w.clone(), 0.0)?;
            let ab = snap(&x, &lambda, &grid)?;
            let x_ab = ab.init_f64(&grid);
            let l_ab = ab.lambda_f64(&grid);
            for &alpha in &cfg.alpha {
                // The endpoints are the two systems themselves, not a rounding of them.
                let (xa, la) = if alpha == 1.0 {
                    (x.clone(), lambda.as_slice().to_vec())
                } else {
                    (lerp(&x_ab, &x, alpha), lerp(&l_ab, lambda.as_slice(), alpha))
                };
                let traj = simulate(&xa, &StubbornnessVector::new(la)?, &w, cfg.horizon, gamma)?;
                for t in 0..=cfg.horizon {
                    rows.push(InterpolationRow {
                        seed,
                        n: cfg.n,
                        horizon: cfg.horizon,
                        d_x,
                        d_lambda,
                        alpha,
                        t,
                        engine: "float-simulation".into(),
                        hamming: hamming(&reference.outputs[t], &traj.outputs[t])?,
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn rows(cfg: &ExperimentConfig) -> Result<Vec<InterpolationRow>> {
    let per_seed: Vec<Vec<InterpolationRow>> = cfg
        .seeds
        .par_iter()
        .map(|&s| seed_rows(cfg, s))
        .collect::<Result<_>>()?;
    let mut rows: Vec<InterpolationRow> = per_seed.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        (a.d_x, a.d_lambda, a.seed, a.t)
            .cmp(&(b.d_x, b.d_lambda, b.seed, b.t))
            .then(a.alpha.total_cmp(&b.alpha))
    });
    Ok(rows)
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let rows = rows(cfg)?;
    let path = out.join("interpolation.csv");
    write_csv(&path, &rows)?;
    let mut outcome = Outcome {
        files: vec![path],
        ..Outcome::default()
    };
    let nonzero_at_one = rows.iter().filter(|r| r.alpha == 1.0 && r.hamming != 0.0).count();
    if nonzero_at_one > 0 {
        outcome
            .failures
            .push(format!("{nonzero_at_one} rows at alpha = 1 have nonzero distance"));
    }
    Ok(outcome)
}
