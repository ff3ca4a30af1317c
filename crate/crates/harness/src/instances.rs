//! Seeded instance generators shared by the experiments, the CLI and the
//! acceptance suite.

use fj_core::abstraction::{AbstractConfig, AbstractGrid, SearchSpace};
use fj_core::dynamics::{simulate_exact, BinaryOutput, InfluenceMatrix, StubbornnessVector};
use fj_core::network::{
    expected_adjacency, row_normalize, sbm_generate, Communities, SbmParams, SelfLoopPolicy,
};
use fj_core::observation::ObservationSpec;
use fj_core::rational::{self, Rational};
use fj_core::verify::VerificationProblem;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Independent stream for `(master seed, index)`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Row-stochastic matrix with small integer weights, exact.
pub fn random_rational_stochastic<R: Rng>(n: usize, max_weight: i64, rng: &mut R) -> Result<InfluenceMatrix> {
    let rows = (0..n)
        .map(|i| {
            let mut raw: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=max_weight)).collect();
            if raw.iter().all(|&v| v == 0) {
                raw[i] = 1;
            }
            let total: i64 = raw.iter().sum();
            raw.into_iter().map(|v| rational::ratio(v, total)).collect()
        })
        .collect();
    Ok(InfluenceMatrix::from_rationals(rows)?)
}

/// Dense row-stochastic matrix with continuous weights and a positive
/// diagonal.
pub fn random_dense_stochastic<R: Rng>(n: usize, rng: &mut R) -> Result<InfluenceMatrix> {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            r[i] += 1e-3;
            let s: f64 = r.iter().sum();
            r.iter().map(|v| v / s).collect()
        })
        .collect();
    Ok(InfluenceMatrix::from_f64_rows(&rows)?)
}

/// Row-normalized SBM sample and the row-normalized expected adjacency of
/// the same model. Isolated agents get a unit self-loop in both.
pub fn sbm_pair(n: usize, p_in: f64, p_out: f64, seed: u64) -> Result<(InfluenceMatrix, InfluenceMatrix)> {
    let params = SbmParams::two_communities(n, p_in, p_out, seed);
    let policy = SelfLoopPolicy::AddUnitSelfLoop;
    let w = row_normalize(&sbm_generate(&params)?.with_policy(policy))?;
    let w_exp = row_normalize(&expected_adjacency(&params)?.with_policy(policy))?;
    Ok((w, w_exp))
}

/// Uniform initial opinions and stubbornness in `[lambda_min, 1]`.
pub fn sample_concrete<R: Rng>(n: usize, lambda_min: f64, rng: &mut R) -> Result<(Vec<f64>, StubbornnessVector)> {
    let x = (0..n).map(|_| rng.gen::<f64>()).collect();
    let l = (0..n).map(|_| rng.gen_range(lambda_min..=1.0)).collect();
    Ok((x, StubbornnessVector::new(l)?))
}

/// Initial opinions in `[0, margin] ∪ [1 - margin, 1]` and stubbornness in
/// `[lambda_min, 1]`: a regime where opinions stay away from the threshold.
pub fn sample_polarized<R: Rng>(
    n: usize,
    margin: f64,
    lambda_min: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, StubbornnessVector)> {
    let x = (0..n)
        .map(|_| {
            let v = rng.gen_range(0.0..=margin);
            if rng.gen_bool(0.5) {
                1.0 - v
            } else {
                v
            }
        })
        .collect();
    let l = (0..n).map(|_| rng.gen_range(lambda_min..=1.0)).collect();
    Ok((x, StubbornnessVector::new(l)?))
}

pub fn random_abstract<R: Rng>(grid: &AbstractGrid, rng: &mut R) -> AbstractConfig {
    let n = grid.dim();
    AbstractConfig {
        init_indices: (0..n).map(|_| rng.gen_range(0..grid.init_count())).collect(),
        lambda_levels: (0..n).map(|_| rng.gen_range(0..grid.level_count())).collect(),
    }
}

/// Exact outputs of an abstract configuration for `t = 0..=horizon`.
pub fn abstract_outputs(
    config: &AbstractConfig,
    grid: &AbstractGrid,
    horizon: usize,
    gamma: &Rational,
) -> Result<Vec<BinaryOutput>> {
    let traj = simulate_exact(
        &config.init_exact(grid),
        &config.lambda_exact(grid),
        &grid.w_ab,
        horizon,
        gamma,
    )?;
    Ok(traj.outputs)
}

/// Flips each observed bit independently with probability `p`.
pub fn flip_bits<R: Rng>(observed: &[BinaryOutput], p: f64, rng: &mut R) -> Vec<BinaryOutput> {
    observed
        .iter()
        .map(|y| BinaryOutput::new(y.bits().iter().map(|&b| b ^ rng.gen_bool(p)).collect()))
        .collect()
}

/// A problem over the full grid whose observations are the exact outputs of
/// `planted`.
pub fn planted_problem(
    grid: &AbstractGrid,
    planted: &AbstractConfig,
    horizon: usize,
    kappa: Rational,
    delta: Rational,
    gamma: Rational,
) -> Result<VerificationProblem> {
    let observed = abstract_outputs(planted, grid, horizon, &gamma)?;
    let spec = ObservationSpec::new(observed, kappa)?;
    Ok(VerificationProblem::new(
        spec,
        grid.clone(),
        SearchSpace::full(grid),
        delta,
        gamma,
    )?)
}

/// Random small problem: random exact `W`, planted outputs with some bits
/// flipped, random tolerance and a random sub-space containing nothing in
/// particular. Mixes satisfiable and unsatisfiable instances.
pub fn random_small_problem<R: Rng>(
    n: usize,
    horizon: usize,
    d_x: u32,
    d_lambda: u32,
    rng: &mut R,
) -> Result<VerificationProblem> {
    let w = random_rational_stochastic(n, 3, rng)?;
    let grid = AbstractGrid::new(d_x, d_lambda, w, 0.0)?;
    let planted = random_abstract(&grid, rng);
    let gamma = rational::ratio(1, 2);
    let clean = abstract_outputs(&planted, &grid, horizon, &gamma)?;
    let observed = flip_bits(&clean, rng.gen_range(0.0..0.4), rng);
    let budget = rng.gen_range(0..=n / 2) as i64;
    let spec = ObservationSpec::new(observed, rational::ratio(budget, n as i64))?;
    let mut space = SearchSpace::full(&grid);
    for opts in space.init_options.iter_mut().chain(space.lambda_options.iter_mut()) {
        if opts.len() > 1 && rng.gen_bool(0.2) {
            opts.shuffle(rng);
            opts.truncate(rng.gen_range(1..opts.len()));
            opts.sort_unstable();
        }
    }
    Ok(VerificationProblem::new(spec, grid, space, rational::ratio(1, 10), gamma)?)
}

/// Setting of the structural runtime experiment.
#[derive(Debug, Clone)]
pub struct StubbornInstance {
    pub communities: Communities,
    pub problem: VerificationProblem,
    pub planted: AbstractConfig,
    /// `(agent, init index)` of every totally stubborn agent.
    pub stubborn: Vec<(usize, usize)>,
}

/// Block-weighted network with a fraction of totally stubborn agents and a
/// planted abstract configuration observed exactly (`κ = 0`). Every agent's
/// levels are restricted to those within `window` of its planted level.
#[allow(clippy::too_many_arguments)]
pub fn stubborn_instance<R: Rng>(
    w: InfluenceMatrix,
    communities: Communities,
    d_x: u32,
    d_lambda: u32,
    horizon: usize,
    stubborn_fraction: f64,
    window: &Rational,
    rng: &mut R,
) -> Result<StubbornInstance> {
    let n = w.dim();
    let grid = AbstractGrid::new(d_x, d_lambda, w, 0.0)?;
    let top = grid.level_count() - 1;
    let mut agents: Vec<usize> = (0..n).collect();
    agents.shuffle(rng);
    let count = (stubborn_fraction * n as f64).round() as usize;
    let mut is_stubborn = vec![false; n];
    for &i in &agents[..count] {
        is_stubborn[i] = true;
    }
    let mut planted = random_abstract(&grid, rng);
    for i in 0..n {
        if is_stubborn[i] {
            planted.lambda_levels[i] = top;
        } else {
            planted.lambda_levels[i] = rng.gen_range(0..top);
        }
    }
    let stubborn = (0..n)
        .filter(|&i| is_stubborn[i])
        .map(|i| (i, planted.init_indices[i]))
        .collect();
    let gamma = rational::ratio(1, 2);
    let observed = abstract_outputs(&planted, &grid, horizon, &gamma)?;
    let spec = ObservationSpec::new(observed, rational::int(0))?;
    let lambda_hat = planted.lambda_exact(&grid);
    let space = SearchSpace::full(&grid).restrict_lambda(&grid, &lambda_hat, window)?;
    let problem = VerificationProblem::new(spec, grid, space, rational::ratio(1, 10), gamma)?;
    Ok(StubbornInstance {
        communities,
        problem,
        planted,
        stubborn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u32> = (0..4).map(|_| stream(7, 1).gen()).collect();
        let b: Vec<u32> = (0..4).map(|_| stream(7, 1).gen()).collect();
        assert_eq!(a, b);
        assert_ne!(stream(7, 1).gen::<u64>(), stream(7, 2).gen::<u64>());
    }

    #[test]
    fn planted_problem_contains_its_planted_config() {
        let mut rng = stream(1, 0);
        let w = random_rational_stochastic(4, 3, &mut rng).unwrap();
        let grid = AbstractGrid::new(2, 2, w, 0.0).unwrap();
        let planted = random_abstract(&grid, &mut rng);
        let p = planted_problem(&grid, &planted, 3, rational::int(0), rational::ratio(1, 10), rational::ratio(1, 2))
            .unwrap();
        let outputs = abstract_outputs(&planted, &grid, 3, &p.gamma).unwrap();
        assert!(p.spec.satisfies_outputs(&outputs).unwrap());
    }

    #[test]
    fn stubborn_instance_pins_levels() {
        let mut rng = stream(2, 0);
        let n = 10;
        let w = InfluenceMatrix::uniform(n);
        let inst = stubborn_instance(w, Communities::two_halves(n), 2, 3, 2, 0.2, &rational::ratio(1, 2), &mut rng)
            .unwrap();
        assert_eq!(inst.stubborn.len(), 2);
        for &(i, k) in &inst.stubborn {
            assert_eq!(inst.planted.lambda_levels[i], 3);
            assert_eq!(inst.planted.init_indices[i], k);
        }
        assert!(inst.problem.contains(&inst.planted));
    }
}
