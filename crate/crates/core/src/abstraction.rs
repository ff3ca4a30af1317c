//! Finite abstraction of the FJ family: initial opinions on the grid
//! `{1/(2d_x), 3/(2d_x), …, (2d_x-1)/(2d_x)}`, stubbornness on
//! `{0, 1/d_λ, …, 1}`, and a fixed approximate influence matrix `W^ab` with
//! `‖W^ab - W‖ ≤ ε_w`.
//!
//! Grid indices are zero-based: init index `k` decodes to `(2k+1)/(2d_x)` and
//! level `k` to `k/d_λ`.

use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    contraction_factor, simulate, InfluenceMatrix, ModelConfig, StubbornnessVector, Trajectory,
};
use crate::error::{check_len, Error, Result};
use crate::linalg::distance;
use crate::network::weight_error;
use crate::rational::{self, Rational};

/// Slack added to the right-hand side of the one-step bound.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractGrid {
    pub d_x: u32,
    pub d_lambda: u32,
    pub w_ab: InfluenceMatrix,
    pub eps_w: f64,
}

impl AbstractGrid {
    pub fn new(d_x: u32, d_lambda: u32, w_ab: InfluenceMatrix, eps_w: f64) -> Result<Self> {
        if d_x == 0 || d_lambda == 0 {
            return Err(Error::OutOfRange(format!(
                "grid resolutions must be positive (d_x = {d_x}, d_lambda = {d_lambda})"
            )));
        }
        if !(eps_w >= 0.0 && eps_w.is_finite()) {
            return Err(Error::OutOfRange(format!("eps_w = {eps_w} must be finite and >= 0")));
        }
        Ok(AbstractGrid {
            d_x,
            d_lambda,
            w_ab,
            eps_w,
        })
    }

    /// Grid with `ε_w` set to the measured `‖W^ab - W‖`.
    pub fn measured(d_x: u32, d_lambda: u32, w_ab: InfluenceMatrix, w: &InfluenceMatrix) -> Result<Self> {
        let eps = weight_error(w, &w_ab)?;
        Self::new(d_x, d_lambda, w_ab, eps)
    }

    pub fn dim(&self) -> usize {
        self.w_ab.dim()
    }

    pub fn init_value(&self, index: usize) -> Rational {
        rational::ratio(2 * index as i64 + 1, 2 * self.d_x as i64)
    }

    pub fn level_value(&self, level: usize) -> Rational {
        rational::ratio(level as i64, self.d_lambda as i64)
    }

    pub fn init_values(&self) -> Vec<Rational> {
        (0..self.d_x as usize).map(|k| self.init_value(k)).collect()
    }

    pub fn levels(&self) -> Vec<Rational> {
        (0..=self.d_lambda as usize).map(|k| self.level_value(k)).collect()
    }

    pub fn init_count(&self) -> usize {
        self.d_x as usize
    }

    pub fn level_count(&self) -> usize {
        self.d_lambda as usize + 1
    }
}

/// A point of the abstract family, as grid indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AbstractConfig {
    pub init_indices: Vec<usize>,
    pub lambda_levels: Vec<usize>,
}

impl AbstractConfig {
    pub fn dim(&self) -> usize {
        self.init_indices.len()
    }

    pub fn validate(&self, grid: &AbstractGrid) -> Result<()> {
        check_len(grid.dim(), self.init_indices.len())?;
        check_len(grid.dim(), self.lambda_levels.len())?;
        if let Some(k) = self.init_indices.iter().find(|&&k| k >= grid.init_count()) {
            return Err(Error::OutOfRange(format!("init index {k} >= d_x = {}", grid.d_x)));
        }
        if let Some(k) = self.lambda_levels.iter().find(|&&k| k >= grid.level_count()) {
            return Err(Error::OutOfRange(format!(
                "stubbornness level {k} > d_lambda = {}",
                grid.d_lambda
            )));
        }
        Ok(())
    }

    pub fn init_exact(&self, grid: &AbstractGrid) -> Vec<Rational> {
        self.init_indices.iter().map(|&k| grid.init_value(k)).collect()
    }

    pub fn lambda_exact(&self, grid: &AbstractGrid) -> Vec<Rational> {
        self.lambda_levels.iter().map(|&k| grid.level_value(k)).collect()
    }

    pub fn init_f64(&self, grid: &AbstractGrid) -> Vec<f64> {
        self.init_exact(grid).iter().map(rational::to_f64).collect()
    }

    pub fn lambda_f64(&self, grid: &AbstractGrid) -> Vec<f64> {
        self.lambda_exact(grid).iter().map(rational::to_f64).collect()
    }

    /// The abstract system as an ordinary model over `W^ab`.
    pub fn to_model(&self, grid: &AbstractGrid) -> Result<ModelConfig> {
        self.validate(grid)?;
        ModelConfig::new(
            self.init_f64(grid),
            StubbornnessVector::new(self.lambda_f64(grid))?,
            grid.w_ab.clone(),
        )
    }

    pub fn decoded(&self, grid: &AbstractGrid) -> DecodedConfig {
        DecodedConfig {
            init_indices: self.init_indices.clone(),
            lambda_levels: self.lambda_levels.clone(),
            init_values: self.init_exact(grid),
            lambda_values: self.lambda_exact(grid),
        }
    }
}

/// Serializable view with grid values as `"p/q"` strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedConfig {
    pub init_indices: Vec<usize>,
    pub lambda_levels: Vec<usize>,
    #[serde(with = "rational::serde_str_vec")]
    pub init_values: Vec<Rational>,
    #[serde(with = "rational::serde_str_vec")]
    pub lambda_values: Vec<Rational>,
}

/// Nearest initial grid index per entry; a value on a cell boundary `k/d_x`
/// goes to the lower cell.
pub fn snap_initial(x: &[f64], d_x: u32) -> Result<Vec<usize>> {
    x.iter()
        .map(|&v| {
            let exact = rational::from_f64_exact(v)?;
            // one-based cell index ceil(x d_x), clamped to [1, d_x]
            let cell = rational::ceil_to_i64(&(exact * rational::int(d_x as i64)));
            Ok(cell.clamp(1, d_x as i64) as usize - 1)
        })
        .collect()
}

/// Nearest stubbornness level per entry; exact midpoints go to the lower level.
pub fn snap_stubbornness(lambda: &StubbornnessVector, d_lambda: u32) -> Result<Vec<usize>> {
    lambda
        .as_slice()
        .iter()
        .map(|&v| {
            let exact = rational::from_f64_exact(v)?;
            let scaled = exact * rational::int(d_lambda as i64) - rational::ratio(1, 2);
            Ok(rational::ceil_to_i64(&scaled).clamp(0, d_lambda as i64) as usize)
        })
        .collect()
}

pub fn snap(x: &[f64], lambda: &StubbornnessVector, grid: &AbstractGrid) -> Result<AbstractConfig> {
    check_len(grid.dim(), x.len())?;
    check_len(grid.dim(), lambda.len())?;
    Ok(AbstractConfig {
        init_indices: snap_initial(x, grid.d_x)?,
        lambda_levels: snap_stubbornness(lambda, grid.d_lambda)?,
    })
}

/// `ε_x = (‖W‖ + 1)/(2d_λ) + 1/(2d_x) + ε_w`
pub fn epsilon_x(w: &InfluenceMatrix, d_lambda: u32, d_x: u32, eps_w: f64) -> Result<f64> {
    Ok(epsilon_x_from_norm(w.norm()?, d_lambda, d_x, eps_w))
}

pub fn epsilon_x_from_norm(norm_w: f64, d_lambda: u32, d_x: u32, eps_w: f64) -> f64 {
    (norm_w + 1.0) / (2.0 * d_lambda as f64) + 1.0 / (2.0 * d_x as f64) + eps_w
}

/// `ε_x √n / (1 - ρ)`, the uniform-in-time state error bound.
pub fn sup_error_bound(rho: f64, eps_x: f64, n: usize) -> Result<f64> {
    if !(rho < 1.0) {
        return Err(Error::NonContractive(rho));
    }
    Ok(eps_x * (n as f64).sqrt() / (1.0 - rho))
}

/// First step `t` at which
/// `‖x(t+1) - x^ab(t+1)‖ ≤ ρ ‖x(t) - x^ab(t)‖ + √n ε_x` fails.
pub fn one_step_violation(
    traj: &Trajectory,
    traj_ab: &Trajectory,
    rho: f64,
    eps_x: f64,
) -> Result<Option<usize>> {
    check_len(traj.states.len(), traj_ab.states.len())?;
    let n = traj.states.first().map_or(0, |s| s.dim());
    let drift = (n as f64).sqrt() * eps_x;
    for t in 0..traj.horizon() {
        let now = distance(traj.opinions(t), traj_ab.opinions(t));
        let next = distance(traj.opinions(t + 1), traj_ab.opinions(t + 1));
        if next > rho * now + drift + BOUND_SLACK {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

pub fn one_step_bound_check(
    traj: &Trajectory,
    traj_ab: &Trajectory,
    rho: f64,
    eps_x: f64,
) -> Result<bool> {
    Ok(one_step_violation(traj, traj_ab, rho, eps_x)?.is_none())
}

/// `{i : |x_i - γ| ≤ η}`
pub fn near_threshold_set(x: &[f64], eta: f64, gamma: f64) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, &xi)| (xi - gamma).abs() <= eta)
        .map(|(i, _)| i)
        .collect()
}

/// At every visited state, at most `δn/2` agents lie within `√(2δ)` of the
/// threshold. Only the observed horizon is checked.
pub fn assumption2_check(traj: &Trajectory, delta: f64, gamma: f64) -> bool {
    let eta = (2.0 * delta).sqrt();
    traj.states.iter().all(|s| {
        let n = s.dim() as f64;
        near_threshold_set(&s.current, eta, gamma).len() as f64 <= delta * n / 2.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaInterval {
    pub lower: f64,
    /// `None` means unbounded above.
    pub upper: Option<f64>,
}

impl DeltaInterval {
    pub fn contains(&self, delta: f64) -> bool {
        delta >= self.lower && self.upper.is_none_or(|u| delta <= u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateConditions {
    /// `d_x ≥ 1/(2δ)`
    pub grid_resolution: bool,
    /// `‖(I - Λ)W‖ < 1`
    pub contraction: bool,
    /// `ε_x ≤ (1 - ‖(I - Λ)W‖) δ`
    pub perturbation_budget: bool,
    /// near-threshold bound, checked on the finite horizon
    pub near_threshold: bool,
}

impl CertificateConditions {
    pub fn all(&self) -> bool {
        self.grid_resolution && self.contraction && self.perturbation_budget && self.near_threshold
    }
}

/// Evidence that the concrete system is `δ`-approximately simulated by its
/// snapped abstraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationCertificate {
    pub delta: f64,
    pub rho: f64,
    pub eps_x: f64,
    pub norm_w: f64,
    pub d_x: u32,
    pub d_lambda: u32,
    pub eps_w: f64,
    pub horizon: usize,
    pub conditions: CertificateConditions,
    pub valid: bool,
    /// `δ` values for which the resolution and budget conditions both hold.
    pub admissible_delta: Option<DeltaInterval>,
}

/// `δ ≥ 1/(2d_x)` and `δ ≥ ε_x/(1 - ρ)`; empty when `ρ ≥ 1`.
pub fn admissible_delta(rho: f64, eps_x: f64, d_x: u32) -> Option<DeltaInterval> {
    if !(rho < 1.0) {
        return None;
    }
    let lower = (eps_x / (1.0 - rho)).max(1.0 / (2.0 * d_x as f64));
    Some(DeltaInterval { lower, upper: None })
}

pub fn theorem1_certificate(
    config: &ModelConfig,
    grid: &AbstractGrid,
    delta: f64,
    horizon: usize,
    gamma: f64,
) -> Result<SimulationCertificate> {
    if !(delta > 0.0) {
        return Err(Error::OutOfRange(format!("delta = {delta} must be > 0")));
    }
    check_len(grid.dim(), config.dim())?;
    let rho = contraction_factor(&config.lambda, &config.w)?;
    let norm_w = config.w.norm()?;
    let eps_x = epsilon_x_from_norm(norm_w, grid.d_lambda, grid.d_x, grid.eps_w);
    let traj = config.simulate(horizon, gamma)?;
    let conditions = CertificateConditions {
        grid_resolution: grid.d_x as f64 >= 1.0 / (2.0 * delta),
        contraction: rho < 1.0,
        perturbation_budget: eps_x <= (1.0 - rho) * delta,
        near_threshold: assumption2_check(&traj, delta, gamma),
    };
    Ok(SimulationCertificate {
        delta,
        rho,
        eps_x,
        norm_w,
        d_x: grid.d_x,
        d_lambda: grid.d_lambda,
        eps_w: grid.eps_w,
        horizon,
        valid: conditions.all(),
        conditions,
        admissible_delta: admissible_delta(rho, eps_x, grid.d_x),
    })
}

/// Per-agent admissible grid indices; the product is the search space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub init_options: Vec<Vec<usize>>,
    pub lambda_options: Vec<Vec<usize>>,
}

impl SearchSpace {
    /// Every grid point for `n` agents.
    pub fn full(grid: &AbstractGrid) -> Self {
        let n = grid.dim();
        SearchSpace {
            init_options: vec![(0..grid.init_count()).collect(); n],
            lambda_options: vec![(0..grid.level_count()).collect(); n],
        }
    }

    pub fn singleton(config: &AbstractConfig) -> Self {
        SearchSpace {
            init_options: config.init_indices.iter().map(|&k| vec![k]).collect(),
            lambda_options: config.lambda_levels.iter().map(|&k| vec![k]).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.init_options.len()
    }

    /// Number of configurations, saturating at `u128::MAX`.
    pub fn size(&self) -> u128 {
        self.init_options
            .iter()
            .chain(&self.lambda_options)
            .fold(1u128, |acc, o| acc.saturating_mul(o.len() as u128))
    }

    pub fn is_empty(&self) -> bool {
        self.size() == 0
    }

    pub fn contains(&self, config: &AbstractConfig) -> bool {
        config.dim() == self.dim()
            && config.lambda_levels.len() == self.dim()
            && config
                .init_indices
                .iter()
                .zip(&self.init_options)
                .all(|(k, o)| o.contains(k))
            && config
                .lambda_levels
                .iter()
                .zip(&self.lambda_options)
                .all(|(k, o)| o.contains(k))
    }

    pub fn validate(&self, grid: &AbstractGrid) -> Result<()> {
        check_len(grid.dim(), self.init_options.len())?;
        check_len(grid.dim(), self.lambda_options.len())?;
        for (i, o) in self.init_options.iter().enumerate() {
            if o.is_empty() {
                return Err(Error::EmptyBox(format!("agent {i} has no admissible initial value")));
            }
            if o.iter().any(|&k| k >= grid.init_count()) {
                return Err(Error::OutOfRange(format!("agent {i}: init index outside grid")));
            }
        }
        for (i, o) in self.lambda_options.iter().enumerate() {
            if o.is_empty() {
                return Err(Error::EmptyBox(format!("agent {i} has no admissible stubbornness")));
            }
            if o.iter().any(|&k| k >= grid.level_count()) {
                return Err(Error::OutOfRange(format!("agent {i}: level outside grid")));
            }
        }
        Ok(())
    }

    /// Keeps only levels with `|k/d_λ - λ̂_i| ≤ ε`.
    pub fn restrict_lambda(
        &self,
        grid: &AbstractGrid,
        lambda_hat: &[Rational],
        eps: &Rational,
    ) -> Result<SearchSpace> {
        check_len(self.dim(), lambda_hat.len())?;
        let lambda_options = self
            .lambda_options
            .iter()
            .zip(lambda_hat)
            .map(|(opts, hat)| {
                opts.iter()
                    .copied()
                    .filter(|&k| {
                        let diff = grid.level_value(k) - hat;
                        let abs = if diff < Rational::zero() { -diff } else { diff };
                        abs <= *eps
                    })
                    .collect()
            })
            .collect();
        Ok(SearchSpace {
            init_options: self.init_options.clone(),
            lambda_options,
        })
    }

    /// All configurations in lexicographic order (agent 0 init varies slowest).
    pub fn iter(&self) -> impl Iterator<Item = AbstractConfig> + '_ {
        let radices: Vec<&Vec<usize>> =
            self.init_options.iter().chain(&self.lambda_options).collect();
        let n = self.dim();
        let empty = radices.iter().any(|o| o.is_empty());
        let mut odometer = vec![0usize; radices.len()];
        let mut done = empty;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let values: Vec<usize> = odometer.iter().zip(&radices).map(|(&d, o)| o[d]).collect();
            let mut pos = radices.len();
            loop {
                if pos == 0 {
                    done = true;
                    break;
                }
                pos -= 1;
                odometer[pos] += 1;
                if odometer[pos] < radices[pos].len() {
                    break;
                }
                odometer[pos] = 0;
            }
            Some(AbstractConfig {
                init_indices: values[..n].to_vec(),
                lambda_levels: values[n..].to_vec(),
            })
        })
    }
}

/// Per-agent intervals of initial opinions and stubbornness, intersected with
/// `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigBox {
    pub init: Vec<(f64, f64)>,
    pub lambda: Vec<(f64, f64)>,
}

impl ConfigBox {
    pub fn new(init: Vec<(f64, f64)>, lambda: Vec<(f64, f64)>) -> Result<Self> {
        check_len(init.len(), lambda.len())?;
        if init.is_empty() {
            return Err(Error::EmptyBox("no agents".into()));
        }
        let clip = |what: &str, i: usize, (lo, hi): (f64, f64)| -> Result<(f64, f64)> {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::NonFinite(format!("{what}[{i}] bounds")));
            }
            let (lo, hi) = (lo.max(0.0), hi.min(1.0));
            if lo > hi {
                return Err(Error::EmptyBox(format!("{what}[{i}] interval is empty within [0, 1]")));
            }
            Ok((lo, hi))
        };
        let init = init
            .into_iter()
            .enumerate()
            .map(|(i, b)| clip("init", i, b))
            .collect::<Result<_>>()?;
        let lambda = lambda
            .into_iter()
            .enumerate()
            .map(|(i, b)| clip("lambda", i, b))
            .collect::<Result<_>>()?;
        Ok(ConfigBox { init, lambda })
    }

    /// `[c_i - r, c_i + r] ∩ [0, 1]` for both coordinates.
    pub fn around(x: &[f64], x_radius: f64, lambda: &[f64], lambda_radius: f64) -> Result<Self> {
        Self::new(
            x.iter().map(|&c| (c - x_radius, c + x_radius)).collect(),
            lambda.iter().map(|&c| (c - lambda_radius, c + lambda_radius)).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.init.len()
    }

    pub fn contains(&self, x: &[f64], lambda: &[f64]) -> bool {
        x.len() == self.dim()
            && lambda.len() == self.dim()
            && x.iter().zip(&self.init).all(|(v, (lo, hi))| lo <= v && v <= hi)
            && lambda.iter().zip(&self.lambda).all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// Uniform sample from the box.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let draw = |rng: &mut R, &(lo, hi): &(f64, f64)| {
            if lo == hi {
                lo
            } else {
                rng.gen_range(lo..=hi)
            }
        };
        let x = self.init.iter().map(|b| draw(rng, b)).collect();
        let l = self.lambda.iter().map(|b| draw(rng, b)).collect();
        (x, l)
    }
}

/// Abstract configurations whose grid cells meet the box.
///
/// The cell of init index `k` is `[k/d_x, (k+1)/d_x]` and the cell of level
/// `k` is `[k/d_λ - 1/(2d_λ), k/d_λ + 1/(2d_λ)]`; cells are closed, so every
/// snap image of a point in the box is covered.
pub fn cover_set(pi_star: &ConfigBox, grid: &AbstractGrid) -> Result<SearchSpace> {
    check_len(grid.dim(), pi_star.dim())?;
    let d_x = grid.d_x as i64;
    let d_l = grid.d_lambda as i64;
    let half_level = rational::ratio(1, 2 * d_l);
    let mut init_options = Vec::with_capacity(pi_star.dim());
    for &(lo, hi) in &pi_star.init {
        let (lo, hi) = (rational::from_f64_exact(lo)?, rational::from_f64_exact(hi)?);
        let opts: Vec<usize> = (0..d_x)
            .filter(|&k| rational::ratio(k, d_x) <= hi && rational::ratio(k + 1, d_x) >= lo)
            .map(|k| k as usize)
            .collect();
        init_options.push(opts);
    }
    let mut lambda_options = Vec::with_capacity(pi_star.dim());
    for &(lo, hi) in &pi_star.lambda {
        let (lo, hi) = (rational::from_f64_exact(lo)?, rational::from_f64_exact(hi)?);
        let opts: Vec<usize> = (0..=d_l)
            .filter(|&k| {
                let centre = rational::ratio(k, d_l);
                &centre - &half_level <= hi && &centre + &half_level >= lo
            })
            .map(|k| k as usize)
            .collect();
        lambda_options.push(opts);
    }
    let space = SearchSpace {
        init_options,
        lambda_options,
    };
    space.validate(grid)?;
    Ok(space)
}

/// Sampled evidence that a box satisfies the hypotheses of the abstraction
/// transfer (contraction, perturbation budget, near-threshold bound). This is
/// sampled evidence, never a proof.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxEvidence {
    pub samples: usize,
    pub min_rho: f64,
    pub max_rho: f64,
    pub eps_x: f64,
    pub norm_w: f64,
    pub grid_resolution: bool,
    pub contractive: usize,
    pub budget_ok: usize,
    pub near_threshold_ok: usize,
    /// `ε_w < (1 - min ρ) δ`, using the sample minimum of `ρ`.
    pub weight_budget_ok: bool,
}

impl BoxEvidence {
    pub fn all_hold(&self) -> bool {
        self.samples > 0
            && self.grid_resolution
            && self.weight_budget_ok
            && self.contractive == self.samples
            && self.budget_ok == self.samples
            && self.near_threshold_ok == self.samples
    }
}

#[allow(clippy::too_many_arguments)]
pub fn sample_box_evidence<R: Rng>(
    pi_star: &ConfigBox,
    w: &InfluenceMatrix,
    grid: &AbstractGrid,
    delta: f64,
    horizon: usize,
    gamma: f64,
    samples: usize,
    rng: &mut R,
) -> Result<BoxEvidence> {
    check_len(w.dim(), pi_star.dim())?;
    let norm_w = w.norm()?;
    let eps_x = epsilon_x_from_norm(norm_w, grid.d_lambda, grid.d_x, grid.eps_w);
    let mut ev = BoxEvidence {
        samples,
        min_rho: f64::INFINITY,
        max_rho: f64::NEG_INFINITY,
        eps_x,
        norm_w,
        grid_resolution: grid.d_x as f64 >= 1.0 / (2.0 * delta),
        contractive: 0,
        budget_ok: 0,
        near_threshold_ok: 0,
        weight_budget_ok: false,
    };
    for _ in 0..samples {
        let (x, l) = pi_star.sample(rng);
        let lambda = StubbornnessVector::new(l)?;
        let rho = contraction_factor(&lambda, w)?;
        ev.min_rho = ev.min_rho.min(rho);
        ev.max_rho = ev.max_rho.max(rho);
        ev.contractive += usize::from(rho < 1.0);
        ev.budget_ok += usize::from(eps_x <= (1.0 - rho) * delta);
        let traj = simulate(&x, &lambda, w, horizon, gamma)?;
        ev.near_threshold_ok += usize::from(assumption2_check(&traj, delta, gamma));
    }
    ev.weight_budget_ok = samples > 0 && grid.eps_w < (1.0 - ev.min_rho) * delta;
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::quantize;
    use crate::rational::ratio;

    fn grid(n: usize, d_x: u32, d_lambda: u32) -> AbstractGrid {
        AbstractGrid::new(d_x, d_lambda, InfluenceMatrix::uniform(n), 0.0).unwrap()
    }

    #[test]
    fn grid_values() {
        let g = grid(2, 2, 3);
        assert_eq!(g.init_values(), vec![ratio(1, 4), ratio(3, 4)]);
        assert_eq!(g.levels(), vec![ratio(0, 1), ratio(1, 3), ratio(2, 3), ratio(1, 1)]);
        assert!(AbstractGrid::new(0, 1, InfluenceMatrix::uniform(2), 0.0).is_err());
        assert!(AbstractGrid::new(1, 1, InfluenceMatrix::uniform(2), -1.0).is_err());
    }

    #[test]
    fn snap_initial_examples() {
        assert_eq!(snap_initial(&[0.25, 0.75], 2).unwrap(), vec![0, 1]);
        assert_eq!(snap_initial(&[0.0, 1.0], 2).unwrap(), vec![0, 1]);
        assert_eq!(snap_initial(&[0.5], 2).unwrap(), vec![0]);
        assert_eq!(snap_initial(&[0.5000001], 2).unwrap(), vec![1]);
    }

    #[test]
    fn snap_stubbornness_examples() {
        let s = |v: f64, d: u32| snap_stubbornness(&StubbornnessVector::new(vec![v]).unwrap(), d).unwrap()[0];
        assert_eq!(s(1.0 / 3.0, 3), 1);
        assert_eq!(s(0.49, 3), 1);
        assert_eq!(s(0.25, 2), 0);
        assert_eq!(s(0.0, 2), 0);
        assert_eq!(s(1.0, 2), 2);
        assert_eq!(s(0.75, 2), 1);
    }

    #[test]
    fn epsilon_x_examples() {
        let eps = epsilon_x(&InfluenceMatrix::uniform(3), 3, 2, 0.0).unwrap();
        assert!((eps - 7.0 / 12.0).abs() < 1e-10);
        let eps = epsilon_x(&InfluenceMatrix::uniform(3), 6, 6, 0.0).unwrap();
        assert!((eps - 0.25).abs() < 1e-10);
        let eps = epsilon_x(&InfluenceMatrix::uniform(3), 1_000_000, 1_000_000, 0.0).unwrap();
        assert!(eps < 1e-5);
    }

    #[test]
    fn sup_bound_examples() {
        assert_eq!(sup_error_bound(0.5, 0.0, 4).unwrap(), 0.0);
        assert!((sup_error_bound(0.5, 0.1, 4).unwrap() - 0.4).abs() < 1e-15);
        assert!(matches!(sup_error_bound(1.0, 0.1, 4), Err(Error::NonContractive(_))));
    }

    #[test]
    fn one_step_identical_and_violation() {
        let w = InfluenceMatrix::uniform(2);
        let l = StubbornnessVector::constant(2, 0.0).unwrap();
        let a = simulate(&[0.0, 1.0], &l, &w, 3, 0.5).unwrap();
        assert!(one_step_bound_check(&a, &a, 0.0, 0.0).unwrap());
        // Different W with no budget: the abstract side stays put while the
        // concrete side averages, so the distance grows from zero.
        let b = simulate(&[0.0, 1.0], &l, &InfluenceMatrix::identity(2), 3, 0.5).unwrap();
        assert_eq!(one_step_violation(&a, &b, 1.0, 0.0).unwrap(), Some(0));
        let short = simulate(&[0.0, 1.0], &l, &w, 2, 0.5).unwrap();
        assert!(one_step_bound_check(&a, &short, 1.0, 0.0).is_err());
    }

    #[test]
    fn near_threshold_examples() {
        assert!(near_threshold_set(&[0.1, 0.9], 0.0, 0.5).is_empty());
        assert_eq!(near_threshold_set(&[0.5, 0.7], 0.1, 0.5), vec![0]);
        assert_eq!(near_threshold_set(&[0.5, 0.5, 0.5], 0.0, 0.5), vec![0, 1, 2]);
    }

    #[test]
    fn assumption2_examples() {
        let w = InfluenceMatrix::uniform(4);
        let pinned = simulate(
            &[0.0, 1.0, 1.0, 0.0],
            &StubbornnessVector::constant(4, 1.0).unwrap(),
            &w,
            5,
            0.5,
        )
        .unwrap();
        assert!(assumption2_check(&pinned, 0.1, 0.5));
        let centred = simulate(&[0.5; 4], &StubbornnessVector::constant(4, 0.3).unwrap(), &w, 5, 0.5).unwrap();
        assert!(!assumption2_check(&centred, 0.5, 0.5));
        assert!(assumption2_check(&centred, 2.0, 0.5));
    }

    #[test]
    fn certificate_arithmetic() {
        let w = InfluenceMatrix::uniform(2);
        let cfg = ModelConfig::new(vec![0.0, 1.0], StubbornnessVector::constant(2, 1.0).unwrap(), w.clone()).unwrap();
        let g = AbstractGrid::new(2, 3, w.clone(), 0.0).unwrap();
        let cert = theorem1_certificate(&cfg, &g, 0.25, 4, 0.5).unwrap();
        assert_eq!(cert.rho, 0.0);
        assert!(cert.conditions.contraction);
        assert!((cert.eps_x - 7.0 / 12.0).abs() < 1e-10);
        // 7/12 > 0.25 = (1 - 0) * 0.25
        assert!(!cert.conditions.perturbation_budget);
        assert!(cert.conditions.grid_resolution); // 2 >= 1/(2 * 0.25)
        assert!(!cert.valid);

        let halves = ModelConfig::new(vec![0.0, 1.0], StubbornnessVector::constant(2, 0.5).unwrap(), w.clone()).unwrap();
        let cert = theorem1_certificate(&halves, &g, 0.25, 4, 0.5).unwrap();
        assert!((cert.rho - 0.5).abs() < 1e-10);
        assert!(!cert.conditions.perturbation_budget); // 7/12 > 0.125

        let cert = theorem1_certificate(&halves, &g, 0.3, 4, 0.5).unwrap();
        assert!(cert.conditions.grid_resolution); // 2 >= 1/0.6
        let cert = theorem1_certificate(&halves, &g, 0.2, 4, 0.5).unwrap();
        assert!(!cert.conditions.grid_resolution); // 2 < 2.5
        assert!(theorem1_certificate(&halves, &g, 0.0, 4, 0.5).is_err());
    }

    #[test]
    fn admissible_interval_endpoints() {
        let iv = admissible_delta(0.5, 0.1, 2).unwrap();
        assert!((iv.lower - 0.25).abs() < 1e-15); // max(0.2, 0.25)
        assert!(iv.contains(0.3) && !iv.contains(0.2));
        assert!(admissible_delta(1.0, 0.1, 2).is_none());
    }

    #[test]
    fn cover_set_examples() {
        let g = grid(2, 2, 3);
        let point = ConfigBox::new(vec![(0.25, 0.25), (0.75, 0.75)], vec![(1.0 / 3.0, 1.0 / 3.0), (1.0, 1.0)]).unwrap();
        let c = cover_set(&point, &g).unwrap();
        // Interior point of init cells, level 1/3 sits strictly inside its cell.
        assert_eq!(c.init_options, vec![vec![0], vec![1]]);
        assert_eq!(c.lambda_options, vec![vec![1], vec![3]]);
        assert_eq!(c.size(), 1);

        let full = ConfigBox::new(vec![(0.0, 1.0); 3], vec![(0.0, 1.0); 3]).unwrap();
        let c = cover_set(&full, &grid(3, 2, 3)).unwrap();
        assert_eq!(c.init_options, vec![vec![0, 1]; 3]);
        assert_eq!(c.size(), 8 * 64);

        assert!(ConfigBox::new(vec![(0.6, 0.4)], vec![(0.0, 1.0)]).is_err());
        assert!(ConfigBox::new(vec![(1.5, 2.0)], vec![(0.0, 1.0)]).is_err());
    }

    #[test]
    fn cover_set_lambda_window() {
        let g = grid(3, 2, 3);
        for &centre in &[0.0, 0.3, 0.5, 0.9] {
            let b = ConfigBox::around(&[0.5; 3], 0.0, &[centre; 3], 0.5).unwrap();
            let c = cover_set(&b, &g).unwrap();
            // interval-intersection oracle
            let lo = (centre - 0.5_f64).max(0.0);
            let hi = (centre + 0.5_f64).min(1.0);
            let expect: Vec<usize> = (0..=3)
                .filter(|&k| {
                    let v = k as f64 / 3.0;
                    v - 1.0 / 6.0 <= hi && v + 1.0 / 6.0 >= lo
                })
                .collect();
            assert_eq!(c.lambda_options[0], expect, "centre {centre}");
            for &k in &c.lambda_options[0] {
                assert!((k as f64 / 3.0 - centre).abs() <= 0.5 + 1.0 / 6.0 + 1e-12);
            }
        }
    }

    #[test]
    fn search_space_iteration() {
        let s = SearchSpace {
            init_options: vec![vec![0, 1], vec![1]],
            lambda_options: vec![vec![0, 2], vec![0, 1, 2]],
        };
        let all: Vec<_> = s.iter().collect();
        assert_eq!(all.len() as u128, s.size());
        assert_eq!(all.len(), 12);
        let unique: std::collections::BTreeSet<_> = all.iter().cloned().collect();
        assert_eq!(unique.len(), 12);
        assert!(all.iter().all(|c| s.contains(c)));
        let empty = SearchSpace {
            init_options: vec![vec![]],
            lambda_options: vec![vec![0]],
        };
        assert_eq!(empty.iter().count(), 0);
    }

    #[test]
    fn restrict_lambda_window() {
        let g = grid(2, 2, 3);
        let s = SearchSpace::full(&g);
        let r = s.restrict_lambda(&g, &[ratio(1, 3), ratio(1, 1)], &ratio(0, 1)).unwrap();
        assert_eq!(r.lambda_options, vec![vec![1], vec![3]]);
        let r = s.restrict_lambda(&g, &[ratio(1, 3), ratio(1, 1)], &ratio(1, 3)).unwrap();
        assert_eq!(r.lambda_options, vec![vec![0, 1, 2], vec![2, 3]]);
        let r = s.restrict_lambda(&g, &[ratio(1, 3), ratio(1, 1)], &ratio(1, 1)).unwrap();
        assert_eq!(r, s);
    }

    #[test]
    fn abstract_config_model() {
        let g = grid(2, 2, 3);
        let c = AbstractConfig {
            init_indices: vec![0, 1],
            lambda_levels: vec![3, 0],
        };
        let m = c.to_model(&g).unwrap();
        assert_eq!(m.x_init, vec![0.25, 0.75]);
        let traj = m.simulate(2, 0.5).unwrap();
        assert_eq!(traj.outputs[0], quantize(&[0.25, 0.75], 0.5));
        let bad = AbstractConfig {
            init_indices: vec![0, 2],
            lambda_levels: vec![3, 0],
        };
        assert!(bad.validate(&g).is_err());
        let json = serde_json::to_string(&c.decoded(&g)).unwrap();
        assert!(json.contains(r#""init_values":["1/4","3/4"]"#));
        assert!(json.contains(r#""lambda_values":["1","0"]"#));
    }
}
