use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::abstraction::{AbstractConfig, AbstractGrid, SearchSpace};
use crate::dynamics::check_gamma;
use crate::error::{check_len, Error, Result};
use crate::observation::ObservationSpec;
use crate::rational::{self, Rational};

/// Which tolerance the abstract family is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToleranceMode {
    /// `κ`
    Kappa,
    /// `κ + δ`, the necessary condition for concrete consistency.
    KappaPlusDelta,
    /// `max(κ - δ, 0)`, the sufficient condition.
    KappaMinusDelta,
}

impl fmt::Display for ToleranceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ToleranceMode::Kappa => "kappa",
            ToleranceMode::KappaPlusDelta => "kappa+delta",
            ToleranceMode::KappaMinusDelta => "kappa-delta",
        })
    }
}

/// Does some configuration of the discretized family reproduce the
/// observations up to the tolerance?
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationProblem {
    pub spec: ObservationSpec,
    pub grid: AbstractGrid,
    pub space: SearchSpace,
    pub delta: Rational,
    pub gamma: Rational,
}

impl VerificationProblem {
    pub fn new(
        spec: ObservationSpec,
        grid: AbstractGrid,
        space: SearchSpace,
        delta: Rational,
        gamma: Rational,
    ) -> Result<Self> {
        check_len(grid.dim(), spec.agents())?;
        space.validate(&grid)?;
        if !delta.is_positive() {
            return Err(Error::OutOfRange(format!(
                "delta = {} must be > 0",
                rational::format_rational(&delta)
            )));
        }
        check_gamma(rational::to_f64(&gamma))?;
        Ok(VerificationProblem {
            spec,
            grid,
            space,
            delta,
            gamma,
        })
    }

    pub fn agents(&self) -> usize {
        self.grid.dim()
    }

    pub fn horizon(&self) -> usize {
        self.spec.horizon()
    }

    pub fn gamma_f64(&self) -> f64 {
        rational::to_f64(&self.gamma)
    }

    pub fn delta_f64(&self) -> f64 {
        rational::to_f64(&self.delta)
    }

    pub fn tolerance(&self, mode: ToleranceMode) -> Rational {
        let kappa = self.spec.kappa();
        match mode {
            ToleranceMode::Kappa => kappa.clone(),
            ToleranceMode::KappaPlusDelta => kappa + &self.delta,
            ToleranceMode::KappaMinusDelta => {
                let v = kappa - &self.delta;
                if v.is_negative() {
                    Rational::zero()
                } else {
                    v
                }
            }
        }
    }

    pub fn spec_for(&self, mode: ToleranceMode) -> ObservationSpec {
        self.spec
            .with_kappa(self.tolerance(mode))
            .expect("tolerances are nonnegative")
    }

    pub fn with_space(&self, space: SearchSpace) -> Result<Self> {
        space.validate(&self.grid)?;
        Ok(VerificationProblem {
            space,
            ..self.clone()
        })
    }

    /// Restricts the search space to `max_i |λ_i - λ̂_i| ≤ ε_Λ`.
    pub fn with_lambda_window(&self, lambda_hat: &[Rational], eps: &Rational) -> Result<Self> {
        let space = self.space.restrict_lambda(&self.grid, lambda_hat, eps)?;
        Ok(VerificationProblem {
            space,
            ..self.clone()
        })
    }

    pub fn contains(&self, config: &AbstractConfig) -> bool {
        self.space.contains(config)
    }
}
