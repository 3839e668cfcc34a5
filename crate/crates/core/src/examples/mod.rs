//! Generators and reference oracles for the demonstration problems: a
//! decentralized lasso, principal component pursuit, covariance completion,
//! sparse group lasso, and a counterexample to global exponential stability.

mod counterexample;
mod covariance;
mod lasso;
mod oracle;
mod pcp;
mod sgl;

pub use counterexample::{
    analytic_counterexample, counterexample_problem, counterexample_run, counterexample_run_from,
    CounterexampleModes, CounterexampleRun, ReducedCounterexample,
};
pub use covariance::{cc_problem, gen_covariance_completion, msd_chain, solve_lyapunov, CovarianceCompletion, CC_DELTA};
pub use lasso::{gen_lasso_network, LassoNetwork};
pub use oracle::{fista, OracleResult};
pub use pcp::{gen_pcp, pcp_problem, Pcp, PCP_ALPHA, PCP_MU, PCP_NOISE};
pub use sgl::{gen_sparse_group_lasso, sgl_problem, SparseGroupLasso, SGL_ALPHA, SGL_LAMBDA_FRACTION, SGL_MIX};

use crate::diagnostics::ReferenceSolution;
use crate::error::{Error, Result};
use crate::flow::IntegratorConfig;
use crate::problem::{PrimalDualState, SaddleProblem};
use crate::scalar::Real;
use nalgebra::DVector;
use std::fmt;
use std::str::FromStr;

/// A generated problem with its initial condition and, when available, a
/// reference solution.
#[derive(Debug, Clone)]
pub struct ExampleInstance<T: Real> {
    pub name: String,
    pub problem: SaddleProblem<T>,
    pub init: PrimalDualState<T>,
    pub reference: Option<ReferenceSolution<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExampleKind {
    LassoNetwork,
    Pcp,
    CovarianceCompletion,
    SparseGroupLasso,
    Counterexample,
}

impl ExampleKind {
    pub const ALL: [ExampleKind; 5] = [
        ExampleKind::LassoNetwork,
        ExampleKind::Pcp,
        ExampleKind::CovarianceCompletion,
        ExampleKind::SparseGroupLasso,
        ExampleKind::Counterexample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExampleKind::LassoNetwork => "lasso_network",
            ExampleKind::Pcp => "pcp",
            ExampleKind::CovarianceCompletion => "covariance_completion",
            ExampleKind::SparseGroupLasso => "sparse_group_lasso",
            ExampleKind::Counterexample => "counterexample",
        }
    }
}

impl fmt::Display for ExampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExampleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown example '{s}'")))
    }
}

/// Sizes and seed of one generated instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExampleSpec {
    LassoNetwork { agents: usize, dim: usize, meas: usize, seed: u64 },
    Pcp { n: usize, rank: usize, seed: u64 },
    CovarianceCompletion { masses: usize, gamma: f64, seed: u64 },
    SparseGroupLasso { meas: usize, dim: usize, groups: usize, seed: u64 },
    Counterexample { beta: f64, mu: f64, alpha: f64 },
}

impl ExampleSpec {
    /// Small instances that run in seconds.
    pub fn desk(kind: ExampleKind, seed: u64) -> Self {
        match kind {
            ExampleKind::LassoNetwork => Self::LassoNetwork { agents: 5, dim: 20, meas: 3, seed },
            ExampleKind::Pcp => Self::Pcp { n: 40, rank: 3, seed },
            ExampleKind::CovarianceCompletion => Self::CovarianceCompletion { masses: 6, gamma: 1.0, seed },
            ExampleKind::SparseGroupLasso => Self::SparseGroupLasso { meas: 20, dim: 200, groups: 10, seed },
            ExampleKind::Counterexample => Self::Counterexample { beta: 5.0, mu: 1.0, alpha: 1.0 },
        }
    }

    /// Full-size instances.
    pub fn full(kind: ExampleKind, seed: u64) -> Self {
        match kind {
            ExampleKind::LassoNetwork => Self::LassoNetwork { agents: 10, dim: 100, meas: 3, seed },
            ExampleKind::Pcp => Self::Pcp { n: 200, rank: 10, seed },
            ExampleKind::CovarianceCompletion => Self::CovarianceCompletion { masses: 40, gamma: 1.0, seed },
            ExampleKind::SparseGroupLasso => Self::SparseGroupLasso { meas: 60, dim: 2000, groups: 50, seed },
            ExampleKind::Counterexample => Self::Counterexample { beta: 5.0, mu: 1.0, alpha: 1.0 },
        }
    }

    /// Integrator settings for reproduction runs of this instance.
    /// PCP and covariance completion use looser tolerances: their fields have
    /// many prox kinks and a tight error control only multiplies rejections.
    /// PCP stops just under the `1e-6` residual target. The counterexample
    /// caps the step so its piecewise affine path is sampled densely.
    pub fn run_config<T: Real>(&self) -> IntegratorConfig<T> {
        let base = IntegratorConfig::default();
        match *self {
            Self::LassoNetwork { .. } => IntegratorConfig { t_end: T::lit(500.0), ..base },
            Self::SparseGroupLasso { .. } => IntegratorConfig { t_end: T::lit(500.0), ..base },
            Self::Pcp { .. } => IntegratorConfig {
                t_end: T::lit(3000.0),
                rel_tol: T::lit(1e-7),
                abs_tol: T::lit(1e-10),
                stop_kkt: Some(T::lit(9e-7)),
                record_stride: 10,
                ..base
            },
            Self::CovarianceCompletion { .. } => IntegratorConfig {
                t_end: T::lit(800.0),
                rel_tol: T::lit(1e-7),
                abs_tol: T::lit(1e-10),
                stop_kkt: Some(T::lit(1e-7)),
                record_stride: 5,
                ..base
            },
            Self::Counterexample { beta, .. } => IntegratorConfig {
                t_end: T::lit(2.0 * beta + 10.0),
                stop_kkt: None,
                h_max: T::lit(0.05),
                ..base
            },
        }
    }

    pub fn kind(&self) -> ExampleKind {
        match self {
            Self::LassoNetwork { .. } => ExampleKind::LassoNetwork,
            Self::Pcp { .. } => ExampleKind::Pcp,
            Self::CovarianceCompletion { .. } => ExampleKind::CovarianceCompletion,
            Self::SparseGroupLasso { .. } => ExampleKind::SparseGroupLasso,
            Self::Counterexample { .. } => ExampleKind::Counterexample,
        }
    }

    /// Builds the instance. The counterexample yields its four-variable form
    /// started at `x = 0`, `z = (-2, -2)`, `y = 0`, `lam = (2 beta + 2)(1, 1)`.
    pub fn build<T: Real>(&self) -> Result<ExampleInstance<T>> {
        match *self {
            Self::LassoNetwork { agents, dim, meas, seed } => Ok(gen_lasso_network(agents, dim, meas, seed)?.instance),
            Self::Pcp { n, rank, seed } => Ok(gen_pcp(n, rank, seed)?.instance),
            Self::CovarianceCompletion { masses, gamma, seed } => {
                Ok(gen_covariance_completion(masses, T::lit(gamma), seed)?.instance)
            }
            Self::SparseGroupLasso { meas, dim, groups, seed } => {
                Ok(gen_sparse_group_lasso(meas, dim, groups, seed)?.instance)
            }
            Self::Counterexample { beta, mu, alpha } => {
                let problem = counterexample_problem(T::lit(mu), T::lit(alpha))?;
                let l = T::lit(2.0 * beta + 2.0);
                let init = PrimalDualState::new(
                    DVector::zeros(1),
                    DVector::from_vec(vec![T::lit(-2.0), T::lit(-2.0)]),
                    DVector::zeros(2),
                    DVector::from_vec(vec![l, l]),
                );
                Ok(ExampleInstance {
                    name: ExampleKind::Counterexample.name().into(),
                    problem,
                    init,
                    reference: None,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip() {
        for k in ExampleKind::ALL {
            assert_eq!(k.name().parse::<ExampleKind>().unwrap(), k);
            assert_eq!(ExampleSpec::desk(k, 0).kind(), k);
        }
        assert!("nope".parse::<ExampleKind>().is_err());
    }
}
