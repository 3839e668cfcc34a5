//! Scalar quadratic with the two-sided constraint `E x - z = q`,
//! `E = [-1; 1]`, `q = (2, 2)` and `z <= 0`. Eliminating `z` gives planar
//! dynamics in `(x, y)` that are affine on the region
//! `C = {n >= 0}`, `n = E x - q + mu y`, and leave it in finite time.

use crate::block::Shape;
use crate::error::{Error, Result};
use crate::flow::{solve, IntegratorConfig, OdeSystem, Recorder, Trajectory};
use crate::linops::{BlockOperator, LinearOperator};
use crate::problem::{NonsmoothBlock, SaddleProblem, SmoothBlock};
use crate::prox::{Orthant, ProximableFunction};
use crate::scalar::Real;
use nalgebra::{dmatrix, DVector, Matrix3, Vector3};

/// Four-variable form `min x^2/2 + I(z <= 0)` s.t. `E x - z = q`.
pub fn counterexample_problem<T: Real>(mu: T, alpha: T) -> Result<SaddleProblem<T>> {
    let one = T::one();
    let e = BlockOperator::new(vec![LinearOperator::from_matrix(dmatrix![-one; one])], 2)?;
    let f = BlockOperator::new(vec![LinearOperator::from_matrix(dmatrix![-one, T::zero(); T::zero(), -one])], 2)?;
    SaddleProblem::new(
        vec![SmoothBlock::isotropic(one, DVector::zeros(1))],
        vec![NonsmoothBlock::new(Shape::Vector(2), ProximableFunction::indicator(Orthant::Nonpos))?],
        e,
        f,
        DVector::from_vec(vec![T::lit(2.0), T::lit(2.0)]),
        mu,
        alpha,
    )
}

/// Reduced dynamics over `(x, y1, y2)`:
/// `x' = -x - E^T max(n, 0) / mu`, `y' = alpha (E x - q - min(n, 0))`.
#[derive(Debug, Clone, Copy)]
pub struct ReducedCounterexample<T: Real> {
    pub mu: T,
    pub alpha: T,
}

impl<T: Real> ReducedCounterexample<T> {
    pub fn measurements(&self, s: &[T]) -> [T; 2] {
        let two = T::lit(2.0);
        [-s[0] - two + self.mu * s[1], s[0] - two + self.mu * s[2]]
    }

    fn field(&self, s: &[T]) -> [T; 3] {
        let n = self.measurements(s);
        let two = T::lit(2.0);
        let ex = [-s[0] - two, s[0] - two];
        let pos = [n[0].max(T::zero()), n[1].max(T::zero())];
        let neg = [n[0].min(T::zero()), n[1].min(T::zero())];
        [
            -s[0] - (pos[1] - pos[0]) / self.mu,
            self.alpha * (ex[0] - neg[0]),
            self.alpha * (ex[1] - neg[1]),
        ]
    }
}

impl<T: Real> OdeSystem<T> for ReducedCounterexample<T> {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&mut self, _t: T, y: &[T], dy: &mut [T]) -> Result<()> {
        dy.copy_from_slice(&self.field(y));
        Ok(())
    }
}

/// Result of integrating the reduced dynamics until they leave `C`.
#[derive(Debug, Clone)]
pub struct CounterexampleRun<T: Real> {
    pub escape_time: T,
    /// States are `(x, y1, y2)`, stored as `x0, lam0, lam1`, with columns
    /// `n1`, `n2`.
    pub trajectory: Trajectory<T>,
}

/// Runs from the canonical start `x = 0`, `y = (2 beta + 2, 2 beta + 2)`.
pub fn counterexample_run<T: Real>(beta: T, mu: T, alpha: T, cfg: &IntegratorConfig<T>) -> Result<CounterexampleRun<T>> {
    if !(beta > T::zero()) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    let y0 = T::lit(2.0) * beta + T::lit(2.0);
    counterexample_run_from([T::zero(), y0, y0], mu, alpha, cfg)
}

/// Integrates the reduced dynamics from `start = (x, y1, y2)` and locates the
/// first exit from `C`.
pub fn counterexample_run_from<T: Real>(
    start: [T; 3],
    mu: T,
    alpha: T,
    cfg: &IntegratorConfig<T>,
) -> Result<CounterexampleRun<T>> {
    if !(mu > T::zero() && alpha > T::zero()) {
        return Err(Error::InvalidArgument("mu and alpha must be positive".into()));
    }
    let mut sys = ReducedCounterexample { mu, alpha };
    let n0 = sys.measurements(&start);
    if n0[0] < T::zero() || n0[1] < T::zero() {
        return Err(Error::OutsideRegion(format!("n(0) = ({}, {})", n0[0], n0[1])));
    }
    let probe = |s: &mut ReducedCounterexample<T>, _t: T, y: &[T]| -> Result<T> {
        let d = s.field(y);
        Ok((d[0] * d[0] + (d[1] * d[1] + d[2] * d[2]) / (s.alpha * s.alpha)).sqrt())
    };
    let cols = |s: &mut ReducedCounterexample<T>, _t: T, y: &[T]| -> Result<Vec<T>> {
        Ok(s.measurements(y).to_vec())
    };
    let event = move |_t: T, y: &[T]| {
        let n = sys.measurements(y);
        n[0].min(n[1])
    };
    let mut rec = Recorder::new(cfg, (1, 0, 2), probe)
        .with_columns(vec!["n1".into(), "n2".into()], cols)
        .with_event(event);
    let out = solve(&mut sys, T::zero(), &start, cfg, &mut rec)?;
    let trajectory = rec.finish(&mut sys, out)?;
    let escape_time = trajectory.event_time.ok_or_else(|| {
        Error::InvalidArgument(format!(
            "trajectory did not leave the region before t = {}",
            trajectory.times.last().copied().unwrap_or_else(T::zero)
        ))
    })?;
    Ok(CounterexampleRun { escape_time, trajectory })
}

/// Eigen-structure of the affine dynamics inside `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleModes<T: Real> {
    /// Negative real root of `s^2 + (1 + 2/mu) s + 2 alpha` of smallest magnitude.
    pub sigma: T,
    pub mu: T,
    pub alpha: T,
    /// Columns `(sigma, -alpha, alpha)`, `(-2 alpha / sigma, alpha, -alpha)`, `(0, 1, 1)`.
    pub v: Matrix3<T>,
    pub v_inv: Matrix3<T>,
}

impl<T: Real> CounterexampleModes<T> {
    pub fn new(mu: T, alpha: T) -> Result<Self> {
        if !(mu > T::zero() && alpha > T::zero()) {
            return Err(Error::InvalidArgument("mu and alpha must be positive".into()));
        }
        let two = T::lit(2.0);
        let b = T::one() + two / mu;
        let disc = b * b - T::lit(8.0) * alpha;
        if disc <= T::zero() {
            return Err(Error::NoRealRoot(format!(
                "discriminant {disc} leaves no pair of distinct real roots"
            )));
        }
        let sigma = (-b + disc.sqrt()) / two;
        let other = two * alpha / sigma;
        let v = Matrix3::new(sigma, other * -T::one(), T::zero(), -alpha, alpha, T::one(), alpha, -alpha, T::one());
        let v_inv = v
            .try_inverse()
            .ok_or_else(|| Error::NoRealRoot("repeated eigenvalues".into()))?;
        Ok(Self {
            sigma,
            mu,
            alpha,
            v,
            v_inv,
        })
    }

    pub fn modal(&self, state: [T; 3]) -> [T; 3] {
        let p = self.v_inv * Vector3::from(state);
        [p[0], p[1], p[2]]
    }

    pub fn state(&self, phi: [T; 3]) -> [T; 3] {
        let s = self.v * Vector3::from(phi);
        [s[0], s[1], s[2]]
    }

    /// Modal coordinates and measurements at time `t`.
    pub fn evolve(&self, phi0: [T; 3], t: T) -> ([T; 3], [T; 2]) {
        let two = T::lit(2.0);
        let phi = [
            phi0[0] * (self.sigma * t).exp(),
            phi0[1] * (two * self.alpha / self.sigma * t).exp(),
            phi0[2] - two * self.alpha * t,
        ];
        let s = self.state(phi);
        let n = ReducedCounterexample {
            mu: self.mu,
            alpha: self.alpha,
        }
        .measurements(&s);
        (phi, n)
    }

    /// Exit time from `C` when the decaying modes start at zero.
    pub fn escape_time(&self, phi3: T) -> T {
        (phi3 - T::lit(2.0) / self.mu) / (T::lit(2.0) * self.alpha)
    }
}

/// Closed-form modal coordinates and measurements inside `C`.
pub fn analytic_counterexample<T: Real>(phi0: [T; 3], mu: T, alpha: T, t: T) -> Result<([T; 3], [T; 2])> {
    Ok(CounterexampleModes::new(mu, alpha)?.evolve(phi0, t))
}
