//! Primal-descent dual-ascent gradient flow of the proximal augmented Lagrangian.

mod field;
pub mod integrate;
mod trajectory;

pub use field::{FlowField, PalGradient};
pub use integrate::{
    solve, Control, IntegratorConfig, Method, NoObserver, Observer, OdeOutcome, OdeSystem, Termination,
};
pub use trajectory::{read_binary, Recorder, Trajectory};

use crate::error::Result;
use crate::problem::{PrimalDualState, SaddleProblem};
use crate::scalar::Real;

impl<T: Real> OdeSystem<T> for FlowField<'_, T> {
    fn dim(&self) -> usize {
        self.problem().state_len()
    }

    fn rhs(&mut self, _t: T, y: &[T], dy: &mut [T]) -> Result<()> {
        let s = self.problem().unpack(y)?;
        let d = self.vector_field(&s)?;
        d.pack_into(dy);
        Ok(())
    }
}

fn layout<T: Real>(prob: &SaddleProblem<T>) -> (usize, usize, usize) {
    (prob.nx(), prob.nz(), prob.p())
}

/// Integrates the flow from `s0` and records the trajectory.
pub fn integrate<T: Real>(
    prob: &SaddleProblem<T>,
    s0: &PrimalDualState<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<Trajectory<T>> {
    integrate_with(prob, s0, cfg, Vec::new(), |_, _, _| Ok(Vec::new()), None::<fn(T, &[T]) -> T>)
}

/// Like [`integrate`], with extra recorded columns and an optional event
/// function `g(t, packed_state)` that stops the run where it turns negative.
pub fn integrate_with<'p, T: Real>(
    prob: &'p SaddleProblem<T>,
    s0: &PrimalDualState<T>,
    cfg: &IntegratorConfig<T>,
    extra_names: Vec<String>,
    mut extra: impl FnMut(&mut FlowField<'p, T>, T, &PrimalDualState<T>) -> Result<Vec<T>> + 'p,
    event: Option<impl FnMut(T, &[T]) -> T + 'p>,
) -> Result<Trajectory<T>> {
    prob.check_state(s0)?;
    let mut field = FlowField::new(prob);
    let kkt = move |ff: &mut FlowField<'p, T>, _t: T, y: &[T]| -> Result<T> {
        ff.kkt_residual(&prob.unpack(y)?)
    };
    let columns = move |ff: &mut FlowField<'p, T>, t: T, y: &[T]| -> Result<Vec<T>> {
        extra(ff, t, &prob.unpack(y)?)
    };
    let mut rec = Recorder::new(cfg, layout(prob), kkt).with_columns(extra_names, columns);
    if let Some(g) = event {
        rec = rec.with_event(g);
    }
    let out = solve(&mut field, T::zero(), s0.pack().as_slice(), cfg, &mut rec)?;
    rec.finish(&mut field, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{BlockOperator, LinearOperator};
    use crate::problem::SmoothBlock;
    use nalgebra::{dmatrix, DVector};

    fn scalar() -> SaddleProblem<f64> {
        let e = BlockOperator::new(vec![LinearOperator::from_matrix(dmatrix![1.0])], 1).unwrap();
        SaddleProblem::new(
            vec![SmoothBlock::isotropic(1.0, DVector::zeros(1))],
            vec![],
            e,
            BlockOperator::empty(1),
            DVector::from_vec(vec![1.0]),
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn converges_and_stops_on_residual() {
        let p = scalar();
        let cfg = IntegratorConfig {
            t_end: 200.0,
            ..Default::default()
        };
        let tr = integrate(&p, &p.zero_state(), &cfg).unwrap();
        assert_eq!(tr.termination, Termination::StopKkt);
        assert!(tr.final_kkt().unwrap() < 1e-9);
        let s = tr.last_state().unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-8);
        assert!((s.lam[0] + 1.0).abs() < 1e-8);
        assert!(tr.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn stride_keeps_endpoints() {
        let p = scalar();
        let cfg = IntegratorConfig {
            method: Method::Rk4,
            h: 0.01,
            t_end: 1.0,
            stop_kkt: None,
            record_stride: 7,
            ..Default::default()
        };
        let tr = integrate(&p, &p.zero_state(), &cfg).unwrap();
        assert_eq!(tr.times[0], 0.0);
        assert!((tr.times.last().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(tr.len(), 100 / 7 + 2);
    }
}
