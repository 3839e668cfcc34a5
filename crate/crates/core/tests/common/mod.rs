#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use palflow::diagnostics::ReferenceSolution;
use palflow::flow::{integrate, IntegratorConfig};
use palflow::rng::{normal_matrix, normal_vector, seeded};
use palflow::{
    BlockOperator, LinearOperator, NonsmoothBlock, PrimalDualState, ProximableFunction, SaddleProblem, Shape,
    SmoothBlock,
};

/// Strongly convex quadratic in `x` (dim 5), `l1 + ||z||^2/2` in `z` (dim 3),
/// `E` with full row rank and `F = 0`. With `redundant` an extra row equal to
/// the sum of the first two is appended, so `[E F]^T` has a null direction.
pub fn ges_instance(seed: u64, redundant: bool) -> (SaddleProblem<f64>, ReferenceSolution<f64>) {
    let mut rng = seeded(seed);
    let (n, m, p) = (5, 3, 3);
    let g = normal_matrix::<f64, _>(&mut rng, n, n);
    let h = g.tr_mul(&g) / n as f64 + DMatrix::identity(n, n);
    let c = normal_vector::<f64, _>(&mut rng, n);
    let mut e = normal_matrix::<f64, _>(&mut rng, p, n);
    let x0 = normal_vector::<f64, _>(&mut rng, n);
    let mut q = &e * &x0;

    // The minimizer of the quadratic under `Ex = q` from the KKT system.
    let mut kkt = DMatrix::zeros(n + p, n + p);
    kkt.view_mut((0, 0), (n, n)).copy_from(&h);
    kkt.view_mut((0, n), (n, p)).copy_from(&e.transpose());
    kkt.view_mut((n, 0), (p, n)).copy_from(&e);
    let mut rhs = DVector::zeros(n + p);
    rhs.rows_mut(0, n).copy_from(&(&h * &c));
    rhs.rows_mut(n, p).copy_from(&q);
    let sol = kkt.lu().solve(&rhs).expect("nonsingular KKT system");
    let x_star = sol.rows(0, n).into_owned();
    let mut lam = sol.rows(n, p).into_owned();

    if redundant {
        let extra = e.row(0) + e.row(1);
        e = e.insert_row(p, 0.0);
        e.row_mut(p).copy_from(&extra);
        q = &e * &x0;
        lam = lam.insert_row(p, 0.0);
    }
    let rows = e.nrows();
    let prob = SaddleProblem::new(
        vec![SmoothBlock::quadratic(h, c).unwrap()],
        vec![NonsmoothBlock::new(Shape::Vector(m), ProximableFunction::l1(0.3).plus_quadratic(1.0)).unwrap()],
        BlockOperator::new(vec![LinearOperator::from_matrix(e)], rows).unwrap(),
        BlockOperator::new(vec![LinearOperator::zero(Shape::Vector(m), Shape::Vector(rows))], rows).unwrap(),
        q,
        1.0,
        1.0,
    )
    .unwrap();
    let rf = ReferenceSolution::new(&prob, x_star, DVector::zeros(m), DVector::zeros(m), lam, "closed form").unwrap();
    (prob, rf)
}

/// Least squares in `x` (dim 5, `G` with `rows` rows), `l1` in `z` (dim 3),
/// random `E`, `F` (3 rows) and a feasible `q`. The reference is the end
/// point of a long flow run.
pub fn convex_instance(seed: u64, rows: usize, mu: f64, alpha: f64) -> (SaddleProblem<f64>, ReferenceSolution<f64>) {
    let mut rng = seeded(seed);
    let (n, m, p) = (5, 3, 3);
    let g = normal_matrix::<f64, _>(&mut rng, rows, n);
    let h = normal_vector::<f64, _>(&mut rng, rows);
    let e = normal_matrix::<f64, _>(&mut rng, p, n);
    let f = normal_matrix::<f64, _>(&mut rng, p, m);
    let q = &e * normal_vector::<f64, _>(&mut rng, n) + &f * normal_vector::<f64, _>(&mut rng, m);
    let prob = SaddleProblem::new(
        vec![SmoothBlock::least_squares(g, h).unwrap()],
        vec![NonsmoothBlock::new(Shape::Vector(m), ProximableFunction::l1(0.5)).unwrap()],
        BlockOperator::new(vec![LinearOperator::from_matrix(e)], p).unwrap(),
        BlockOperator::new(vec![LinearOperator::from_matrix(f)], p).unwrap(),
        q,
        mu,
        alpha,
    )
    .unwrap();
    let rf = flow_reference(&prob);
    (prob, rf)
}

pub fn flow_reference(prob: &SaddleProblem<f64>) -> ReferenceSolution<f64> {
    let cfg = IntegratorConfig {
        t_end: 1e4,
        stop_kkt: Some(1e-12),
        record_stride: 1_000_000,
        ..Default::default()
    };
    let tr = integrate(prob, &prob.zero_state(), &cfg).unwrap();
    let s = tr.last_state().unwrap();
    assert!(tr.final_kkt().unwrap() < 1e-9, "reference run stalled at {:e}", tr.final_kkt().unwrap());
    ReferenceSolution::new(prob, s.x, s.z, s.y, s.lam, "long flow run").unwrap()
}

pub fn random_state(prob: &SaddleProblem<f64>, seed: u64, scale: f64) -> PrimalDualState<f64> {
    let mut rng = seeded(seed);
    PrimalDualState::new(
        normal_vector::<f64, _>(&mut rng, prob.nx()) * scale,
        normal_vector::<f64, _>(&mut rng, prob.nz()) * scale,
        normal_vector::<f64, _>(&mut rng, prob.nz()) * scale,
        normal_vector::<f64, _>(&mut rng, prob.p()) * scale,
    )
}
