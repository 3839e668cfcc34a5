use super::oracle::fista;
use super::ExampleInstance;
use crate::block::Shape;
use crate::diagnostics::ReferenceSolution;
use crate::error::{Error, Result};
use crate::linops::{singular_extremes_dense, BlockOperator, LinearOperator, StackedMap};
use crate::problem::{NonsmoothBlock, SaddleProblem, SmoothBlock};
use crate::prox::{prox_group_lasso, prox_l1, GroupPartition, ProximableFunction};
use crate::rng::{normal_matrix, normal_vector, seeded};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};

/// Mixing weight between the l1 and group penalties.
pub const SGL_MIX: f64 = 0.95;
/// Fraction of the smallest penalty that zeroes the solution.
pub const SGL_LAMBDA_FRACTION: f64 = 0.2;
/// Dual time-scale used for the generated instances.
pub const SGL_ALPHA: f64 = 20.0;

/// Generated sparse group lasso instance.
#[derive(Debug, Clone)]
pub struct SparseGroupLasso<T: Real> {
    pub instance: ExampleInstance<T>,
    pub t: DMatrix<T>,
    pub q: DVector<T>,
    pub tau1: T,
    pub tau2: T,
    pub partition: GroupPartition<T>,
    /// Minimizer of the composite form.
    pub x_star: DVector<T>,
}

fn soft_norm<T: Real>(v: &DVector<T>, t: T) -> T {
    prox_l1(t, v.as_slice()).norm()
}

/// Smallest `lambda` with `||S(T_g^T q, a lambda)|| <= (1 - a) lambda sqrt(w)`
/// for every group, i.e. the penalty above which zero is optimal.
fn lambda_max<T: Real>(t: &DMatrix<T>, q: &DVector<T>, part: &GroupPartition<T>, a: T) -> T {
    let c = t.tr_mul(q);
    let mut best = T::zero();
    for grp in part.groups() {
        let cg = DVector::from_iterator(grp.len(), grp.iter().map(|&i| c[i]));
        let w = T::from_count(grp.len()).sqrt();
        let ok = |l: T| soft_norm(&cg, a * l) <= (T::one() - a) * l * w;
        let mut hi = cg.amax() / a + T::one();
        while !ok(hi) {
            hi *= T::lit(2.0);
        }
        let mut lo = T::zero();
        for _ in 0..200 {
            let mid = (lo + hi) * T::lit(0.5);
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        best = best.max(hi);
    }
    best
}

/// `min ||q - T x||^2 / 2 + tau1 ||x||_1 + tau2 ||x||_{1,2}` in the lifted form
/// with `x = (x1, x2)`, `x1 = q - T x2`, `z1 = z2 = x2`. The signal puts
/// `(1, 2, 3, 4, 5, 0, ...)` on each of the first three groups and the noise
/// level gives a signal to noise ratio of 2.
pub fn gen_sparse_group_lasso<T: Real>(meas: usize, dim: usize, groups: usize, seed: u64) -> Result<SparseGroupLasso<T>> {
    if meas == 0 || dim == 0 || groups == 0 || dim % groups != 0 {
        return Err(Error::InvalidArgument(format!(
            "sparse group lasso needs positive sizes with {groups} dividing {dim}"
        )));
    }
    let width = dim / groups;
    let mut rng = seeded(seed);
    let t: DMatrix<T> = normal_matrix(&mut rng, meas, dim);
    let xbar = DVector::from_fn(width, |i, _| if i < 5 { T::from_count(i + 1) } else { T::zero() });
    let mut signal = DVector::<T>::zeros(meas);
    for g in 0..groups.min(3) {
        signal += t.columns(g * width, width) * &xbar;
    }
    let noise: DVector<T> = normal_vector(&mut rng, meas);
    let sigma = signal.norm() / (T::lit(2.0) * noise.norm());
    let q = &signal + noise * sigma;

    let a = T::lit(SGL_MIX);
    let unit = GroupPartition::uniform(dim, groups, T::one(), T::zero())?;
    let lam = T::lit(SGL_LAMBDA_FRACTION) * lambda_max(&t, &q, &unit, a);
    let tau1 = a * lam;
    let tau2 = (T::one() - a) * lam * T::from_count(width).sqrt();
    let partition = GroupPartition::uniform(dim, groups, tau2, T::zero())?;

    let gram = t.tr_mul(&t);
    let tq = t.tr_mul(&q);
    let lip = singular_extremes_dense(&gram, T::lit(1e-12))?.sigma_max;
    let grad = |x: &DVector<T>| &gram * x - &tq;
    let prox = |s: T, v: &DVector<T>| {
        let w = prox_l1(s * tau1, v.as_slice());
        prox_group_lasso(s, &partition, w.as_slice())
    };
    let sol = fista(DVector::zeros(dim), lip, grad, prox, T::lit(1e-12), 5_000_000)?;
    let x_star = sol.x;

    // Split s = T^T (q - T x*) into the two subgradients through one more
    // prox step from the fixed point.
    let step = T::one() / lip;
    let u = &x_star - grad(&x_star) * step;
    let w = prox_l1(step * tau1, u.as_slice());
    let xp = prox_group_lasso(step, &partition, w.as_slice())?;
    let y1 = (&u - &w) / step;
    let y2 = (&w - &xp) / step;

    let problem = sgl_problem(&t, &q, tau1, partition.clone(), T::one(), T::lit(SGL_ALPHA))?;
    let x1 = &q - &t * &x_star;
    let mut x = DVector::zeros(meas + dim);
    x.rows_mut(0, meas).copy_from(&x1);
    x.rows_mut(meas, dim).copy_from(&x_star);
    let mut z = DVector::zeros(2 * dim);
    z.rows_mut(0, dim).copy_from(&x_star);
    z.rows_mut(dim, dim).copy_from(&x_star);
    let mut y = DVector::zeros(2 * dim);
    y.rows_mut(0, dim).copy_from(&y1);
    y.rows_mut(dim, dim).copy_from(&y2);
    let mut lamv = DVector::zeros(meas + 2 * dim);
    lamv.rows_mut(0, meas).copy_from(&(-&x1));
    lamv.rows_mut(meas, dim).copy_from(&y1);
    lamv.rows_mut(meas + dim, dim).copy_from(&y2);
    let reference = ReferenceSolution::new(&problem, x, z, y, lamv, "accelerated proximal gradient on the composite form")?;
    let init = problem.zero_state();
    Ok(SparseGroupLasso {
        instance: ExampleInstance {
            name: "sparse_group_lasso".into(),
            problem,
            init,
            reference: Some(reference),
        },
        t,
        q,
        tau1,
        tau2,
        partition,
        x_star,
    })
}

/// Lifted problem with `E = [I T; 0 I; 0 I]`, `F = [0 0; -I 0; 0 -I]`,
/// `q = (q, 0, 0)` and `f(x1) = ||x1||^2 / 2`.
pub fn sgl_problem<T: Real>(
    t: &DMatrix<T>,
    q: &DVector<T>,
    tau1: T,
    partition: GroupPartition<T>,
    mu: T,
    alpha: T,
) -> Result<SaddleProblem<T>> {
    let (m, n) = t.shape();
    let p = m + 2 * n;
    let (sm, sn) = (Shape::Vector(m), Shape::Vector(n));
    let stack = |ops: Vec<LinearOperator<T>>| -> Result<LinearOperator<T>> { Ok(LinearOperator::new(StackedMap::new(ops)?)) };
    let neg = || LinearOperator::scaled_identity(sn, -T::one());
    let e1 = stack(vec![LinearOperator::identity(sm), LinearOperator::zero(sm, sn), LinearOperator::zero(sm, sn)])?;
    let e2 = stack(vec![
        LinearOperator::from_matrix(t.clone()),
        LinearOperator::identity(sn),
        LinearOperator::identity(sn),
    ])?;
    let f1 = stack(vec![LinearOperator::zero(sn, sm), neg(), LinearOperator::zero(sn, sn)])?;
    let f2 = stack(vec![LinearOperator::zero(sn, sm), LinearOperator::zero(sn, sn), neg()])?;
    let mut qq = DVector::zeros(p);
    qq.rows_mut(0, m).copy_from(q);
    SaddleProblem::new(
        vec![SmoothBlock::isotropic(T::one(), DVector::zeros(m)), SmoothBlock::zero(Shape::Vector(n))],
        vec![
            NonsmoothBlock::new(Shape::Vector(n), ProximableFunction::l1(tau1))?,
            NonsmoothBlock::new(Shape::Vector(n), ProximableFunction::group_lasso(partition))?,
        ],
        BlockOperator::new(vec![e1, e2], p)?,
        BlockOperator::new(vec![f1, f2], p)?,
        qq,
        mu,
        alpha,
    )
}
