use super::ExampleInstance;
use crate::block::{vec_of, Shape};
use crate::error::{Error, Result};
use crate::linops::{BlockOperator, LinearOperator, LyapunovMap, MaskedCongruence, StackedMap};
use crate::problem::{NonsmoothBlock, PrimalDualState, SaddleProblem, SmoothBlock};
use crate::prox::ProximableFunction;
use crate::rng::{normal_matrix, seeded};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};

pub const CC_DELTA: f64 = 1e-12;

/// Generated covariance completion instance.
#[derive(Debug, Clone)]
pub struct CovarianceCompletion<T: Real> {
    pub instance: ExampleInstance<T>,
    pub a: DMatrix<T>,
    /// Velocity selector `[0 I]`.
    pub b: DMatrix<T>,
    /// Banded mask of known velocity covariances.
    pub mask: DMatrix<T>,
    pub q: DMatrix<T>,
    /// Covariance that produced `q`.
    pub x_feasible: DMatrix<T>,
    pub gamma: T,
}

/// State matrix of `n` unit masses in a chain with unit springs and dampers
/// between neighbors and to both walls; state is `(positions, velocities)`.
pub fn msd_chain<T: Real>(n: usize) -> DMatrix<T> {
    let k = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            T::lit(2.0)
        } else if i.abs_diff(j) == 1 {
            -T::one()
        } else {
            T::zero()
        }
    });
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).fill_with_identity();
    a.view_mut((n, 0), (n, n)).copy_from(&(-&k));
    a.view_mut((n, n), (n, n)).copy_from(&(-&k));
    a
}

/// Solves `A X + X A^T = R` through the Kronecker form `(I ⊗ A + A ⊗ I) vec X = vec R`.
pub fn solve_lyapunov<T: Real>(a: &DMatrix<T>, r: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    if !a.is_square() || r.shape() != (n, n) {
        return Err(Error::dims("Lyapunov equation", n * n, r.len()));
    }
    let id = DMatrix::<T>::identity(n, n);
    let k = id.kronecker(a) + a.kronecker(&id);
    let sol = k
        .lu()
        .solve(&vec_of(r))
        .ok_or_else(|| Error::Decomposition("Lyapunov operator is singular (A not Hurwitz)".into()))?;
    Ok(DMatrix::from_column_slice(n, n, sol.as_slice()))
}

/// `min -log det(X + delta I) + gamma ||Z||_*` subject to `A X + X A^T + Z = 0`
/// and `(B X B^T) ∘ C = Q`, for a mass-spring-damper chain with `n_masses`
/// masses. `Q` comes from the steady-state covariance under velocity forcing
/// with a random input covariance, so the instance is feasible.
pub fn gen_covariance_completion<T: Real>(n_masses: usize, gamma: T, seed: u64) -> Result<CovarianceCompletion<T>> {
    if n_masses < 2 {
        return Err(Error::InvalidArgument("covariance completion needs at least two masses".into()));
    }
    if !(gamma > T::zero()) {
        return Err(Error::InvalidArgument("gamma must be positive".into()));
    }
    let n = n_masses;
    let nx = 2 * n;
    let a = msd_chain::<T>(n);
    let mut b = DMatrix::zeros(n, nx);
    b.view_mut((0, n), (n, n)).fill_with_identity();
    let mask = DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) <= 1 { T::one() } else { T::zero() });

    let mut rng = seeded(seed);
    let g: DMatrix<T> = normal_matrix(&mut rng, n, n);
    let w = DMatrix::<T>::identity(n, n) + &g * g.transpose() / T::from_count(n);
    let bw: DMatrix<T> = b.transpose() * w * &b;
    let x_feasible = solve_lyapunov(&a, &(-bw))?;
    let q = (&b * &x_feasible * b.transpose()).component_mul(&mask);

    let problem = cc_problem(&a, &b, &mask, &q, gamma, T::one(), T::one())?;

    let eye = DMatrix::<T>::identity(nx, nx);
    let x0 = solve_lyapunov(&a, &(-&eye))?;
    let l = solve_lyapunov(&a.transpose(), &(-&x0))?;
    let l_norm = l.singular_values().max();
    let lam1 = l * (T::lit(10.0) / l_norm);
    let mut lam = DVector::zeros(problem.p());
    lam.rows_mut(0, nx * nx).copy_from(&vec_of(&lam1));
    lam.rows_mut(nx * nx, n * n).copy_from(&vec_of(&DMatrix::<T>::identity(n, n)));
    let init = PrimalDualState::new(vec_of(&x0), vec_of(&eye), vec_of(&eye), lam);
    Ok(CovarianceCompletion {
        instance: ExampleInstance {
            name: "covariance_completion".into(),
            problem,
            init,
            reference: None,
        },
        a,
        b,
        mask,
        q,
        x_feasible,
        gamma,
    })
}

/// `E = [E1; E2]` with `E1(X) = A X + X A^T`, `E2(X) = (B X B^T) ∘ C`,
/// `F = [I; 0]` and `q = (0, Q)`.
pub fn cc_problem<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    mask: &DMatrix<T>,
    q: &DMatrix<T>,
    gamma: T,
    mu: T,
    alpha: T,
) -> Result<SaddleProblem<T>> {
    let nx = a.nrows();
    let r = b.nrows();
    let sx = Shape::matrix(nx, nx);
    let sq = Shape::matrix(r, r);
    let e = LinearOperator::new(StackedMap::new(vec![
        LinearOperator::new(LyapunovMap::new(a.clone())?),
        LinearOperator::new(MaskedCongruence::new(b.clone(), mask.clone())?),
    ])?);
    let f = LinearOperator::new(StackedMap::new(vec![
        LinearOperator::identity(sx),
        LinearOperator::zero(sx, sq),
    ])?);
    let p = nx * nx + r * r;
    let mut qq = DVector::zeros(p);
    qq.rows_mut(nx * nx, r * r).copy_from(&vec_of(q));
    SaddleProblem::new(
        vec![SmoothBlock::neg_log_det(nx, T::lit(CC_DELTA))],
        vec![NonsmoothBlock::new(sx, ProximableFunction::nuclear(gamma, nx, nx))?],
        BlockOperator::new(vec![e], p)?,
        BlockOperator::new(vec![f], p)?,
        qq,
        mu,
        alpha,
    )
}
