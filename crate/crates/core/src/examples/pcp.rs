use super::ExampleInstance;
use crate::block::{vec_of, Shape};
use crate::error::{Error, Result};
use crate::linops::{BlockOperator, LinearOperator};
use crate::problem::{NonsmoothBlock, SaddleProblem};
use crate::prox::ProximableFunction;
use crate::rng::{normal, normal_matrix, seeded, uniform};
use crate::scalar::Real;
use nalgebra::DMatrix;
use rand::seq::index::sample;

pub const PCP_MU: f64 = 1.75;
pub const PCP_NOISE: f64 = 1e-3;
/// Dual time constant of the desk runs; the tail is dual-limited.
pub const PCP_ALPHA: f64 = 10.0;

/// Generated principal component pursuit instance.
#[derive(Debug, Clone)]
pub struct Pcp<T: Real> {
    pub instance: ExampleInstance<T>,
    pub q: DMatrix<T>,
    pub mask: DMatrix<T>,
    pub tau: T,
    pub delta: T,
}

/// `min ||Z1||_* + tau ||Z2||_1 + I(||Z3 ∘ Ω||_F <= delta)` subject to
/// `Z1 + Z2 + Z3 = Q`, with `Q` low rank plus sparse plus small noise.
/// There is no smooth block; the start is zero.
pub fn gen_pcp<T: Real>(n: usize, rank: usize, seed: u64) -> Result<Pcp<T>> {
    if rank == 0 || rank >= n {
        return Err(Error::InvalidArgument(format!("pcp needs 0 < rank < n, got rank {rank}, n {n}")));
    }
    let mut rng = seeded(seed);
    let r1: DMatrix<T> = normal_matrix(&mut rng, n, rank);
    let r2: DMatrix<T> = normal_matrix(&mut rng, n, rank);
    let low = &r1 * r2.transpose();
    let nn = n * n;
    let observed: Vec<usize> = sample(&mut rng, nn, (0.8 * nn as f64).round() as usize).into_vec();
    let mut mask = DMatrix::<T>::zeros(n, n);
    for &k in &observed {
        mask[k] = T::one();
    }
    let n_sparse = (0.05 * observed.len() as f64).round() as usize;
    let mut sparse = DMatrix::<T>::zeros(n, n);
    for i in sample(&mut rng, observed.len(), n_sparse) {
        sparse[observed[i]] = uniform(&mut rng, -500.0, 500.0);
    }
    let sigma = T::lit(PCP_NOISE);
    let noise = DMatrix::<T>::from_fn(n, n, |_, _| normal::<T, _>(&mut rng) * sigma);
    let q = low + sparse + noise;

    let nf = T::from_count(n);
    let tau = T::one() / nf.sqrt();
    let delta = (nf + (T::lit(8.0) * nf).sqrt()).sqrt() * sigma;
    let problem = pcp_problem(&q, &mask, tau, delta, T::lit(PCP_MU), T::lit(PCP_ALPHA))?;
    let init = problem.zero_state();
    Ok(Pcp {
        instance: ExampleInstance {
            name: "pcp".into(),
            problem,
            init,
            reference: None,
        },
        q,
        mask,
        tau,
        delta,
    })
}

/// Three matrix blocks with `F = [I I I]` and no `x`.
pub fn pcp_problem<T: Real>(
    q: &DMatrix<T>,
    mask: &DMatrix<T>,
    tau: T,
    delta: T,
    mu: T,
    alpha: T,
) -> Result<SaddleProblem<T>> {
    let (r, c) = q.shape();
    let shape = Shape::matrix(r, c);
    let id = || LinearOperator::identity(shape);
    SaddleProblem::new(
        vec![],
        vec![
            NonsmoothBlock::new(shape, ProximableFunction::nuclear(T::one(), r, c))?,
            NonsmoothBlock::new(shape, ProximableFunction::l1(tau))?,
            NonsmoothBlock::new(shape, ProximableFunction::frobenius_ball_masked(delta, mask.clone()))?,
        ],
        BlockOperator::empty(r * c),
        BlockOperator::new(vec![id(), id(), id()], r * c)?,
        vec_of(q),
        mu,
        alpha,
    )
}
