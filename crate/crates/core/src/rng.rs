//! Seeded random data. All generators use ChaCha8 seeded from a `u64`, and
//! normal variates come from the ziggurat sampler of `rand_distr`.

use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type DataRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> DataRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

pub fn normal_vector<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<T> {
    DVector::from_fn(n, |_, _| normal(rng))
}

/// Matrix of independent standard normals, filled column by column.
pub fn normal_matrix<T: Real, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<T> {
    DMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

pub fn uniform<T: Real, R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> T {
    T::lit(rng.random_range(lo..hi))
}
