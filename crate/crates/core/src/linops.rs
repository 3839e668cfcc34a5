//! Linear operators between (possibly matrix-shaped) finite-dimensional spaces,
//! and the spectral queries used by the certificate and assumption checks.
//!
//! Matrix-valued arguments use the trace inner product, which coincides with
//! the Euclidean inner product of their column-major vectorizations. All
//! dense forms are therefore matrices acting on `vec(X)`.

use crate::block::{unvec, vec_of, Shape};
use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector, DVectorView, SymmetricEigen, SVD};
use std::fmt::Debug;
use std::sync::{Arc, OnceLock};

/// Default relative threshold below which singular values count as zero.
pub const TOL_RANK: f64 = 1e-9;

/// A linear map with its adjoint.
pub trait LinearMap<T: Real>: Debug + Send + Sync {
    fn in_shape(&self) -> Shape;
    fn out_shape(&self) -> Shape;
    fn apply(&self, u: DVectorView<'_, T>) -> DVector<T>;
    fn adjoint(&self, v: DVectorView<'_, T>) -> DVector<T>;

    /// An explicit matrix, if the map already has one.
    fn dense(&self) -> Option<DMatrix<T>> {
        None
    }

    /// Whether the map may be materialized by probing basis vectors.
    fn materializable(&self) -> bool {
        true
    }
}

/// Shared handle to a [`LinearMap`] with a lazily materialized dense form.
#[derive(Debug, Clone)]
pub struct LinearOperator<T: Real> {
    map: Arc<dyn LinearMap<T>>,
    dense: Arc<OnceLock<DMatrix<T>>>,
}

impl<T: Real> LinearOperator<T> {
    pub fn new(map: impl LinearMap<T> + 'static) -> Self {
        Self {
            map: Arc::new(map),
            dense: Arc::new(OnceLock::new()),
        }
    }

    pub fn from_matrix(m: DMatrix<T>) -> Self {
        Self::new(DenseMap::new(m))
    }

    pub fn identity(shape: Shape) -> Self {
        Self::new(IdentityMap { shape, scale: T::one() })
    }

    pub fn scaled_identity(shape: Shape, scale: T) -> Self {
        Self::new(IdentityMap { shape, scale })
    }

    pub fn zero(in_shape: Shape, out_shape: Shape) -> Self {
        Self::new(ZeroMap {
            in_shape,
            out_shape,
        })
    }

    pub fn in_shape(&self) -> Shape {
        self.map.in_shape()
    }

    pub fn out_shape(&self) -> Shape {
        self.map.out_shape()
    }

    pub fn in_dim(&self) -> usize {
        self.map.in_shape().len()
    }

    pub fn out_dim(&self) -> usize {
        self.map.out_shape().len()
    }

    pub fn map(&self) -> &Arc<dyn LinearMap<T>> {
        &self.map
    }

    pub fn apply(&self, u: DVectorView<'_, T>) -> DVector<T> {
        self.map.apply(u)
    }

    pub fn adjoint(&self, v: DVectorView<'_, T>) -> DVector<T> {
        self.map.adjoint(v)
    }

    pub fn apply_vec(&self, u: &DVector<T>) -> DVector<T> {
        self.map.apply(u.as_view())
    }

    pub fn adjoint_vec(&self, v: &DVector<T>) -> DVector<T> {
        self.map.adjoint(v.as_view())
    }

    pub fn is_materializable(&self) -> bool {
        self.dense.get().is_some() || self.map.materializable()
    }

    /// Dense matrix of the operator, computed once and cached.
    pub fn to_dense(&self) -> Result<&DMatrix<T>> {
        if let Some(d) = self.dense.get() {
            return Ok(d);
        }
        let m = match self.map.dense() {
            Some(m) => m,
            None => {
                if !self.map.materializable() {
                    return Err(Error::NotMaterializable(format!("{:?}", self.map)));
                }
                probe_dense(self.map.as_ref())
            }
        };
        Ok(self.dense.get_or_init(|| m))
    }
}

fn probe_dense<T: Real>(map: &dyn LinearMap<T>) -> DMatrix<T> {
    let n = map.in_shape().len();
    let m = map.out_shape().len();
    let mut out = DMatrix::zeros(m, n);
    let mut e = DVector::zeros(n);
    for j in 0..n {
        e[j] = T::one();
        let col = map.apply(e.as_view());
        out.set_column(j, &col);
        e[j] = T::zero();
    }
    out
}

/// Explicit matrix acting on vectorized arguments.
#[derive(Debug, Clone)]
pub struct DenseMap<T: Real> {
    matrix: DMatrix<T>,
    in_shape: Shape,
    out_shape: Shape,
}

impl<T: Real> DenseMap<T> {
    pub fn new(matrix: DMatrix<T>) -> Self {
        let (r, c) = matrix.shape();
        Self {
            matrix,
            in_shape: Shape::Vector(c),
            out_shape: Shape::Vector(r),
        }
    }

    /// Dense map with explicitly declared (e.g. matrix) domain and codomain.
    pub fn with_shapes(matrix: DMatrix<T>, in_shape: Shape, out_shape: Shape) -> Result<Self> {
        if matrix.ncols() != in_shape.len() {
            return Err(Error::dims("dense map domain", in_shape.len(), matrix.ncols()));
        }
        if matrix.nrows() != out_shape.len() {
            return Err(Error::dims("dense map codomain", out_shape.len(), matrix.nrows()));
        }
        Ok(Self {
            matrix,
            in_shape,
            out_shape,
        })
    }
}

impl<T: Real> LinearMap<T> for DenseMap<T> {
    fn in_shape(&self) -> Shape {
        self.in_shape
    }
    fn out_shape(&self) -> Shape {
        self.out_shape
    }
    fn apply(&self, u: DVectorView<'_, T>) -> DVector<T> {
        &self.matrix * u
    }
    fn adjoint(&self, v: DVectorView<'_, T>) -> DVector<T> {
        self.matrix.tr_mul(&v)
    }
    fn dense(&self) -> Option<DMatrix<T>> {
        Some(self.matrix.clone())
    }
}

/// `u -> scale * u`.
#[derive(Debug, Clone)]
pub struct IdentityMap<T: Real> {
    shape: Shape,
    scale: T,
}

impl<T: Real> LinearMap<T> for IdentityMap<T> {
    fn in_shape(&self) -> Shape {
        self.shape
    }
    fn out_shape(&self) -> Shape {
        self.shape
    }
    fn apply(&self, u: DVectorView<'_, T>) -> DVector<T> {
        u.into_owned() * self.scale
    }
    fn adjoint(&self, v: DVectorView<'_, T>) -> DVector<T> {
        v.into_owned() * self.scale
    }
    fn dense(&self) -> Option<DMatrix<T>> {
        let n = self.shape.len();
        Some(DMatrix::identity(n, n) * self.scale)
    }
}

#[derive(Debug, Clone)]
pub struct ZeroMap {
    in_shape: Shape,
    out_shape: Shape,
}

impl<T: Real> LinearMap<T> for ZeroMap {
    fn in_shape(&self) -> Shape {
        self.in_shape
    }
    fn out_shape(&self) -> Shape {
        self.out_shape
    }
    fn apply(&self, _u: DVectorView<'_, T>) -> DVector<T> {
        DVector::zeros(self.out_shape.len())
    }
    fn adjoint(&self, _v: DVectorView<'_, T>) -> DVector<T> {
        DVector::zeros(self.in_shape.len())
    }
    fn dense(&self) -> Option<DMatrix<T>> {
        Some(DMatrix::zeros(self.out_shape.len(), self.in_shape.len()))
    }
}

/// Lyapunov map `X -> A X + X A^T` on square matrices.
#[derive(Debug, Clone)]
pub struct LyapunovMap<T: Real> {
    a: DMatrix<T>,
}

impl<T: Real> LyapunovMap<T> {
    pub fn new(a: DMatrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dims("Lyapunov map (square A)", a.nrows(), a.ncols()));
        }
        Ok(Self { a })
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.a
    }
}

impl<T: Real> LinearMap<T> for LyapunovMap<T> {
    fn in_shape(&self) -> Shape {
        Shape::matrix(self.a.nrows(), self.a.nrows())
    }
    fn out_shape(&self) -> Shape {
        self.in_shape()
    }
    fn apply(&self, u: DVectorView<'_, T>) -> DVector<T> {
        let n = self.a.nrows();
        let x = unvec(u.as_slice(), n, n);
        vec_of(&(&self.a * &x + &x * self.a.transpose()))
    }
    fn adjoint(&self, v: DVectorView<'_, T>) -> DVector<T> {
        let n = self.a.nrows();
        let y = unvec(v.as_slice(), n, n);
        vec_of(&(self.a.tr_mul(&y) + &y * &self.a))
    }
}

/// Masked congruence `X -> (B X B^T) ∘ C` with a fixed mask `C`.
#[derive(Debug, Clone)]
pub struct MaskedCongruence<T: Real> {
    b: DMatrix<T>,
    mask: DMatrix<T>,
}

impl<T: Real> MaskedCongruence<T> {
    pub fn new(b: DMatrix<T>, mask: DMatrix<T>) -> Result<Self> {
        let r = b.nrows();
        if mask.shape() != (r, r) {
            return Err(Error::dims("masked congruence mask", r * r, mask.len()));
        }
        Ok(Self { b, mask })
    }
}

impl<T: Real> LinearMap<T> for MaskedCongruence<T> {
    fn in_shape(&self) -> Shape {
        Shape::matrix(self.b.ncols(), self.b.ncols())
    }
    fn out_shape(&self) -> Shape {
        Shape::matrix(self.b.nrows(), self.b.nrows())
    }
    fn apply(&self, u: DVectorView<'_, T>) -> DVector<T> {
        let n = self.b.ncols();
        let x = unvec(u.as_slice(), n, n);
        let bxb = &self.b * x * self.b.transpose();
        vec_of(&bxb.component_mul(&self.mask))
    }
    fn adjoint(&self, v: DVectorView<'_, T>) -> DVector<T> {
        let r = self.b.nrows();
        let y = unvec(v.as_slice(), r, r).component_mul(&self.mask);
        vec_of(&(self.b.tr_mul(&y) * &self.b))
    }
}

/// Vertical stack `[A_1; ...; A_r]` of operators sharing one domain.
#[derive(Debug, Clone)]
pub struct StackedMap<T: Real> {
    ops: Vec<LinearOperator<T>>,
    in_shape: Shape,
    out_len: usize,
}

impl<T: Real> StackedMap<T> {
    pub fn new(ops: Vec<LinearOperator<T>>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty operator stack".into()))?;
        let in_shape = first.in_shape();
        for op in &ops {
            if op.in_dim() != in_shape.len() {
                return Err(Error::dims("stacked operator domain", in_shape.len(), op.in_dim()));
            }
        }
        let out_len = ops.iter().map(|o| o.out_dim()).sum();
        Ok(Self {
            ops,
            in_shape,
            out_len,
        })
    }
}

impl<T: Real> LinearMap<T> for StackedMap<T> {
    fn in_shape(&self) -> Shape {
        self.in_shape
    }
    fn out_shape(&self) -> Shape {
        Shape::Vector(self.out_len)
    }
    fn apply(&self, u: DVectorView<'_, T>) -> DVector<T> {
        let mut out = DVector::zeros(self.out_len);
        let mut off = 0;
        for op in &self.ops {
            let part = op.apply(u);
            out.rows_mut(off, part.len()).copy_from(&part);
            off += part.len();
        }
        out
    }
    fn adjoint(&self, v: DVectorView<'_, T>) -> DVector<T> {
        let mut out = DVector::zeros(self.in_shape.len());
        let mut off = 0;
        for op in &self.ops {
            let m = op.out_dim();
            out += op.adjoint(v.rows(off, m));
            off += m;
        }
        out
    }
    fn materializable(&self) -> bool {
        self.ops.iter().all(|o| o.is_materializable())
    }
}

type VecFn<T> = Arc<dyn Fn(DVectorView<'_, T>) -> DVector<T> + Send + Sync>;

/// Operator given by a pair of closures.
#[derive(Clone)]
pub struct FnMap<T: Real> {
    pub in_shape: Shape,
    pub out_shape: Shape,
    pub apply: VecFn<T>,
    pub adjoint: VecFn<T>,
    pub materializable: bool,
}

impl<T: Real> Debug for FnMap<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FnMap({} -> {})", self.in_shape, self.out_shape)
    }
}

impl<T: Real> LinearMap<T> for FnMap<T> {
    fn in_shape(&self) -> Shape {
        self.in_shape
    }
    fn out_shape(&self) -> Shape {
        self.out_shape
    }
    fn apply(&self, u: DVectorView<'_, T>) -> DVector<T> {
        (self.apply)(u)
    }
    fn adjoint(&self, v: DVectorView<'_, T>) -> DVector<T> {
        (self.adjoint)(v)
    }
    fn materializable(&self) -> bool {
        self.materializable
    }
}

/// Column-partitioned operator `[A_1 ... A_k]` acting on a packed block vector.
#[derive(Debug, Clone)]
pub struct BlockOperator<T: Real> {
    blocks: Vec<LinearOperator<T>>,
    codim: usize,
}

impl<T: Real> BlockOperator<T> {
    pub fn new(blocks: Vec<LinearOperator<T>>, codim: usize) -> Result<Self> {
        for b in &blocks {
            if b.out_dim() != codim {
                return Err(Error::dims("block operator codomain", codim, b.out_dim()));
            }
        }
        Ok(Self { blocks, codim })
    }

    pub fn empty(codim: usize) -> Self {
        Self {
            blocks: Vec::new(),
            codim,
        }
    }

    pub fn blocks(&self) -> &[LinearOperator<T>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &LinearOperator<T> {
        &self.blocks[i]
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    pub fn in_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.in_dim()).sum()
    }

    /// Sum of the per-block applications.
    pub fn apply(&self, u: DVectorView<'_, T>) -> DVector<T> {
        let mut out = DVector::zeros(self.codim);
        let mut off = 0;
        for b in &self.blocks {
            let n = b.in_dim();
            out += b.apply(u.rows(off, n));
            off += n;
        }
        out
    }

    pub fn adjoint(&self, v: DVectorView<'_, T>) -> DVector<T> {
        let mut out = DVector::zeros(self.in_dim());
        let mut off = 0;
        for b in &self.blocks {
            let part = b.adjoint(v);
            out.rows_mut(off, part.len()).copy_from(&part);
            off += part.len();
        }
        out
    }

    /// Dense `[A_i ...]` restricted to the selected blocks, in the given order.
    pub fn dense_columns(&self, which: &[usize]) -> Result<DMatrix<T>> {
        let cols: usize = which.iter().map(|&i| self.blocks[i].in_dim()).sum();
        let mut out = DMatrix::zeros(self.codim, cols);
        let mut off = 0;
        for &i in which {
            let d = self.blocks[i].to_dense()?;
            out.columns_mut(off, d.ncols()).copy_from(d);
            off += d.ncols();
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Result<DMatrix<T>> {
        let all: Vec<usize> = (0..self.blocks.len()).collect();
        self.dense_columns(&all)
    }
}

/// Horizontal concatenation of dense matrices with a common row count.
pub fn hcat<T: Real>(parts: &[&DMatrix<T>], rows: usize) -> DMatrix<T> {
    let cols = parts.iter().map(|m| m.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut off = 0;
    for m in parts {
        out.columns_mut(off, m.ncols()).copy_from(*m);
        off += m.ncols();
    }
    out
}

/// Extreme singular values of a dense matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularExtremes<T: Real> {
    pub sigma_max: T,
    /// Smallest singular value above `tol_rank * sigma_max`.
    pub sigma_min_nonzero: T,
    pub rank: usize,
    /// Set when the matrix is (numerically) zero or empty.
    pub is_zero: bool,
}

pub fn singular_extremes_dense<T: Real>(m: &DMatrix<T>, tol_rank: T) -> Result<SingularExtremes<T>> {
    if m.is_empty() {
        return Ok(SingularExtremes {
            sigma_max: T::zero(),
            sigma_min_nonzero: T::zero(),
            rank: 0,
            is_zero: true,
        });
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().copied().fold(T::zero(), |a, b| a.max(b));
    if smax <= T::zero() {
        return Ok(SingularExtremes {
            sigma_max: T::zero(),
            sigma_min_nonzero: T::zero(),
            rank: 0,
            is_zero: true,
        });
    }
    let cut = tol_rank * smax;
    let mut smin = smax;
    let mut rank = 0;
    for &s in sv.iter() {
        if s > cut {
            rank += 1;
            smin = smin.min(s);
        }
    }
    Ok(SingularExtremes {
        sigma_max: smax,
        sigma_min_nonzero: smin,
        rank,
        is_zero: false,
    })
}

/// Largest and smallest nonzero singular values of an operator.
pub fn singular_extremes<T: Real>(op: &LinearOperator<T>) -> Result<SingularExtremes<T>> {
    singular_extremes_dense(op.to_dense()?, T::lit(TOL_RANK))
}

/// Orthonormal basis of the numerical range of `m` (left singular vectors).
pub fn range_basis<T: Real>(m: &DMatrix<T>, tol_rank: T) -> Result<DMatrix<T>> {
    let rows = m.nrows();
    if m.is_empty() {
        return Ok(DMatrix::zeros(rows, 0));
    }
    let svd = SVD::try_new(m.clone(), true, false, T::eps(), 0)
        .ok_or_else(|| Error::Decomposition("SVD did not converge".into()))?;
    let u = svd.u.ok_or_else(|| Error::Decomposition("missing U".into()))?;
    let smax = svd
        .singular_values
        .iter()
        .copied()
        .fold(T::zero(), |a, b| a.max(b));
    let cut = tol_rank * smax;
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > T::zero() && svd.singular_values[i] > cut)
        .collect();
    let mut basis = DMatrix::zeros(rows, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        basis.set_column(k, &u.column(i));
    }
    Ok(basis)
}

/// Orthonormal basis of `N(m^T)`, the orthogonal complement of the range.
pub fn left_null_basis<T: Real>(m: &DMatrix<T>, tol_rank: T) -> Result<DMatrix<T>> {
    let rows = m.nrows();
    let u = range_basis(m, tol_rank)?;
    if u.ncols() == rows {
        return Ok(DMatrix::zeros(rows, 0));
    }
    let proj = DMatrix::identity(rows, rows) - &u * u.transpose();
    let eig = SymmetricEigen::new(proj);
    let half = T::lit(0.5);
    let keep: Vec<usize> = (0..rows).filter(|&i| eig.eigenvalues[i] > half).collect();
    let mut basis = DMatrix::zeros(rows, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        basis.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok(basis)
}

/// `R(F) ⊆ R(E)`, tested column by column of dense `F`.
pub fn range_contained_dense<T: Real>(f: &DMatrix<T>, e: &DMatrix<T>, tol: T) -> Result<bool> {
    if f.nrows() != e.nrows() {
        return Err(Error::dims("range containment codomain", e.nrows(), f.nrows()));
    }
    let u = range_basis(e, T::lit(TOL_RANK))?;
    for col in f.column_iter() {
        let norm = col.norm();
        if norm == T::zero() {
            continue;
        }
        let resid = &col - &u * u.tr_mul(&col);
        if resid.norm() > tol * norm {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn range_contained<T: Real>(
    f: &LinearOperator<T>,
    e: &LinearOperator<T>,
    tol: T,
) -> Result<bool> {
    if f.out_dim() != e.out_dim() {
        return Err(Error::dims("range containment codomain", e.out_dim(), f.out_dim()));
    }
    range_contained_dense(f.to_dense()?, e.to_dense()?, tol)
}

/// Orthogonal projection of `v` onto `N(m^T)`.
pub fn null_projection_dense<T: Real>(m: &DMatrix<T>, v: &DVector<T>) -> Result<DVector<T>> {
    if v.len() != m.nrows() {
        return Err(Error::dims("null projection", m.nrows(), v.len()));
    }
    let u = range_basis(m, T::lit(TOL_RANK))?;
    Ok(v - &u * u.tr_mul(v))
}

pub fn null_projection<T: Real>(op: &LinearOperator<T>, v: &DVector<T>) -> Result<DVector<T>> {
    null_projection_dense(op.to_dense()?, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_extremes() {
        let s = singular_extremes(&LinearOperator::<f64>::identity(Shape::Vector(3))).unwrap();
        assert_eq!((s.sigma_max, s.sigma_min_nonzero, s.rank), (1.0, 1.0, 3));
    }

    #[test]
    fn counterexample_column_extremes() {
        let op = LinearOperator::from_matrix(dmatrix![-1.0; 1.0]);
        let s = singular_extremes(&op).unwrap();
        let r2 = 2f64.sqrt();
        assert!((s.sigma_max - r2).abs() < 1e-14);
        assert!((s.sigma_min_nonzero - r2).abs() < 1e-14);
    }

    #[test]
    fn zero_operator_flagged() {
        let op = LinearOperator::<f64>::zero(Shape::Vector(2), Shape::Vector(2));
        let s = singular_extremes(&op).unwrap();
        assert!(s.is_zero);
        assert_eq!((s.sigma_max, s.sigma_min_nonzero), (0.0, 0.0));
    }

    #[test]
    fn non_materializable_is_an_error() {
        let f: VecFn<f64> = Arc::new(|u| u.into_owned());
        let op = LinearOperator::new(FnMap {
            in_shape: Shape::Vector(2),
            out_shape: Shape::Vector(2),
            apply: f.clone(),
            adjoint: f,
            materializable: false,
        });
        assert!(matches!(singular_extremes(&op), Err(Error::NotMaterializable(_))));
    }

    #[test]
    fn range_containment_cases() {
        let e_full = LinearOperator::from_matrix(dmatrix![1.0, 2.0; 0.0, 1.0]);
        let f_any = LinearOperator::from_matrix(dmatrix![3.0; -7.0]);
        assert!(range_contained(&f_any, &e_full, 1e-9).unwrap());

        let e = LinearOperator::from_matrix(dmatrix![-1.0; 1.0]);
        let f = LinearOperator::from_matrix(-DMatrix::<f64>::identity(2, 2));
        assert!(!range_contained(&f, &e, 1e-9).unwrap());

        let f0 = LinearOperator::<f64>::zero(Shape::Vector(3), Shape::Vector(2));
        assert!(range_contained(&f0, &e, 1e-9).unwrap());

        let bad = LinearOperator::<f64>::zero(Shape::Vector(1), Shape::Vector(3));
        assert!(range_contained(&bad, &e, 1e-9).is_err());
    }

    #[test]
    fn null_projection_examples() {
        let surj = LinearOperator::from_matrix(dmatrix![1.0, 1.0]);
        let p = null_projection(&surj, &DVector::from_vec(vec![0.7])).unwrap();
        assert!(p.norm() < 1e-15);

        let col = LinearOperator::from_matrix(dmatrix![1.0; 1.0]);
        let p = null_projection(&col, &DVector::from_vec(vec![1.0, -1.0])).unwrap();
        assert!((p - DVector::from_vec(vec![1.0, -1.0])).norm() < 1e-14);

        assert!(null_projection(&col, &DVector::from_vec(vec![1.0])).is_err());
    }

    #[test]
    fn null_projection_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = DMatrix::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0));
        for _ in 0..20 {
            let v = rand_vec(&mut rng, 5);
            let p = null_projection_dense(&m, &v).unwrap();
            let pp = null_projection_dense(&m, &p).unwrap();
            assert!((&p - &pp).norm() <= 1e-10 * p.norm().max(1.0));
            assert!(m.tr_mul(&p).norm() < 1e-12);
        }
    }

    #[test]
    fn left_null_basis_spans_complement() {
        let m = dmatrix![1.0, 0.0; 1.0, 0.0; 0.0, 1.0];
        let n = left_null_basis(&m, 1e-9).unwrap();
        assert_eq!(n.ncols(), 1);
        assert!(m.tr_mul(&n).norm() < 1e-14);
    }

    fn adjoint_check(op: &LinearOperator<f64>, rng: &mut ChaCha8Rng) {
        for _ in 0..10 {
            let u = rand_vec(rng, op.in_dim());
            let v = rand_vec(rng, op.out_dim());
            let lhs = op.apply_vec(&u).dot(&v);
            let rhs = u.dot(&op.adjoint_vec(&v));
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1.0));
            let d = op.to_dense().unwrap();
            let du = d * &u;
            assert!((du - op.apply_vec(&u)).norm() <= 1e-12 * u.norm().max(1.0) * d.norm());
        }
    }

    #[test]
    fn structured_operators_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(3, 4, |_, _| rng.random_range(-1.0..1.0));
        let mask = DMatrix::from_fn(3, 3, |i, j| if (i + j) % 2 == 0 { 1.0 } else { 0.0 });
        let lyap = LinearOperator::new(LyapunovMap::new(a).unwrap());
        let cong = LinearOperator::new(MaskedCongruence::new(b, mask).unwrap());
        adjoint_check(&lyap, &mut rng);
        adjoint_check(&cong, &mut rng);
        let stacked = LinearOperator::new(StackedMap::new(vec![lyap, cong]).unwrap());
        adjoint_check(&stacked, &mut rng);
    }

    #[test]
    fn block_operator_sums_blocks() {
        let e1 = LinearOperator::from_matrix(dmatrix![1.0, 2.0; 3.0, 4.0]);
        let e2 = LinearOperator::from_matrix(dmatrix![5.0; 6.0]);
        let e = BlockOperator::new(vec![e1, e2], 2).unwrap();
        let u = DVector::from_vec(vec![1.0, -1.0, 2.0]);
        let y = e.apply(u.as_view());
        assert_eq!(y.as_slice(), &[9.0, 11.0]);
        let dense = e.to_dense().unwrap();
        assert_eq!(dense * &u, y);
        let v = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(e.adjoint(v.as_view()).as_slice(), &[4.0, 6.0, 11.0]);
    }
}
