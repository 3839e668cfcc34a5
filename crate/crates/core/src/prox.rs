//! Proximal operators and Moreau envelopes.

use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector, SVD};
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

/// Sign of an orthant indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orthant {
    Nonneg,
    Nonpos,
}

/// Disjoint groups covering `0..dim` with per-group weights and an optional
/// l1 weight applied to every entry.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition<T: Real> {
    groups: Vec<Vec<usize>>,
    weights: Vec<T>,
    l1_weight: T,
    dim: usize,
}

impl<T: Real> GroupPartition<T> {
    pub fn new(groups: Vec<Vec<usize>>, weights: Vec<T>, l1_weight: T) -> Result<Self> {
        if groups.len() != weights.len() {
            return Err(Error::Partition(format!(
                "{} groups but {} weights",
                groups.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w > T::zero())) {
            return Err(Error::Partition("group weights must be positive".into()));
        }
        if l1_weight < T::zero() {
            return Err(Error::Partition("l1 weight must be nonnegative".into()));
        }
        let dim: usize = groups.iter().map(|g| g.len()).sum();
        let mut seen = vec![false; dim];
        for g in &groups {
            for &i in g {
                if i >= dim || seen[i] {
                    return Err(Error::Partition(format!(
                        "index {i} is out of range or repeated"
                    )));
                }
                seen[i] = true;
            }
        }
        Ok(Self {
            groups,
            weights,
            l1_weight,
            dim,
        })
    }

    /// `count` consecutive groups of equal width.
    pub fn uniform(dim: usize, count: usize, weight: T, l1_weight: T) -> Result<Self> {
        if count == 0 || dim % count != 0 {
            return Err(Error::Partition(format!(
                "{dim} entries cannot be split into {count} equal groups"
            )));
        }
        let w = dim / count;
        let groups = (0..count).map(|g| (g * w..(g + 1) * w).collect()).collect();
        Self::new(groups, vec![weight; count], l1_weight)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn l1_weight(&self) -> T {
        self.l1_weight
    }
}

type ValueFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
type ProxFn<T> = Arc<dyn Fn(T, &[T]) -> DVector<T> + Send + Sync>;

/// User-supplied value/prox pair.
#[derive(Clone)]
pub struct CustomProx<T: Real> {
    pub name: String,
    pub value: ValueFn<T>,
    pub prox: ProxFn<T>,
}

impl<T: Real> fmt::Debug for CustomProx<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomProx({})", self.name)
    }
}

#[derive(Debug, Clone)]
pub enum ProxKind<T: Real> {
    Zero,
    L1 { weight: T },
    GroupLasso(GroupPartition<T>),
    /// Weighted nuclear norm of a `rows x cols` matrix stored column-major.
    Nuclear { weight: T, rows: usize, cols: usize },
    Indicator(Orthant),
    /// Indicator of `{X : ||X ∘ Ω||_F <= radius}`.
    FrobeniusBallMasked { radius: T, mask: DMatrix<T> },
    Custom(CustomProx<T>),
}

impl<T: Real> ProxKind<T> {
    pub fn tag(&self) -> &'static str {
        match self {
            ProxKind::Zero => "zero",
            ProxKind::L1 { .. } => "l1",
            ProxKind::GroupLasso(_) => "group_lasso",
            ProxKind::Nuclear { .. } => "nuclear",
            ProxKind::Indicator(Orthant::Nonneg) => "indicator_nonneg",
            ProxKind::Indicator(Orthant::Nonpos) => "indicator_nonpos",
            ProxKind::FrobeniusBallMasked { .. } => "frobenius_ball_masked",
            ProxKind::Custom(_) => "custom",
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(
            self,
            ProxKind::Indicator(_) | ProxKind::FrobeniusBallMasked { .. }
        )
    }
}

/// A closed proper convex function `g(w) + (quadratic/2)||w||^2` with a prox.
#[derive(Debug, Clone)]
pub struct ProximableFunction<T: Real> {
    pub kind: ProxKind<T>,
    /// Weight of an added `||w||^2 / 2` term.
    pub quadratic: T,
    /// Declared strong convexity modulus of the whole function.
    pub strong_convexity: T,
}

/// Relative slack used when testing membership in constraint sets.
const FEAS_TOL: f64 = 1e-10;

impl<T: Real> ProximableFunction<T> {
    pub fn new(kind: ProxKind<T>) -> Self {
        Self {
            kind,
            quadratic: T::zero(),
            strong_convexity: T::zero(),
        }
    }

    pub fn zero() -> Self {
        Self::new(ProxKind::Zero)
    }

    pub fn l1(weight: T) -> Self {
        Self::new(ProxKind::L1 { weight })
    }

    pub fn group_lasso(part: GroupPartition<T>) -> Self {
        Self::new(ProxKind::GroupLasso(part))
    }

    pub fn nuclear(weight: T, rows: usize, cols: usize) -> Self {
        Self::new(ProxKind::Nuclear { weight, rows, cols })
    }

    pub fn indicator(sign: Orthant) -> Self {
        Self::new(ProxKind::Indicator(sign))
    }

    pub fn frobenius_ball_masked(radius: T, mask: DMatrix<T>) -> Self {
        Self::new(ProxKind::FrobeniusBallMasked { radius, mask })
    }

    pub fn custom(custom: CustomProx<T>) -> Self {
        Self::new(ProxKind::Custom(custom))
    }

    /// Adds `(m/2)||w||^2`, raising the declared strong convexity by `m`.
    pub fn plus_quadratic(mut self, m: T) -> Self {
        self.quadratic += m;
        self.strong_convexity += m;
        self
    }

    pub fn with_strong_convexity(mut self, m: T) -> Self {
        self.strong_convexity = m;
        self
    }

    pub fn tag(&self) -> &'static str {
        self.kind.tag()
    }

    /// Checks that `n` entries are compatible with the function's structure.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        match &self.kind {
            ProxKind::GroupLasso(p) if p.dim() != n => Err(Error::Partition(format!(
                "partition covers {} entries, block has {n}",
                p.dim()
            ))),
            ProxKind::Nuclear { rows, cols, .. } if rows * cols != n => {
                Err(Error::dims("nuclear norm block", rows * cols, n))
            }
            ProxKind::FrobeniusBallMasked { mask, .. } if mask.len() != n => {
                Err(Error::dims("masked ball mask", n, mask.len()))
            }
            _ => Ok(()),
        }
    }

    /// `g(w)`, `+inf` outside the domain of an indicator.
    pub fn value(&self, w: &[T]) -> T {
        let base = match &self.kind {
            ProxKind::Zero => T::zero(),
            ProxKind::L1 { weight } => *weight * l1_norm(w),
            ProxKind::GroupLasso(p) => {
                let mut s = p.l1_weight * l1_norm(w);
                for (g, &wt) in p.groups.iter().zip(&p.weights) {
                    let n2 = g.iter().fold(T::zero(), |a, &i| a + w[i] * w[i]);
                    s += wt * n2.sqrt();
                }
                s
            }
            ProxKind::Nuclear { weight, rows, cols } => {
                let m = DMatrix::from_column_slice(*rows, *cols, w);
                *weight * m.singular_values().sum()
            }
            ProxKind::Indicator(sign) => {
                let ok = match sign {
                    Orthant::Nonneg => w.iter().all(|&v| v >= T::zero()),
                    Orthant::Nonpos => w.iter().all(|&v| v <= T::zero()),
                };
                if ok {
                    T::zero()
                } else {
                    T::infinity()
                }
            }
            ProxKind::FrobeniusBallMasked { radius, mask } => {
                if masked_norm(w, mask.as_slice()) <= *radius * (T::one() + T::lit(FEAS_TOL)) {
                    T::zero()
                } else {
                    T::infinity()
                }
            }
            ProxKind::Custom(c) => (c.value)(w),
        };
        if self.quadratic > T::zero() {
            let sq = w.iter().fold(T::zero(), |a, &v| a + v * v);
            base + self.quadratic * sq * T::lit(0.5)
        } else {
            base
        }
    }

    /// `argmin_w g(w) + ||w - v||^2 / (2 mu)`.
    pub fn prox(&self, mu: T, v: &[T]) -> Result<DVector<T>> {
        if !(mu > T::zero()) {
            return Err(Error::InvalidArgument(format!("prox parameter must be positive, got {mu}")));
        }
        self.check_dim(v.len())?;
        if self.quadratic > T::zero() {
            let s = T::one() / (T::one() + mu * self.quadratic);
            let scaled: Vec<T> = v.iter().map(|&x| x * s).collect();
            return self.base_prox(mu * s, &scaled);
        }
        self.base_prox(mu, v)
    }

    fn base_prox(&self, mu: T, v: &[T]) -> Result<DVector<T>> {
        Ok(match &self.kind {
            ProxKind::Zero => DVector::from_column_slice(v),
            ProxKind::L1 { weight } => prox_l1(mu * *weight, v),
            ProxKind::GroupLasso(p) => prox_group_lasso(mu, p, v)?,
            ProxKind::Nuclear { weight, rows, cols } => {
                let m = DMatrix::from_column_slice(*rows, *cols, v);
                let p = prox_nuclear(mu * *weight, &m)?;
                DVector::from_column_slice(p.as_slice())
            }
            ProxKind::Indicator(sign) => prox_indicator_orthant(*sign, v),
            ProxKind::FrobeniusBallMasked { radius, mask } => {
                prox_frobenius_ball_masked(*radius, mask.as_slice(), v)?
            }
            ProxKind::Custom(c) => (c.prox)(mu, v),
        })
    }

    /// `M_{mu g}(v) = g(p) + ||p - v||^2 / (2 mu)` with `p = prox(mu, v)`.
    pub fn moreau_value(&self, mu: T, v: &[T]) -> Result<T> {
        let p = self.prox(mu, v)?;
        self.moreau_value_at(mu, v, p.as_slice())
    }

    /// Moreau value given an already computed prox output.
    pub fn moreau_value_at(&self, mu: T, v: &[T], p: &[T]) -> Result<T> {
        let gp = self.value(p);
        if !gp.is_finite_val() {
            return Err(Error::InfiniteAtProx(self.tag().into()));
        }
        let d2 = p
            .iter()
            .zip(v)
            .fold(T::zero(), |a, (&pi, &vi)| a + (pi - vi) * (pi - vi));
        Ok(gp + d2 / (T::lit(2.0) * mu))
    }

    /// `(v - prox(mu, v)) / mu`.
    pub fn moreau_grad(&self, mu: T, v: &[T]) -> Result<DVector<T>> {
        let p = self.prox(mu, v)?;
        Ok((DVector::from_column_slice(v) - p) / mu)
    }
}

fn l1_norm<T: Real>(w: &[T]) -> T {
    w.iter().fold(T::zero(), |a, &v| a + v.abs())
}

fn masked_norm<T: Real>(w: &[T], mask: &[T]) -> T {
    w.iter()
        .zip(mask)
        .fold(T::zero(), |a, (&x, &m)| a + (x * m) * (x * m))
        .sqrt()
}

fn soft<T: Real>(x: T, t: T) -> T {
    let a = x.abs() - t;
    if a > T::zero() {
        a * x.signum()
    } else {
        T::zero()
    }
}

/// Entrywise soft threshold at level `mu`.
pub fn prox_l1<T: Real>(mu: T, v: &[T]) -> DVector<T> {
    DVector::from_iterator(v.len(), v.iter().map(|&x| soft(x, mu)))
}

/// Soft threshold by `eta * mu`, then block shrinkage of every group.
pub fn prox_group_lasso<T: Real>(mu: T, part: &GroupPartition<T>, v: &[T]) -> Result<DVector<T>> {
    if part.dim() != v.len() {
        return Err(Error::Partition(format!(
            "partition covers {} entries, vector has {}",
            part.dim(),
            v.len()
        )));
    }
    let mut z = if part.l1_weight > T::zero() {
        prox_l1(part.l1_weight * mu, v)
    } else {
        DVector::from_column_slice(v)
    };
    for (g, &w) in part.groups.iter().zip(&part.weights) {
        let n = g.iter().fold(T::zero(), |a, &i| a + z[i] * z[i]).sqrt();
        let scale = if n > T::zero() {
            (T::one() - w * mu / n).max(T::zero())
        } else {
            T::zero()
        };
        for &i in g {
            z[i] *= scale;
        }
    }
    Ok(z)
}

/// Singular value soft threshold at level `mu`.
pub fn prox_nuclear<T: Real>(mu: T, x: &DMatrix<T>) -> Result<DMatrix<T>> {
    if x.is_empty() {
        return Ok(x.clone());
    }
    let svd = SVD::try_new(x.clone(), true, true, T::eps(), 0)
        .ok_or_else(|| Error::Decomposition("SVD did not converge in nuclear prox".into()))?;
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let sk = s - mu;
        if sk > T::zero() {
            out += u.column(k) * vt.row(k) * sk;
        }
    }
    Ok(out)
}

/// Entrywise projection onto an orthant.
pub fn prox_indicator_orthant<T: Real>(sign: Orthant, v: &[T]) -> DVector<T> {
    DVector::from_iterator(
        v.len(),
        v.iter().map(|&x| match sign {
            Orthant::Nonneg => x.max(T::zero()),
            Orthant::Nonpos => x.min(T::zero()),
        }),
    )
}

/// Projection onto `{X : ||X ∘ Ω||_F <= radius}` for a binary mask `Ω`.
pub fn prox_frobenius_ball_masked<T: Real>(radius: T, mask: &[T], x: &[T]) -> Result<DVector<T>> {
    if mask.len() != x.len() {
        return Err(Error::dims("masked ball mask", x.len(), mask.len()));
    }
    let n = masked_norm(x, mask);
    let s = if n > radius { radius / n } else { T::one() };
    Ok(DVector::from_iterator(
        x.len(),
        x.iter()
            .zip(mask)
            .map(|(&xi, &m)| xi * (T::one() - m) + s * xi * m),
    ))
}

/// Applies each function's prox to its range of `v`; the ranges must tile `v`.
pub fn separable_prox<T: Real>(
    gs: &[(&ProximableFunction<T>, Range<usize>)],
    mu: T,
    v: &[T],
) -> Result<DVector<T>> {
    check_coverage(gs.iter().map(|(_, r)| r.clone()), v.len())?;
    let mut out = DVector::zeros(v.len());
    for (g, r) in gs {
        let p = g.prox(mu, &v[r.clone()])?;
        out.rows_mut(r.start, r.len()).copy_from(&p);
    }
    Ok(out)
}

/// Sum of the per-block Moreau values, in block order.
pub fn separable_moreau_value<T: Real>(
    gs: &[(&ProximableFunction<T>, Range<usize>)],
    mu: T,
    v: &[T],
) -> Result<T> {
    check_coverage(gs.iter().map(|(_, r)| r.clone()), v.len())?;
    let mut s = T::zero();
    for (g, r) in gs {
        s += g.moreau_value(mu, &v[r.clone()])?;
    }
    Ok(s)
}

fn check_coverage(ranges: impl Iterator<Item = Range<usize>>, n: usize) -> Result<()> {
    let mut next = 0;
    for r in ranges {
        if r.start != next {
            return Err(Error::Coverage(format!("expected block starting at {next}, found {r:?}")));
        }
        next = r.end;
    }
    if next != n {
        return Err(Error::Coverage(format!("blocks cover {next} of {n} entries")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        (a + b) / 2.0
    }

    #[test]
    fn l1_examples() {
        assert_eq!(prox_l1(1.0, &[0.0]).as_slice(), &[0.0]);
        assert_eq!(prox_l1(0.5, &[2.0, -0.3]).as_slice(), &[1.5, 0.0]);
        assert_eq!(prox_l1(2.0, &[-5.0]).as_slice(), &[-3.0]);
        for &(mu, v) in &[(0.5, 2.0), (0.5, -0.3), (2.0, -5.0)] {
            let w = golden_min(|w: f64| w.abs() + (w - v) * (w - v) / (2.0 * mu), -10.0, 10.0);
            assert!((w - prox_l1(mu, &[v])[0]).abs() < 1e-7);
        }
    }

    #[test]
    fn group_lasso_examples() {
        let p = GroupPartition::new(vec![vec![0, 1]], vec![1.0], 0.0).unwrap();
        let z = prox_group_lasso(1.0, &p, &[3.0, 4.0]).unwrap();
        assert!((z - DVector::from_vec(vec![2.4, 3.2])).norm() < 1e-15);
        let z = prox_group_lasso(1.0, &p, &[0.3, 0.4]).unwrap();
        assert_eq!(z.as_slice(), &[0.0, 0.0]);
        let p = GroupPartition::new(vec![vec![0, 1]], vec![1e-300], 0.0).unwrap();
        let z = prox_group_lasso(1.0, &p, &[1.0, 2.0]).unwrap();
        assert!((z - DVector::from_vec(vec![1.0, 2.0])).norm() < 1e-15);
        let bad = GroupPartition::new(vec![vec![0, 1]], vec![1.0], 0.0).unwrap();
        assert!(prox_group_lasso(1.0, &bad, &[1.0, 2.0, 3.0]).is_err());
        assert!(GroupPartition::new(vec![vec![0, 0]], vec![1.0], 0.0).is_err());
    }

    #[test]
    fn group_lasso_with_l1_matches_scalar_oracle() {
        let p = GroupPartition::new(vec![vec![0]], vec![0.7], 0.4).unwrap();
        let g = ProximableFunction::group_lasso(p);
        for &v in &[3.0, -2.0, 0.9, -0.2] {
            let mu = 0.8;
            let w = golden_min(|w| g.value(&[w]) + (w - v) * (w - v) / (2.0 * mu), -10.0, 10.0);
            assert!((w - g.prox(mu, &[v]).unwrap()[0]).abs() < 1e-7);
        }
    }

    #[test]
    fn nuclear_examples() {
        let x = dmatrix![3.0, 0.0; 0.0, 1.0];
        let p = prox_nuclear(2.0, &x).unwrap();
        assert!((p - dmatrix![1.0, 0.0; 0.0, 0.0]).norm() < 1e-14);
        let z = DMatrix::<f64>::zeros(3, 2);
        assert_eq!(prox_nuclear(1.0, &z).unwrap(), z);
        let u = DVector::from_vec(vec![0.3, 0.4]);
        let v = DVector::from_vec(vec![1.0, 2.0, 2.0]);
        let r1 = &u * v.transpose();
        assert!(prox_nuclear(1.5, &r1).unwrap().norm() < 1e-14);
    }

    #[test]
    fn orthant_examples() {
        assert_eq!(prox_indicator_orthant(Orthant::Nonpos, &[-1.0, 2.0]).as_slice(), &[-1.0, 0.0]);
        assert_eq!(prox_indicator_orthant(Orthant::Nonneg, &[1.0, 2.0]).as_slice(), &[1.0, 2.0]);
        assert_eq!(prox_indicator_orthant(Orthant::Nonpos, &[0.0]).as_slice(), &[0.0]);
    }

    #[test]
    fn masked_ball_examples() {
        let ones = [1.0; 4];
        let x = [6.0, 0.0, 0.0, 8.0];
        let p = prox_frobenius_ball_masked(5.0, &ones, &x).unwrap();
        assert_eq!(p.as_slice(), &[3.0, 0.0, 0.0, 4.0]);
        let p = prox_frobenius_ball_masked(20.0, &ones, &x).unwrap();
        assert_eq!(p.as_slice(), &x);
        let mask = [0.0, 1.0, 1.0, 0.0];
        let p = prox_frobenius_ball_masked(1.0, &mask, &x).unwrap();
        assert_eq!(p.as_slice(), &x);
        assert!(prox_frobenius_ball_masked(1.0, &mask[..3], &x).is_err());
    }

    #[test]
    fn moreau_examples() {
        let g = ProximableFunction::l1(1.0);
        assert!((g.moreau_value(1.0, &[2.0]).unwrap() - 1.5f64).abs() < 1e-15);
        assert_eq!(g.moreau_grad(1.0, &[2.0]).unwrap()[0], 1.0);
        assert_eq!(g.moreau_grad(1.0, &[0.4]).unwrap()[0], 0.4);
        let z = ProximableFunction::<f64>::zero();
        assert_eq!(z.moreau_value(0.3, &[1.0, -4.0]).unwrap(), 0.0);
        assert_eq!(z.moreau_grad(0.3, &[1.0, -4.0]).unwrap().norm(), 0.0);
        let ind = ProximableFunction::indicator(Orthant::Nonneg);
        assert_eq!(ind.moreau_value(1.0, &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn broken_custom_prox_is_reported() {
        let c = CustomProx::<f64> {
            name: "broken".into(),
            value: Arc::new(|_| f64::INFINITY),
            prox: Arc::new(|_, v| DVector::from_column_slice(v)),
        };
        let g = ProximableFunction::custom(c);
        assert!(matches!(g.moreau_value(1.0, &[1.0]), Err(Error::InfiniteAtProx(_))));
    }

    #[test]
    fn added_quadratic_matches_oracle() {
        let g = ProximableFunction::l1(0.5).plus_quadratic(2.0);
        assert_eq!(g.strong_convexity, 2.0);
        for &v in &[3.0, -1.0, 0.2] {
            let mu = 0.7;
            let w = golden_min(|w| g.value(&[w]) + (w - v) * (w - v) / (2.0 * mu), -10.0, 10.0);
            assert!((w - g.prox(mu, &[v]).unwrap()[0]).abs() < 1e-7);
        }
    }

    #[test]
    fn separable_examples() {
        let g = ProximableFunction::l1(1.0);
        let v = [3.0, -0.2, 1.5, -4.0];
        let two = separable_prox(&[(&g, 0..2), (&g, 2..4)], 0.5, &v).unwrap();
        let one = separable_prox(&[(&g, 0..4)], 0.5, &v).unwrap();
        assert_eq!(two, one);
        let e = separable_prox::<f64>(&[], 1.0, &[]).unwrap();
        assert_eq!(e.len(), 0);
        assert!(separable_prox(&[(&g, 0..2)], 1.0, &v).is_err());

        let nuc = ProximableFunction::nuclear(1.0, 2, 2);
        let mixed = [1.0, -3.0, 4.0, 0.5, 2.0, 1.0];
        let out = separable_prox(&[(&g, 0..2), (&nuc, 2..6)], 1.0, &mixed).unwrap();
        let a = g.prox(1.0, &mixed[0..2]).unwrap();
        let b = nuc.prox(1.0, &mixed[2..6]).unwrap();
        assert_eq!(out.rows(0, 2), a);
        assert_eq!(out.rows(2, 4), b);
        let sum: f64 = separable_moreau_value(&[(&g, 0..2), (&nuc, 2..6)], 1.0, &mixed).unwrap();
        let direct = g.moreau_value(1.0, &mixed[0..2]).unwrap() + nuc.moreau_value(1.0, &mixed[2..6]).unwrap();
        assert!((sum - direct).abs() < 1e-14f64);
    }

    #[test]
    fn moreau_gradient_is_inverse_mu_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = ProximableFunction::nuclear(1.0, 3, 2);
        let mu = 0.6;
        for _ in 0..100 {
            let u: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let v: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let gu = g.moreau_grad(mu, &u).unwrap();
            let gv = g.moreau_grad(mu, &v).unwrap();
            let d = (DVector::from_vec(u) - DVector::from_vec(v)).norm();
            assert!((gu - gv).norm() <= d / mu * (1.0 + 1e-10));
        }
    }

    #[test]
    fn works_in_single_precision() {
        let g = ProximableFunction::<f32>::l1(1.0);
        assert_eq!(g.prox(1.0, &[2.5f32]).unwrap()[0], 1.5f32);
    }
}
