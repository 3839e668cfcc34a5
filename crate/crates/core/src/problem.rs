//! Problem container `min f(x) + g(z)  s.t.  Ex + Fz = q`, optimality residuals,
//! structural condition checks and the exponential-stability certificate.

use crate::block::{BlockLayout, Shape};
use crate::error::{Error, Result};
use crate::linops::{singular_extremes_dense, BlockOperator, LinearOperator, TOL_RANK};
use crate::prox::ProximableFunction;
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use std::fmt;
use std::sync::Arc;

type SmoothValueFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
type SmoothGradFn<T> = Arc<dyn Fn(&[T]) -> DVector<T> + Send + Sync>;

#[derive(Clone)]
pub struct CustomSmooth<T: Real> {
    pub name: String,
    pub value: SmoothValueFn<T>,
    pub grad: SmoothGradFn<T>,
}

impl<T: Real> fmt::Debug for CustomSmooth<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomSmooth({})", self.name)
    }
}

#[derive(Debug, Clone)]
pub enum SmoothKind<T: Real> {
    Zero,
    /// `(x - c)^T H (x - c) / 2` with symmetric positive semidefinite `H`.
    Quadratic { h: DMatrix<T>, c: DVector<T> },
    /// `||G x - h||^2 / 2`.
    LeastSquares { g: DMatrix<T>, h: DVector<T> },
    /// `-log det(X + delta I)` on square matrices.
    NegLogDet { n: usize, delta: T },
    Custom(CustomSmooth<T>),
}

/// One smooth block `f_i` with declared constants.
#[derive(Debug, Clone)]
pub struct SmoothBlock<T: Real> {
    pub shape: Shape,
    pub kind: SmoothKind<T>,
    pub lipschitz: Option<T>,
    pub strong_convexity: T,
}

fn sym_eig_extremes<T: Real>(h: &DMatrix<T>) -> (T, T) {
    if h.is_empty() {
        return (T::zero(), T::zero());
    }
    let e = SymmetricEigen::new(h.clone()).eigenvalues;
    let lo = e.iter().copied().fold(T::infinity(), |a, b| a.min(b));
    let hi = e.iter().copied().fold(-T::infinity(), |a, b| a.max(b));
    (lo.max(T::zero()), hi)
}

impl<T: Real> SmoothBlock<T> {
    pub fn zero(shape: Shape) -> Self {
        Self {
            shape,
            kind: SmoothKind::Zero,
            lipschitz: Some(T::zero()),
            strong_convexity: T::zero(),
        }
    }

    /// Quadratic block with constants read off the spectrum of `H`.
    pub fn quadratic(h: DMatrix<T>, c: DVector<T>) -> Result<Self> {
        if !h.is_square() || h.nrows() != c.len() {
            return Err(Error::dims("quadratic block", c.len(), h.nrows()));
        }
        let (lo, hi) = sym_eig_extremes(&h);
        Ok(Self {
            shape: Shape::Vector(c.len()),
            kind: SmoothKind::Quadratic { h, c },
            lipschitz: Some(hi),
            strong_convexity: lo,
        })
    }

    /// `m ||x - c||^2 / 2`.
    pub fn isotropic(m: T, c: DVector<T>) -> Self {
        let n = c.len();
        Self {
            shape: Shape::Vector(n),
            kind: SmoothKind::Quadratic {
                h: DMatrix::identity(n, n) * m,
                c,
            },
            lipschitz: Some(m),
            strong_convexity: m,
        }
    }

    pub fn least_squares(g: DMatrix<T>, h: DVector<T>) -> Result<Self> {
        if g.nrows() != h.len() {
            return Err(Error::dims("least squares block", g.nrows(), h.len()));
        }
        let gtg = g.tr_mul(&g);
        let (lo, hi) = sym_eig_extremes(&gtg);
        let lo = if lo > T::lit(TOL_RANK) * hi { lo } else { T::zero() };
        Ok(Self {
            shape: Shape::Vector(g.ncols()),
            kind: SmoothKind::LeastSquares { g, h },
            lipschitz: Some(hi),
            strong_convexity: lo,
        })
    }

    /// `-log det(X + delta I)`; its gradient is not globally Lipschitz.
    pub fn neg_log_det(n: usize, delta: T) -> Self {
        Self {
            shape: Shape::matrix(n, n),
            kind: SmoothKind::NegLogDet { n, delta },
            lipschitz: None,
            strong_convexity: T::zero(),
        }
    }

    pub fn custom(shape: Shape, custom: CustomSmooth<T>, lipschitz: Option<T>, strong_convexity: T) -> Self {
        Self {
            shape,
            kind: SmoothKind::Custom(custom),
            lipschitz,
            strong_convexity,
        }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn value(&self, x: &[T]) -> T {
        match &self.kind {
            SmoothKind::Zero => T::zero(),
            SmoothKind::Quadratic { h, c } => {
                let d = DVector::from_column_slice(x) - c;
                (h * &d).dot(&d) * T::lit(0.5)
            }
            SmoothKind::LeastSquares { g, h } => {
                let r = g * DVector::from_column_slice(x) - h;
                r.norm_squared() * T::lit(0.5)
            }
            SmoothKind::NegLogDet { n, delta } => {
                let m = DMatrix::from_column_slice(*n, *n, x) + DMatrix::identity(*n, *n) * *delta;
                let sym = (&m + m.transpose()) * T::lit(0.5);
                if sym.cholesky().is_none() {
                    return T::infinity();
                }
                let lu = m.lu();
                let u = lu.u();
                let mut s = T::zero();
                let mut negative = false;
                for i in 0..*n {
                    let d = u[(i, i)];
                    negative ^= d < T::zero();
                    s += d.abs().ln();
                }
                if negative {
                    T::infinity()
                } else {
                    -s
                }
            }
            SmoothKind::Custom(c) => (c.value)(x),
        }
    }

    pub fn grad(&self, x: &[T]) -> DVector<T> {
        match &self.kind {
            SmoothKind::Zero => DVector::zeros(x.len()),
            SmoothKind::Quadratic { h, c } => h * (DVector::from_column_slice(x) - c),
            SmoothKind::LeastSquares { g, h } => g.tr_mul(&(g * DVector::from_column_slice(x) - h)),
            SmoothKind::NegLogDet { n, delta } => {
                let m = DMatrix::from_column_slice(*n, *n, x) + DMatrix::identity(*n, *n) * *delta;
                match m.lu().try_inverse() {
                    Some(inv) => {
                        let g = -inv.transpose();
                        DVector::from_column_slice(g.as_slice())
                    }
                    None => DVector::from_element(x.len(), T::infinity()),
                }
            }
            SmoothKind::Custom(c) => (c.grad)(x),
        }
    }
}

/// One nonsmooth block `g_j`.
#[derive(Debug, Clone)]
pub struct NonsmoothBlock<T: Real> {
    pub shape: Shape,
    pub func: ProximableFunction<T>,
}

impl<T: Real> NonsmoothBlock<T> {
    pub fn new(shape: Shape, func: ProximableFunction<T>) -> Result<Self> {
        func.check_dim(shape.len())?;
        Ok(Self { shape, func })
    }
}

/// Primal-dual state packed in the order `(x, z, y, lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualState<T: Real> {
    pub x: DVector<T>,
    pub z: DVector<T>,
    pub y: DVector<T>,
    pub lam: DVector<T>,
}

impl<T: Real> PrimalDualState<T> {
    pub fn new(x: DVector<T>, z: DVector<T>, y: DVector<T>, lam: DVector<T>) -> Self {
        Self { x, z, y, lam }
    }

    pub fn len(&self) -> usize {
        self.x.len() + self.z.len() + self.y.len() + self.lam.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pack(&self) -> DVector<T> {
        let mut out = DVector::zeros(self.len());
        self.pack_into(out.as_mut_slice());
        out
    }

    pub fn pack_into(&self, out: &mut [T]) {
        let mut off = 0;
        for part in [&self.x, &self.z, &self.y, &self.lam] {
            out[off..off + part.len()].copy_from_slice(part.as_slice());
            off += part.len();
        }
    }

    /// Splits a packed vector using the dimensions of `like`.
    pub fn unpack_like(like: &Self, v: &[T]) -> Result<Self> {
        Self::unpack(v, like.x.len(), like.z.len(), like.lam.len())
    }

    pub fn unpack(v: &[T], nx: usize, nz: usize, p: usize) -> Result<Self> {
        let n = nx + 2 * nz + p;
        if v.len() != n {
            return Err(Error::dims("packed state", n, v.len()));
        }
        let x = DVector::from_column_slice(&v[..nx]);
        let z = DVector::from_column_slice(&v[nx..nx + nz]);
        let y = DVector::from_column_slice(&v[nx + nz..nx + 2 * nz]);
        let lam = DVector::from_column_slice(&v[nx + 2 * nz..]);
        Ok(Self { x, z, y, lam })
    }

    pub fn dist_sq(&self, other: &Self) -> T {
        (&self.x - &other.x).norm_squared()
            + (&self.z - &other.z).norm_squared()
            + (&self.y - &other.y).norm_squared()
            + (&self.lam - &other.lam).norm_squared()
    }
}

/// Outcome of the full-column-rank check on the non-strongly-convex blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct RankCheck {
    pub holds: bool,
    /// Smooth blocks without strong convexity.
    pub i: Vec<usize>,
    /// Nonsmooth blocks without strong convexity.
    pub j: Vec<usize>,
}

/// Constants of the exponential-stability certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct GesCertificate<T: Real> {
    pub m_xz: T,
    pub alpha_bar2: T,
    pub big_m2: T,
    pub rho2: T,
    pub c1: T,
    pub c2: T,
    pub c3: T,
    /// Upper bound on the Lipschitz constant of the (x, z) gradient.
    pub l_xz: T,
    pub l_f: T,
    /// `m_xz` was obtained from the all-strongly-convex fallback.
    pub empty_set_convention: bool,
    /// The closed-form `m_xz` exceeded the smallest eigenvalue of the explicit
    /// quadratic lower bound and was lowered to it.
    pub m_xz_capped: bool,
    pub alpha_in_range: bool,
}

/// `min f(x) + g(z)  s.t.  Ex + Fz = q` together with the flow parameters.
#[derive(Debug, Clone)]
pub struct SaddleProblem<T: Real> {
    smooth: Vec<SmoothBlock<T>>,
    nonsmooth: Vec<NonsmoothBlock<T>>,
    e: BlockOperator<T>,
    f: BlockOperator<T>,
    q: DVector<T>,
    pub mu: T,
    pub alpha: T,
    x_layout: BlockLayout,
    z_layout: BlockLayout,
}

impl<T: Real> SaddleProblem<T> {
    pub fn new(
        smooth: Vec<SmoothBlock<T>>,
        nonsmooth: Vec<NonsmoothBlock<T>>,
        e: BlockOperator<T>,
        f: BlockOperator<T>,
        q: DVector<T>,
        mu: T,
        alpha: T,
    ) -> Result<Self> {
        if !(mu > T::zero()) || !(alpha > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "mu and alpha must be positive, got mu={mu}, alpha={alpha}"
            )));
        }
        if e.num_blocks() != smooth.len() {
            return Err(Error::dims("E blocks vs smooth blocks", smooth.len(), e.num_blocks()));
        }
        if f.num_blocks() != nonsmooth.len() {
            return Err(Error::dims("F blocks vs nonsmooth blocks", nonsmooth.len(), f.num_blocks()));
        }
        for (i, b) in smooth.iter().enumerate() {
            if e.block(i).in_dim() != b.dim() {
                return Err(Error::dims(format!("E block {i} domain"), b.dim(), e.block(i).in_dim()));
            }
        }
        for (j, b) in nonsmooth.iter().enumerate() {
            if f.block(j).in_dim() != b.shape.len() {
                return Err(Error::dims(
                    format!("F block {j} domain"),
                    b.shape.len(),
                    f.block(j).in_dim(),
                ));
            }
            b.func.check_dim(b.shape.len())?;
        }
        if e.codim() != q.len() {
            return Err(Error::dims("E codomain", q.len(), e.codim()));
        }
        if f.codim() != q.len() {
            return Err(Error::dims("F codomain", q.len(), f.codim()));
        }
        let x_layout = BlockLayout::new(smooth.iter().map(|b| b.shape).collect());
        let z_layout = BlockLayout::new(nonsmooth.iter().map(|b| b.shape).collect());
        Ok(Self {
            smooth,
            nonsmooth,
            e,
            f,
            q,
            mu,
            alpha,
            x_layout,
            z_layout,
        })
    }

    pub fn with_params(mut self, mu: T, alpha: T) -> Result<Self> {
        if !(mu > T::zero()) || !(alpha > T::zero()) {
            return Err(Error::InvalidArgument("mu and alpha must be positive".into()));
        }
        self.mu = mu;
        self.alpha = alpha;
        Ok(self)
    }

    pub fn smooth_blocks(&self) -> &[SmoothBlock<T>] {
        &self.smooth
    }

    pub fn nonsmooth_blocks(&self) -> &[NonsmoothBlock<T>] {
        &self.nonsmooth
    }

    pub fn e(&self) -> &BlockOperator<T> {
        &self.e
    }

    pub fn f(&self) -> &BlockOperator<T> {
        &self.f
    }

    pub fn q(&self) -> &DVector<T> {
        &self.q
    }

    pub fn x_layout(&self) -> &BlockLayout {
        &self.x_layout
    }

    pub fn z_layout(&self) -> &BlockLayout {
        &self.z_layout
    }

    pub fn nx(&self) -> usize {
        self.x_layout.len()
    }

    pub fn nz(&self) -> usize {
        self.z_layout.len()
    }

    /// Number of equality constraints.
    pub fn p(&self) -> usize {
        self.q.len()
    }

    pub fn state_len(&self) -> usize {
        self.nx() + 2 * self.nz() + self.p()
    }

    pub fn zero_state(&self) -> PrimalDualState<T> {
        PrimalDualState::new(
            DVector::zeros(self.nx()),
            DVector::zeros(self.nz()),
            DVector::zeros(self.nz()),
            DVector::zeros(self.p()),
        )
    }

    pub fn check_state(&self, s: &PrimalDualState<T>) -> Result<()> {
        let want = [self.nx(), self.nz(), self.nz(), self.p()];
        let got = [s.x.len(), s.z.len(), s.y.len(), s.lam.len()];
        for (name, (w, g)) in ["x", "z", "y", "lambda"].iter().zip(want.iter().zip(got)) {
            if *w != g {
                return Err(Error::dims(format!("state component {name}"), *w, g));
            }
        }
        Ok(())
    }

    pub fn unpack(&self, v: &[T]) -> Result<PrimalDualState<T>> {
        PrimalDualState::unpack(v, self.nx(), self.nz(), self.p())
    }

    pub fn f_value(&self, x: &DVector<T>) -> T {
        let mut s = T::zero();
        for (b, r) in self.smooth.iter().zip(self.x_layout.ranges()) {
            s += b.value(&x.as_slice()[r]);
        }
        s
    }

    pub fn f_grad(&self, x: &DVector<T>) -> DVector<T> {
        let mut out = DVector::zeros(x.len());
        for (b, r) in self.smooth.iter().zip(self.x_layout.ranges()) {
            let g = b.grad(&x.as_slice()[r.clone()]);
            out.rows_mut(r.start, r.len()).copy_from(&g);
        }
        out
    }

    pub fn g_value(&self, z: &DVector<T>) -> T {
        let mut s = T::zero();
        for (b, r) in self.nonsmooth.iter().zip(self.z_layout.ranges()) {
            s += b.func.value(&z.as_slice()[r]);
        }
        s
    }

    pub fn objective(&self, x: &DVector<T>, z: &DVector<T>) -> T {
        self.f_value(x) + self.g_value(z)
    }

    /// Objective with indicator blocks replaced by their quadratic part only,
    /// so that it stays finite while a constraint set is violated in transit.
    pub fn penalty_objective(&self, x: &DVector<T>, z: &DVector<T>) -> T {
        let mut s = self.f_value(x);
        for (b, r) in self.nonsmooth.iter().zip(self.z_layout.ranges()) {
            let w = &z.as_slice()[r];
            if b.func.kind.is_indicator() {
                let sq: T = w.iter().map(|&v| v * v).fold(T::zero(), |a, b| a + b);
                s += b.func.quadratic * sq * T::lit(0.5);
            } else {
                s += b.func.value(w);
            }
        }
        s
    }

    /// Blockwise `prox_{mu g}(v)`.
    pub fn prox_g(&self, mu: T, v: &DVector<T>) -> Result<DVector<T>> {
        let mut out = DVector::zeros(v.len());
        for (b, r) in self.nonsmooth.iter().zip(self.z_layout.ranges()) {
            let p = b.func.prox(mu, &v.as_slice()[r.clone()])?;
            out.rows_mut(r.start, r.len()).copy_from(&p);
        }
        Ok(out)
    }

    /// Sum of blockwise Moreau values given the prox output `p` at `v`.
    pub fn moreau_value_at(&self, mu: T, v: &DVector<T>, p: &DVector<T>) -> Result<T> {
        let mut s = T::zero();
        for (b, r) in self.nonsmooth.iter().zip(self.z_layout.ranges()) {
            s += b
                .func
                .moreau_value_at(mu, &v.as_slice()[r.clone()], &p.as_slice()[r])?;
        }
        Ok(s)
    }

    /// `Ex + Fz - q`.
    pub fn residual(&self, x: &DVector<T>, z: &DVector<T>) -> DVector<T> {
        self.e.apply(x.as_view()) + self.f.apply(z.as_view()) - &self.q
    }

    /// Norm of the stacked optimality residuals
    /// `(grad f + E^T lam, y + F^T lam, z - prox(z + mu y), Ex + Fz - q)`.
    pub fn kkt_residual(&self, s: &PrimalDualState<T>) -> Result<T> {
        self.check_state(s)?;
        let r1 = self.f_grad(&s.x) + self.e.adjoint(s.lam.as_view());
        let r2 = &s.y + self.f.adjoint(s.lam.as_view());
        let v = &s.z + &s.y * self.mu;
        let r3 = &s.z - self.prox_g(self.mu, &v)?;
        let r4 = self.residual(&s.x, &s.z);
        Ok((r1.norm_squared() + r2.norm_squared() + r3.norm_squared() + r4.norm_squared()).sqrt())
    }

    /// Dense `[E F]`.
    pub fn ef_dense(&self) -> Result<DMatrix<T>> {
        let e = self.e.to_dense()?;
        let f = self.f.to_dense()?;
        Ok(crate::linops::hcat(&[&e, &f], self.p()))
    }

    fn ef_columns(&self, xs: &[usize], zs: &[usize]) -> Result<DMatrix<T>> {
        let e = self.e.dense_columns(xs)?;
        let f = self.f.dense_columns(zs)?;
        Ok(crate::linops::hcat(&[&e, &f], self.p()))
    }

    /// Full column rank of `[E_I F_J]` over the blocks that are not strongly convex.
    pub fn check_rank_condition(&self) -> Result<RankCheck> {
        let i: Vec<usize> = (0..self.smooth.len())
            .filter(|&k| self.smooth[k].strong_convexity <= T::zero())
            .collect();
        let j: Vec<usize> = (0..self.nonsmooth.len())
            .filter(|&k| self.nonsmooth[k].func.strong_convexity <= T::zero())
            .collect();
        let m = self.ef_columns(&i, &j)?;
        let holds = if m.ncols() == 0 {
            true
        } else {
            let s = singular_extremes_dense(&m, T::lit(TOL_RANK))?;
            !s.is_zero && s.rank == m.ncols()
        };
        Ok(RankCheck { holds, i, j })
    }

    /// Range of `F` contained in the range of `E`.
    pub fn check_range_condition(&self) -> Result<bool> {
        let e = self.e.to_dense()?;
        let f = self.f.to_dense()?;
        crate::linops::range_contained_dense(&f, &e, T::lit(1e-8))
    }

    /// `max_i L_i` over the smooth blocks.
    pub fn lipschitz_f(&self) -> Result<T> {
        let mut l = T::zero();
        for (i, b) in self.smooth.iter().enumerate() {
            match b.lipschitz {
                Some(li) => l = l.max(li),
                None => return Err(Error::MissingLipschitz(format!("smooth block {i}"))),
            }
        }
        Ok(l)
    }

    /// Largest declared strong convexity modulus among the nonsmooth blocks.
    pub fn m_g_max(&self) -> T {
        self.nonsmooth
            .iter()
            .fold(T::zero(), |a, b| a.max(b.func.strong_convexity))
    }

    /// Constants of the exponential-stability certificate for the current `mu`, `alpha`.
    pub fn ges_certificate(&self) -> Result<GesCertificate<T>> {
        let rank = self.check_rank_condition()?;
        if !rank.holds {
            return Err(Error::AssumptionFailed(
                "full column rank of the non-strongly-convex constraint columns".into(),
            ));
        }
        if !self.check_range_condition()? {
            return Err(Error::AssumptionFailed("range of F contained in range of E".into()));
        }
        let mu = self.mu;
        let alpha = self.alpha;
        let one = T::one();
        let two = T::lit(2.0);
        if mu * self.m_g_max() > one {
            return Err(Error::AssumptionFailed("mu * m_g <= 1".into()));
        }
        let l_f = self.lipschitz_f()?;

        let ef = self.ef_dense()?;
        let tol = T::lit(TOL_RANK);
        let s_ef = singular_extremes_dense(&ef, tol)?;
        let s_e = singular_extremes_dense(&self.e.to_dense()?, tol)?;
        let s_f = singular_extremes_dense(&self.f.to_dense()?, tol)?;
        let smax_ef2 = s_ef.sigma_max * s_ef.sigma_max;
        let l_xz = l_f + (one + smax_ef2) / mu;

        let c1 = (l_xz / two + one) * one.max(mu);
        let c2_e = if l_f == T::zero() {
            T::zero()
        } else if s_e.is_zero {
            return Err(Error::AssumptionFailed(
                "E must have a nonzero singular value when f is not constant".into(),
            ));
        } else {
            two * l_f * l_f / (s_e.sigma_min_nonzero * s_e.sigma_min_nonzero)
        };
        let c2 = c2_e.max(one / (mu * mu));
        let sf2 = s_f.sigma_max * s_f.sigma_max;
        let c3 = two / (mu * mu) * one.max(sf2).max(mu * mu * sf2);

        let (m_xz, empty, capped) = self.m_xz(&rank, &ef)?;
        let alpha_bar2 = T::lit(0.5) * m_xz * m_xz / (smax_ef2 + T::lit(4.0));
        let big_m2 = (two * c1 + one) / alpha;
        let rho2 = T::lit(0.5).min(alpha).min(alpha * m_xz)
            / ((two * c1 + one) * (c2 + one) * (c3 + one));
        Ok(GesCertificate {
            m_xz,
            alpha_bar2,
            big_m2,
            rho2,
            c1,
            c2,
            c3,
            l_xz,
            l_f,
            empty_set_convention: empty,
            m_xz_capped: capped,
            alpha_in_range: alpha > T::zero() && alpha < alpha_bar2,
        })
    }

    fn m_xz(&self, rank: &RankCheck, ef: &DMatrix<T>) -> Result<(T, bool, bool)> {
        let mu = self.mu;
        let one = T::one();
        let tol = T::lit(TOL_RANK);
        if rank.i.is_empty() && rank.j.is_empty() {
            let mut m = T::infinity();
            for b in &self.smooth {
                m = m.min(b.strong_convexity);
            }
            for b in &self.nonsmooth {
                let mg = b.func.strong_convexity;
                m = m.min(mg / (one + mu * mg));
            }
            if !m.is_finite_val() {
                return Err(Error::InvalidArgument("problem has no variables".into()));
            }
            return Ok((m, true, false));
        }
        let ic: Vec<usize> = (0..self.smooth.len()).filter(|k| !rank.i.contains(k)).collect();
        let jc: Vec<usize> = (0..self.nonsmooth.len()).filter(|k| !rank.j.contains(k)).collect();
        let m_fg = ic
            .iter()
            .map(|&k| self.smooth[k].strong_convexity)
            .chain(jc.iter().map(|&k| self.nonsmooth[k].func.strong_convexity))
            .fold(T::infinity(), |a, b| a.min(b));
        if !m_fg.is_finite_val() {
            let s = singular_extremes_dense(ef, tol)?;
            return Ok((s.sigma_min_nonzero * s.sigma_min_nonzero / mu, false, false));
        }
        let inner = self.ef_columns(&rank.i, &rank.j)?;
        let outer = self.ef_columns(&ic, &jc)?;
        let s_in = singular_extremes_dense(&inner, tol)?;
        let s_out = singular_extremes_dense(&outer, tol)?;
        let formula = m_fg * s_in.sigma_min_nonzero * s_in.sigma_min_nonzero
            / (m_fg * mu + T::lit(4.0) * s_out.sigma_max * s_out.sigma_max);
        let bound = self.quadratic_lower_bound(ef)?;
        if formula > bound {
            Ok((bound, false, true))
        } else {
            Ok((formula, false, false))
        }
    }

    /// Smallest eigenvalue of `D + [E F]^T [E F] / mu`, where `D` holds the
    /// strong convexity moduli of `f` and of the Moreau envelopes of `g`.
    fn quadratic_lower_bound(&self, ef: &DMatrix<T>) -> Result<T> {
        let mut q = ef.tr_mul(ef) / self.mu;
        let mut off = 0;
        for b in &self.smooth {
            for k in 0..b.dim() {
                q[(off + k, off + k)] += b.strong_convexity;
            }
            off += b.dim();
        }
        for b in &self.nonsmooth {
            let mg = b.func.strong_convexity;
            let env = mg / (T::one() + self.mu * mg);
            for k in 0..b.shape.len() {
                q[(off + k, off + k)] += env;
            }
            off += b.shape.len();
        }
        let e = SymmetricEigen::new(q).eigenvalues;
        Ok(e.iter().copied().fold(T::infinity(), |a, b| a.min(b)).max(T::zero()))
    }

    /// Samples random pairs and reports declared constants contradicted by the
    /// gradient oracles.
    pub fn verify_declared_constants<R: Rng>(&self, rng: &mut R, samples: usize) -> Vec<String> {
        let mut warnings = Vec::new();
        let slack = T::lit(1e-8);
        for (i, b) in self.smooth.iter().enumerate() {
            if matches!(b.kind, SmoothKind::NegLogDet { .. }) {
                continue;
            }
            let n = b.dim();
            let mut worst_l = T::zero();
            let mut worst_m = T::infinity();
            for _ in 0..samples {
                let u: Vec<T> = (0..n).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect();
                let v: Vec<T> = (0..n).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect();
                let d = DVector::from_column_slice(&u) - DVector::from_column_slice(&v);
                let dn2 = d.norm_squared();
                if dn2 == T::zero() {
                    continue;
                }
                let dg = b.grad(&u) - b.grad(&v);
                worst_l = worst_l.max(dg.norm() / dn2.sqrt());
                worst_m = worst_m.min(dg.dot(&d) / dn2);
            }
            if let Some(l) = b.lipschitz {
                if worst_l > l * (T::one() + slack) + slack {
                    warnings.push(format!(
                        "smooth block {i}: observed gradient Lipschitz ratio {worst_l} exceeds declared {l}"
                    ));
                }
            }
            if worst_m.is_finite_val() && worst_m < b.strong_convexity * (T::one() - slack) - slack {
                warnings.push(format!(
                    "smooth block {i}: observed monotonicity {worst_m} below declared strong convexity {}",
                    b.strong_convexity
                ));
            }
        }
        warnings
    }

    /// Reformulation with the explicit copy `w = z`: variables `(x, (z, w))`,
    /// `g` acts on `w` only and the constraints become `Ex + Fz = q`, `z - w = 0`.
    pub fn build_lifted(&self) -> Result<SaddleProblem<T>> {
        let nz = self.nz();
        let p = self.p();
        let codim = p + nz;
        let mut e_blocks = Vec::new();
        for k in 0..self.e.num_blocks() {
            let d = self.e.block(k).to_dense()?;
            let mut m = DMatrix::zeros(codim, d.ncols());
            m.rows_mut(0, p).copy_from(d);
            e_blocks.push(LinearOperator::from_matrix(m));
        }
        let mut f_blocks = Vec::new();
        let mut nonsmooth = Vec::new();
        let mut off = 0;
        for (k, b) in self.nonsmooth.iter().enumerate() {
            let d = self.f.block(k).to_dense()?;
            let n = d.ncols();
            let mut m = DMatrix::zeros(codim, n);
            m.rows_mut(0, p).copy_from(d);
            for i in 0..n {
                m[(p + off + i, i)] = T::one();
            }
            f_blocks.push(LinearOperator::from_matrix(m));
            nonsmooth.push(NonsmoothBlock::new(b.shape, ProximableFunction::zero())?);
            off += n;
        }
        off = 0;
        for b in &self.nonsmooth {
            let n = b.shape.len();
            let mut m = DMatrix::zeros(codim, n);
            for i in 0..n {
                m[(p + off + i, i)] = -T::one();
            }
            f_blocks.push(LinearOperator::from_matrix(m));
            nonsmooth.push(b.clone());
            off += n;
        }
        let mut q = DVector::zeros(codim);
        q.rows_mut(0, p).copy_from(&self.q);
        SaddleProblem::new(
            self.smooth.clone(),
            nonsmooth,
            BlockOperator::new(e_blocks, codim)?,
            BlockOperator::new(f_blocks, codim)?,
            q,
            self.mu,
            self.alpha,
        )
    }

    /// Image of a primal-dual point of this problem in the lifted problem.
    pub fn lift_state(&self, s: &PrimalDualState<T>) -> PrimalDualState<T> {
        let nz = self.nz();
        let mut z = DVector::zeros(2 * nz);
        z.rows_mut(0, nz).copy_from(&s.z);
        z.rows_mut(nz, nz).copy_from(&s.z);
        let mut y = DVector::zeros(2 * nz);
        y.rows_mut(nz, nz).copy_from(&s.y);
        let mut lam = DVector::zeros(self.p() + nz);
        lam.rows_mut(0, self.p()).copy_from(&s.lam);
        lam.rows_mut(self.p(), nz).copy_from(&s.y);
        PrimalDualState::new(s.x.clone(), z, y, lam)
    }
}
