use crate::error::Result;
use crate::problem::{PrimalDualState, SaddleProblem};
use crate::scalar::Real;
use nalgebra::DVector;
use rayon::prelude::*;

/// Total block dimension above which blockwise evaluation runs in parallel.
const PAR_THRESHOLD: usize = 4096;

/// Partial gradients of the proximal augmented Lagrangian.
#[derive(Debug, Clone, PartialEq)]
pub struct PalGradient<T: Real> {
    pub gx: DVector<T>,
    pub gz: DVector<T>,
    pub gy: DVector<T>,
    pub glam: DVector<T>,
}

#[derive(Debug, Clone)]
struct Cache<T: Real> {
    key: Vec<T>,
    /// `Ex + Fz - q`.
    r: DVector<T>,
    /// `prox_{mu g}(z + mu y)`.
    p: DVector<T>,
    grad_f: DVector<T>,
}

/// Gradient field of the proximal augmented Lagrangian with a one-entry cache
/// of the quantities shared by its four partials.
#[derive(Debug, Clone)]
pub struct FlowField<'a, T: Real> {
    prob: &'a SaddleProblem<T>,
    cache: Option<Cache<T>>,
    evaluations: usize,
}

impl<'a, T: Real> FlowField<'a, T> {
    pub fn new(prob: &'a SaddleProblem<T>) -> Self {
        Self {
            prob,
            cache: None,
            evaluations: 0,
        }
    }

    pub fn problem(&self) -> &'a SaddleProblem<T> {
        self.prob
    }

    /// Number of shared-quantity evaluations that missed the cache.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    fn shared(&mut self, s: &PrimalDualState<T>) -> Result<&Cache<T>> {
        self.prob.check_state(s)?;
        let hit = match &self.cache {
            Some(c) => {
                let mut it = c.key.iter();
                [&s.x, &s.z, &s.y, &s.lam]
                    .iter()
                    .flat_map(|v| v.iter())
                    .all(|a| it.next().is_some_and(|b| a == b))
            }
            None => false,
        };
        if !hit {
            let c = compute_shared(self.prob, s)?;
            self.evaluations += 1;
            self.cache = Some(c);
        }
        Ok(self.cache.as_ref().expect("cache filled"))
    }

    /// `f(x) + M_{mu g}(z + mu y) + ||r + mu lam||^2/(2mu) - mu||y||^2/2 - mu||lam||^2/2`.
    pub fn pal_value(&mut self, s: &PrimalDualState<T>) -> Result<T> {
        let prob = self.prob;
        let mu = prob.mu;
        let c = self.shared(s)?.clone();
        let v = &s.z + &s.y * mu;
        let half = T::lit(0.5);
        let menv = prob.moreau_value_at(mu, &v, &c.p)?;
        let aug = (&c.r + &s.lam * mu).norm_squared() * half / mu;
        Ok(prob.f_value(&s.x) + menv + aug
            - mu * half * s.y.norm_squared()
            - mu * half * s.lam.norm_squared())
    }

    pub fn pal_gradient(&mut self, s: &PrimalDualState<T>) -> Result<PalGradient<T>> {
        let prob = self.prob;
        let mu = prob.mu;
        let c = self.shared(s)?;
        let w = &s.lam + &c.r / mu;
        let gx = &c.grad_f + prob.e().adjoint(w.as_view());
        let gy = &s.z - &c.p;
        let gz = (&s.z + &s.y * mu - &c.p) / mu + prob.f().adjoint(w.as_view());
        Ok(PalGradient {
            gx,
            gz,
            gy,
            glam: c.r.clone(),
        })
    }

    /// `(-gx, -gz, alpha gy, alpha glam)`.
    pub fn vector_field(&mut self, s: &PrimalDualState<T>) -> Result<PrimalDualState<T>> {
        let a = self.prob.alpha;
        let g = self.pal_gradient(s)?;
        Ok(PrimalDualState::new(-g.gx, -g.gz, g.gy * a, g.glam * a))
    }

    /// The same field assembled block by block: `lam'` first, then each `y_j'`,
    /// then `z_j'` and `x_i'` from those increments.
    pub fn blockwise_field(&mut self, s: &PrimalDualState<T>) -> Result<PrimalDualState<T>> {
        let prob = self.prob;
        let mu = prob.mu;
        let alpha = prob.alpha;
        let am = alpha * mu;
        let c = self.shared(s)?;
        let dlam = &c.r * alpha;
        let w = &s.lam + &dlam / am;

        let zl = prob.z_layout();
        let z_part = |j: usize| {
            let r = zl.range(j);
            let zj = s.z.rows(r.start, r.len());
            let yj = s.y.rows(r.start, r.len());
            let pj = c.p.rows(r.start, r.len());
            let dy = (zj - pj) * alpha;
            let dz = -(yj + &dy / am) - prob.f().block(j).adjoint(w.as_view());
            (dz, dy)
        };
        let xl = prob.x_layout();
        let x_part = |i: usize| {
            let r = xl.range(i);
            let gf = c.grad_f.rows(r.start, r.len());
            -(gf + prob.e().block(i).adjoint(w.as_view()))
        };
        let big = prob.nx() + prob.nz() >= PAR_THRESHOLD;
        let zs: Vec<(DVector<T>, DVector<T>)> = if big {
            (0..zl.num_blocks()).into_par_iter().map(z_part).collect()
        } else {
            (0..zl.num_blocks()).map(z_part).collect()
        };
        let xs: Vec<DVector<T>> = if big {
            (0..xl.num_blocks()).into_par_iter().map(x_part).collect()
        } else {
            (0..xl.num_blocks()).map(x_part).collect()
        };

        let mut dx = DVector::zeros(prob.nx());
        for (i, v) in xs.iter().enumerate() {
            dx.rows_mut(xl.range(i).start, v.len()).copy_from(v);
        }
        let mut dz = DVector::zeros(prob.nz());
        let mut dy = DVector::zeros(prob.nz());
        for (j, (a, b)) in zs.iter().enumerate() {
            let start = zl.range(j).start;
            dz.rows_mut(start, a.len()).copy_from(a);
            dy.rows_mut(start, b.len()).copy_from(b);
        }
        Ok(PrimalDualState::new(dx, dz, dy, dlam))
    }

    /// Optimality residual reusing the cached shared quantities.
    pub fn kkt_residual(&mut self, s: &PrimalDualState<T>) -> Result<T> {
        let prob = self.prob;
        let c = self.shared(s)?;
        let r1 = &c.grad_f + prob.e().adjoint(s.lam.as_view());
        let r2 = &s.y + prob.f().adjoint(s.lam.as_view());
        let r3 = &s.z - &c.p;
        Ok((r1.norm_squared() + r2.norm_squared() + r3.norm_squared() + c.r.norm_squared()).sqrt())
    }

    /// `Ex + Fz - q` at `s`.
    pub fn residual(&mut self, s: &PrimalDualState<T>) -> Result<DVector<T>> {
        Ok(self.shared(s)?.r.clone())
    }
}

fn compute_shared<T: Real>(prob: &SaddleProblem<T>, s: &PrimalDualState<T>) -> Result<Cache<T>> {
    let mu = prob.mu;
    let r = prob.residual(&s.x, &s.z);
    let v = &s.z + &s.y * mu;
    let p = prob.prox_g(mu, &v)?;
    let grad_f = prob.f_grad(&s.x);
    Ok(Cache {
        key: s.pack().as_slice().to_vec(),
        r,
        p,
        grad_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::Shape;
    use crate::linops::{BlockOperator, LinearOperator};
    use crate::problem::{NonsmoothBlock, SmoothBlock};
    use crate::prox::{Orthant, ProximableFunction};
    use nalgebra::{dmatrix, DMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rv(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0))
    }

    fn random_state(p: &SaddleProblem<f64>, rng: &mut ChaCha8Rng) -> PrimalDualState<f64> {
        PrimalDualState::new(rv(rng, p.nx()), rv(rng, p.nz()), rv(rng, p.nz()), rv(rng, p.p()))
    }

    fn multi_block(rng: &mut ChaCha8Rng) -> SaddleProblem<f64> {
        let p = 4;
        let mut rm = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
        let e = BlockOperator::new(
            vec![LinearOperator::from_matrix(rm(p, 2)), LinearOperator::from_matrix(rm(p, 3))],
            p,
        )
        .unwrap();
        let f = BlockOperator::new(
            vec![
                LinearOperator::from_matrix(rm(p, 2)),
                LinearOperator::from_matrix(rm(p, 4)),
                LinearOperator::from_matrix(rm(p, 1)),
            ],
            p,
        )
        .unwrap();
        let g0 = rm(3, 2);
        SaddleProblem::new(
            vec![
                SmoothBlock::least_squares(g0, DVector::from_vec(vec![1.0, 0.0, -1.0])).unwrap(),
                SmoothBlock::isotropic(0.7, DVector::from_vec(vec![1.0, 2.0, 3.0])),
            ],
            vec![
                NonsmoothBlock::new(Shape::Vector(2), ProximableFunction::l1(0.3)).unwrap(),
                NonsmoothBlock::new(Shape::matrix(2, 2), ProximableFunction::nuclear(0.5, 2, 2)).unwrap(),
                NonsmoothBlock::new(Shape::Vector(1), ProximableFunction::indicator(Orthant::Nonneg)).unwrap(),
            ],
            e,
            f,
            rv(&mut ChaCha8Rng::seed_from_u64(99), p),
            0.8,
            1.3,
        )
        .unwrap()
    }

    #[test]
    fn blockwise_matches_monolithic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = multi_block(&mut rng);
        let mut ff = FlowField::new(&p);
        for _ in 0..100 {
            let s = random_state(&p, &mut rng);
            let a = ff.vector_field(&s).unwrap().pack();
            let b = ff.blockwise_field(&s).unwrap().pack();
            assert!((&a - &b).norm() <= 1e-14 * a.norm().max(1.0));
        }
    }

    #[test]
    fn cached_and_fresh_agree_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = multi_block(&mut rng);
        let s = random_state(&p, &mut rng);
        let mut warm = FlowField::new(&p);
        let a = warm.vector_field(&s).unwrap();
        let b = warm.vector_field(&s).unwrap();
        assert_eq!(warm.evaluations(), 1);
        let c = FlowField::new(&p).vector_field(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = multi_block(&mut rng);
        let mut ff = FlowField::new(&p);
        for _ in 0..5 {
            let s = random_state(&p, &mut rng);
            let g = ff.pal_gradient(&s).unwrap();
            let packed = s.pack();
            let h = 1e-6;
            let mut fd = DVector::zeros(packed.len());
            for i in 0..packed.len() {
                let mut a = packed.clone();
                let mut b = packed.clone();
                a[i] += h;
                b[i] -= h;
                let va = ff.pal_value(&p.unpack(a.as_slice()).unwrap()).unwrap();
                let vb = ff.pal_value(&p.unpack(b.as_slice()).unwrap()).unwrap();
                fd[i] = (va - vb) / (2.0 * h);
            }
            let fds = p.unpack(fd.as_slice()).unwrap();
            let rel = |a: &DVector<f64>, b: &DVector<f64>| (a - b).norm() / a.norm().max(1.0);
            assert!(rel(&g.gx, &fds.x) < 1e-5);
            assert!(rel(&g.gz, &fds.z) < 1e-5);
            assert!(rel(&g.gy, &fds.y) < 1e-5);
            assert!(rel(&g.glam, &fds.lam) < 1e-5);
        }
    }

    #[test]
    fn collapsed_value() {
        let p = SaddleProblem::new(
            vec![SmoothBlock::zero(Shape::Vector(1))],
            vec![NonsmoothBlock::new(Shape::Vector(2), ProximableFunction::zero()).unwrap()],
            BlockOperator::new(vec![LinearOperator::zero(Shape::Vector(1), Shape::Vector(2))], 2).unwrap(),
            BlockOperator::new(vec![LinearOperator::zero(Shape::Vector(2), Shape::Vector(2))], 2).unwrap(),
            DVector::zeros(2),
            0.5,
            1.0,
        )
        .unwrap();
        let s = PrimalDualState::new(
            DVector::from_vec(vec![3.0]),
            DVector::from_vec(vec![1.0, -1.0]),
            DVector::from_vec(vec![2.0, 1.0]),
            DVector::from_vec(vec![4.0, -2.0]),
        );
        let v = FlowField::new(&p).pal_value(&s).unwrap();
        assert!((v - (-0.25 * 5.0f64)).abs() < 1e-14);
    }

    #[test]
    fn value_at_saddle_equals_optimum_and_field_vanishes() {
        let e = BlockOperator::new(vec![LinearOperator::from_matrix(dmatrix![1.0])], 1).unwrap();
        let p = SaddleProblem::new(
            vec![SmoothBlock::isotropic(1.0, DVector::zeros(1))],
            vec![],
            e,
            BlockOperator::empty(1),
            DVector::from_vec(vec![1.0]),
            1.0,
            1.0,
        )
        .unwrap();
        let s = PrimalDualState::new(
            DVector::from_vec(vec![1.0]),
            DVector::zeros(0),
            DVector::zeros(0),
            DVector::from_vec(vec![-1.0]),
        );
        let mut ff = FlowField::new(&p);
        assert!((ff.pal_value(&s).unwrap() - 0.5f64).abs() < 1e-15);
        assert_eq!(ff.vector_field(&s).unwrap().pack().norm(), 0.0);
    }

    #[test]
    fn alpha_scales_dual_part_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p1 = multi_block(&mut rng);
        let p2 = p1.clone().with_params(p1.mu, 2.0 * p1.alpha).unwrap();
        let s = random_state(&p1, &mut rng);
        let a = FlowField::new(&p1).vector_field(&s).unwrap();
        let b = FlowField::new(&p2).vector_field(&s).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.z, b.z);
        assert!((&a.y * 2.0 - &b.y).norm() < 1e-14);
        assert!((&a.lam * 2.0 - &b.lam).norm() < 1e-14);
    }
}
