use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::DVector;

/// Result of an accelerated proximal gradient solve.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<T: Real> {
    pub x: DVector<T>,
    pub iterations: usize,
    /// Norm of the gradient mapping `(x - prox(x - t grad f(x))) / t`.
    pub residual: T,
}

/// Accelerated proximal gradient (FISTA) with step `1/lipschitz` and
/// gradient-based restarts. `prox(t, v)` must return `prox_{t g}(v)`.
pub fn fista<T: Real>(
    x0: DVector<T>,
    lipschitz: T,
    grad: impl Fn(&DVector<T>) -> DVector<T>,
    prox: impl Fn(T, &DVector<T>) -> Result<DVector<T>>,
    tol: T,
    max_iter: usize,
) -> Result<OracleResult<T>> {
    if !(lipschitz > T::zero()) {
        return Err(Error::InvalidArgument("oracle needs a positive Lipschitz constant".into()));
    }
    let t = T::one() / lipschitz;
    let mapping = |x: &DVector<T>| -> Result<T> {
        let p = prox(t, &(x - grad(x) * t))?;
        Ok((x - p).norm() / t)
    };
    let mut x = x0;
    let mut v = x.clone();
    let mut theta = T::one();
    for it in 0..max_iter {
        let x_new = prox(t, &(&v - grad(&v) * t))?;
        if (&v - &x_new).dot(&(&x_new - &x)) > T::zero() {
            v = x_new.clone();
            theta = T::one();
        } else {
            let th = (T::one() + (T::one() + T::lit(4.0) * theta * theta).sqrt()) * T::lit(0.5);
            v = &x_new + (&x_new - &x) * ((theta - T::one()) / th);
            theta = th;
        }
        x = x_new;
        if it % 10 == 9 {
            let r = mapping(&x)?;
            if r < tol {
                return Ok(OracleResult {
                    x,
                    iterations: it + 1,
                    residual: r,
                });
            }
        }
    }
    let r = mapping(&x)?;
    if r < tol {
        return Ok(OracleResult {
            x,
            iterations: max_iter,
            residual: r,
        });
    }
    Err(Error::InnerSolveFailed {
        iterations: max_iter,
        grad_norm: r.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::prox_l1;

    #[test]
    fn scalar_lasso() {
        // min (x - 3)^2 / 2 + |x|: x = 2.
        let r = fista(
            DVector::zeros(1),
            1.0,
            |x: &DVector<f64>| x.add_scalar(-3.0),
            |t, v| Ok(prox_l1(t, v.as_slice())),
            1e-12,
            1000,
        )
        .unwrap();
        assert!((r.x[0] - 2.0).abs() < 1e-12);
    }
}
