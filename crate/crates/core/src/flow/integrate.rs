//! Explicit Runge-Kutta integrators: forward Euler, classical RK4 and the
//! Dormand-Prince 5(4) pair with PI step-size control and dense output.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Autonomous or time-dependent system `y' = f(t, y)`.
pub trait OdeSystem<T: Real> {
    fn dim(&self) -> usize;
    fn rhs(&mut self, t: T, y: &[T], dy: &mut [T]) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Euler,
    Rk4,
    Rk45,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Euler => "euler",
            Method::Rk4 => "rk4",
            Method::Rk45 => "rk45",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Method::Euler),
            "rk4" => Ok(Method::Rk4),
            "rk45" => Ok(Method::Rk45),
            _ => Err(Error::InvalidArgument(format!(
                "unknown method '{s}' (expected euler, rk4 or rk45)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig<T: Real> {
    pub method: Method,
    /// Step for fixed-step methods; initial step for `rk45` when positive.
    pub h: T,
    pub rel_tol: T,
    pub abs_tol: T,
    pub t_end: T,
    /// Stop once the optimality residual drops below this value.
    pub stop_kkt: Option<T>,
    pub max_steps: usize,
    /// Record every `record_stride`-th accepted step (first and last are always kept).
    pub record_stride: usize,
    /// Largest step `rk45` may take; zero means unbounded.
    pub h_max: T,
    /// Time tolerance of event location.
    pub event_tol: T,
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            method: Method::Rk45,
            h: T::zero(),
            rel_tol: T::lit(1e-9),
            abs_tol: T::lit(1e-12),
            t_end: T::lit(100.0),
            stop_kkt: Some(T::lit(1e-9)),
            max_steps: 1_000_000,
            record_stride: 1,
            h_max: T::zero(),
            event_tol: T::lit(1e-12),
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, m: &str| Err(Error::config(k, m));
        if !(self.t_end > T::zero()) {
            return bad("t_end", "must be positive");
        }
        match self.method {
            Method::Euler | Method::Rk4 if !(self.h > T::zero()) => {
                return bad("h", "fixed-step methods need a positive step");
            }
            _ => {}
        }
        if !(self.rel_tol > T::zero()) || !(self.abs_tol > T::zero()) {
            return bad("rel_tol", "tolerances must be positive");
        }
        if self.record_stride == 0 {
            return bad("record_stride", "must be at least 1");
        }
        if self.max_steps == 0 {
            return bad("max_steps", "must be at least 1");
        }
        Ok(())
    }
}

/// Decision returned by an [`Observer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    TEnd,
    StopKkt,
    MaxSteps,
    Event,
    Observer,
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::TEnd => "t_end",
            Termination::StopKkt => "stop_kkt",
            Termination::MaxSteps => "max_steps",
            Termination::Event => "event",
            Termination::Observer => "observer",
        }
    }
}

/// Receives accepted steps and optionally watches a scalar event function.
pub trait Observer<T: Real, S: OdeSystem<T>> {
    /// Called at the initial point and after every accepted step, with the
    /// derivative at `(t, y)`.
    fn on_step(&mut self, sys: &mut S, t: T, y: &[T], dy: &[T]) -> Result<Control>;

    /// Event function; an event fires when it changes from `>= 0` to `< 0`.
    fn event(&mut self, _t: T, _y: &[T]) -> Option<T> {
        None
    }

    /// Called once at the located event. Returning `Stop` ends integration there.
    fn on_event(&mut self, _sys: &mut S, _t: T, _y: &[T]) -> Result<Control> {
        Ok(Control::Stop)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeOutcome<T: Real> {
    pub t: T,
    pub y: Vec<T>,
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub termination: Termination,
    pub event_time: Option<T>,
}

// Dormand-Prince coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense output coefficients (Hairer, Norsett & Wanner).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const PI_BETA: f64 = 0.04;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Continuous extension over one accepted step.
enum Dense<T: Real> {
    /// Dormand-Prince 4th-order interpolant in the form `r1..r5`.
    Dp([Vec<T>; 5]),
    /// Cubic Hermite from endpoint values and derivatives.
    Hermite {
        y0: Vec<T>,
        y1: Vec<T>,
        f0: Vec<T>,
        f1: Vec<T>,
    },
}

impl<T: Real> Dense<T> {
    fn eval(&self, t0: T, h: T, t: T, out: &mut [T]) {
        let th = (t - t0) / h;
        let one = T::one();
        match self {
            Dense::Dp(r) => {
                let th1 = one - th;
                for i in 0..out.len() {
                    out[i] = r[0][i]
                        + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
                }
            }
            Dense::Hermite { y0, y1, f0, f1 } => {
                let two = T::lit(2.0);
                let three = T::lit(3.0);
                let t2 = th * th;
                let t3 = t2 * th;
                let h00 = two * t3 - three * t2 + one;
                let h10 = t3 - two * t2 + th;
                let h01 = -two * t3 + three * t2;
                let h11 = t3 - t2;
                for i in 0..out.len() {
                    out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
                }
            }
        }
    }
}

fn axpy<T: Real>(out: &mut [T], y: &[T], h: T, terms: &[(f64, &[T])]) {
    for i in 0..out.len() {
        let mut acc = T::zero();
        for (c, k) in terms {
            acc += T::lit(*c) * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

fn check_finite<T: Real>(t: T, y: &[T]) -> Result<()> {
    if y.iter().all(|v| v.is_finite_val()) {
        Ok(())
    } else {
        Err(Error::NonFinite { t: t.as_f64() })
    }
}

fn err_norm<T: Real>(e: &[T], y0: &[T], y1: &[T], atol: T, rtol: T) -> T {
    if e.is_empty() {
        return T::zero();
    }
    let mut s = T::zero();
    for i in 0..e.len() {
        let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
        let r = e[i] / sc;
        s += r * r;
    }
    (s / T::from_count(e.len())).sqrt()
}

/// Integrates from `(t0, y0)` until `t_end`, an observer stop, an event or
/// the step budget.
pub fn solve<T: Real, S: OdeSystem<T>, O: Observer<T, S>>(
    sys: &mut S,
    t0: T,
    y0: &[T],
    cfg: &IntegratorConfig<T>,
    obs: &mut O,
) -> Result<OdeOutcome<T>> {
    cfg.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::dims("initial state", n, y0.len()));
    }
    check_finite(t0, y0)?;
    let t_end = t0 + cfg.t_end;
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut f = vec![T::zero(); n];
    sys.rhs(t, &y, &mut f)?;
    let mut evals = 1usize;
    let outcome = |t: T, y: Vec<T>, steps, rejected, evals, termination, event_time| OdeOutcome {
        t,
        y,
        steps,
        rejected,
        evaluations: evals,
        termination,
        event_time,
    };
    if obs.on_step(sys, t, &y, &f)? == Control::Stop {
        return Ok(outcome(t, y, 0, 0, evals, Termination::Observer, None));
    }
    let mut g_prev = obs.event(t, &y);

    let mut k = vec![vec![T::zero(); n]; 7];
    let mut y_new = vec![T::zero(); n];
    let mut f_new = vec![T::zero(); n];
    let mut tmp = vec![T::zero(); n];
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut err_prev = T::lit(1e-4);

    let mut h = match cfg.method {
        Method::Rk45 => {
            if cfg.h > T::zero() {
                cfg.h
            } else {
                initial_step(sys, t, &y, &f, cfg, &mut evals)?
            }
        }
        _ => cfg.h,
    };
    let time_eps = T::lit(1e-14);

    while t < t_end {
        let want_dense = g_prev.is_some();
        if steps >= cfg.max_steps {
            return Ok(outcome(t, y, steps, rejected, evals, Termination::MaxSteps, None));
        }
        let remaining = t_end - t;
        let mut last = false;
        if h >= remaining || (remaining - h) <= time_eps * t_end.abs().max(T::one()) {
            h = remaining;
            last = true;
        }
        if cfg.method == Method::Rk45 && cfg.h_max > T::zero() && h > cfg.h_max {
            h = cfg.h_max;
            last = false;
        }
        if h < time_eps * t.abs().max(T::one()) {
            return Err(Error::StepSizeUnderflow {
                t: t.as_f64(),
                h: h.as_f64(),
            });
        }

        let stepped = match cfg.method {
            Method::Euler => {
                for i in 0..n {
                    y_new[i] = y[i] + h * f[i];
                }
                None
            }
            Method::Rk4 => {
                let half = T::lit(0.5);
                axpy(&mut tmp, &y, h, &[(0.5, &f)]);
                sys.rhs(t + half * h, &tmp, &mut k[1])?;
                axpy(&mut tmp, &y, h, &[(0.5, &k[1])]);
                sys.rhs(t + half * h, &tmp, &mut k[2])?;
                axpy(&mut tmp, &y, h, &[(1.0, &k[2])]);
                sys.rhs(t + h, &tmp, &mut k[3])?;
                evals += 3;
                axpy(
                    &mut y_new,
                    &y,
                    h,
                    &[(1.0 / 6.0, &f), (1.0 / 3.0, &k[1]), (1.0 / 3.0, &k[2]), (1.0 / 6.0, &k[3])],
                );
                None
            }
            Method::Rk45 => {
                k[0].copy_from_slice(&f);
                axpy(&mut tmp, &y, h, &[(A21, &k[0])]);
                sys.rhs(t + T::lit(C2) * h, &tmp, &mut k[1])?;
                axpy(&mut tmp, &y, h, &[(A31, &k[0]), (A32, &k[1])]);
                sys.rhs(t + T::lit(C3) * h, &tmp, &mut k[2])?;
                axpy(&mut tmp, &y, h, &[(A41, &k[0]), (A42, &k[1]), (A43, &k[2])]);
                sys.rhs(t + T::lit(C4) * h, &tmp, &mut k[3])?;
                axpy(&mut tmp, &y, h, &[(A51, &k[0]), (A52, &k[1]), (A53, &k[2]), (A54, &k[3])]);
                sys.rhs(t + T::lit(C5) * h, &tmp, &mut k[4])?;
                axpy(
                    &mut tmp,
                    &y,
                    h,
                    &[(A61, &k[0]), (A62, &k[1]), (A63, &k[2]), (A64, &k[3]), (A65, &k[4])],
                );
                sys.rhs(t + h, &tmp, &mut k[5])?;
                axpy(
                    &mut y_new,
                    &y,
                    h,
                    &[(A71, &k[0]), (A73, &k[2]), (A74, &k[3]), (A75, &k[4]), (A76, &k[5])],
                );
                evals += 5;
                if !y_new.iter().all(|v| v.is_finite_val()) {
                    rejected += 1;
                    h *= T::lit(FAC_MIN);
                    continue;
                }
                sys.rhs(t + h, &y_new, &mut k[6])?;
                evals += 1;
                for i in 0..n {
                    tmp[i] = h
                        * (T::lit(E1) * k[0][i]
                            + T::lit(E3) * k[2][i]
                            + T::lit(E4) * k[3][i]
                            + T::lit(E5) * k[4][i]
                            + T::lit(E6) * k[5][i]
                            + T::lit(E7) * k[6][i]);
                }
                let err = err_norm(&tmp, &y, &y_new, cfg.abs_tol, cfg.rel_tol);
                if !err.is_finite_val() || err > T::one() {
                    rejected += 1;
                    let fac = if err.is_finite_val() {
                        (T::lit(SAFETY) * err.powf(T::lit(-0.2))).max(T::lit(FAC_MIN))
                    } else {
                        T::lit(FAC_MIN)
                    };
                    h *= fac.min(T::one());
                    continue;
                }
                let e = err.max(T::lit(1e-10));
                let expo = T::lit(0.2 - 0.75 * PI_BETA);
                let fac = T::lit(SAFETY) * e.powf(-expo) * err_prev.powf(T::lit(PI_BETA));
                let fac = fac.max(T::lit(FAC_MIN)).min(T::lit(FAC_MAX));
                err_prev = e;
                let mut r: [Vec<T>; 5] = std::array::from_fn(|_| vec![T::zero(); if want_dense { n } else { 0 }]);
                for i in 0..if want_dense { n } else { 0 } {
                    let dy = y_new[i] - y[i];
                    let bspl = h * k[0][i] - dy;
                    r[0][i] = y[i];
                    r[1][i] = dy;
                    r[2][i] = bspl;
                    r[3][i] = dy - h * k[6][i] - bspl;
                    r[4][i] = h
                        * (T::lit(D1) * k[0][i]
                            + T::lit(D3) * k[2][i]
                            + T::lit(D4) * k[3][i]
                            + T::lit(D5) * k[4][i]
                            + T::lit(D6) * k[5][i]
                            + T::lit(D7) * k[6][i]);
                }
                f_new.copy_from_slice(&k[6]);
                let step = h;
                h *= fac;
                Some((want_dense.then_some(Dense::Dp(r)), step))
            }
        };

        let (dense, step) = match stepped {
            Some(d) => d,
            None => {
                check_finite(t + h, &y_new)?;
                sys.rhs(t + h, &y_new, &mut f_new)?;
                evals += 1;
                let dense = want_dense.then(|| Dense::Hermite {
                    y0: y.clone(),
                    y1: y_new.clone(),
                    f0: f.clone(),
                    f1: f_new.clone(),
                });
                (dense, h)
            }
        };
        check_finite(t + step, &y_new)?;
        let t_new = if last { t_end } else { t + step };
        steps += 1;

        if let (Some(g0), Some(dense)) = (g_prev, dense.as_ref()) {
            if let Some(g1) = obs.event(t_new, &y_new) {
                if g0 >= T::zero() && g1 < T::zero() {
                    let (te, ye) = locate_event(obs, dense, t, step, t_new, cfg.event_tol, n);
                    let mut fe = vec![T::zero(); n];
                    sys.rhs(te, &ye, &mut fe)?;
                    evals += 1;
                    if obs.on_event(sys, te, &ye)? == Control::Stop {
                        return Ok(outcome(te, ye, steps, rejected, evals, Termination::Event, Some(te)));
                    }
                }
                g_prev = Some(g1);
            }
        }

        t = t_new;
        std::mem::swap(&mut y, &mut y_new);
        std::mem::swap(&mut f, &mut f_new);
        if obs.on_step(sys, t, &y, &f)? == Control::Stop {
            return Ok(outcome(t, y, steps, rejected, evals, Termination::Observer, None));
        }
    }
    Ok(outcome(t, y, steps, rejected, evals, Termination::TEnd, None))
}

fn locate_event<T: Real, S: OdeSystem<T>, O: Observer<T, S>>(
    obs: &mut O,
    dense: &Dense<T>,
    t0: T,
    h: T,
    t1: T,
    tol: T,
    n: usize,
) -> (T, Vec<T>) {
    let mut lo = t0;
    let mut hi = t1;
    let mut buf = vec![T::zero(); n];
    let half = T::lit(0.5);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) * half;
        dense.eval(t0, h, mid, &mut buf);
        match obs.event(mid, &buf) {
            Some(g) if g < T::zero() => hi = mid,
            _ => lo = mid,
        }
    }
    let te = (lo + hi) * half;
    dense.eval(t0, h, te, &mut buf);
    (te, buf)
}

/// Starting step heuristic from the local scale of `y` and `f`.
fn initial_step<T: Real, S: OdeSystem<T>>(
    sys: &mut S,
    t: T,
    y: &[T],
    f: &[T],
    cfg: &IntegratorConfig<T>,
    evals: &mut usize,
) -> Result<T> {
    let n = y.len();
    let sc: Vec<T> = y.iter().map(|v| cfg.abs_tol + cfg.rel_tol * v.abs()).collect();
    let rms = |v: &[T]| {
        if v.is_empty() {
            return T::zero();
        }
        let mut s = T::zero();
        for i in 0..v.len() {
            let r = v[i] / sc[i];
            s += r * r;
        }
        (s / T::from_count(v.len())).sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(f);
    let tiny = T::lit(1e-5);
    let mut h0 = if d0 < tiny || d1 < tiny {
        T::lit(1e-6)
    } else {
        T::lit(0.01) * d0 / d1
    };
    h0 = h0.min(cfg.t_end);
    let mut y1 = vec![T::zero(); n];
    for i in 0..n {
        y1[i] = y[i] + h0 * f[i];
    }
    let mut f1 = vec![T::zero(); n];
    sys.rhs(t + h0, &y1, &mut f1)?;
    *evals += 1;
    let diff: Vec<T> = f1.iter().zip(f).map(|(a, b)| *a - *b).collect();
    let d2 = rms(&diff) / h0;
    let m = d1.max(d2);
    let h1 = if m <= T::lit(1e-15) {
        (T::lit(1e-6)).max(h0 * T::lit(1e-3))
    } else {
        (T::lit(0.01) / m).powf(T::lit(0.2))
    };
    Ok((T::lit(100.0) * h0).min(h1).min(cfg.t_end))
}

/// Observer that does nothing.
pub struct NoObserver;

impl<T: Real, S: OdeSystem<T>> Observer<T, S> for NoObserver {
    fn on_step(&mut self, _sys: &mut S, _t: T, _y: &[T], _dy: &[T]) -> Result<Control> {
        Ok(Control::Continue)
    }
}
