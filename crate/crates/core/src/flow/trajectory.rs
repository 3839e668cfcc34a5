use crate::error::{Error, Result};
use crate::flow::integrate::{Control, IntegratorConfig, Observer, OdeOutcome, OdeSystem, Termination};
use crate::problem::PrimalDualState;
use crate::scalar::Real;
use nalgebra::DVector;
use std::io::Write;

/// Sampled solution of a flow together with per-sample diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub nx: usize,
    pub nz: usize,
    pub p: usize,
    pub times: Vec<T>,
    /// Packed states `(x, z, y, lambda)`.
    pub states: Vec<DVector<T>>,
    pub kkt: Vec<T>,
    pub field_norm: Vec<T>,
    /// Extra named columns, one value per sample.
    pub columns: Vec<(String, Vec<T>)>,
    pub termination: Termination,
    pub event_time: Option<T>,
    /// Sample index of the located event.
    pub event_index: Option<usize>,
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn new(nx: usize, nz: usize, p: usize) -> Self {
        Self {
            nx,
            nz,
            p,
            times: Vec::new(),
            states: Vec::new(),
            kkt: Vec::new(),
            field_norm: Vec::new(),
            columns: Vec::new(),
            termination: Termination::TEnd,
            event_time: None,
            event_index: None,
            steps: 0,
            rejected: 0,
            evaluations: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> PrimalDualState<T> {
        PrimalDualState::unpack(self.states[i].as_slice(), self.nx, self.nz, self.p)
            .expect("trajectory stores states of its own layout")
    }

    pub fn last_state(&self) -> Option<PrimalDualState<T>> {
        (!self.is_empty()).then(|| self.state(self.len() - 1))
    }

    pub fn final_kkt(&self) -> Option<T> {
        self.kkt.last().copied()
    }

    pub fn column(&self, name: &str) -> Option<&[T]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Appends a named column; its length must match the sample count.
    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<T>) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::dims("trajectory column", self.len(), values.len()));
        }
        let name = name.into();
        self.columns.retain(|(n, _)| *n != name);
        self.columns.push((name, values));
        Ok(())
    }

    /// Names of the packed state entries, in packing order.
    pub fn state_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.nx + 2 * self.nz + self.p);
        for (prefix, n) in [("x", self.nx), ("z", self.nz), ("y", self.nz), ("lam", self.p)] {
            out.extend((0..n).map(|i| format!("{prefix}{i}")));
        }
        out
    }

    /// CSV with header `t,kkt_residual,field_norm,<columns>[,event][,<state>]`.
    pub fn write_csv<W: Write>(&self, w: &mut W, include_state: bool) -> Result<()> {
        let mut header = vec!["t".to_string(), "kkt_residual".into(), "field_norm".into()];
        header.extend(self.columns.iter().map(|(n, _)| n.clone()));
        if self.event_index.is_some() {
            header.push("event".into());
        }
        if include_state {
            header.extend(self.state_names());
        }
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row = vec![
                format!("{:e}", self.times[i]),
                format!("{:e}", self.kkt[i]),
                format!("{:e}", self.field_norm[i]),
            ];
            row.extend(self.columns.iter().map(|(_, v)| format!("{:e}", v[i])));
            if let Some(ei) = self.event_index {
                row.push(if ei == i { "1".into() } else { "0".into() });
            }
            if include_state {
                row.extend(self.states[i].iter().map(|v| format!("{v:e}")));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Binary snapshots: per sample, `t` followed by the packed state, all as
    /// little-endian 64-bit floats.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        for (t, s) in self.times.iter().zip(&self.states) {
            w.write_all(&t.as_f64().to_le_bytes())?;
            for v in s.iter() {
                w.write_all(&v.as_f64().to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Reads snapshots written by [`Trajectory::write_binary`].
pub fn read_binary(bytes: &[u8], state_len: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let rec = 8 * (state_len + 1);
    if bytes.len() % rec != 0 {
        return Err(Error::Io(format!(
            "{} bytes is not a multiple of the record size {rec}",
            bytes.len()
        )));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(vals
        .chunks_exact(state_len + 1)
        .map(|c| (c[0], c[1..].to_vec()))
        .collect())
}

type KktProbe<'p, T, S> = Box<dyn FnMut(&mut S, T, &[T]) -> Result<T> + 'p>;
type ExtraProbe<'p, T, S> = Box<dyn FnMut(&mut S, T, &[T]) -> Result<Vec<T>> + 'p>;
type EventFn<'p, T> = Box<dyn FnMut(T, &[T]) -> T + 'p>;

/// Observer that samples a trajectory and applies the residual stopping rule.
///
/// The residual probe runs at every accepted point; extra columns are only
/// evaluated at recorded samples.
pub struct Recorder<'p, T: Real, S> {
    traj: Trajectory<T>,
    stride: usize,
    stop_kkt: Option<T>,
    count: usize,
    extra_names: Vec<String>,
    extra_cols: Vec<Vec<T>>,
    kkt: KktProbe<'p, T, S>,
    extra: ExtraProbe<'p, T, S>,
    event: Option<EventFn<'p, T>>,
    stopped_on_kkt: bool,
    pending: Option<(T, Vec<T>, T, T)>,
}

impl<'p, T: Real, S: OdeSystem<T>> Recorder<'p, T, S> {
    pub fn new(
        cfg: &IntegratorConfig<T>,
        layout: (usize, usize, usize),
        kkt: impl FnMut(&mut S, T, &[T]) -> Result<T> + 'p,
    ) -> Self {
        Self {
            traj: Trajectory::new(layout.0, layout.1, layout.2),
            stride: cfg.record_stride,
            stop_kkt: cfg.stop_kkt,
            count: 0,
            extra_names: Vec::new(),
            extra_cols: Vec::new(),
            kkt: Box::new(kkt),
            extra: Box::new(|_, _, _| Ok(Vec::new())),
            event: None,
            stopped_on_kkt: false,
            pending: None,
        }
    }

    /// Extra named columns evaluated at every recorded sample.
    pub fn with_columns(
        mut self,
        names: Vec<String>,
        extra: impl FnMut(&mut S, T, &[T]) -> Result<Vec<T>> + 'p,
    ) -> Self {
        self.extra_cols = vec![Vec::new(); names.len()];
        self.extra_names = names;
        self.extra = Box::new(extra);
        self
    }

    /// Watches `g(t, y)`; integration stops where it first turns negative.
    pub fn with_event(mut self, g: impl FnMut(T, &[T]) -> T + 'p) -> Self {
        self.event = Some(Box::new(g));
        self
    }

    fn push(&mut self, sys: &mut S, t: T, y: &[T], kkt: T, fnorm: T) -> Result<()> {
        let extra = (self.extra)(sys, t, y)?;
        if extra.len() != self.extra_cols.len() {
            return Err(Error::dims("recorded columns", self.extra_cols.len(), extra.len()));
        }
        self.traj.times.push(t);
        self.traj.states.push(DVector::from_column_slice(y));
        self.traj.kkt.push(kkt);
        self.traj.field_norm.push(fnorm);
        for (col, v) in self.extra_cols.iter_mut().zip(extra) {
            col.push(v);
        }
        Ok(())
    }

    /// Closes the record with the solver outcome, keeping the final point.
    pub fn finish(mut self, sys: &mut S, out: OdeOutcome<T>) -> Result<Trajectory<T>> {
        if let Some((t, y, k, f)) = self.pending.take() {
            self.push(sys, t, &y, k, f)?;
        }
        self.traj.termination = if self.stopped_on_kkt {
            Termination::StopKkt
        } else {
            out.termination
        };
        self.traj.event_time = out.event_time;
        self.traj.steps = out.steps;
        self.traj.rejected = out.rejected;
        self.traj.evaluations = out.evaluations;
        let names = std::mem::take(&mut self.extra_names);
        let cols = std::mem::take(&mut self.extra_cols);
        for (n, c) in names.into_iter().zip(cols) {
            self.traj.columns.push((n, c));
        }
        Ok(self.traj)
    }
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |a, &x| a + x * x).sqrt()
}

impl<T: Real, S: OdeSystem<T>> Observer<T, S> for Recorder<'_, T, S> {
    fn on_step(&mut self, sys: &mut S, t: T, y: &[T], dy: &[T]) -> Result<Control> {
        let due = self.count % self.stride == 0;
        self.count += 1;
        let kkt = (self.kkt)(sys, t, y)?;
        let stop = self.stop_kkt.is_some_and(|s| kkt < s);
        if due || stop {
            self.pending = None;
            self.push(sys, t, y, kkt, norm(dy))?;
        } else {
            self.pending = Some((t, y.to_vec(), kkt, norm(dy)));
        }
        if stop {
            self.stopped_on_kkt = true;
            return Ok(Control::Stop);
        }
        Ok(Control::Continue)
    }

    fn event(&mut self, t: T, y: &[T]) -> Option<T> {
        self.event.as_mut().map(|g| g(t, y))
    }

    fn on_event(&mut self, sys: &mut S, t: T, y: &[T]) -> Result<Control> {
        let mut dy = vec![T::zero(); y.len()];
        sys.rhs(t, y, &mut dy)?;
        let kkt = (self.kkt)(sys, t, y)?;
        self.pending = None;
        self.push(sys, t, y, kkt, norm(&dy))?;
        self.traj.event_index = Some(self.traj.len() - 1);
        Ok(Control::Stop)
    }
}
