//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! [example]
//! kind = lasso_network
//! scale = desk
//! seed = 7
//!
//! [flow]
//! method = rk45
//! t_end = 500
//! stop_kkt = 1e-9
//! ```
//!
//! A file holds `key = value` lines grouped under `[section]` headers.
//! The problem comes either from a built-in generator (`[example]`) or
//! inline: one `[smooth]` section per smooth block, one `[nonsmooth]` section
//! per nonsmooth block and a `[constraints]` section with `q`. Each block
//! carries its column of the constraint operator as `e` or `f`. Matrices are
//! written row by row, rows separated by `;`. Values are parsed as `f64`.

use crate::block::Shape;
use crate::error::{Error, Result};
use crate::examples::{ExampleKind, ExampleSpec};
use crate::flow::{IntegratorConfig, Method};
use crate::linops::{BlockOperator, LinearOperator};
use crate::problem::{NonsmoothBlock, PrimalDualState, SaddleProblem, SmoothBlock, SmoothKind};
use crate::prox::{GroupPartition, Orthant, ProxKind, ProximableFunction};
use nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    /// Position among sections of the same name.
    pub index: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    fn qualified(&self, key: &str, repeated: bool) -> String {
        if repeated {
            format!("{}[{}].{key}", self.name, self.index)
        } else {
            format!("{}.{key}", self.name)
        }
    }
}

/// Sections in file order. Keys before the first header land in a section
/// with an empty name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigFile {
    pub sections: Vec<Section>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: Vec<Section> = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(format!("line {}", no + 1), "unterminated section header"))?
                    .trim()
                    .to_string();
                if name.is_empty() {
                    return Err(Error::config(format!("line {}", no + 1), "empty section name"));
                }
                let index = sections.iter().filter(|s| s.name == name).count();
                sections.push(Section { name, index, entries: Vec::new() });
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", no + 1), "expected `key = value`"))?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::config(format!("line {}", no + 1), "empty key"));
            }
            if sections.is_empty() {
                sections.push(Section { name: String::new(), index: 0, entries: Vec::new() });
            }
            let sec = sections.last_mut().expect("pushed above");
            if sec.entries.iter().any(|e| e.key == key) {
                let q = sec.qualified(&key, false);
                return Err(Error::config(q, format!("duplicate key on line {}", no + 1)));
            }
            sec.entries.push(Entry { key, value: v.trim().to_string(), line: no + 1 });
        }
        Ok(Self { sections })
    }

    pub fn sections_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections.iter().filter(move |s| s.name == name)
    }

    fn single(&self, name: &str) -> Result<Option<&Section>> {
        let mut it = self.sections.iter().filter(|s| s.name == name);
        let first = it.next();
        if it.next().is_some() {
            return Err(Error::config(name, "section may appear only once"));
        }
        Ok(first)
    }
}

/// Typed access to one section; records which keys were read so unknown
/// keys can be reported.
struct Reader<'a> {
    sec: &'a Section,
    repeated: bool,
    used: Vec<&'a str>,
}

impl<'a> Reader<'a> {
    fn new(sec: &'a Section, repeated: bool) -> Self {
        Self { sec, repeated, used: Vec::new() }
    }

    fn key(&self, k: &str) -> String {
        self.sec.qualified(k, self.repeated)
    }

    fn raw(&mut self, k: &'a str) -> Option<&'a str> {
        let e = self.sec.entries.iter().find(|e| e.key == k)?;
        self.used.push(k);
        Some(e.value.as_str())
    }

    fn req(&mut self, k: &'a str) -> Result<&'a str> {
        self.raw(k).ok_or_else(|| Error::config(self.key(k), "missing"))
    }

    fn parse<V: FromStr>(&mut self, k: &'a str) -> Result<Option<V>>
    where
        V::Err: std::fmt::Display,
    {
        match self.raw(k) {
            None => Ok(None),
            Some(v) => v
                .parse::<V>()
                .map(Some)
                .map_err(|e| Error::config(self.key(k), format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn req_parse<V: FromStr>(&mut self, k: &'a str) -> Result<V>
    where
        V::Err: std::fmt::Display,
    {
        self.parse(k)?.ok_or_else(|| Error::config(self.key(k), "missing"))
    }

    fn vector(&mut self, k: &'a str) -> Result<Option<DVector<f64>>> {
        match self.raw(k) {
            None => Ok(None),
            Some(v) => parse_numbers(v)
                .map(|xs| Some(DVector::from_vec(xs)))
                .map_err(|m| Error::config(self.key(k), m)),
        }
    }

    fn matrix(&mut self, k: &'a str) -> Result<Option<DMatrix<f64>>> {
        match self.raw(k) {
            None => Ok(None),
            Some(v) => parse_matrix(v).map(Some).map_err(|m| Error::config(self.key(k), m)),
        }
    }

    fn req_matrix(&mut self, k: &'a str) -> Result<DMatrix<f64>> {
        self.matrix(k)?.ok_or_else(|| Error::config(self.key(k), "missing"))
    }

    fn finish(self) -> Result<()> {
        for e in &self.sec.entries {
            if !self.used.contains(&e.key.as_str()) {
                return Err(Error::config(self.key(&e.key), format!("unknown key (line {})", e.line)));
            }
        }
        Ok(())
    }
}

fn parse_numbers(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("cannot parse `{t}`: {e}")))
        .collect()
}

fn parse_matrix(s: &str) -> std::result::Result<DMatrix<f64>, String> {
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(parse_numbers)
        .collect::<std::result::Result<_, _>>()?;
    let rows: Vec<Vec<f64>> = rows.into_iter().filter(|r| !r.is_empty()).collect();
    let ncols = rows.first().map_or(0, |r| r.len());
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(format!("row {i} has {} entries, expected {ncols}", r.len()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_vector(v: &DVector<f64>) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ")
}

fn fmt_matrix(m: &DMatrix<f64>) -> String {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("; ")
}

fn parse_bool(key: String, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got `{v}`"))),
    }
}

/// Diagnostic columns recorded next to the residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticsLevel {
    None,
    /// Distances, `V1` and relative errors; cheap.
    Basic,
    /// Adds the dual-function based `V2` and the gaps.
    Full,
}

impl DiagnosticsLevel {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Basic => "basic",
            Self::Full => "full",
        }
    }
}

impl FromStr for DiagnosticsLevel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "basic" => Ok(Self::Basic),
            "full" => Ok(Self::Full),
            _ => Err("expected none, basic or full".into()),
        }
    }
}

/// A problem given in the file rather than by a generator.
#[derive(Debug, Clone)]
pub struct InlineProblem {
    pub problem: SaddleProblem<f64>,
    pub init: PrimalDualState<f64>,
}

#[derive(Debug, Clone)]
pub enum ProblemSource {
    Example { spec: ExampleSpec, distributed: bool },
    Inline(Box<InlineProblem>),
}

/// Everything a run needs. `None` fields fall back to the defaults of the
/// problem source.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: ProblemSource,
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    /// Integrator keys given in the file; applied on top of the source defaults.
    pub flow: FlowOverrides,
    pub diagnostics: DiagnosticsLevel,
    pub svg: bool,
    pub include_state: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowOverrides {
    pub method: Option<Method>,
    pub h: Option<f64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub t_end: Option<f64>,
    /// `Some(None)` disables the residual stop.
    pub stop_kkt: Option<Option<f64>>,
    pub max_steps: Option<usize>,
    pub record_stride: Option<usize>,
    pub h_max: Option<f64>,
    pub event_tol: Option<f64>,
}

impl FlowOverrides {
    pub fn apply(&self, mut cfg: IntegratorConfig<f64>) -> IntegratorConfig<f64> {
        if let Some(m) = self.method {
            cfg.method = m;
        }
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = self.$f { cfg.$f = v; } )*};
        }
        set!(h, rel_tol, abs_tol, t_end, stop_kkt, max_steps, record_stride, h_max, event_tol);
        cfg
    }

    /// Every field set from `cfg`.
    pub fn full(cfg: &IntegratorConfig<f64>) -> Self {
        Self {
            method: Some(cfg.method),
            h: Some(cfg.h),
            rel_tol: Some(cfg.rel_tol),
            abs_tol: Some(cfg.abs_tol),
            t_end: Some(cfg.t_end),
            stop_kkt: Some(cfg.stop_kkt),
            max_steps: Some(cfg.max_steps),
            record_stride: Some(cfg.record_stride),
            h_max: Some(cfg.h_max),
            event_tol: Some(cfg.event_tol),
        }
    }
}

const SECTIONS: [&str; 8] = [
    "example",
    "problem",
    "smooth",
    "nonsmooth",
    "constraints",
    "init",
    "flow",
    "output",
];

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        Self::from_file(&ConfigFile::parse(text)?)
    }

    pub fn from_file(file: &ConfigFile) -> Result<Self> {
        for s in &file.sections {
            if s.name.is_empty() {
                return Err(Error::config(&s.entries[0].key, "key outside of any section"));
            }
            if !SECTIONS.contains(&s.name.as_str()) && s.name != "manifest" {
                return Err(Error::config(&s.name, "unknown section"));
            }
        }
        let (mut mu, mut alpha) = (None, None);
        if let Some(sec) = file.single("problem")? {
            let mut r = Reader::new(sec, false);
            mu = r.parse("mu")?;
            alpha = r.parse("alpha")?;
            r.finish()?;
        }
        let inline = file.sections_named("smooth").next().is_some()
            || file.sections_named("nonsmooth").next().is_some()
            || file.sections_named("constraints").next().is_some();
        let source = match (file.single("example")?, inline) {
            (Some(_), true) => {
                return Err(Error::config(
                    "example",
                    "give either an example or inline blocks, not both",
                ))
            }
            (None, false) => return Err(Error::config("example", "no problem: add [example] or inline blocks")),
            (Some(sec), false) => {
                if file.single("init")?.is_some() {
                    return Err(Error::config("init", "examples carry their own initial condition"));
                }
                parse_example(sec)?
            }
            (None, true) => {
                let p = parse_inline(file, mu.unwrap_or(1.0), alpha.unwrap_or(1.0))?;
                ProblemSource::Inline(Box::new(p))
            }
        };
        let flow = match file.single("flow")? {
            Some(sec) => parse_flow(sec)?,
            None => FlowOverrides::default(),
        };
        let (mut diagnostics, mut svg, mut include_state) = (DiagnosticsLevel::Basic, false, false);
        if let Some(sec) = file.single("output")? {
            let mut r = Reader::new(sec, false);
            diagnostics = r.parse("diagnostics")?.unwrap_or(diagnostics);
            if let Some(v) = r.raw("svg") {
                svg = parse_bool(r.key("svg"), v)?;
            }
            if let Some(v) = r.raw("state") {
                include_state = parse_bool(r.key("state"), v)?;
            }
            r.finish()?;
        }
        Ok(Self { source, mu, alpha, flow, diagnostics, svg, include_state })
    }

    /// Serializes the config; `extra` lands in a trailing `[manifest]`
    /// section that the loader skips.
    pub fn to_config_string(&self, extra: &[(&str, String)]) -> Result<String> {
        let mut out = String::new();
        match &self.source {
            ProblemSource::Example { spec, distributed } => {
                write_example(&mut out, spec, *distributed);
                if self.mu.is_some() || self.alpha.is_some() {
                    out.push_str("\n[problem]\n");
                    if let Some(m) = self.mu {
                        let _ = writeln!(out, "mu = {}", fmt_f64(m));
                    }
                    if let Some(a) = self.alpha {
                        let _ = writeln!(out, "alpha = {}", fmt_f64(a));
                    }
                }
            }
            ProblemSource::Inline(p) => {
                let mut prob = p.problem.clone();
                if let Some(m) = self.mu {
                    prob.mu = m;
                }
                if let Some(a) = self.alpha {
                    prob.alpha = a;
                }
                out.push_str(&problem_to_config(&prob, &p.init)?);
            }
        }
        out.push_str("\n[flow]\n");
        write_flow(&mut out, &self.flow);
        let _ = write!(
            out,
            "\n[output]\ndiagnostics = {}\nsvg = {}\nstate = {}\n",
            self.diagnostics.name(),
            self.svg,
            self.include_state
        );
        if !extra.is_empty() {
            out.push_str("\n[manifest]\n");
            for (k, v) in extra {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        Ok(out)
    }
}

fn parse_example(sec: &Section) -> Result<ProblemSource> {
    let mut r = Reader::new(sec, false);
    let kind_s = r.req("kind")?;
    let kind: ExampleKind = kind_s
        .parse()
        .map_err(|_| Error::config(r.key("kind"), format!("unknown example `{kind_s}`")))?;
    let seed: u64 = r.parse("seed")?.unwrap_or(0);
    let mut spec = match r.raw("scale").unwrap_or("desk") {
        "desk" => ExampleSpec::desk(kind, seed),
        "full" => ExampleSpec::full(kind, seed),
        other => return Err(Error::config(r.key("scale"), format!("expected desk or full, got `{other}`"))),
    };
    match &mut spec {
        ExampleSpec::LassoNetwork { agents, dim, meas, .. } => {
            *agents = r.parse("agents")?.unwrap_or(*agents);
            *dim = r.parse("dim")?.unwrap_or(*dim);
            *meas = r.parse("meas")?.unwrap_or(*meas);
        }
        ExampleSpec::Pcp { n, rank, .. } => {
            *n = r.parse("n")?.unwrap_or(*n);
            *rank = r.parse("rank")?.unwrap_or(*rank);
        }
        ExampleSpec::CovarianceCompletion { masses, gamma, .. } => {
            *masses = r.parse("masses")?.unwrap_or(*masses);
            *gamma = r.parse("gamma")?.unwrap_or(*gamma);
        }
        ExampleSpec::SparseGroupLasso { meas, dim, groups, .. } => {
            *meas = r.parse("meas")?.unwrap_or(*meas);
            *dim = r.parse("dim")?.unwrap_or(*dim);
            *groups = r.parse("groups")?.unwrap_or(*groups);
        }
        ExampleSpec::Counterexample { beta, .. } => {
            *beta = r.parse("beta")?.unwrap_or(*beta);
        }
    }
    let distributed = match r.raw("distributed") {
        Some(v) => parse_bool(r.key("distributed"), v)?,
        None => false,
    };
    if distributed && kind != ExampleKind::LassoNetwork {
        return Err(Error::config(r.key("distributed"), "only the lasso network runs decentralized"));
    }
    r.finish()?;
    Ok(ProblemSource::Example { spec, distributed })
}

fn write_example(out: &mut String, spec: &ExampleSpec, distributed: bool) {
    let _ = writeln!(out, "[example]\nkind = {}", spec.kind());
    match *spec {
        ExampleSpec::LassoNetwork { agents, dim, meas, seed } => {
            let _ = writeln!(out, "seed = {seed}\nagents = {agents}\ndim = {dim}\nmeas = {meas}");
            let _ = writeln!(out, "distributed = {distributed}");
        }
        ExampleSpec::Pcp { n, rank, seed } => {
            let _ = writeln!(out, "seed = {seed}\nn = {n}\nrank = {rank}");
        }
        ExampleSpec::CovarianceCompletion { masses, gamma, seed } => {
            let _ = writeln!(out, "seed = {seed}\nmasses = {masses}\ngamma = {}", fmt_f64(gamma));
        }
        ExampleSpec::SparseGroupLasso { meas, dim, groups, seed } => {
            let _ = writeln!(out, "seed = {seed}\nmeas = {meas}\ndim = {dim}\ngroups = {groups}");
        }
        ExampleSpec::Counterexample { beta, .. } => {
            let _ = writeln!(out, "beta = {}", fmt_f64(beta));
        }
    }
}

fn parse_flow(sec: &Section) -> Result<FlowOverrides> {
    let mut r = Reader::new(sec, false);
    let mut f = FlowOverrides::default();
    if let Some(m) = r.raw("method") {
        f.method = Some(m.parse().map_err(|e: Error| Error::config(r.key("method"), e.to_string()))?);
    }
    f.h = r.parse("h")?;
    f.rel_tol = r.parse("rel_tol")?;
    f.abs_tol = r.parse("abs_tol")?;
    f.t_end = r.parse("t_end")?;
    f.stop_kkt = match r.raw("stop_kkt") {
        None => None,
        Some("none") => Some(None),
        Some(_) => Some(Some(r.req_parse("stop_kkt")?)),
    };
    f.max_steps = r.parse("max_steps")?;
    f.record_stride = r.parse("record_stride")?;
    f.h_max = r.parse("h_max")?;
    f.event_tol = r.parse("event_tol")?;
    r.finish()?;
    let cfg = f.apply(IntegratorConfig::default());
    cfg.validate().map_err(|e| match e {
        Error::Config { key, message } => Error::config(format!("flow.{key}"), message),
        other => other,
    })?;
    Ok(f)
}

fn write_flow(out: &mut String, f: &FlowOverrides) {
    if let Some(m) = f.method {
        let _ = writeln!(out, "method = {}", m.name());
    }
    let nums = [
        ("h", f.h),
        ("rel_tol", f.rel_tol),
        ("abs_tol", f.abs_tol),
        ("t_end", f.t_end),
    ];
    for (k, v) in nums {
        if let Some(v) = v {
            let _ = writeln!(out, "{k} = {}", fmt_f64(v));
        }
    }
    match f.stop_kkt {
        Some(Some(v)) => {
            let _ = writeln!(out, "stop_kkt = {}", fmt_f64(v));
        }
        Some(None) => out.push_str("stop_kkt = none\n"),
        None => {}
    }
    if let Some(v) = f.max_steps {
        let _ = writeln!(out, "max_steps = {v}");
    }
    if let Some(v) = f.record_stride {
        let _ = writeln!(out, "record_stride = {v}");
    }
    for (k, v) in [("h_max", f.h_max), ("event_tol", f.event_tol)] {
        if let Some(v) = v {
            let _ = writeln!(out, "{k} = {}", fmt_f64(v));
        }
    }
}

fn parse_inline(file: &ConfigFile, mu: f64, alpha: f64) -> Result<InlineProblem> {
    let q = match file.single("constraints")? {
        Some(sec) => {
            let mut r = Reader::new(sec, false);
            let q = r.vector("q")?.ok_or_else(|| Error::config("constraints.q", "missing"))?;
            r.finish()?;
            q
        }
        None => return Err(Error::config("constraints.q", "missing")),
    };
    let p = q.len();
    let wrap = |key: String, e: Error| Error::config(key, e.to_string());

    let mut smooth = Vec::new();
    let mut e_ops = Vec::new();
    for sec in file.sections_named("smooth") {
        let mut r = Reader::new(sec, true);
        let kind = r.req("kind")?;
        let mut block = match kind {
            "zero" => SmoothBlock::zero(Shape::Vector(r.req_parse("dim")?)),
            "isotropic" => {
                let m: f64 = r.req_parse("m")?;
                let c = r.vector("c")?.ok_or_else(|| Error::config(r.key("c"), "missing"))?;
                SmoothBlock::isotropic(m, c)
            }
            "quadratic" => {
                let h = r.req_matrix("h")?;
                let c = match r.vector("c")? {
                    Some(c) => c,
                    None => DVector::zeros(h.ncols()),
                };
                SmoothBlock::quadratic(h, c).map_err(|e| wrap(r.key("h"), e))?
            }
            "least_squares" => {
                let g = r.req_matrix("g")?;
                let h = r.vector("h")?.ok_or_else(|| Error::config(r.key("h"), "missing"))?;
                SmoothBlock::least_squares(g, h).map_err(|e| wrap(r.key("g"), e))?
            }
            other => {
                return Err(Error::config(
                    r.key("kind"),
                    format!("unknown smooth kind `{other}` (zero, isotropic, quadratic, least_squares)"),
                ))
            }
        };
        if let Some(l) = r.parse("lipschitz")? {
            block.lipschitz = Some(l);
        }
        if let Some(m) = r.parse("strong_convexity")? {
            block.strong_convexity = m;
        }
        let e = match r.matrix("e")? {
            Some(e) => e,
            None => DMatrix::zeros(p, block.dim()),
        };
        if e.nrows() != p || e.ncols() != block.dim() {
            return Err(Error::config(
                r.key("e"),
                format!("expected {p}x{}, got {}x{}", block.dim(), e.nrows(), e.ncols()),
            ));
        }
        r.finish()?;
        e_ops.push(LinearOperator::from_matrix(e));
        smooth.push(block);
    }

    let mut nonsmooth = Vec::new();
    let mut f_ops = Vec::new();
    for sec in file.sections_named("nonsmooth") {
        let mut r = Reader::new(sec, true);
        let kind = r.req("kind")?;
        let (shape, func) = match kind {
            "zero" | "nonneg" | "nonpos" | "l1" | "group_lasso" => {
                let func = match kind {
                    "zero" => ProximableFunction::zero(),
                    "nonneg" => ProximableFunction::indicator(Orthant::Nonneg),
                    "nonpos" => ProximableFunction::indicator(Orthant::Nonpos),
                    "l1" => ProximableFunction::l1(r.req_parse("weight")?),
                    _ => {
                        let groups = parse_groups(r.req("groups")?).map_err(|m| Error::config(r.key("groups"), m))?;
                        let weights = match r.vector("group_weights")? {
                            Some(w) => w.as_slice().to_vec(),
                            None => vec![r.parse("weight")?.unwrap_or(1.0); groups.len()],
                        };
                        let l1: f64 = r.parse("l1_weight")?.unwrap_or(0.0);
                        let part = GroupPartition::new(groups, weights, l1).map_err(|e| wrap(r.key("groups"), e))?;
                        ProximableFunction::group_lasso(part)
                    }
                };
                let dim: usize = match &func.kind {
                    ProxKind::GroupLasso(part) => r.parse("dim")?.unwrap_or(part.dim()),
                    _ => r.req_parse("dim")?,
                };
                (Shape::Vector(dim), func)
            }
            "nuclear" => {
                let rows: usize = r.req_parse("rows")?;
                let cols: usize = r.req_parse("cols")?;
                let w: f64 = r.req_parse("weight")?;
                (Shape::Matrix { rows, cols }, ProximableFunction::nuclear(w, rows, cols))
            }
            "frobenius_ball_masked" => {
                let mask = r.req_matrix("mask")?;
                let radius: f64 = r.req_parse("radius")?;
                let shape = Shape::Matrix { rows: mask.nrows(), cols: mask.ncols() };
                (shape, ProximableFunction::frobenius_ball_masked(radius, mask))
            }
            other => {
                return Err(Error::config(
                    r.key("kind"),
                    format!(
                        "unknown nonsmooth kind `{other}` \
                         (zero, l1, group_lasso, nuclear, nonneg, nonpos, frobenius_ball_masked)"
                    ),
                ))
            }
        };
        let mut func = func;
        if let Some(m) = r.parse::<f64>("quadratic")? {
            func = func.plus_quadratic(m);
        }
        if let Some(m) = r.parse("strong_convexity")? {
            func = func.with_strong_convexity(m);
        }
        let f = match r.matrix("f")? {
            Some(f) => f,
            None => DMatrix::zeros(p, shape.len()),
        };
        if f.nrows() != p || f.ncols() != shape.len() {
            return Err(Error::config(
                r.key("f"),
                format!("expected {p}x{}, got {}x{}", shape.len(), f.nrows(), f.ncols()),
            ));
        }
        let block = NonsmoothBlock::new(shape, func).map_err(|e| wrap(r.key("kind"), e))?;
        r.finish()?;
        f_ops.push(LinearOperator::from_matrix(f));
        nonsmooth.push(block);
    }

    let e = BlockOperator::new(e_ops, p).map_err(|e| wrap("smooth".into(), e))?;
    let f = BlockOperator::new(f_ops, p).map_err(|e| wrap("nonsmooth".into(), e))?;
    let problem = SaddleProblem::new(smooth, nonsmooth, e, f, q, mu, alpha).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::config("problem", m),
        other => wrap("problem".into(), other),
    })?;

    let mut init = problem.zero_state();
    if let Some(sec) = file.single("init")? {
        let mut r = Reader::new(sec, false);
        for (k, n) in [("x", problem.nx()), ("z", problem.nz()), ("y", problem.nz()), ("lam", problem.p())] {
            if let Some(v) = r.vector(k)? {
                if v.len() != n {
                    return Err(Error::config(r.key(k), format!("expected {n} entries, got {}", v.len())));
                }
                match k {
                    "x" => init.x = v,
                    "z" => init.z = v,
                    "y" => init.y = v,
                    _ => init.lam = v,
                }
            }
        }
        r.finish()?;
    }
    Ok(InlineProblem { problem, init })
}

fn parse_groups(s: &str) -> std::result::Result<Vec<Vec<usize>>, String> {
    s.split('|')
        .map(|g| {
            g.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<usize>().map_err(|e| format!("cannot parse `{t}`: {e}")))
                .collect()
        })
        .collect()
}

/// Inline config text for a problem whose operators are dense and whose
/// blocks have a config representation.
pub fn problem_to_config(prob: &SaddleProblem<f64>, init: &PrimalDualState<f64>) -> Result<String> {
    let unsupported = |what: &str| Error::InvalidArgument(format!("{what} has no config representation"));
    let mut out = String::new();
    let _ = writeln!(out, "[problem]\nmu = {}\nalpha = {}", fmt_f64(prob.mu), fmt_f64(prob.alpha));
    for (i, b) in prob.smooth_blocks().iter().enumerate() {
        out.push_str("\n[smooth]\n");
        match &b.kind {
            SmoothKind::Zero => {
                let _ = writeln!(out, "kind = zero\ndim = {}", b.dim());
            }
            SmoothKind::Quadratic { h, c } => {
                let _ = writeln!(out, "kind = quadratic\nh = {}\nc = {}", fmt_matrix(h), fmt_vector(c));
            }
            SmoothKind::LeastSquares { g, h } => {
                let _ = writeln!(out, "kind = least_squares\ng = {}\nh = {}", fmt_matrix(g), fmt_vector(h));
            }
            _ => return Err(unsupported(&format!("smooth block {i}"))),
        }
        match b.lipschitz {
            Some(l) => {
                let _ = writeln!(out, "lipschitz = {}", fmt_f64(l));
            }
            None => return Err(unsupported(&format!("smooth block {i} without a Lipschitz constant"))),
        }
        let _ = writeln!(out, "strong_convexity = {}", fmt_f64(b.strong_convexity));
        let _ = writeln!(out, "e = {}", fmt_matrix(prob.e().block(i).to_dense()?));
    }
    for (j, b) in prob.nonsmooth_blocks().iter().enumerate() {
        out.push_str("\n[nonsmooth]\n");
        let func = &b.func;
        match (&func.kind, b.shape) {
            (ProxKind::Zero, Shape::Vector(n)) => {
                let _ = writeln!(out, "kind = zero\ndim = {n}");
            }
            (ProxKind::L1 { weight }, Shape::Vector(n)) => {
                let _ = writeln!(out, "kind = l1\ndim = {n}\nweight = {}", fmt_f64(*weight));
            }
            (ProxKind::Indicator(o), Shape::Vector(n)) => {
                let k = if *o == Orthant::Nonneg { "nonneg" } else { "nonpos" };
                let _ = writeln!(out, "kind = {k}\ndim = {n}");
            }
            (ProxKind::GroupLasso(part), Shape::Vector(n)) => {
                let groups: Vec<String> = part
                    .groups()
                    .iter()
                    .map(|g| g.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" "))
                    .collect();
                let w = DVector::from_vec(part.weights().to_vec());
                let _ = writeln!(
                    out,
                    "kind = group_lasso\ndim = {n}\ngroups = {}\ngroup_weights = {}\nl1_weight = {}",
                    groups.join(" | "),
                    fmt_vector(&w),
                    fmt_f64(part.l1_weight())
                );
            }
            (ProxKind::Nuclear { weight, rows, cols }, _) => {
                let _ = writeln!(out, "kind = nuclear\nrows = {rows}\ncols = {cols}\nweight = {}", fmt_f64(*weight));
            }
            (ProxKind::FrobeniusBallMasked { radius, mask }, _) => {
                let _ = writeln!(
                    out,
                    "kind = frobenius_ball_masked\nradius = {}\nmask = {}",
                    fmt_f64(*radius),
                    fmt_matrix(mask)
                );
            }
            _ => return Err(unsupported(&format!("nonsmooth block {j}"))),
        }
        if func.quadratic != 0.0 {
            let _ = writeln!(out, "quadratic = {}", fmt_f64(func.quadratic));
        }
        let _ = writeln!(out, "strong_convexity = {}", fmt_f64(func.strong_convexity));
        let _ = writeln!(out, "f = {}", fmt_matrix(prob.f().block(j).to_dense()?));
    }
    let _ = writeln!(out, "\n[constraints]\nq = {}", fmt_vector(prob.q()));
    let _ = writeln!(
        out,
        "\n[init]\nx = {}\nz = {}\ny = {}\nlam = {}",
        fmt_vector(&init.x),
        fmt_vector(&init.z),
        fmt_vector(&init.y),
        fmt_vector(&init.lam)
    );
    Ok(out)
}
