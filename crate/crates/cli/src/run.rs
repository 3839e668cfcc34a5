//! `palflow solve`: config resolution, the run itself and its outputs.

use crate::svg;
use crate::{CliError, RunArgs};
use palflow::config::{DiagnosticsLevel, FlowOverrides, ProblemSource, RunConfig};
use palflow::diagnostics::{diagnostic_row, distance_to_solution, lyapunov_v1, InnerSolve, ReferenceSolution};
use palflow::distributed::{join_centralized, simulate, split_centralized, unpack_states};
use palflow::examples::{counterexample_run, gen_lasso_network, ExampleSpec, LassoNetwork};
use palflow::flow::{integrate, IntegratorConfig, Method, Termination, Trajectory};
use palflow::{Error, PrimalDualState, SaddleProblem};
use std::fs;
use std::path::Path;
use std::time::Instant;

pub enum Target {
    Centralized {
        problem: SaddleProblem<f64>,
        init: PrimalDualState<f64>,
        reference: Option<ReferenceSolution<f64>>,
    },
    Distributed(Box<LassoNetwork<f64>>),
    /// Reduced three-variable dynamics with escape detection.
    Counterexample { beta: f64, mu: f64, alpha: f64 },
}

impl Target {
    pub fn params(&self) -> (f64, f64) {
        match self {
            Target::Centralized { problem, .. } => (problem.mu, problem.alpha),
            Target::Distributed(l) => (l.instance.problem.mu, l.instance.problem.alpha),
            Target::Counterexample { mu, alpha, .. } => (*mu, *alpha),
        }
    }
}

/// A config with every default filled in, ready to run.
pub struct Prepared {
    pub config: RunConfig,
    pub integrator: IntegratorConfig<f64>,
    pub target: Target,
}

pub fn config_err(e: Error) -> CliError {
    CliError::Config(e.to_string())
}

pub fn solve_err(e: Error) -> CliError {
    CliError::Solve(e.to_string())
}

pub fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    RunConfig::from_str(&text).map_err(config_err)
}

/// Builds the problem described by `cfg`, with `mu`/`alpha` overrides applied.
pub fn build_target(cfg: &RunConfig) -> Result<Target, CliError> {
    let with = |p: SaddleProblem<f64>| -> Result<SaddleProblem<f64>, CliError> {
        let mu = cfg.mu.unwrap_or(p.mu);
        let alpha = cfg.alpha.unwrap_or(p.alpha);
        p.with_params(mu, alpha).map_err(config_err)
    };
    match &cfg.source {
        ProblemSource::Example { spec: ExampleSpec::Counterexample { beta, mu, alpha }, .. } => {
            let (mu, alpha) = (cfg.mu.unwrap_or(*mu), cfg.alpha.unwrap_or(*alpha));
            if !(mu > 0.0 && alpha > 0.0 && *beta > 0.0) {
                return Err(CliError::Config("beta, mu and alpha must be positive".into()));
            }
            Ok(Target::Counterexample { beta: *beta, mu, alpha })
        }
        ProblemSource::Example {
            spec: ExampleSpec::LassoNetwork { agents, dim, meas, seed },
            distributed: true,
        } => {
            let mut l = gen_lasso_network::<f64>(*agents, *dim, *meas, *seed).map_err(config_err)?;
            l.instance.problem = with(l.instance.problem)?;
            Ok(Target::Distributed(Box::new(l)))
        }
        ProblemSource::Example { spec, .. } => {
            let inst = spec.build::<f64>().map_err(config_err)?;
            Ok(Target::Centralized {
                problem: with(inst.problem)?,
                init: inst.init,
                reference: inst.reference,
            })
        }
        ProblemSource::Inline(p) => Ok(Target::Centralized {
            problem: with(p.problem.clone())?,
            init: p.init.clone(),
            reference: None,
        }),
    }
}

/// Reads the config and folds the command-line overrides into it.
pub fn prepare(args: &RunArgs) -> Result<Prepared, CliError> {
    let mut config = read_config(&args.config)?;
    if let (Some(s), ProblemSource::Example { spec, .. }) = (args.seed, &mut config.source) {
        match spec {
            ExampleSpec::LassoNetwork { seed, .. }
            | ExampleSpec::Pcp { seed, .. }
            | ExampleSpec::CovarianceCompletion { seed, .. }
            | ExampleSpec::SparseGroupLasso { seed, .. } => *seed = s,
            ExampleSpec::Counterexample { .. } => {}
        }
    }
    config.mu = args.mu.or(config.mu);
    config.alpha = args.alpha.or(config.alpha);
    config.svg |= args.svg;
    let target = build_target(&config)?;

    let base = match &config.source {
        ProblemSource::Example { spec, .. } => spec.run_config(),
        ProblemSource::Inline(_) => IntegratorConfig::default(),
    };
    let mut integrator = config.flow.apply(base);
    if let Some(m) = &args.method {
        integrator.method = m.parse::<Method>().map_err(config_err)?;
    }
    if let Some(t) = args.t_end {
        integrator.t_end = t;
    }
    if let Some(s) = args.stop_kkt {
        integrator.stop_kkt = Some(s);
    }
    integrator.validate().map_err(|e| match e {
        Error::Config { key, message } => CliError::Config(format!("config error at key `flow.{key}`: {message}")),
        other => config_err(other),
    })?;

    let (mu, alpha) = target.params();
    config.mu = Some(mu);
    config.alpha = Some(alpha);
    config.flow = FlowOverrides::full(&integrator);
    Ok(Prepared { config, integrator, target })
}

/// Norm of the primal reference. The state error is measured on `(x, z)`
/// only: dual solutions need not be unique (the lasso splits its l1
/// subgradient freely across agents at zero coordinates).
fn state_error_scale(rf: &ReferenceSolution<f64>) -> f64 {
    let n = (rf.x.norm_squared() + rf.z.norm_squared()).sqrt();
    if n > 0.0 {
        n
    } else {
        1.0
    }
}

/// Appends reference-based columns computed from each recorded state.
fn add_diagnostics(
    tr: &mut Trajectory<f64>,
    prob: &SaddleProblem<f64>,
    rf: Option<&ReferenceSolution<f64>>,
    level: DiagnosticsLevel,
    state_of: impl Fn(&Trajectory<f64>, usize) -> palflow::Result<PrimalDualState<f64>>,
) -> palflow::Result<()> {
    if level == DiagnosticsLevel::None || tr.is_empty() {
        return Ok(());
    }
    let states: Vec<PrimalDualState<f64>> = (0..tr.len()).map(|i| state_of(tr, i)).collect::<palflow::Result<_>>()?;
    let Some(rf) = rf else {
        let obj = states.iter().map(|s| prob.penalty_objective(&s.x, &s.z)).collect();
        return tr.push_column("objective", obj);
    };
    let scale = state_error_scale(rf);
    let f_star = rf.optimal_value;
    let f_scale = if f_star != 0.0 { f_star.abs() } else { 1.0 };
    let mut names = vec!["relative_state_error", "relative_function_error", "V1", "primal_dist", "dual_dist"];
    if level == DiagnosticsLevel::Full {
        names.extend(["V2", "primal_gap", "dual_gap"]);
    }
    let mut cols = vec![Vec::with_capacity(states.len()); names.len()];
    for s in &states {
        let (pd, dd) = distance_to_solution(rf, s);
        let mut row = vec![
            pd / scale,
            (prob.penalty_objective(&s.x, &s.z) - f_star).abs() / f_scale,
            lyapunov_v1(rf, prob, s),
            pd,
            dd,
        ];
        if level == DiagnosticsLevel::Full {
            let full = diagnostic_row(prob, rf, s, InnerSolve::new(1e-10))?;
            row.extend([full[1], full[2], full[3]]);
        }
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    for (n, c) in names.into_iter().zip(cols) {
        tr.push_column(n, c)?;
    }
    Ok(())
}

/// Runs the prepared config and returns the trajectory with all columns.
pub fn execute(p: &Prepared) -> Result<Trajectory<f64>, CliError> {
    let level = p.config.diagnostics;
    let cfg = &p.integrator;
    match &p.target {
        Target::Centralized { problem, init, reference } => {
            let mut tr = integrate(problem, init, cfg).map_err(solve_err)?;
            add_diagnostics(&mut tr, problem, reference.as_ref(), level, |tr, i| Ok(tr.state(i))).map_err(solve_err)?;
            Ok(tr)
        }
        Target::Distributed(l) => {
            let prob = &l.instance.problem;
            let init = split_centralized(&l.network, &l.instance.init).map_err(solve_err)?;
            let mut tr = simulate(&l.network, &init, prob.alpha, prob.mu, cfg).map_err(solve_err)?;
            let net = &l.network;
            add_diagnostics(&mut tr, prob, l.instance.reference.as_ref(), level, |tr, i| {
                join_centralized(net, &unpack_states(net, tr.states[i].as_slice())?)
            })
            .map_err(solve_err)?;
            Ok(tr)
        }
        Target::Counterexample { beta, mu, alpha } => counterexample_run(*beta, *mu, *alpha, cfg)
            .map(|r| r.trajectory)
            .map_err(solve_err),
    }
}

fn io_err(what: &str, path: &Path, e: std::io::Error) -> CliError {
    CliError::Solve(format!("cannot write {what} {}: {e}", path.display()))
}

pub fn manifest_text(p: &Prepared, args: &RunArgs) -> Result<String, CliError> {
    let extra = [
        ("version", env!("CARGO_PKG_VERSION").to_string()),
        ("config", args.config.display().to_string()),
        ("out", args.out.display().to_string()),
        ("seed", args.seed.map_or("none".into(), |s| s.to_string())),
    ];
    p.config.to_config_string(&extra).map_err(solve_err)
}

pub fn solve(args: &RunArgs) -> Result<(), CliError> {
    let prepared = prepare(args)?;
    let manifest = manifest_text(&prepared, args)?;
    let start = Instant::now();
    let tr = execute(&prepared)?;
    let wall = start.elapsed().as_secs_f64();

    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| io_err("output directory", out, e))?;
    let csv_path = out.join("trajectory.csv");
    let mut csv = Vec::new();
    tr.write_csv(&mut csv, prepared.config.include_state).map_err(solve_err)?;
    fs::write(&csv_path, csv).map_err(|e| io_err("trajectory", &csv_path, e))?;
    let man_path = out.join("manifest.cfg");
    fs::write(&man_path, manifest).map_err(|e| io_err("manifest", &man_path, e))?;
    if prepared.config.svg {
        write_plots(&tr, out)?;
    }

    println!("termination: {}", tr.termination.name());
    println!("t_final: {:e}", tr.times.last().copied().unwrap_or(0.0));
    println!("steps: {} accepted, {} rejected", tr.steps, tr.rejected);
    if let Some(k) = tr.final_kkt() {
        println!("final kkt residual: {k:e}");
    }
    for name in ["relative_state_error", "relative_function_error", "messages_total"] {
        if let Some(v) = tr.column(name).and_then(|c| c.last()) {
            println!("final {}: {v:e}", name.replace('_', " "));
        }
    }
    if let Some(t) = tr.event_time {
        println!("escape time: {t:.9}");
    }
    println!("wall time: {wall:.3} s");
    println!("wrote {}", csv_path.display());

    if tr.termination == Termination::MaxSteps {
        return Err(CliError::Solve(format!(
            "step budget of {} exhausted at t = {:e}",
            prepared.integrator.max_steps,
            tr.times.last().copied().unwrap_or(0.0)
        )));
    }
    Ok(())
}

fn write_plots(tr: &Trajectory<f64>, out: &Path) -> Result<(), CliError> {
    let t = &tr.times;
    let (file, title, series): (&str, &str, Vec<(&str, &[f64])>) =
        match (tr.column("relative_state_error"), tr.column("relative_function_error")) {
            (Some(s), Some(f)) => (
                "errors.svg",
                "relative error",
                vec![("state", s), ("function value", f)],
            ),
            _ => ("kkt_residual.svg", "optimality residual", vec![("kkt residual", &tr.kkt[..])]),
        };
    let path = out.join(file);
    let text = svg::log_plot(title, t, &series);
    fs::write(&path, text).map_err(|e| io_err("plot", &path, e))
}
