//! `palflow bench`: the example rate table and a quick invariant sweep.

use crate::run::solve_err;
use crate::CliError;
use nalgebra::DVector;
use palflow::diagnostics::fit_exponential;
use palflow::distributed::{assemble_consensus, decentralized_field, join_centralized, split_centralized};
use palflow::examples::{counterexample_run, gen_lasso_network, ExampleKind, ExampleSpec};
use palflow::flow::{integrate, FlowField, IntegratorConfig};
use palflow::rng::{normal_vector, seeded};
use palflow::{GroupPartition, Orthant, PrimalDualState, ProximableFunction};
use std::fs;
use std::path::Path;
use std::time::Instant;

/// Residual a run must reach to count as converged.
const CONVERGED_KKT: f64 = 1e-6;

pub fn bench(suite: &str, out: Option<&Path>, seed: u64) -> Result<(), CliError> {
    match suite {
        "examples" => examples(out, seed),
        "invariants" => invariants(out, seed),
        other => Err(CliError::Config(format!(
            "unknown bench suite `{other}` (expected examples or invariants)"
        ))),
    }
}

fn write_out(out: Option<&Path>, name: &str, text: &str) -> Result<(), CliError> {
    let Some(dir) = out else { return Ok(()) };
    let path = dir.join(name);
    fs::create_dir_all(dir)
        .and_then(|()| fs::write(&path, text))
        .map_err(|e| CliError::Solve(format!("cannot write {}: {e}", path.display())))
}

struct Row {
    name: &'static str,
    rate: f64,
    r2: f64,
    final_kkt: f64,
    wall: f64,
    ok: bool,
    note: String,
}

fn example_row(kind: ExampleKind, seed: u64) -> Row {
    let start = Instant::now();
    let mut row = Row {
        name: kind.name(),
        rate: f64::NAN,
        r2: f64::NAN,
        final_kkt: f64::NAN,
        wall: 0.0,
        ok: false,
        note: String::new(),
    };
    let spec = ExampleSpec::desk(kind, seed);
    let res = spec
        .build::<f64>()
        .and_then(|inst| integrate(&inst.problem, &inst.init, &spec.run_config()));
    row.wall = start.elapsed().as_secs_f64();
    match res {
        Ok(tr) => {
            row.final_kkt = tr.final_kkt().unwrap_or(f64::NAN);
            match fit_exponential(&tr.times, &tr.kkt, 0.3) {
                Ok(fit) => {
                    row.rate = fit.rate;
                    row.r2 = fit.r2;
                }
                Err(e) => row.note = e.to_string(),
            }
            row.ok = row.final_kkt < CONVERGED_KKT;
            if !row.ok && row.note.is_empty() {
                row.note = format!("residual above {CONVERGED_KKT:e}");
            }
        }
        Err(e) => row.note = e.to_string(),
    }
    row
}

fn examples(out: Option<&Path>, seed: u64) -> Result<(), CliError> {
    let kinds = [
        ExampleKind::LassoNetwork,
        ExampleKind::SparseGroupLasso,
        ExampleKind::Pcp,
        ExampleKind::CovarianceCompletion,
    ];
    let mut csv = String::from("example,rate,r2,final_kkt,wall_time_s,status\n");
    println!(
        "{:<24} {:>11} {:>8} {:>11} {:>9}  status",
        "example", "rate", "r2", "final kkt", "wall s"
    );
    let mut any_ok = false;
    for kind in kinds {
        let r = example_row(kind, seed);
        any_ok |= r.ok;
        let status = if r.ok { "ok".to_string() } else { format!("FAIL: {}", r.note) };
        println!(
            "{:<24} {:>11.4e} {:>8.4} {:>11.3e} {:>9.2}  {status}",
            r.name, r.rate, r.r2, r.final_kkt, r.wall
        );
        csv.push_str(&format!(
            "{},{:e},{},{:e},{},{}\n",
            r.name,
            r.rate,
            r.r2,
            r.final_kkt,
            r.wall,
            if r.ok { "ok" } else { "fail" }
        ));
    }
    write_out(out, "bench_examples.csv", &csv)?;
    if any_ok {
        Ok(())
    } else {
        Err(CliError::Solve("every example failed".into()))
    }
}

type Check = (&'static str, fn(u64) -> Result<String, String>);

fn invariants(out: Option<&Path>, seed: u64) -> Result<(), CliError> {
    let checks: [Check; 5] = [
        ("prox firm nonexpansiveness", prox_firm),
        ("moreau envelope gradient", moreau_gradient),
        ("decentralized field matches centralized", decentralized_matches),
        ("counterexample escape time", escape_time),
        ("convex run reaches the residual target", convex_run),
    ];
    let mut csv = String::from("check,status,detail\n");
    let mut failed = 0;
    for (name, f) in checks {
        let (ok, detail) = match f(seed) {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        let v = if ok { "PASS" } else { "FAIL" };
        println!("{name}: {v} ({detail})");
        csv.push_str(&format!("{name},{v},{}\n", detail.replace(',', ";")));
    }
    write_out(out, "bench_invariants.csv", &csv)?;
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Solve(format!("{failed} invariant check(s) failed")))
    }
}

fn sample_functions() -> Vec<(&'static str, ProximableFunction<f64>, usize)> {
    let part = GroupPartition::uniform(6, 3, 0.4, 0.1).expect("valid partition");
    vec![
        ("l1", ProximableFunction::l1(0.7), 6),
        ("group_lasso", ProximableFunction::group_lasso(part), 6),
        ("nuclear", ProximableFunction::nuclear(0.5, 2, 3), 6),
        ("nonneg", ProximableFunction::indicator(Orthant::Nonneg), 6),
        ("l1+quadratic", ProximableFunction::l1(0.3).plus_quadratic(0.5), 6),
    ]
}

fn prox_firm(seed: u64) -> Result<String, String> {
    let mut rng = seeded(seed);
    let mut worst: f64 = f64::NEG_INFINITY;
    for (name, g, n) in sample_functions() {
        for _ in 0..200 {
            let u: DVector<f64> = normal_vector(&mut rng, n) * 3.0;
            let v: DVector<f64> = normal_vector(&mut rng, n) * 3.0;
            let pu = g.prox(0.8, u.as_slice()).map_err(|e| e.to_string())?;
            let pv = g.prox(0.8, v.as_slice()).map_err(|e| e.to_string())?;
            let dp = &pu - &pv;
            let slack = dp.norm_squared() - dp.dot(&(&u - &v));
            worst = worst.max(slack);
            if slack > 1e-10 * (1.0 + (&u - &v).norm_squared()) {
                return Err(format!("{name}: |Pu-Pv|^2 exceeds <Pu-Pv, u-v> by {slack:e}"));
            }
        }
    }
    Ok(format!("worst slack {worst:.2e}"))
}

fn moreau_gradient(seed: u64) -> Result<String, String> {
    let mut rng = seeded(seed.wrapping_add(1));
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (name, g, n) in sample_functions() {
        for _ in 0..50 {
            let v: DVector<f64> = normal_vector(&mut rng, n) * 2.0;
            let d: DVector<f64> = normal_vector(&mut rng, n).normalize();
            let grad = g.moreau_grad(0.8, v.as_slice()).map_err(|e| e.to_string())?;
            let fp = g.moreau_value(0.8, (&v + &d * h).as_slice()).map_err(|e| e.to_string())?;
            let fm = g.moreau_value(0.8, (&v - &d * h).as_slice()).map_err(|e| e.to_string())?;
            let err = ((fp - fm) / (2.0 * h) - grad.dot(&d)).abs();
            worst = worst.max(err);
            if err > 1e-5 * (1.0 + grad.norm()) {
                return Err(format!("{name}: directional derivative off by {err:e}"));
            }
        }
    }
    Ok(format!("worst error {worst:.2e}"))
}

fn decentralized_matches(seed: u64) -> Result<String, String> {
    let l = gen_lasso_network::<f64>(4, 6, 3, seed).map_err(|e| e.to_string())?;
    let prob = assemble_consensus(&l.network, 1.0, 1.0).map_err(|e| e.to_string())?;
    let mut rng = seeded(seed.wrapping_add(2));
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let s = PrimalDualState::new(
            normal_vector(&mut rng, prob.nx()),
            normal_vector(&mut rng, prob.nz()),
            normal_vector(&mut rng, prob.nz()),
            normal_vector(&mut rng, prob.p()),
        );
        let central = FlowField::new(&prob).vector_field(&s).map_err(|e| e.to_string())?;
        let agents = split_centralized(&l.network, &s).map_err(|e| e.to_string())?;
        let dec = decentralized_field(&l.network, &agents, 1.0, 1.0).map_err(|e| e.to_string())?;
        let joined = join_centralized(&l.network, &dec).map_err(|e| e.to_string())?;
        let expect = split_centralized(&l.network, &central).map_err(|e| e.to_string())?;
        let expect = join_centralized(&l.network, &expect).map_err(|e| e.to_string())?;
        let err = (joined.pack() - expect.pack()).norm() / (1.0 + expect.pack().norm());
        worst = worst.max(err);
    }
    if worst < 1e-10 {
        Ok(format!("worst relative difference {worst:.2e}"))
    } else {
        Err(format!("relative difference {worst:e}"))
    }
}

fn escape_time(_seed: u64) -> Result<String, String> {
    let cfg = IntegratorConfig {
        t_end: 20.0,
        stop_kkt: None,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    for beta in [1.0f64, 5.0] {
        let run = counterexample_run(beta, 1.0, 1.0, &cfg).map_err(|e| e.to_string())?;
        worst = worst.max((run.escape_time - beta).abs());
    }
    if worst < 1e-6 {
        Ok(format!("worst deviation {worst:.2e}"))
    } else {
        Err(format!("escape time off by {worst:e}"))
    }
}

fn convex_run(seed: u64) -> Result<String, String> {
    let spec = ExampleSpec::desk(ExampleKind::LassoNetwork, seed);
    let inst = spec.build::<f64>().map_err(|e| e.to_string())?;
    let tr = integrate(&inst.problem, &inst.init, &spec.run_config())
        .map_err(solve_err)
        .map_err(|e| e.to_string())?;
    let k = tr.final_kkt().unwrap_or(f64::NAN);
    if k < CONVERGED_KKT {
        Ok(format!("lasso residual {k:.2e} at t = {:.1}", tr.times.last().unwrap_or(&0.0)))
    } else {
        Err(format!("lasso residual {k:e}"))
    }
}
