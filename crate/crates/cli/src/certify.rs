//! `palflow certify`: structural conditions and certificate constants.

use crate::run::{config_err, prepare, solve_err, Target};
use crate::{CliError, RunArgs};
use palflow::examples::counterexample_problem;
use palflow::{Error, SaddleProblem};

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn report(prob: &SaddleProblem<f64>) -> Result<String, CliError> {
    let mut lines = vec![
        format!("variables: x {}, z {}, constraints {}", prob.nx(), prob.nz(), prob.p()),
        format!("mu = {:e}, alpha = {:e}", prob.mu, prob.alpha),
    ];
    let rank = prob.check_rank_condition().map_err(solve_err)?;
    let range = prob.check_range_condition().map_err(solve_err)?;
    lines.push(format!("rank condition: {}", verdict(rank.holds)));
    if !rank.holds {
        lines.push(format!(
            "  columns of smooth blocks {:?} and nonsmooth blocks {:?} are rank deficient",
            rank.i, rank.j
        ));
    }
    lines.push(format!("range condition: {}", verdict(range)));
    let mg_ok = prob.mu * prob.m_g_max() <= 1.0;
    lines.push(format!("mu * m_g <= 1: {}", verdict(mg_ok)));
    let fail = |lines: Vec<String>, msg: String| {
        println!("{}", lines.join("\n"));
        Err(CliError::Solve(msg))
    };

    let l_f = match prob.lipschitz_f() {
        Ok(l) => l,
        Err(Error::MissingLipschitz(which)) => {
            println!("{}", lines.join("\n"));
            return Err(CliError::Config(format!(
                "the certificate needs a gradient Lipschitz constant for {which}; declare `lipschitz` for it"
            )));
        }
        Err(e) => return Err(solve_err(e)),
    };
    lines.push(format!("L_f = {l_f:e}"));
    if !(rank.holds && range && mg_ok) {
        lines.push("certificate: not available".into());
        return fail(lines, "structural conditions do not hold".into());
    }
    let c = match prob.ges_certificate() {
        Ok(c) => c,
        Err(e @ Error::AssumptionFailed(_)) => {
            lines.push("certificate: not available".into());
            return fail(lines, e.to_string());
        }
        Err(e) => return Err(solve_err(e)),
    };
    lines.extend([
        format!("m_xz = {:e}", c.m_xz),
        format!("alpha_bar2 = {:e}", c.alpha_bar2),
        format!("M2 = {:e}", c.big_m2),
        format!("rho2 = {:e}", c.rho2),
        format!("c1 = {:e}", c.c1),
        format!("c2 = {:e}", c.c2),
        format!("c3 = {:e}", c.c3),
    ]);
    if c.empty_set_convention {
        lines.push("note: every block is strongly convex; m_xz is the smallest modulus".into());
    }
    if c.m_xz_capped {
        lines.push("note: m_xz lowered to the quadratic lower bound".into());
    }
    lines.push(format!(
        "alpha in (0, alpha_bar2): {}",
        if c.alpha_in_range { "yes" } else { "no" }
    ));
    Ok(lines.join("\n"))
}

pub fn certify(args: &RunArgs) -> Result<(), CliError> {
    let p = prepare(args)?;
    let prob = match p.target {
        Target::Centralized { problem, .. } => problem,
        Target::Distributed(l) => l.instance.problem,
        Target::Counterexample { mu, alpha, .. } => counterexample_problem(mu, alpha).map_err(config_err)?,
    };
    println!("{}", report(&prob)?);
    Ok(())
}
