//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use scnopt::algebra::{power, product, scaled_sum};
use scnopt::audit::{
    audit_samples, identity_audit, registry_forms, witness_sweep, GridSpec, IdentityClass, Registry,
};
use scnopt::form::{validate_form, WITNESS_TOL};
use scnopt::penalty::{penalty_f, penalty_f_theta, penalty_g, penalty_g2};
use scnopt::problem::{load_problem, Problem};
use scnopt::solver::{apfa_solve, kkt_check, SolveResult, SolveStatus};
use scnopt::{make_catalog_form, CatalogId, CatalogParams, SaddlePoint, ScnForm, VarPartition};

type Outcome = Result<String, String>;

fn problem_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("problems")
        .join(format!("{name}.scn.json"))
}

fn problem(name: &str) -> Problem {
    load_problem(&problem_path(name)).unwrap()
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let t = start.elapsed();
    if t <= limit {
        Ok(t)
    } else {
        Err(format!("took {t:.1?}, limit {limit:?}"))
    }
}

fn witness_suite() -> Outcome {
    let start = Instant::now();
    let registry = Registry::shipped();
    let (mut clean, mut registered) = (0, Vec::new());
    for f in registry_forms().map_err(|e| e.to_string())? {
        let mut ok = true;
        for x in audit_samples(&f, 100, 1) {
            let holds = match (f.witness_check(&x), f.reference(&x)) {
                (Ok(c), Ok(r)) => {
                    c.feasible
                        && c.max_violation <= WITNESS_TOL
                        && (c.g_value - r).abs() <= WITNESS_TOL
                }
                _ => false,
            };
            ok &= holds;
        }
        if ok {
            clean += 1;
            continue;
        }
        match registry.get(f.name()) {
            Some(e) if e.class == IdentityClass::Failed && e.counterexample != "none" => {
                registered.push(f.name().to_string())
            }
            _ => {
                return Err(format!(
                    "{} misses the identity and has no registered counterexample",
                    f.name()
                ))
            }
        }
    }
    let t = within(start, Duration::from_secs(10))?;
    Ok(format!(
        "{clean} forms hold on 100 samples, registered failures {registered:?}, {t:.1?}"
    ))
}

fn kkt_reproduction() -> Outcome {
    let p = problem("quartic_kkt");
    let point = SaddlePoint::new(p.form.partition(), vec![0.0; 3]).unwrap();
    let r = kkt_check(&p.form, &point, &[1.0; 3], &[1.0; 3]).map_err(|e| e.to_string())?;
    let ok = r.stationarity_residual_xy <= 1e-12
        && r.stationarity_residual_z <= 1e-12
        && r.complementarity_residual == 0.0;
    let detail = format!(
        "stationarity {:e} / {:e}, complementarity {:e}",
        r.stationarity_residual_xy, r.stationarity_residual_z, r.complementarity_residual
    );
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn spread(x: &[f64]) -> f64 {
    x.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - x.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn maxabs_run(
    name: &str,
    runs: &mut Vec<(String, SolveResult, f64)>,
    check_spread: bool,
    limit: Option<Duration>,
) -> Outcome {
    let p = problem(name);
    let start = Instant::now();
    let r = apfa_solve(&p.form, &p.solver, &p.start).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    let f = p.form.reference(r.point.x()).map_err(|e| e.to_string())?;
    let s = spread(r.point.x());
    let detail = format!(
        "status {}, {} outer iterations, spread {s:e}, f {f:e}, {t:.1?}",
        r.status.as_str(),
        r.trace.len()
    );
    let ok = r.status == SolveStatus::EpsFeasibleConverged
        && r.trace.len() <= 20
        && f.abs() <= 1e-2
        && (!check_spread || s <= 1e-2)
        && limit.is_none_or(|l| t <= l);
    runs.push((name.to_string(), r, p.solver.eps));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn penalty_arithmetic() -> Outcome {
    let form = problem("quartic_kkt").form;
    let p = SaddlePoint::new(VarPartition::new(1, 1, 1).unwrap(), vec![1.0, 1.0, 0.0]).unwrap();
    let e = |r: Result<f64, scnopt::ScnError>| r.map_err(|e| e.to_string());
    let values = [
        e(penalty_f(&form, &p, 10.0))?,
        e(penalty_g(&form, &p, 10.0))?,
        e(penalty_g2(&form, &p, 10.0).map(|r| r.0))?,
        e(penalty_f_theta(&form, &p, 10.0, 1.01).map(|r| r.0))?,
    ];
    if values == [23.0, 17.0, 17.0, 23.0] {
        Ok(format!("F, G, G2, F_theta = {values:?}"))
    } else {
        Err(format!("got {values:?}"))
    }
}

fn gradient_check() -> Outcome {
    let mut worst = (0.0, String::new());
    let mut checked = 0;
    for f in registry_forms().map_err(|e| e.to_string())? {
        let c = common::smoothed_gradient_check(&f, 50, 17, 10.0, 1.01);
        if c.checked == 0 {
            return Err(format!("{}: no point away from the kinks", f.name()));
        }
        checked += c.checked;
        if c.worst > worst.0 {
            worst = (c.worst, f.name().to_string());
        }
    }
    let detail = format!(
        "{checked} points, worst relative error {:e} ({})",
        worst.0, worst.1
    );
    if worst.0 <= 1e-5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn violation_bound(runs: &[(String, SolveResult, f64)]) -> Outcome {
    let mut lines = Vec::new();
    for (name, r, eps) in runs {
        let last = r.final_violation().unwrap_or(f64::INFINITY);
        if !r.violation_bound_holds() {
            return Err(format!("{name}: P_k exceeds 2L/rho_k"));
        }
        if r.status == SolveStatus::EpsFeasibleConverged && last > *eps {
            return Err(format!("{name}: final P {last:e} above eps {eps:e}"));
        }
        lines.push(format!("{name} P={last:e}"));
    }
    Ok(lines.join(", "))
}

fn oracle_controls() -> Outcome {
    let start = Instant::now();
    let mut out = Vec::new();
    for id in [CatalogId::Dc, CatalogId::Sin0Pi] {
        let f = make_catalog_form(id, &CatalogParams::new()).map_err(|e| e.to_string())?;
        let r = identity_audit(
            &f,
            &audit_samples(&f, 4, 2026),
            &GridSpec::with_resolution(2001),
            1e-2,
        )
        .map_err(|e| e.to_string())?;
        if r.class != IdentityClass::Verified {
            return Err(format!("{id}: {}", r.class.as_str()));
        }
        out.push(format!("{id} {}", r.class.as_str()));
    }
    let t = within(start, Duration::from_secs(30))?;
    Ok(format!("{}, {t:.1?}", out.join(", ")))
}

fn operand(id: CatalogId) -> ScnForm {
    make_catalog_form(id, &CatalogParams::new()).unwrap()
}

fn algebra_closure() -> Outcome {
    let (a, b) = (operand(CatalogId::AbsPower), operand(CatalogId::Entropy));
    let e = |r: Result<ScnForm, scnopt::ScnError>| r.map_err(|e| e.to_string());
    let prod = e(product(&a, &b))?;
    let (pa, pb, pp) = (a.partition(), b.partition(), prod.partition());
    if (pp.m1, pp.m2) != (pa.m1 + pb.m1 + 2, pa.m2 + pb.m2 + 1) {
        return Err(format!("product partition {pp:?} from {pa:?} and {pb:?}"));
    }
    let sum = e(scaled_sum(&a, &b, 2.0, 0.5))?;
    if (sum.partition().m1, sum.partition().m2) != (pa.m1 + pb.m1, pa.m2 + pb.m2) {
        return Err(format!("scaled_sum partition {:?}", sum.partition()));
    }
    let outputs = [prod, sum, e(power(&a, 0.5))?, e(power(&a, 3.0))?];
    for f in &outputs {
        let report = validate_form(f, 100, 3);
        if !report.passed() {
            return Err(format!(
                "{} fails {:?}",
                f.name(),
                report.failures().map(|c| &c.name).collect::<Vec<_>>()
            ));
        }
        let sweep = witness_sweep(f, &audit_samples(f, 100, 4));
        if !sweep.holds() {
            return Err(format!(
                "{}: gap {:e} at {:?}",
                f.name(),
                sweep.max_gap,
                sweep.first_failure
            ));
        }
    }
    Ok(outputs
        .iter()
        .map(|f| f.name())
        .collect::<Vec<_>>()
        .join(", "))
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let trace = dir.path().join("trace.csv").display().to_string();
    let [svm, dc, quartic_kkt] = ["svm", "dc", "quartic_kkt"].map(|n| problem_path(n).display().to_string());
    let runs: [Vec<&str>; 6] = [
        vec!["solve", &svm, "--trace", &trace, "--seed", "3"],
        vec!["audit", &dc, "--grid", "401", "--samples", "4"],
        vec!["kkt", &quartic_kkt, "--point", "0,0,0"],
        vec!["witness", &dc, "--x", "1.5"],
        vec!["catalog", "describe", "maxabs_minus_sum"],
        vec!["catalog", "list"],
    ];
    for args in &runs {
        let run = || {
            let out = Command::new(env!("CARGO_BIN_EXE_scnopt"))
                .args(args)
                .output()
                .map_err(|e| e.to_string())?;
            Ok::<_, String>((out.stdout, std::fs::read(&trace).ok()))
        };
        if run()? != run()? {
            return Err(format!("{args:?} differs between runs"));
        }
    }
    Ok(format!("{} commands byte-identical", runs.len()))
}

fn main() {
    let mut runs = Vec::new();
    let results: Vec<(usize, &str, Outcome)> = vec![
        (1, "witness identity suite", witness_suite()),
        (2, "KKT with unit multipliers", kkt_reproduction()),
        (
            3,
            "maxabs_minus_sum n=5",
            maxabs_run("maxabs_n5", &mut runs, true, Some(Duration::from_secs(60))),
        ),
        (4, "maxabs_minus_sum n=10", maxabs_run("maxabs_n10", &mut runs, false, None)),
        (5, "penalty arithmetic", penalty_arithmetic()),
        (6, "smoothed gradients", gradient_check()),
        (7, "violation bound", {
            for name in ["svm", "dc"] {
                let p = problem(name);
                if let Ok(r) = apfa_solve(&p.form, &p.solver, &p.start) {
                    runs.push((name.to_string(), r, p.solver.eps));
                }
            }
            violation_bound(&runs)
        }),
        (8, "oracle positive controls", oracle_controls()),
        (9, "algebra closure", algebra_closure()),
        (10, "CLI determinism", cli_determinism()),
    ];
    let mut failed = 0;
    for (k, name, r) in results {
        match r {
            Ok(d) => println!("criterion {k:>2} PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {k:>2} FAIL  {name}: {d}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
