//! The `scnopt` command line: problem files in, JSON reports and CSV traces out.
//!
//! Exit codes: 0 on success, 2 when the result is infeasible or a check
//! fails, 1 on usage, file or parse errors. Floats print with 9 significant
//! digits.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::audit::{audit_samples, identity_audit, GridSpec, IdentityClass};
use crate::catalog::{make_catalog_form, CatalogId, CatalogParams, StructuredKind};
use crate::domain::SaddlePoint;
use crate::error::ScnError;
use crate::problem::{load_problem, InlineForm, Problem};
use crate::solver::{apfa_solve, kkt_check, kkt_residual, SolveResult, SolveStatus};

#[derive(Debug, Parser)]
#[command(name = "scnopt", version, about = "Solve and audit SCN-form problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the alternating penalty solver on a problem file.
    Solve {
        file: PathBuf,
        /// Write the outer-iteration trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Override the solver seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Audit the witness and grid min-max identities of the problem's form.
    Audit {
        file: PathBuf,
        /// Grid points per axis.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        /// Number of sampled x.
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-2)]
        tol: f64,
    },
    /// KKT residuals at a point, with estimated or given multipliers.
    Kkt {
        file: PathBuf,
        /// Comma-separated x, y, z coordinates.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, allow_hyphen_values = true, requires = "beta")]
        alpha: Option<String>,
        #[arg(long, allow_hyphen_values = true, requires = "alpha")]
        beta: Option<String>,
    },
    /// Evaluate the witness at x and check g = f there.
    Witness {
        file: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
    },
    /// List or describe catalog entries.
    Catalog {
        #[command(subcommand)]
        action: Option<CatalogAction>,
    },
}

#[derive(Debug, Subcommand)]
enum CatalogAction {
    List,
    Describe { id: String },
}

/// Rounds to 9 significant digits.
pub fn round9(v: f64) -> f64 {
    if v.is_finite() {
        format!("{v:.8e}").parse().unwrap_or(v)
    } else {
        v
    }
}

/// `v` at 9 significant digits, as a CSV or text field.
pub fn fmt9(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let r = round9(v);
    if r != 0.0 && (r.abs() < 1e-4 || r.abs() >= 1e15) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n
                .as_f64()
                .and_then(|f| serde_json::Number::from_f64(round9(f)))
            {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 9 significant digits.
pub fn to_json9<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("reports serialize");
    round_value(&mut v);
    serde_json::to_string_pretty(&v).expect("values serialize")
}

fn parse_list(field: &str, s: &str) -> Result<Vec<f64>, ScnError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| ScnError::InvalidParam(format!("--{field}: `{}`: {e}", t.trim())))
        })
        .collect()
}

/// The trace as CSV: `k,rho,F,G,P,step_norm,f_ref`.
pub fn trace_csv(result: &SolveResult) -> String {
    let mut out = String::from("k,rho,F,G,P,step_norm,f_ref\n");
    for t in &result.trace {
        let f_ref = t.f_ref.map(fmt9).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t.k,
            fmt9(t.rho),
            fmt9(t.f_value),
            fmt9(t.g_value),
            fmt9(t.violation),
            fmt9(t.step_norm),
            f_ref
        ));
    }
    out
}

/// The JSON summary printed by `solve`.
pub fn solve_summary(problem: &Problem, result: &SolveResult) -> Value {
    let last = result.trace.last();
    json!({
        "form": problem.form.name(),
        "status": result.status.as_str(),
        "outer_iterations": result.trace.len(),
        "rho": last.map(|t| t.rho),
        "point": result.point,
        "f_ref": problem.form.reference(result.point.x()).ok(),
        "g": problem.form.eval_g(result.point.as_slice()).ok(),
        "violation": result.final_violation(),
        "violation_bound_holds": result.violation_bound_holds(),
        "trust_window_binding": result.trust_window_binding,
        "multipliers": result.multipliers,
        "diagnostic": result.diagnostic,
    })
}

struct Outcome {
    stdout: String,
    code: i32,
}

fn ok(stdout: String) -> Outcome {
    Outcome { stdout, code: 0 }
}

fn describe(id: CatalogId) -> Result<Value, ScnError> {
    let form = make_catalog_form(id, &CatalogParams::new())?;
    let params: Vec<Value> = id
        .params()
        .iter()
        .map(|p| json!({"name": p.name, "default": p.default, "doc": p.doc}))
        .collect();
    Ok(json!({
        "id": id.as_str(),
        "summary": id.summary(),
        "params": params,
        "form": InlineForm::from_form(&form),
    }))
}

fn execute(cmd: Command) -> Result<Outcome, ScnError> {
    match cmd {
        Command::Solve { file, trace, seed } => {
            let mut problem = load_problem(&file)?;
            if let Some(s) = seed {
                problem.solver.seed = s;
            }
            let result = apfa_solve(&problem.form, &problem.solver, &problem.start)?;
            if let Some(path) = trace {
                std::fs::write(&path, trace_csv(&result))
                    .map_err(|e| ScnError::ProblemFile(format!("{}: {e}", path.display())))?;
            }
            let code = if result.status == SolveStatus::EpsFeasibleConverged {
                0
            } else {
                2
            };
            Ok(Outcome {
                stdout: to_json9(&solve_summary(&problem, &result)),
                code,
            })
        }
        Command::Audit {
            file,
            grid,
            samples,
            seed,
            tol,
        } => {
            let problem = load_problem(&file)?;
            let xs = audit_samples(&problem.form, samples, seed);
            let report = identity_audit(&problem.form, &xs, &GridSpec::with_resolution(grid), tol)?;
            let code = if report.class == IdentityClass::Failed {
                2
            } else {
                0
            };
            Ok(Outcome {
                stdout: to_json9(&report),
                code,
            })
        }
        Command::Kkt {
            file,
            point,
            alpha,
            beta,
        } => {
            let problem = load_problem(&file)?;
            let p = SaddlePoint::new(problem.form.partition(), parse_list("point", &point)?)?;
            let report = match (alpha, beta) {
                (Some(a), Some(b)) => kkt_check(
                    &problem.form,
                    &p,
                    &parse_list("alpha", &a)?,
                    &parse_list("beta", &b)?,
                )?,
                _ => kkt_residual(&problem.form, &p)?,
            };
            Ok(ok(to_json9(&report)))
        }
        Command::Witness { file, x } => {
            let problem = load_problem(&file)?;
            let x = parse_list("x", &x)?;
            let c = problem.form.witness_check(&x)?;
            let holds = c.identity_holds();
            let out = json!({
                "x": x,
                "point": c.point,
                "g": c.g_value,
                "reference": c.reference,
                "gap": c.gap,
                "max_violation": c.max_violation,
                "feasible": c.feasible,
                "identity_holds": holds,
            });
            Ok(Outcome {
                stdout: to_json9(&out),
                code: if holds { 0 } else { 2 },
            })
        }
        Command::Catalog { action } => match action.unwrap_or(CatalogAction::List) {
            CatalogAction::List => {
                let mut out = String::new();
                for id in CatalogId::ALL {
                    let p = make_catalog_form(id, &CatalogParams::new())?.partition();
                    out.push_str(&format!(
                        "{:<18} n={} m1={} m2={}  {}\n",
                        id.as_str(),
                        p.n,
                        p.m1,
                        p.m2,
                        id.summary()
                    ));
                }
                for kind in StructuredKind::ALL {
                    out.push_str(&format!("{:<18} structured\n", kind.as_str()));
                }
                Ok(ok(out.trim_end().to_string()))
            }
            CatalogAction::Describe { id } => {
                Ok(ok(serde_json::to_string_pretty(&describe(id.parse()?)?)
                    .expect("values serialize")))
            }
        },
    }
}

fn exit_code(e: &ScnError) -> i32 {
    match e {
        ScnError::Infeasible(_) | ScnError::WitnessInfeasible { .. } => 2,
        _ => 1,
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                1
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match execute(cli.command) {
        Ok(o) => {
            let _ = writeln!(out, "{}", o.stdout);
            o.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt9(0.1 + 0.2), "0.3");
        assert_eq!(fmt9(2.0 / 3.0), "0.666666667");
        assert_eq!(fmt9(1e12), "1000000000000");
        assert_eq!(fmt9(1.234567891234e-9), "1.23456789e-9");
        assert_eq!(fmt9(0.0), "0");
        assert_eq!(round9(123456789012.0), 123456789000.0);
    }

    #[test]
    fn json_floats_are_rounded() {
        let s = to_json9(&json!({"a": [1.0 / 3.0], "k": 3}));
        assert!(s.contains("0.333333333") && !s.contains("0.3333333333"));
        assert!(s.contains("\"k\": 3"));
    }

    #[test]
    fn list_parsing() {
        assert_eq!(
            parse_list("x", "1, -2.5,3e1").unwrap(),
            vec![1.0, -2.5, 30.0]
        );
        assert!(parse_list("x", "1,,2").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["scnopt", "frobnicate"], &mut out, &mut err), 1);
        assert_eq!(run(["scnopt", "--help"], &mut out, &mut err), 0);
    }

    #[test]
    fn catalog_list_names_every_entry() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["scnopt", "catalog", "list"], &mut out, &mut err), 0);
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text.lines().count(),
            CatalogId::ALL.len() + StructuredKind::ALL.len()
        );
        assert!(text.contains("maxabs_minus_sum   n=5 m1=6 m2=5"));
    }

    #[test]
    fn describe_unknown_id_exits_one() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(
            run(
                ["scnopt", "catalog", "describe", "nope"],
                &mut out,
                &mut err
            ),
            1
        );
        assert!(String::from_utf8(err).unwrap().contains("nope"));
    }
}
