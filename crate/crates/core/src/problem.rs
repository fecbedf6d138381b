//! Problem files: a JSON document naming a form, solver parameters and a
//! start point.
//!
//! ```json
//! {
//!   "problem": {"catalog": "maxabs_minus_sum", "params": {"n": 5}},
//!   "solver": {"eps": 1e-6, "rho1": 10, "N": 100, "theta": 1.01},
//!   "start": [1, 2, 3]
//! }
//! ```
//!
//! `problem` is one of `{"catalog": id, "params": {..}}`,
//! `{"structured": kind, "data": {..}}` or an inline form (see [`InlineForm`]).

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog::{
    make_catalog_form, make_structured, CatalogId, CatalogParams, StructuredKind,
};
use crate::domain::{BoxDomain, SaddlePoint, VarPartition};
use crate::error::ScnError;
use crate::expr::{parse_expr, print_expr, Expr};
use crate::form::ScnForm;
use crate::solver::SolverParams;

/// A form written out in the expression grammar. Bounds use `null` for an
/// infinite side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineForm {
    pub name: String,
    pub partition: VarPartition,
    pub g: String,
    #[serde(default)]
    pub ineq: Vec<String>,
    #[serde(default)]
    pub eq: Vec<String>,
    pub lower: Option<Vec<Option<f64>>>,
    pub upper: Option<Vec<Option<f64>>>,
    /// Sampling window; defaults to the box clipped at ±10.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    /// `f(x)` as an expression in the x variables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

fn to_side(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().map(|c| c.is_finite().then_some(*c)).collect()
}

fn from_side(v: &[Option<f64>], missing: f64) -> Vec<f64> {
    v.iter().map(|c| c.unwrap_or(missing)).collect()
}

fn sides(
    lower: Option<&[Option<f64>]>,
    upper: Option<&[Option<f64>]>,
    dim: usize,
) -> Result<BoxDomain, ScnError> {
    let lower = lower.map_or(vec![f64::NEG_INFINITY; dim], |l| {
        from_side(l, f64::NEG_INFINITY)
    });
    let upper = upper.map_or(vec![f64::INFINITY; dim], |u| from_side(u, f64::INFINITY));
    if lower.len() != dim || upper.len() != dim {
        return Err(ScnError::Dimension {
            expected: dim,
            got: lower.len().max(upper.len()),
        });
    }
    BoxDomain::new(lower, upper)
}

fn expr_field(field: &str, src: &str, p: &VarPartition) -> Result<Expr, ScnError> {
    parse_expr(src, Some(p)).map_err(|e| ScnError::ProblemFile(format!("{field}: {e}")))
}

impl InlineForm {
    /// Writes out the expressions, box and window of a form. Witness and
    /// reference closures have no text form and are dropped.
    pub fn from_form(form: &ScnForm) -> InlineForm {
        let p = form.partition();
        let print = |e: &Expr| print_expr(e, Some(&p));
        InlineForm {
            name: form.name().to_string(),
            partition: p,
            g: print(form.g()),
            ineq: form.ineq().iter().map(print).collect(),
            eq: form.eq().iter().map(print).collect(),
            lower: Some(to_side(form.domain().lower())),
            upper: Some(to_side(form.domain().upper())),
            window: Some(Window {
                lower: to_side(form.window().lower()),
                upper: to_side(form.window().upper()),
            }),
            reference: None,
        }
    }

    pub fn build(&self) -> Result<ScnForm, ScnError> {
        let p = VarPartition::new(self.partition.n, self.partition.m1, self.partition.m2)?;
        let mut b = ScnForm::builder(self.name.clone(), p)
            .g(expr_field("g", &self.g, &p)?)
            .domain(sides(
                self.lower.as_deref(),
                self.upper.as_deref(),
                p.total(),
            )?);
        for (i, src) in self.ineq.iter().enumerate() {
            b = b.ineq(expr_field(&format!("ineq[{i}]"), src, &p)?);
        }
        for (j, src) in self.eq.iter().enumerate() {
            b = b.eq(expr_field(&format!("eq[{j}]"), src, &p)?);
        }
        if let Some(src) = &self.reference {
            let r = expr_field("reference", src, &p)?;
            if r.width() > p.n {
                return Err(ScnError::ProblemFile(
                    "reference may only use x variables".into(),
                ));
            }
            let total = p.total();
            b = b.reference(move |x| {
                let mut pt = x.to_vec();
                pt.resize(total, 0.0);
                r.eval(&pt).map_err(ScnError::from)
            });
        }
        let form = b.build()?;
        match &self.window {
            None => Ok(form),
            Some(w) => form.with_window(sides(Some(&w.lower), Some(&w.upper), p.total())?),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    problem: Value,
    #[serde(default)]
    solver: SolverParams,
    #[serde(default)]
    start: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogRef {
    catalog: String,
    #[serde(default)]
    params: CatalogParams,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StructuredRef {
    structured: String,
    data: Value,
}

/// A loaded problem file.
#[derive(Debug, Clone)]
pub struct Problem {
    pub form: ScnForm,
    pub solver: SolverParams,
    pub start: SaddlePoint,
}

fn problem_form(v: Value) -> Result<ScnForm, ScnError> {
    let bad = |e: serde_json::Error| ScnError::ProblemFile(format!("problem: {e}"));
    if v.get("catalog").is_some() {
        let c: CatalogRef = serde_json::from_value(v).map_err(bad)?;
        make_catalog_form(c.catalog.parse::<CatalogId>()?, &c.params)
    } else if v.get("structured").is_some() {
        let s: StructuredRef = serde_json::from_value(v).map_err(bad)?;
        make_structured(s.structured.parse::<StructuredKind>()?, &s.data)
    } else {
        serde_json::from_value::<InlineForm>(v)
            .map_err(bad)?
            .build()
    }
}

/// Parses a problem file. JSON errors carry their line and column.
pub fn parse_problem(text: &str) -> Result<Problem, ScnError> {
    let raw: RawFile =
        serde_json::from_str(text).map_err(|e| ScnError::ProblemFile(e.to_string()))?;
    raw.solver.validate()?;
    let form = problem_form(raw.problem)?;
    let total = form.partition().total();
    let mut values = raw.start.unwrap_or_else(|| vec![0.0; total]);
    if values.len() != total {
        return Err(ScnError::Dimension {
            expected: total,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ScnError::NonFiniteStart);
    }
    form.domain().project(&mut values);
    Ok(Problem {
        start: SaddlePoint::new(form.partition(), values)?,
        form,
        solver: raw.solver,
    })
}

pub fn load_problem(path: &Path) -> Result<Problem, ScnError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScnError::ProblemFile(format!("{}: {e}", path.display())))?;
    parse_problem(&text)
}

/// A problem file holding the inline text form of `form`.
pub fn form_to_problem_json(form: &ScnForm) -> String {
    let doc = serde_json::json!({ "problem": InlineForm::from_form(form) });
    serde_json::to_string_pretty(&doc).expect("inline forms serialize")
}
