//! Ready-made forms with witnesses and direct reference evaluators.
//!
//! Entries that come in two alternative forms carry an `_a` / `_b` suffix.
//! Structured problem builders (quadratic, bilinear, sparse L0, SVM,
//! geometric polynomial) live in [`structured`].

pub mod structured;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{Block, VarPartition};
use crate::error::ScnError;
use crate::expr::{parse_expr, Expr};
use crate::form::{Claims, ScnForm, ValueSign};

pub use structured::{make_structured, StructuredKind};

/// Lower bound used for axes the forms declare open at 0 (`x > 0`).
pub const OPEN_LOWER: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CatalogId {
    Bilinear2A,
    Bilinear2B,
    AbsHalfReg,
    L0Reg2,
    Sin0Pi,
    Sin02Pi,
    Cos02Pi,
    Dc,
    Entropy,
    Sigmoid,
    PowA,
    PowAPlus1,
    PowA2n,
    Sgn3A,
    Sgn3B,
    Sgn2A,
    Sgn2B,
    ReluA,
    ReluB,
    ReluConvex,
    AbsPower,
    L0ScalarReg,
    MaxabsMinusSum,
}

/// One tunable parameter of an entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

const fn param(name: &'static str, default: &'static str, doc: &'static str) -> ParamSpec {
    ParamSpec { name, default, doc }
}

const LAMBDA: ParamSpec = param("lambda", "1", "regularization weight, > 0");
const POW_A: ParamSpec = param("a", "0.5", "exponent, 0 < a < 1");
const NONNEG: ParamSpec = param("nonneg", "false", "restrict x to the nonnegative half-line");

macro_rules! specs {
    ($($p:expr),* $(,)?) => {{
        const SPECS: &[ParamSpec] = &[$($p),*];
        SPECS
    }};
}

impl CatalogId {
    pub const ALL: [CatalogId; 23] = [
        CatalogId::Bilinear2A,
        CatalogId::Bilinear2B,
        CatalogId::AbsHalfReg,
        CatalogId::L0Reg2,
        CatalogId::Sin0Pi,
        CatalogId::Sin02Pi,
        CatalogId::Cos02Pi,
        CatalogId::Dc,
        CatalogId::Entropy,
        CatalogId::Sigmoid,
        CatalogId::PowA,
        CatalogId::PowAPlus1,
        CatalogId::PowA2n,
        CatalogId::Sgn3A,
        CatalogId::Sgn3B,
        CatalogId::Sgn2A,
        CatalogId::Sgn2B,
        CatalogId::ReluA,
        CatalogId::ReluB,
        CatalogId::ReluConvex,
        CatalogId::AbsPower,
        CatalogId::L0ScalarReg,
        CatalogId::MaxabsMinusSum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CatalogId::Bilinear2A => "bilinear2_a",
            CatalogId::Bilinear2B => "bilinear2_b",
            CatalogId::AbsHalfReg => "abs_half_reg",
            CatalogId::L0Reg2 => "l0_reg2",
            CatalogId::Sin0Pi => "sin_0_pi",
            CatalogId::Sin02Pi => "sin_0_2pi",
            CatalogId::Cos02Pi => "cos_0_2pi",
            CatalogId::Dc => "dc",
            CatalogId::Entropy => "entropy",
            CatalogId::Sigmoid => "sigmoid",
            CatalogId::PowA => "pow_a",
            CatalogId::PowAPlus1 => "pow_a_plus_1",
            CatalogId::PowA2n => "pow_a_2n",
            CatalogId::Sgn3A => "sgn3_a",
            CatalogId::Sgn3B => "sgn3_b",
            CatalogId::Sgn2A => "sgn2_a",
            CatalogId::Sgn2B => "sgn2_b",
            CatalogId::ReluA => "relu_a",
            CatalogId::ReluB => "relu_b",
            CatalogId::ReluConvex => "relu_convex",
            CatalogId::AbsPower => "abs_power",
            CatalogId::L0ScalarReg => "l0_scalar_reg",
            CatalogId::MaxabsMinusSum => "maxabs_minus_sum",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            CatalogId::Bilinear2A => "f = 2 x0 x1 with one auxiliary z per coordinate",
            CatalogId::Bilinear2B => "f = 2 x0 x1 with a single auxiliary z",
            CatalogId::AbsHalfReg => "f = (x0 + x1 - 1)^2 + lambda (|x0|^1/2 + |x1|^1/2)",
            CatalogId::L0Reg2 => "f = (x0 + x1 - 1)^2 + lambda ||x||_0 on R^2",
            CatalogId::Sin0Pi => "f = sin x on [0, pi]",
            CatalogId::Sin02Pi => "f = sin x on [0, 2 pi]",
            CatalogId::Cos02Pi => "f = cos x on [0, 2 pi]",
            CatalogId::Dc => "f = d(x) - c(x) with d, c convex",
            CatalogId::Entropy => "f = -sum x_i ln x_i on (0, 1]^n",
            CatalogId::Sigmoid => "f = 2 / (1 + exp(-x)) - 1",
            CatalogId::PowA => "f = |x|^a, 0 < a < 1",
            CatalogId::PowAPlus1 => "f = x |x|^a, 0 < a < 1",
            CatalogId::PowA2n => "f = |x|^(a + 2n), 0 < a < 1",
            CatalogId::Sgn3A => "f = sgn x in {-1, 0, 1}, inequality form",
            CatalogId::Sgn3B => "f = sgn x in {-1, 0, 1}, equality form",
            CatalogId::Sgn2A => "f = 1 for x >= 0 and 0 otherwise, inequality form",
            CatalogId::Sgn2B => "f = 1 for x >= 0 and 0 otherwise, equality form",
            CatalogId::ReluA => "f = max(x, 0), inequality form",
            CatalogId::ReluB => "f = max(x, 0), equality form",
            CatalogId::ReluConvex => "f = max(b(x), 0) with b convex",
            CatalogId::AbsPower => "f = |x|^a, the three-constraint form with -y <= 0",
            CatalogId::L0ScalarReg => "f = (x - 1)^2 + lambda ||x||_0",
            CatalogId::MaxabsMinusSum => "f = n max_i |x_i| - sum_i |x_i|",
        }
    }

    pub fn params(self) -> &'static [ParamSpec] {
        match self {
            CatalogId::AbsHalfReg | CatalogId::L0Reg2 => specs![LAMBDA],
            CatalogId::L0ScalarReg => specs![param("lambda", "2", "regularization weight, > 0")],
            CatalogId::Dc => specs![
                param("n", "1", "dimension of x"),
                param("d", "(* 2 (sq x0))", "convex expression over x"),
                param("c", "(sq x0)", "convex expression over x"),
            ],
            CatalogId::Entropy => specs![param("n", "1", "dimension of x")],
            CatalogId::PowA | CatalogId::PowAPlus1 => specs![POW_A, NONNEG],
            CatalogId::PowA2n => specs![POW_A, param("n", "1", "integer n >= 1"), NONNEG],
            CatalogId::ReluConvex => specs![
                param("n", "1", "dimension of x"),
                param("b", "(+ (sq x0) -1)", "convex expression over x"),
            ],
            CatalogId::AbsPower => specs![POW_A],
            CatalogId::MaxabsMinusSum => specs![param("n", "5", "dimension of x")],
            _ => specs![],
        }
    }
}

impl fmt::Display for CatalogId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CatalogId {
    type Err = ScnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CatalogId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| ScnError::UnknownCatalog(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Flag(bool),
    Num(f64),
    Text(String),
}

/// Entry parameters by name; absent names take the documented default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CatalogParams(BTreeMap<String, ParamValue>);

impl CatalogParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<ParamValue>) -> Self {
        self.0.insert(key.to_string(), value.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check_keys(&self, id: CatalogId) -> Result<(), ScnError> {
        for k in self.0.keys() {
            if !id.params().iter().any(|p| p.name == k) {
                return Err(ScnError::InvalidParam(format!(
                    "`{id}` has no parameter `{k}`"
                )));
            }
        }
        Ok(())
    }

    fn num(&self, key: &str, default: f64) -> Result<f64, ScnError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(ParamValue::Num(v)) if v.is_finite() => Ok(*v),
            Some(other) => Err(ScnError::InvalidParam(format!(
                "`{key}` must be a number, got {other:?}"
            ))),
        }
    }

    fn count(&self, key: &str, default: usize) -> Result<usize, ScnError> {
        let v = self.num(key, default as f64)?;
        if v < 1.0 || v.fract() != 0.0 || v > 1e6 {
            return Err(ScnError::InvalidParam(format!(
                "`{key}` must be a positive integer, got {v}"
            )));
        }
        Ok(v as usize)
    }

    fn flag(&self, key: &str) -> Result<bool, ScnError> {
        match self.0.get(key) {
            None => Ok(false),
            Some(ParamValue::Flag(b)) => Ok(*b),
            Some(other) => Err(ScnError::InvalidParam(format!(
                "`{key}` must be a boolean, got {other:?}"
            ))),
        }
    }

    fn text<'a>(&'a self, key: &str, default: &'a str) -> Result<&'a str, ScnError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(ParamValue::Text(s)) => Ok(s),
            Some(other) => Err(ScnError::InvalidParam(format!(
                "`{key}` must be a string, got {other:?}"
            ))),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Num(v)
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Flag(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

fn positive(key: &str, v: f64) -> Result<f64, ScnError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(ScnError::InvalidParam(format!(
            "`{key}` must be positive, got {v}"
        )))
    }
}

fn fractional_exponent(a: f64) -> Result<f64, ScnError> {
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(ScnError::InvalidParam(format!(
            "`a` must lie in (0, 1), got {a}"
        )))
    }
}

/// Parses block-local text against one partition.
struct Src(VarPartition);

impl Src {
    fn e(&self, s: &str) -> Result<Expr, ScnError> {
        Ok(parse_expr(s, Some(&self.0))?)
    }

    fn all(&self, items: &[&str]) -> Result<Vec<Expr>, ScnError> {
        items.iter().map(|s| self.e(s)).collect()
    }

    /// Parses a user expression that may only mention x.
    fn x_only(&self, s: &str, what: &str) -> Result<Expr, ScnError> {
        let e = self.e(s)?;
        if e.width() > self.0.n {
            return Err(ScnError::Shape(format!(
                "`{what}` may only use x0..x{}",
                self.0.n - 1
            )));
        }
        Ok(e)
    }
}

/// `y^(2/a)`, as an integer power when the exponent is integral.
fn pow_text(var: &str, a: f64) -> String {
    let q = 2.0 / a;
    if q.fract() == 0.0 && q <= 64.0 {
        format!("(powi {var} {})", q as u32)
    } else {
        format!("(pow {var} {q:?})")
    }
}

fn convex_claims(sign: Option<ValueSign>) -> Claims {
    Claims {
        g_jointly_convex: true,
        value_sign: sign,
    }
}

/// y = 1{x != 0}; z = x^2, or 1 at x = 0.
fn l0_witness(x: f64) -> (f64, f64) {
    if x == 0.0 {
        (0.0, 1.0)
    } else {
        (1.0, x * x)
    }
}

fn l0_count(x: &[f64]) -> f64 {
    x.iter().filter(|v| **v != 0.0).count() as f64
}

pub fn make_catalog_form(id: CatalogId, params: &CatalogParams) -> Result<ScnForm, ScnError> {
    params.check_keys(id)?;
    let name = id.as_str();
    match id {
        CatalogId::Bilinear2A => {
            let s = Src(VarPartition::new(2, 0, 2)?);
            ScnForm::builder(name, s.0)
                .g(s.e("(+ (sq (+ x0 x1)) (neg z0) (neg z1))")?)
                .ineq(s.e("(- (sq x0) z0)")?)
                .ineq(s.e("(- (sq x1) z1)")?)
                .witness(|x| Ok(vec![x[0] * x[0], x[1] * x[1]]))
                .reference(|x| Ok(2.0 * x[0] * x[1]))
                .claims(convex_claims(None))
                .build()
        }
        CatalogId::Bilinear2B => {
            let s = Src(VarPartition::new(2, 0, 1)?);
            ScnForm::builder(name, s.0)
                .g(s.e("(- (sq (+ x0 x1)) z0)")?)
                .ineq(s.e("(- (+ (sq x0) (sq x1)) z0)")?)
                .witness(|x| Ok(vec![x[0] * x[0] + x[1] * x[1]]))
                .reference(|x| Ok(2.0 * x[0] * x[1]))
                .claims(convex_claims(None))
                .build()
        }
        CatalogId::AbsHalfReg => {
            let lambda = positive("lambda", params.num("lambda", 1.0)?)?;
            let s = Src(VarPartition::new(2, 4, 2)?);
            let g = format!(
                "(+ (sq (aff x0 1 x1 1 -1)) (* {lambda:?} (+ y0 y2)) (powi y0 4) (sq x0) (* -2 z0) \
                 (powi y2 4) (sq x1) (* -2 z1))"
            );
            let mut b = ScnForm::builder(name, s.0).g(s.e(&g)?);
            for e in s.all(&[
                "(- (powi y0 4) z0)",
                "(- (sq x0) z0)",
                "(- (sq y1) y0)",
                "(- (powi y2 4) z1)",
                "(- (sq x1) z1)",
                "(- (sq y3) y2)",
            ])? {
                b = b.ineq(e);
            }
            b.bounds(2, 0.0, f64::INFINITY)
                .bounds(4, 0.0, f64::INFINITY)
                .bounds_range(s.0.z_range(), 0.0, f64::INFINITY)
                .witness(|x| {
                    let (a, b) = (x[0].abs().sqrt(), x[1].abs().sqrt());
                    Ok(vec![a, 0.0, b, 0.0, x[0] * x[0], x[1] * x[1]])
                })
                .reference(move |x| {
                    let r = x[0] + x[1] - 1.0;
                    Ok(r * r + lambda * (x[0].abs().sqrt() + x[1].abs().sqrt()))
                })
                .claims(convex_claims(Some(ValueSign::Nonnegative)))
                .build()
        }
        CatalogId::L0Reg2 => {
            let lambda = positive("lambda", params.num("lambda", 1.0)?)?;
            let s = Src(VarPartition::new(2, 2, 2)?);
            let g = format!(
                "(+ (sq (aff x0 1 x1 1 -1)) (* {lambda:?} (+ y0 y1)) \
                 (sq (aff x0 1 y0 1 -1)) (neg z0) (sq x0) (sq (+ y0 -1)) (neg z0) \
                 (sq (aff x1 1 y1 1 -1)) (neg z1) (sq x1) (sq (+ y1 -1)) (neg z1))"
            );
            let mut b = ScnForm::builder(name, s.0).g(s.e(&g)?);
            for e in s.all(&[
                "(- (sq (aff x0 1 y0 1 -1)) z0)",
                "(+ (sq x0) (sq (+ y0 -1)) (neg z0))",
                "(- (sq y0) y0)",
                "(- (sq (aff x1 1 y1 1 -1)) z1)",
                "(+ (sq x1) (sq (+ y1 -1)) (neg z1))",
                "(- (sq y1) y1)",
            ])? {
                b = b.ineq(e);
            }
            b.bounds_range(s.0.y_range(), 0.0, 1.0)
                .bounds_range(s.0.z_range(), 0.0, f64::INFINITY)
                .witness(|x| {
                    let (y0, z0) = l0_witness(x[0]);
                    let (y1, z1) = l0_witness(x[1]);
                    Ok(vec![y0, y1, z0, z1])
                })
                .reference(move |x| {
                    let r = x[0] + x[1] - 1.0;
                    Ok(r * r + lambda * l0_count(x))
                })
                .claims(convex_claims(Some(ValueSign::Nonnegative)))
                .build()
        }
        CatalogId::Sin0Pi => {
            let s = Src(VarPartition::new(1, 0, 1)?);
            ScnForm::builder(name, s.0)
                .g(s.e("z0")?)
                .ineq(s.e("(+ (neg (sin x0)) z0)")?)
                .bounds(0, 0.0, PI)
                .bounds(1, 0.0, 1.0)
                .witness(|x| Ok(vec![x[0].sin()]))
                .reference(|x| Ok(x[0].sin()))
                .claims(convex_claims(Some(ValueSign::Nonnegative)))
                .build()
        }
        CatalogId::Sin02Pi => {
            let s = Src(VarPartition::new(1, 1, 2)?);
            ScnForm::builder(name, s.0)
                .g(s.e("(+ y0 (neg (sin x0 0.5 0)) z0 (neg (sq z0)) (neg (sq z1)) 1)")?)
                .ineq(s.e("(+ (sq (+ z0 z1)) -1 (neg y0))")?)
                .ineq(s.e("(+ (neg (sin x0 0.5 0)) z0)")?)
                .ineq(s.e("(+ (sq z0) (sq z1) -1)")?)
                .bounds(0, 0.0, 2.0 * PI)
                .bounds(1, -1.0, 1.0)
                .bounds_range(s.0.z_range(), -1.0, 1.0)
                .witness(|x| {
                    let h = 0.5 * x[0];
                    Ok(vec![x[0].sin(), h.sin(), h.cos()])
                })
                .reference(|x| Ok(x[0].sin()))
                .build()
        }
        CatalogId::Cos02Pi => {
            let s = Src(VarPartition::new(1, 0, 4)?);
            ScnForm::builder(name, s.0)
                .g(s.e(
                    "(+ z2 (neg (sq (+ z0 z1))) 1 z3 (neg (sin x0 0.5 0)) z0 (neg (sq z0)) (neg (sq z1)) 1 \
                     (neg (sq z2)) (neg (sq z3)) 1)",
                )?)
                .ineq(s.e("(+ (sq (+ z0 z1)) -1 (neg z3))")?)
                .ineq(s.e("(+ (neg (sin x0 0.5 0)) z0)")?)
                .ineq(s.e("(+ (sq z0) (sq z1) -1)")?)
                .ineq(s.e("(+ (sq z2) (sq z3) -1)")?)
                .bounds(0, 0.0, 2.0 * PI)
                .bounds_range(s.0.z_range(), -1.0, 1.0)
                .witness(|x| {
                    let h = 0.5 * x[0];
                    Ok(vec![h.sin(), h.cos(), x[0].cos(), x[0].sin()])
                })
                .reference(|x| Ok(x[0].cos()))
                .build()
        }
        CatalogId::Dc => {
            let n = params.count("n", 1)?;
            let s = Src(VarPartition::new(n, 0, 1)?);
            let d = s.x_only(params.text("d", "(* 2 (sq x0))")?, "d")?;
            let c = s.x_only(params.text("c", "(sq x0)")?, "c")?;
            let z = Expr::var(n);
            let jointly = d.curvature().is_convex();
            let (cw, dr, cr) = (c.clone(), d.clone(), c.clone());
            ScnForm::builder(name, s.0)
                .g(d - z.clone())
                .ineq(c - z)
                .witness(move |x| Ok(vec![cw.eval(x)?]))
                .reference(move |x| Ok(dr.eval(x)? - cr.eval(x)?))
                .claims(Claims {
                    g_jointly_convex: jointly,
                    value_sign: None,
                })
                .build()
        }
        CatalogId::Entropy => {
            let n = params.count("n", 1)?;
            let p = VarPartition::new(n, n, n)?;
            let (x, y, z) = block_vars(p);
            let mut terms = Vec::new();
            let mut b = ScnForm::builder(name, p);
            for i in 0..n {
                terms.push(
                    (x[i].clone() + y[i].clone()).square().scale(0.5) - z[i].clone().scale(0.5),
                );
                b = b
                    .ineq(x[i].clone().ln().scale(-1.0) - y[i].clone())
                    .ineq(x[i].clone().square() + y[i].clone().square() - z[i].clone())
                    .bounds(i, OPEN_LOWER, 1.0)
                    .window(i, 0.01, 1.0);
            }
            b.g(Expr::sum(terms))
                .bounds_range(p.y_range(), 0.0, f64::INFINITY)
                .bounds_range(p.z_range(), 0.0, f64::INFINITY)
                .witness(|x| {
                    let y: Vec<f64> = x.iter().map(|v| -v.ln()).collect();
                    let z = x
                        .iter()
                        .zip(&y)
                        .map(|(a, b)| a * a + b * b)
                        .collect::<Vec<_>>();
                    Ok([y, z].concat())
                })
                .reference(|x| Ok(-x.iter().map(|v| v * v.ln()).sum::<f64>()))
                .claims(convex_claims(Some(ValueSign::Nonnegative)))
                .build()
        }
        CatalogId::Sigmoid => {
            let s = Src(VarPartition::new(1, 2, 1)?);
            ScnForm::builder(name, s.0)
                .g(s.e("(+ (* 2 y0) -1 (sq (+ y0 y1)) (neg z0) -1 (sq y0) (sq y1) (neg z0))")?)
                .ineq(s.e("(+ (sq (+ y0 y1)) (neg z0) -1)")?)
                .ineq(s.e("(+ (sq y0) (sq y1) (neg z0))")?)
                .ineq(s.e("(+ 1 (exp (neg x0)) (neg y1))")?)
                .bounds_range(s.0.y_range(), 1.0, f64::INFINITY)
                .bounds(3, 0.0, f64::INFINITY)
                .witness(|x| {
                    let y1 = 1.0 + (-x[0]).exp();
                    Ok(vec![1.0, y1, (1.0 + y1) * (1.0 + y1) - 1.0])
                })
                .reference(|x| Ok(2.0 / (1.0 + (-x[0]).exp()) - 1.0))
                .claims(convex_claims(None))
                .build()
        }
        CatalogId::PowA | CatalogId::PowAPlus1 => {
            let a = fractional_exponent(params.num("a", 0.5)?)?;
            let nonneg = params.flag("nonneg")?;
            let plus1 = id == CatalogId::PowAPlus1;
            let s = Src(VarPartition::new(1, 1, if plus1 { 2 } else { 1 })?);
            let yq = pow_text("y0", a);
            let mut b = ScnForm::builder(name, s.0);
            b = if plus1 {
                b.g(s.e("(+ (* 0.5 (sq (+ y0 x0))) (* -0.5 z0) (* -0.5 z1))")?)
                    .ineq(s.e(&format!("(- {yq} z0)"))?)
                    .ineq(s.e("(- (sq x0) z0)")?)
                    .ineq(s.e("(- (sq y0) z1)")?)
                    .witness(move |x| {
                        let y = x[0].abs().powf(a);
                        Ok(vec![y, x[0] * x[0], y * y])
                    })
                    .reference(move |x| Ok(x[0] * x[0].abs().powf(a)))
                    .claims(convex_claims(nonneg.then_some(ValueSign::Nonnegative)))
            } else {
                b.g(s.e(&format!("(+ y0 {yq} (neg z0) (sq x0) (neg z0))"))?)
                    .ineq(s.e(&format!("(- {yq} z0)"))?)
                    .ineq(s.e("(- (sq x0) z0)")?)
                    .witness(move |x| Ok(vec![x[0].abs().powf(a), x[0] * x[0]]))
                    .reference(move |x| Ok(x[0].abs().powf(a)))
                    .claims(convex_claims(Some(ValueSign::Nonnegative)))
            };
            if nonneg {
                b = b.bounds(0, 0.0, f64::INFINITY);
            }
            b.bounds_range(s.0.y_range(), 0.0, f64::INFINITY)
                .bounds_range(s.0.z_range(), 0.0, f64::INFINITY)
                .build()
        }
        CatalogId::PowA2n => {
            let a = fractional_exponent(params.num("a", 0.5)?)?;
            let n = params.count("n", 1)?;
            let nonneg = params.flag("nonneg")?;
            let s = Src(VarPartition::new(1, 2, 2)?);
            let yq = pow_text("y0", a);
            let mut b = ScnForm::builder(name, s.0)
                .g(s.e(&format!(
                    "(+ (* 0.5 (sq (+ y0 y1))) (* -0.5 z0) {yq} (neg z1) (sq x0) (neg z1))"
                ))?)
                .ineq(s.e(&format!("(- {yq} z1)"))?)
                .ineq(s.e("(- (sq x0) z1)")?)
                .ineq(s.e(&format!("(- (powi x0 {}) y1)", 2 * n))?)
                .ineq(s.e("(+ (sq y0) (sq y1) (neg z0))")?)
                .bounds_range(s.0.y_range(), 0.0, f64::INFINITY)
                .bounds_range(s.0.z_range(), 0.0, f64::INFINITY)
                .window(0, if nonneg { 0.0 } else { -2.0 }, 2.0)
                .witness(move |x| {
                    let y0 = x[0].abs().powf(a);
                    let y1 = x[0].powi(2 * n as i32);
                    Ok(vec![y0, y1, y0 * y0 + y1 * y1, x[0] * x[0]])
                })
                .reference(move |x| Ok(x[0].abs().powf(a + 2.0 * n as f64)))
                .claims(convex_claims(Some(ValueSign::Nonnegative)));
            if nonneg {
                b = b.bounds(0, 0.0, f64::INFINITY);
            }
            b.build()
        }
        CatalogId::Sgn3A => {
            let s = Src(VarPartition::new(1, 4, 5)?);
            let ineq = s.all(&[
                "(- (sq (+ y1 y0 -1)) z0)",
                "(+ (sq y1) (sq (+ y0 -1)) (neg z0))",
                "(- (sq (+ y2 y0)) z1)",
                "(+ (sq y2) (sq y0) (neg z1))",
                "(+ (sq y1) (neg x0) (neg z2))",
                "(- (sq y2) z2)",
                "(- (sq (+ y3 y0)) z3)",
                "(+ (sq y3) (sq y0) (neg z3))",
                "(- (sq y0) z4)",
            ])?;
            sum_form(name, &s, "(+ y0 (sq y0) -1 y3)", ineq, &["(+ z4 -1 y3)"])?
                .witness(|x| {
                    let x = x[0];
                    Ok(if x > 0.0 {
                        vec![1.0, x.sqrt(), 0.0, 0.0, x, 1.0, 0.0, 1.0, 1.0]
                    } else if x < 0.0 {
                        vec![0.0, 0.0, (-x).sqrt(), 0.5, 1.0, -x, -x, 0.25, 0.5]
                    } else {
                        vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0]
                    })
                })
                .reference(|x| Ok(sgn(x[0])))
                .bounds_range(s.0.z_range(), 0.0, f64::INFINITY)
                .build()
        }
        CatalogId::Sgn3B => {
            let s = Src(VarPartition::new(1, 4, 7)?);
            let ineq = s.all(&[
                "(- (sq y0) z0)",
                "(- (sq y1) z1)",
                "(- (sq y2) z2)",
                "(- (sq y3) z3)",
                "(- (sq (+ y1 y0 -1)) z4)",
                "(- (sq (+ y2 y0 1)) z5)",
                "(- (sq (+ y3 y0)) z6)",
            ])?;
            let eq = [
                "(aff z1 1 z0 1 y0 -2 z4 -1 1)",
                "(aff z2 1 z0 1 y0 2 z5 -1 1)",
                "(aff z1 1 x0 -1 z2 -1 0)",
                "(aff z3 1 z0 1 z6 -1 0)",
                "(aff z0 1 y3 1 -1)",
            ];
            sum_form(name, &s, "(+ y0 (sq y0) -1 y3)", ineq, &eq)?
                .witness(|x| {
                    let x = x[0];
                    Ok(if x > 0.0 {
                        vec![1.0, x.sqrt(), 0.0, 0.0, 1.0, x, 0.0, 0.0, x, 4.0, 1.0]
                    } else if x < 0.0 {
                        vec![-1.0, 0.0, (-x).sqrt(), 0.0, 1.0, 0.0, -x, 0.0, 4.0, -x, 1.0]
                    } else {
                        vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]
                    })
                })
                .reference(|x| Ok(sgn(x[0])))
                .bounds_range(s.0.z_range(), 0.0, f64::INFINITY)
                .build()
        }
        CatalogId::Sgn2A => {
            let s = Src(VarPartition::new(1, 3, 3)?);
            let ineq = s.all(&[
                "(- (sq (+ y1 y0 -1)) z0)",
                "(+ (sq y1) (sq (+ y0 -1)) (neg z0))",
                "(- (sq (+ y2 y0)) z1)",
                "(+ (sq y2) (sq y0) (neg z1))",
                "(+ (sq y1) (neg x0) (neg z2))",
                "(- (sq y2) z2)",
            ])?;
            sum_form(name, &s, "y0", ineq, &[])?
                .witness(|x| {
                    let x = x[0];
                    Ok(if x >= 0.0 {
                        vec![1.0, x.sqrt(), 0.0, x, 1.0, 0.0]
                    } else {
                        vec![0.0, 0.0, (-x).sqrt(), 1.0, -x, -x]
                    })
                })
                .reference(|x| Ok(step(x[0])))
                .bounds(1, 0.0, 1.0)
                .bounds_range(s.0.z_range(), 0.0, f64::INFINITY)
                .build()
        }
        CatalogId::Sgn2B => {
            let s = Src(VarPartition::new(1, 3, 5)?);
            let ineq = s.all(&[
                "(- (sq y0) z0)",
                "(- (sq y1) z1)",
                "(- (sq y2) z2)",
                "(- (sq (+ y1 y0 -1)) z3)",
                "(- (sq (+ y2 y0)) z4)",
            ])?;
            let eq = [
                "(aff z1 1 z0 1 y0 -2 z3 -1 1)",
                "(aff z2 1 z0 1 z4 -1 0)",
                "(aff z1 1 x0 -1 z2 -1 0)",
            ];
            sum_form(name, &s, "y0", ineq, &eq)?
                .witness(|x| {
                    let x = x[0];
                    Ok(if x >= 0.0 {
                        vec![1.0, x.sqrt(), 0.0, 1.0, x, 0.0, x, 1.0]
                    } else {
                        vec![0.0, 0.0, (-x).sqrt(), 0.0, 0.0, -x, 1.0, -x]
                    })
                })
                .reference(|x| Ok(step(x[0])))
                .bounds(1, 0.0, 1.0)
                .bounds_range(s.0.z_range(), 0.0, f64::INFINITY)
                .build()
        }
        CatalogId::ReluA => {
            let s = Src(VarPartition::new(1, 2, 2)?);
            let ineq = s.all(&[
                "(- (sq (+ y1 y0)) z0)",
                "(+ (sq y1) (sq y0) (neg z0))",
                "(+ (sq y0) (neg x0) (neg z1))",
                "(- (sq y1) z1)",
            ])?;
            sum_form(name, &s, "(sq y0)", ineq, &[])?
                .witness(|x| {
                    let x = x[0];
                    Ok(if x >= 0.0 {
                        vec![x.sqrt(), 0.0, x, 0.0]
                    } else {
                        vec![0.0, (-x).sqrt(), -x, -x]
                    })
                })
                .reference(|x| Ok(x[0].max(0.0)))
                .bounds_range(s.0.z_range(), 0.0, f64::INFINITY)
                .claims(convex_claims(Some(ValueSign::Nonnegative)))
                .build()
        }
        CatalogId::ReluB => {
            let s = Src(VarPartition::new(1, 2, 3)?);
            let ineq = s.all(&["(- (sq y0) z0)", "(- (sq y1) z1)", "(- (sq (+ y1 y0)) z2)"])?;
            let eq = ["(aff z0 1 z1 1 z2 -1 0)", "(aff z0 1 x0 -1 z1 -1 0)"];
            sum_form(name, &s, "(sq y0)", ineq, &eq)?
                .witness(|x| {
                    let x = x[0];
                    Ok(if x >= 0.0 {
                        vec![x.sqrt(), 0.0, x, 0.0, x]
                    } else {
                        vec![0.0, (-x).sqrt(), 0.0, -x, -x]
                    })
                })
                .reference(|x| Ok(x[0].max(0.0)))
                .bounds_range(s.0.z_range(), 0.0, f64::INFINITY)
                .claims(convex_claims(Some(ValueSign::Nonnegative)))
                .build()
        }
        CatalogId::ReluConvex => {
            let n = params.count("n", 1)?;
            let s = Src(VarPartition::new(n, 2, 4)?);
            let bx = s.x_only(params.text("b", "(+ (sq x0) -1)")?, "b")?;
            let summed = s.all(&["(- (sq y0) z0)", "(- (sq y1) z1)", "(- (sq (+ y1 y0)) z2)"])?;
            let z3 = Expr::var(s.0.index(Block::Z, 3));
            let mut b = ScnForm::builder(name, s.0)
                .g(Expr::sum([vec![s.e("(sq y0)")?], summed.clone()].concat()));
            for e in summed {
                b = b.ineq(e);
            }
            let (bw, br) = (bx.clone(), bx.clone());
            b.ineq(bx - z3)
                .eq(s.e("(aff z0 1 z1 1 z2 -1 0)")?)
                .eq(s.e("(aff z0 1 z3 -1 z1 -1 0)")?)
                .bounds_range(s.0.z_range(), 0.0, f64::INFINITY)
                .witness(move |x| {
                    let v = bw.eval(x)?;
                    Ok(if v >= 0.0 {
                        vec![v.sqrt(), 0.0, v, 0.0, v, v]
                    } else {
                        vec![0.0; 6]
                    })
                })
                .reference(move |x| Ok(br.eval(x)?.max(0.0)))
                .claims(convex_claims(Some(ValueSign::Nonnegative)))
                .build()
        }
        CatalogId::AbsPower => {
            let a = fractional_exponent(params.num("a", 0.5)?)?;
            let s = Src(VarPartition::new(1, 1, 1)?);
            let yq = pow_text("y0", a);
            ScnForm::builder(name, s.0)
                .g(s.e(&format!("(+ y0 {yq} (neg z0) (sq x0) (neg z0))"))?)
                .ineq(s.e(&format!("(- {yq} z0)"))?)
                .ineq(s.e("(- (sq x0) z0)")?)
                .ineq(s.e("(neg y0)")?)
                .bounds(1, 0.0, f64::INFINITY)
                .bounds(2, 0.0, f64::INFINITY)
                .witness(move |x| Ok(vec![x[0].abs().powf(a), x[0] * x[0]]))
                .reference(move |x| Ok(x[0].abs().powf(a)))
                .claims(convex_claims(Some(ValueSign::Nonnegative)))
                .build()
        }
        CatalogId::L0ScalarReg => {
            let lambda = positive("lambda", params.num("lambda", 2.0)?)?;
            let s = Src(VarPartition::new(1, 1, 1)?);
            let g = format!(
                "(+ (sq (+ x0 -1)) (* {lambda:?} (+ (sq y0) (sq (+ x0 y0 -1)) (neg z0) (sq x0) \
                 (sq (+ y0 -1)) (neg z0))))"
            );
            ScnForm::builder(name, s.0)
                .g(s.e(&g)?)
                .ineq(s.e("(- (sq (+ x0 y0 -1)) z0)")?)
                .ineq(s.e("(+ (sq x0) (sq (+ y0 -1)) (neg z0))")?)
                .ineq(s.e("(- (sq y0) y0)")?)
                .bounds(1, 0.0, 1.0)
                .bounds(2, 0.0, f64::INFINITY)
                .witness(|x| {
                    let (y, z) = l0_witness(x[0]);
                    Ok(vec![y, z])
                })
                .reference(move |x| Ok((x[0] - 1.0).powi(2) + lambda * l0_count(x)))
                .claims(convex_claims(Some(ValueSign::Nonnegative)))
                .build()
        }
        CatalogId::MaxabsMinusSum => maxabs_minus_sum(params.count("n", 5)?),
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn step(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

fn block_vars(p: VarPartition) -> (Vec<Expr>, Vec<Expr>, Vec<Expr>) {
    let vars = |r: std::ops::Range<usize>| r.map(Expr::var).collect::<Vec<_>>();
    (vars(p.x_range()), vars(p.y_range()), vars(p.z_range()))
}

/// Forms whose objective is a base term plus the sum of all inequality rows.
fn sum_form(
    name: &str,
    s: &Src,
    base: &str,
    ineq: Vec<Expr>,
    eq: &[&str],
) -> Result<crate::form::FormBuilder, ScnError> {
    let g = Expr::sum([vec![s.e(base)?], ineq.clone()].concat());
    let mut b = ScnForm::builder(name, s.0).g(g);
    for e in ineq {
        b = b.ineq(e);
    }
    for e in eq {
        b = b.eq(s.e(e)?);
    }
    Ok(b)
}

fn maxabs_minus_sum(n: usize) -> Result<ScnForm, ScnError> {
    let p = VarPartition::new(n, n + 1, n)?;
    let (x, y, z) = block_vars(p);
    let inner: Vec<Expr> = (0..n)
        .map(|i| {
            y[i].clone() - y[i].clone().square() + z[i].clone() - x[i].clone().square()
                + z[i].clone()
        })
        .collect();
    let g = y[n].clone().scale(n as f64) - Expr::sum(inner);
    let mut b = ScnForm::builder("maxabs_minus_sum", p).g(g);
    for i in 0..n {
        b = b.ineq(y[i].clone().square() - z[i].clone());
    }
    for i in 0..n {
        b = b.ineq(x[i].clone().square() - z[i].clone());
    }
    for i in 0..n {
        b = b.ineq(y[i].clone() - y[n].clone());
    }
    b.bounds_range(p.y_range(), 0.0, f64::INFINITY)
        .bounds_range(p.z_range(), 0.0, f64::INFINITY)
        .witness(|x| {
            let mut yz: Vec<f64> = x.iter().map(|v| v.abs()).collect();
            yz.push(yz.iter().cloned().fold(0.0, f64::max));
            yz.extend(x.iter().map(|v| v * v));
            Ok(yz)
        })
        .reference(move |x| {
            let m = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
            Ok(n as f64 * m - x.iter().map(|v| v.abs()).sum::<f64>())
        })
        .claims(convex_claims(Some(ValueSign::Nonnegative)))
        .build()
}

/// Every catalog entry with default parameters.
pub fn all_default_forms() -> Result<Vec<ScnForm>, ScnError> {
    CatalogId::ALL
        .into_iter()
        .map(|id| make_catalog_form(id, &CatalogParams::new()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::form::validate_form;

    fn form(id: CatalogId) -> ScnForm {
        make_catalog_form(id, &CatalogParams::new()).unwrap()
    }

    #[test]
    fn ids_round_trip() {
        for id in CatalogId::ALL {
            assert_eq!(id.as_str().parse::<CatalogId>().unwrap(), id);
        }
        assert!(matches!(
            "nope".parse::<CatalogId>(),
            Err(ScnError::UnknownCatalog(_))
        ));
    }

    #[test]
    fn abs_power_shape_and_witness() {
        let f = form(CatalogId::AbsPower);
        assert_eq!(f.partition(), VarPartition::new(1, 1, 1).unwrap());
        assert_eq!(f.ineq().len(), 3);
        assert_eq!(f.domain().lower()[1..], [0.0, 0.0]);
        let p = f.witness_eval(&[4.0]).unwrap();
        assert_eq!(p.as_slice(), &[4.0, 2.0, 16.0]);
        assert_eq!(f.eval_g(p.as_slice()).unwrap(), 2.0);
    }

    #[test]
    fn maxabs_shape_and_values() {
        let f = form(CatalogId::MaxabsMinusSum);
        assert_eq!(f.partition(), VarPartition::new(5, 6, 5).unwrap());
        assert_eq!(f.ineq().len(), 15);
        for c in [-3.0, 0.0, 0.7, 12.0] {
            assert_eq!(f.reference(&[c; 5]).unwrap(), 0.0);
        }
        let f2 = maxabs_minus_sum(2).unwrap();
        let p = f2.witness_eval(&[1.0, -1.0]).unwrap();
        assert_eq!(p.y(), &[1.0, 1.0, 1.0]);
        assert_eq!(p.z(), &[1.0, 1.0]);
        assert_eq!(f2.eval_g(p.as_slice()).unwrap(), 0.0);
    }

    #[test]
    fn bilinear_reference() {
        let f = form(CatalogId::Bilinear2A);
        assert_eq!(f.reference(&[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(f.ineq().len(), 2);
    }

    #[test]
    fn l0_scalar_at_zero_uses_stated_point() {
        let f = form(CatalogId::L0ScalarReg);
        let p = f.witness_eval(&[0.0]).unwrap();
        assert_eq!(p.as_slice(), &[0.0, 0.0, 1.0]);
        assert_eq!(f.eval_g(p.as_slice()).unwrap(), 1.0);
    }

    #[test]
    fn sign_entries_at_kinks() {
        for (id, expect) in [
            (CatalogId::Sgn3A, [-1.0, 0.0, 1.0]),
            (CatalogId::Sgn3B, [-1.0, 0.0, 1.0]),
            (CatalogId::Sgn2A, [0.0, 1.0, 1.0]),
            (CatalogId::Sgn2B, [0.0, 1.0, 1.0]),
            (CatalogId::ReluA, [0.0, 0.0, 2.5]),
            (CatalogId::ReluB, [0.0, 0.0, 2.5]),
        ] {
            let f = form(id);
            for (x, e) in [-2.5, 0.0, 2.5].into_iter().zip(expect) {
                let p = f
                    .witness_eval(&[x])
                    .unwrap_or_else(|err| panic!("{id} at {x}: {err}"));
                assert!(
                    (f.eval_g(p.as_slice()).unwrap() - e).abs() < 1e-12,
                    "{id} at {x}"
                );
            }
        }
    }

    #[test]
    fn relu_convex_both_branches() {
        let f = form(CatalogId::ReluConvex);
        assert_eq!(
            f.eval_g(f.witness_eval(&[0.5]).unwrap().as_slice())
                .unwrap(),
            0.0
        );
        assert!(
            (f.eval_g(f.witness_eval(&[2.0]).unwrap().as_slice())
                .unwrap()
                - 3.0)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn sigmoid_witness_misses_reference() {
        let f = form(CatalogId::Sigmoid);
        let c = f.witness_check(&[0.0]).unwrap();
        assert!(c.feasible);
        assert_eq!(c.g_value, -2.0);
        assert_eq!(c.reference, Some(0.0));
    }

    #[test]
    fn params_are_checked() {
        let bad = CatalogParams::new().with("a", 1.5);
        assert!(make_catalog_form(CatalogId::PowA, &bad).is_err());
        let unknown = CatalogParams::new().with("q", 1.0);
        assert!(make_catalog_form(CatalogId::Bilinear2A, &unknown).is_err());
        let wrong_type = CatalogParams::new().with("lambda", "big");
        assert!(make_catalog_form(CatalogId::L0ScalarReg, &wrong_type).is_err());
        let y_in_b = CatalogParams::new().with("b", "(sq y0)");
        assert!(matches!(
            make_catalog_form(CatalogId::ReluConvex, &y_in_b),
            Err(ScnError::Shape(_))
        ));
    }

    #[test]
    fn params_parse_from_json() {
        let p: CatalogParams = serde_json::from_str(r#"{"a": 0.25, "nonneg": true}"#).unwrap();
        let f = make_catalog_form(CatalogId::PowA, &p).unwrap();
        assert_eq!(f.domain().lower()[0], 0.0);
        assert!((f.reference(&[16.0]).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn dc_defaults() {
        let f = form(CatalogId::Dc);
        assert_eq!(f.reference(&[2.0]).unwrap(), 4.0);
        let p = f.witness_eval(&[2.0]).unwrap();
        assert_eq!(p.z(), &[4.0]);
    }

    #[test]
    fn every_entry_validates_except_known_failures() {
        for f in all_default_forms().unwrap() {
            let r = validate_form(&f, 60, 7);
            let failures: Vec<&str> = r.failures().map(|c| c.name.as_str()).collect();
            match f.name() {
                "sigmoid" => assert_eq!(failures, ["witness identity"], "{r:#?}"),
                _ => assert!(failures.is_empty(), "{}: {r:#?}", f.name()),
            }
        }
    }
}
