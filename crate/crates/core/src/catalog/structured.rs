//! Builders for structured problem classes: nonconvex quadratics, bilinear
//! programs, sparse L0 composites, the L0/1 soft-margin SVM and geometric
//! polynomials.

use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use crate::domain::{Block, VarPartition};
use crate::error::ScnError;
use crate::expr::{parse_expr, Curvature, Expr};
use crate::form::{Claims, ScnForm, ValueSign};

use super::{l0_count, l0_witness, OPEN_LOWER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StructuredKind {
    GeometricPoly,
    L01Svm,
    SparseL0,
    Quadratic,
    BilinearXy,
}

impl StructuredKind {
    pub const ALL: [StructuredKind; 5] = [
        StructuredKind::GeometricPoly,
        StructuredKind::L01Svm,
        StructuredKind::SparseL0,
        StructuredKind::Quadratic,
        StructuredKind::BilinearXy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StructuredKind::GeometricPoly => "geometric_poly",
            StructuredKind::L01Svm => "l01_svm",
            StructuredKind::SparseL0 => "sparse_l0",
            StructuredKind::Quadratic => "quadratic",
            StructuredKind::BilinearXy => "bilinear_xy",
        }
    }

    /// A small instance used by listings and the registry audits.
    pub fn example_data(self) -> serde_json::Value {
        match self {
            StructuredKind::GeometricPoly => serde_json::json!({
                "a": [1.0, -2.0],
                "alpha": [[1.0, 2.0], [0.5, -1.0]]
            }),
            StructuredKind::L01Svm => serde_json::json!({
                "a": [[1.0, 0.0], [0.0, 1.0]],
                "d": [1.0, -1.0],
                "c": 1.0
            }),
            StructuredKind::SparseL0 => serde_json::json!({
                "n": 1,
                "g": "(sq (+ x0 -1))",
                "curvature": "convex",
                "lambda": 2.0
            }),
            StructuredKind::Quadratic => serde_json::json!({
                "a": [[0.0, 1.0], [1.0, 0.0]],
                "c": [0.0, 0.0]
            }),
            StructuredKind::BilinearXy => serde_json::json!({
                "a": [[1.0]],
                "c1": [0.0],
                "c2": [0.0]
            }),
        }
    }
}

impl fmt::Display for StructuredKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StructuredKind {
    type Err = ScnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StructuredKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ScnError::UnknownCatalog(s.to_string()))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadraticData {
    a: Vec<Vec<f64>>,
    #[serde(default)]
    c: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BilinearData {
    a: Vec<Vec<f64>>,
    #[serde(default)]
    c1: Option<Vec<f64>>,
    #[serde(default)]
    c2: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SparseData {
    n: usize,
    g: String,
    #[serde(default)]
    curvature: Option<Curvature>,
    lambda: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometricData {
    a: Vec<f64>,
    alpha: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SvmData {
    a: Vec<Vec<f64>>,
    d: Vec<f64>,
    c: f64,
}

fn data<T: for<'de> Deserialize<'de>>(
    kind: StructuredKind,
    v: &serde_json::Value,
) -> Result<T, ScnError> {
    T::deserialize(v).map_err(|e| ScnError::Shape(format!("{kind} data: {e}")))
}

pub fn make_structured(kind: StructuredKind, v: &serde_json::Value) -> Result<ScnForm, ScnError> {
    match kind {
        StructuredKind::Quadratic => {
            let d: QuadraticData = data(kind, v)?;
            let c = d.c.unwrap_or_else(|| vec![0.0; d.a.len()]);
            quadratic(&d.a, &c)
        }
        StructuredKind::BilinearXy => {
            let d: BilinearData = data(kind, v)?;
            let n = d.a.len();
            let m = d.a.first().map_or(0, Vec::len);
            bilinear_xy(
                &d.a,
                &d.c1.unwrap_or(vec![0.0; n]),
                &d.c2.unwrap_or(vec![0.0; m]),
            )
        }
        StructuredKind::SparseL0 => {
            let d: SparseData = data(kind, v)?;
            let x = VarPartition::new(d.n, 0, 0)?;
            let g = parse_expr(&d.g, Some(&x))?;
            let g = match d.curvature {
                Some(Curvature::Convex) => g.with_curvature(Curvature::Convex),
                Some(other) => {
                    return Err(ScnError::Hypothesis(format!(
                        "sparse_l0 needs a convex g, declared {other}"
                    )))
                }
                None => {
                    return Err(ScnError::Hypothesis(
                        "sparse_l0: g carries no curvature declaration".into(),
                    ))
                }
            };
            sparse_l0(&g, d.n, d.lambda)
        }
        StructuredKind::GeometricPoly => {
            let d: GeometricData = data(kind, v)?;
            geometric_poly(&d.a, &d.alpha)
        }
        StructuredKind::L01Svm => {
            let d: SvmData = data(kind, v)?;
            l01_svm(&d.a, &d.d, d.c)
        }
    }
}

fn rectangular(a: &[Vec<f64>], rows: usize, cols: usize, what: &str) -> Result<(), ScnError> {
    if a.len() != rows || a.iter().any(|r| r.len() != cols) {
        return Err(ScnError::Shape(format!("{what} must be {rows}x{cols}")));
    }
    if a.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ScnError::Shape(format!("{what} has non-finite entries")));
    }
    Ok(())
}

fn length(v: &[f64], len: usize, what: &str) -> Result<(), ScnError> {
    if v.len() != len {
        return Err(ScnError::Shape(format!(
            "{what} must have length {len}, got {}",
            v.len()
        )));
    }
    Ok(())
}

/// `|a|/2 [(x_i + sgn(a) x_j)^2 - z_i - z_j]`, which equals `a x_i x_j` at `z = x^2`.
fn split_term(a: f64, i: usize, j: usize, zi: usize, zj: usize) -> Expr {
    let s = a.signum();
    Expr::affine(vec![(i, 1.0), (j, s)], 0.0)
        .square()
        .scale(0.5 * a.abs())
        - Expr::affine(vec![(zi, 0.5 * a.abs()), (zj, 0.5 * a.abs())], 0.0)
}

fn squares_witness(x: &[f64]) -> Result<Vec<f64>, ScnError> {
    Ok(x.iter().map(|v| v * v).collect())
}

/// `x^T A x + c^T x`; zero entries of A contribute no term.
pub fn quadratic(a: &[Vec<f64>], c: &[f64]) -> Result<ScnForm, ScnError> {
    let n = a.len();
    rectangular(a, n, n, "A")?;
    length(c, n, "c")?;
    let p = VarPartition::new(n, 0, n)?;
    let z = |i: usize| p.index(Block::Z, i);
    let mut terms = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && a[i][j] != 0.0 {
                terms.push(split_term(a[i][j], i, j, z(i), z(j)));
            }
        }
    }
    for i in 0..n {
        terms.push(
            Expr::var(i).square() + Expr::affine(vec![(z(i), a[i][i] - 1.0), (i, c[i])], 0.0),
        );
    }
    let mut b = ScnForm::builder("quadratic", p).g(Expr::sum(terms));
    for i in 0..n {
        b = b.ineq(Expr::var(i).square() - Expr::var(z(i)));
    }
    let (a2, c2) = (a.to_vec(), c.to_vec());
    b.bounds_range(p.z_range(), 0.0, f64::INFINITY)
        .witness(squares_witness)
        .reference(move |x| {
            let mut v = 0.0;
            for i in 0..x.len() {
                v += c2[i] * x[i];
                for j in 0..x.len() {
                    v += a2[i][j] * x[i] * x[j];
                }
            }
            Ok(v)
        })
        .claims(Claims {
            g_jointly_convex: true,
            value_sign: None,
        })
        .build()
}

/// `c1^T x1 + x1^T A x2 + c2^T x2` with `x = (x1, x2)`.
pub fn bilinear_xy(a: &[Vec<f64>], c1: &[f64], c2: &[f64]) -> Result<ScnForm, ScnError> {
    let n = a.len();
    let m = a.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err(ScnError::Shape("A must be nonempty".into()));
    }
    rectangular(a, n, m, "A")?;
    length(c1, n, "c1")?;
    length(c2, m, "c2")?;
    let p = VarPartition::new(n + m, 0, n + m)?;
    let z = |i: usize| p.index(Block::Z, i);
    let linear: Vec<(usize, f64)> = c1.iter().chain(c2).cloned().enumerate().collect();
    let mut terms = vec![Expr::affine(linear, 0.0)];
    for i in 0..n {
        for j in 0..m {
            if a[i][j] != 0.0 {
                terms.push(split_term(a[i][j], i, n + j, z(i), z(n + j)));
            }
        }
    }
    let mut b = ScnForm::builder("bilinear_xy", p).g(Expr::sum(terms));
    for i in 0..n + m {
        b = b.ineq(Expr::var(i).square() - Expr::var(z(i)));
    }
    let (a2, c1, c2) = (a.to_vec(), c1.to_vec(), c2.to_vec());
    b.bounds_range(p.z_range(), 0.0, f64::INFINITY)
        .witness(squares_witness)
        .reference(move |x| {
            let (x1, x2) = x.split_at(n);
            let mut v: f64 = c1.iter().zip(x1).map(|(c, x)| c * x).sum::<f64>()
                + c2.iter().zip(x2).map(|(c, x)| c * x).sum::<f64>();
            for i in 0..n {
                for j in 0..m {
                    v += x1[i] * a2[i][j] * x2[j];
                }
            }
            Ok(v)
        })
        .claims(Claims {
            g_jointly_convex: true,
            value_sign: None,
        })
        .build()
}

/// `g(x) + lambda sum_i ||x_i||_0` for a g declared convex.
pub fn sparse_l0(g: &Expr, n: usize, lambda: f64) -> Result<ScnForm, ScnError> {
    if !g.curvature().is_convex() {
        return Err(ScnError::Hypothesis(format!(
            "sparse_l0 needs g declared convex, found tag {}",
            g.curvature()
        )));
    }
    if !(lambda > 0.0) {
        return Err(ScnError::InvalidParam(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if g.width() > n {
        return Err(ScnError::Shape(format!("g may only use x0..x{}", n - 1)));
    }
    let p = VarPartition::new(n, n, n)?;
    let (x, y, z) = (
        |i: usize| Expr::var(i),
        |i: usize| Expr::var(p.index(Block::Y, i)),
        |i: usize| Expr::var(p.index(Block::Z, i)),
    );
    let a = |i: usize| (x(i) + y(i) - 1.0).square() - z(i);
    let bq = |i: usize| x(i).square() + (y(i) - 1.0).square() - z(i);
    let c = |i: usize| y(i).square() - y(i);
    let per: Vec<Expr> = (0..n).map(|i| y(i).square() + a(i) + bq(i)).collect();
    let mut b = ScnForm::builder("sparse_l0", p).g(g.clone() + Expr::sum(per).scale(lambda));
    for i in 0..n {
        b = b.ineq(a(i));
    }
    for i in 0..n {
        b = b.ineq(bq(i));
    }
    for i in 0..n {
        b = b.ineq(c(i));
    }
    let gr = g.clone();
    b.bounds_range(p.y_range(), 0.0, 1.0)
        .bounds_range(p.z_range(), 0.0, f64::INFINITY)
        .witness(|x| {
            let (y, z): (Vec<f64>, Vec<f64>) = x.iter().map(|v| l0_witness(*v)).unzip();
            Ok([y, z].concat())
        })
        .reference(move |x| Ok(gr.eval(x)? + lambda * l0_count(x)))
        .claims(Claims {
            g_jointly_convex: true,
            value_sign: None,
        })
        .build()
}

/// `sum_i a_i prod_j x_j^alpha_ij` on the positive orthant.
pub fn geometric_poly(a: &[f64], alpha: &[Vec<f64>]) -> Result<ScnForm, ScnError> {
    let m = a.len();
    let n = alpha.first().map_or(0, Vec::len);
    if m == 0 || n == 0 {
        return Err(ScnError::Shape("a and alpha must be nonempty".into()));
    }
    rectangular(alpha, m, n, "alpha")?;
    if a.iter().any(|v| *v == 0.0 || !v.is_finite()) {
        return Err(ScnError::InvalidParam(
            "coefficients a_i must be nonzero and finite".into(),
        ));
    }
    let p = VarPartition::new(n, m, m + n)?;
    let y = |i: usize| Expr::var(p.index(Block::Y, i));
    let z = |i: usize| Expr::var(p.index(Block::Z, i));
    let mut terms = vec![Expr::affine(
        (0..m).map(|i| (p.index(Block::Y, i), a[i])).collect(),
        0.0,
    )];
    let mut ineq = Vec::new();
    for i in 0..m {
        ineq.push(y(i).ln().scale(-1.0) - z(i));
    }
    for j in 0..n {
        ineq.push(Expr::var(j).ln().scale(-1.0) - z(m + j));
    }
    terms.extend(ineq.iter().cloned());
    let mut b = ScnForm::builder("geometric_poly", p).g(Expr::sum(terms));
    for e in ineq {
        b = b.ineq(e);
    }
    for i in 0..m {
        let row: Vec<(usize, f64)> = (0..n)
            .map(|j| (p.index(Block::Z, m + j), -alpha[i][j]))
            .collect();
        b = b.eq(y(i) + Expr::affine(row, 0.0));
    }
    for i in p.x_range().chain(p.y_range()) {
        b = b.bounds(i, OPEN_LOWER, f64::INFINITY).window(i, 0.1, 10.0);
    }
    let (al, al2, a2) = (alpha.to_vec(), alpha.to_vec(), a.to_vec());
    b.witness(move |x| {
        let zx: Vec<f64> = x.iter().map(|v| -v.ln()).collect();
        let y: Vec<f64> = al
            .iter()
            .map(|row| row.iter().zip(&zx).map(|(a, z)| a * z).sum())
            .collect();
        let zy: Vec<f64> = y
            .iter()
            .map(|v| if *v > 0.0 { -v.ln() } else { 0.0 })
            .collect();
        Ok([y, zy, zx].concat())
    })
    .reference(move |x| {
        Ok(a2
            .iter()
            .zip(&al2)
            .map(|(ai, row)| {
                ai * row
                    .iter()
                    .zip(x)
                    .map(|(e, xj)| xj.powf(*e))
                    .product::<f64>()
            })
            .sum())
    })
    .build()
}

/// `1/2 ||w||^2 + C ||(1 - A w - w0 d)_+||_0` over `x = (w, w0)`, `w0` last.
pub fn l01_svm(a: &[Vec<f64>], d: &[f64], c: f64) -> Result<ScnForm, ScnError> {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    if m == 0 || n == 0 {
        return Err(ScnError::Shape("A must be nonempty".into()));
    }
    rectangular(a, m, n, "A")?;
    length(d, m, "d")?;
    if !(c > 0.0) {
        return Err(ScnError::InvalidParam(format!(
            "C must be positive, got {c}"
        )));
    }
    let p = VarPartition::new(n + 1, 3 * m, m)?;
    let y = |k: usize| Expr::var(p.index(Block::Y, k));
    let z = |j: usize| Expr::var(p.index(Block::Z, j));
    let g1 = |j: usize| (y(j) + y(m + j) - 1.0).square() - z(j);
    let g2 = |j: usize| y(j).square() + (y(m + j) - 1.0).square() - z(j);
    let loss: Vec<Expr> = (0..m).map(|j| y(m + j).square() + g1(j) + g2(j)).collect();
    let norm: Vec<Expr> = (0..n).map(|i| Expr::var(i).square()).collect();
    let mut b =
        ScnForm::builder("l01_svm", p).g(Expr::sum(norm).scale(0.5) + Expr::sum(loss).scale(c));
    for j in 0..m {
        b = b.ineq(g1(j));
    }
    for j in 0..m {
        b = b.ineq(g2(j));
    }
    for j in 0..m {
        b = b.ineq(y(m + j).square() - y(m + j));
    }
    for j in 0..m {
        b = b.ineq(y(2 * m + j).square() - y(j));
    }
    for j in 0..m {
        let mut row: Vec<(usize, f64)> = (0..n).map(|i| (i, a[j][i])).collect();
        row.push((n, d[j]));
        row.push((p.index(Block::Y, j), 1.0));
        b = b.eq(Expr::affine(row, -1.0));
    }
    for j in 0..m {
        b = b.bounds(p.index(Block::Y, j), 0.0, f64::INFINITY).bounds(
            p.index(Block::Y, m + j),
            0.0,
            1.0,
        );
    }
    let margins = {
        let (a, d) = (a.to_vec(), d.to_vec());
        move |x: &[f64]| -> Vec<f64> {
            (0..m)
                .map(|j| 1.0 - (0..n).map(|i| a[j][i] * x[i]).sum::<f64>() - x[n] * d[j])
                .collect()
        }
    };
    let mw = margins.clone();
    b.bounds_range(p.z_range(), 0.0, f64::INFINITY)
        .witness(move |x| {
            let u = mw(x);
            let on: Vec<f64> = u.iter().map(|v| if *v > 0.0 { 1.0 } else { 0.0 }).collect();
            let zs: Vec<f64> = u
                .iter()
                .map(|v| if *v > 0.0 { v * v } else { 1.0 })
                .collect();
            Ok([u, on, vec![0.0; m], zs].concat())
        })
        .reference(move |x| {
            let w: f64 = x[..n].iter().map(|v| v * v).sum();
            let count = margins(x).into_iter().filter(|v| *v > 0.0).count();
            Ok(0.5 * w + c * count as f64)
        })
        .claims(Claims {
            g_jointly_convex: true,
            value_sign: Some(ValueSign::Nonnegative),
        })
        .build()
}
