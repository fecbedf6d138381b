//! Scalar expressions over a flat variable vector, with exact gradients
//! and a curvature tag.
//!
//! The tag starts from local composition rules and can be overridden by the
//! caller with [`Expr::with_curvature`]; [`curvature_audit`] checks a tag
//! numerically.

mod audit;
mod grammar;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ExprError;

pub use audit::{curvature_audit, curvature_audit_masked, Counterexample, CurvatureReport};
pub use grammar::{parse_expr, print_expr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curvature {
    Convex,
    Concave,
    Affine,
    /// No curvature claim.
    Unknown,
}

impl Curvature {
    pub fn is_convex(self) -> bool {
        matches!(self, Curvature::Convex | Curvature::Affine)
    }

    pub fn is_concave(self) -> bool {
        matches!(self, Curvature::Concave | Curvature::Affine)
    }

    fn negate(self) -> Curvature {
        match self {
            Curvature::Convex => Curvature::Concave,
            Curvature::Concave => Curvature::Convex,
            c => c,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Curvature::Convex => "convex",
            Curvature::Concave => "concave",
            Curvature::Affine => "affine",
            Curvature::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Curvature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Affine {
        terms: Vec<(usize, f64)>,
        offset: f64,
    },
    Sum(Vec<Expr>),
    Scaled(f64, Expr),
    Square(Expr),
    Powi(Expr, u32),
    /// `a^p` with `a >= 0` required.
    Powf(Expr, f64),
    Exp(Expr),
    Ln(Expr),
    /// `sin(scale * a + shift)`
    Sin {
        arg: Expr,
        scale: f64,
        shift: f64,
    },
    MaxZero(Expr),
    Abs(Expr),
}

impl Node {
    fn label(&self) -> &'static str {
        match self {
            Node::Const(_) => "const",
            Node::Var(_) => "var",
            Node::Affine { .. } => "aff",
            Node::Sum(_) => "+",
            Node::Scaled(..) => "*",
            Node::Square(_) => "sq",
            Node::Powi(..) => "powi",
            Node::Powf(..) => "pow",
            Node::Exp(_) => "exp",
            Node::Ln(_) => "log",
            Node::Sin { .. } => "sin",
            Node::MaxZero(_) => "max0",
            Node::Abs(_) => "abs",
        }
    }
}

#[derive(Clone)]
pub struct Expr {
    node: Arc<Node>,
    curvature: Curvature,
    width: usize,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.curvature == other.curvature && self.node == other.node
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({} : {})", print_expr(self, None), self.curvature)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_expr(self, None))
    }
}

fn natural_curvature(node: &Node) -> Curvature {
    use Curvature::*;
    match node {
        Node::Const(_) | Node::Var(_) | Node::Affine { .. } => Affine,
        Node::Sum(items) => items
            .iter()
            .fold(Affine, |acc, e| match (acc, e.curvature) {
                (Unknown, _) | (_, Unknown) => Unknown,
                (Affine, c) => c,
                (c, Affine) => c,
                (a, b) if a == b => a,
                _ => Unknown,
            }),
        Node::Scaled(c, e) => {
            if *c == 0.0 {
                Affine
            } else if *c > 0.0 {
                e.curvature
            } else {
                e.curvature.negate()
            }
        }
        Node::Square(e) | Node::Abs(e) => {
            if e.curvature == Affine {
                Convex
            } else {
                Unknown
            }
        }
        Node::Powi(e, k) => match (*k, e.curvature) {
            (0, _) => Affine,
            (1, c) => c,
            (k, Affine) if k % 2 == 0 => Convex,
            _ => Unknown,
        },
        Node::Powf(e, p) => {
            if *p == 1.0 {
                e.curvature
            } else if *p > 1.0 && e.curvature == Affine {
                Convex
            } else if *p > 0.0 && *p < 1.0 && e.curvature == Affine {
                Concave
            } else {
                Unknown
            }
        }
        Node::Exp(e) => {
            if e.curvature.is_convex() {
                Convex
            } else {
                Unknown
            }
        }
        Node::Ln(e) => {
            if e.curvature.is_concave() {
                Concave
            } else {
                Unknown
            }
        }
        Node::MaxZero(e) => {
            if e.curvature.is_convex() {
                Convex
            } else {
                Unknown
            }
        }
        Node::Sin { .. } => Unknown,
    }
}

fn node_width(node: &Node) -> usize {
    match node {
        Node::Const(_) => 0,
        Node::Var(i) => i + 1,
        Node::Affine { terms, .. } => terms.iter().map(|(i, _)| i + 1).max().unwrap_or(0),
        Node::Sum(items) => items.iter().map(|e| e.width).max().unwrap_or(0),
        Node::Scaled(_, e)
        | Node::Square(e)
        | Node::Powi(e, _)
        | Node::Powf(e, _)
        | Node::Exp(e)
        | Node::Ln(e)
        | Node::MaxZero(e)
        | Node::Abs(e) => e.width,
        Node::Sin { arg, .. } => arg.width,
    }
}

impl Expr {
    pub fn from_node(node: Node) -> Expr {
        let curvature = natural_curvature(&node);
        let width = node_width(&node);
        Expr {
            node: Arc::new(node),
            curvature,
            width,
        }
    }

    pub fn constant(c: f64) -> Expr {
        Expr::from_node(Node::Const(c))
    }

    pub fn var(index: usize) -> Expr {
        Expr::from_node(Node::Var(index))
    }

    pub fn affine(terms: Vec<(usize, f64)>, offset: f64) -> Expr {
        Expr::from_node(Node::Affine { terms, offset })
    }

    pub fn sum(items: Vec<Expr>) -> Expr {
        Expr::from_node(Node::Sum(items))
    }

    pub fn scale(self, c: f64) -> Expr {
        Expr::from_node(Node::Scaled(c, self))
    }

    pub fn square(self) -> Expr {
        Expr::from_node(Node::Square(self))
    }

    pub fn powi(self, k: u32) -> Expr {
        Expr::from_node(Node::Powi(self, k))
    }

    pub fn powf(self, p: f64) -> Expr {
        Expr::from_node(Node::Powf(self, p))
    }

    pub fn exp(self) -> Expr {
        Expr::from_node(Node::Exp(self))
    }

    pub fn ln(self) -> Expr {
        Expr::from_node(Node::Ln(self))
    }

    pub fn sin_affine(self, scale: f64, shift: f64) -> Expr {
        Expr::from_node(Node::Sin {
            arg: self,
            scale,
            shift,
        })
    }

    pub fn sin(self) -> Expr {
        self.sin_affine(1.0, 0.0)
    }

    pub fn cos(self) -> Expr {
        self.sin_affine(1.0, std::f64::consts::FRAC_PI_2)
    }

    pub fn max_zero(self) -> Expr {
        Expr::from_node(Node::MaxZero(self))
    }

    pub fn abs(self) -> Expr {
        Expr::from_node(Node::Abs(self))
    }

    /// Replaces the curvature tag.
    pub fn with_curvature(mut self, curvature: Curvature) -> Expr {
        self.curvature = curvature;
        self
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    /// Tag the composition rules give, ignoring any override on this node.
    pub fn natural_curvature(&self) -> Curvature {
        natural_curvature(&self.node)
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    /// One past the largest variable index used.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_affine_structurally(&self) -> bool {
        match &*self.node {
            Node::Const(_) | Node::Var(_) | Node::Affine { .. } => true,
            Node::Sum(items) => items.iter().all(Expr::is_affine_structurally),
            Node::Scaled(_, e) => e.is_affine_structurally(),
            Node::Powi(e, 1) => e.is_affine_structurally(),
            Node::Powi(_, 0) => true,
            _ => false,
        }
    }

    fn check_dim(&self, dim: usize) -> Result<(), ExprError> {
        if self.width > dim {
            Err(ExprError::Dimension {
                index: self.width - 1,
                dim,
            })
        } else {
            Ok(())
        }
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, ExprError> {
        self.check_dim(point.len())?;
        self.value(point)
    }

    /// Gradient with respect to every coordinate of `point`.
    pub fn gradient(&self, point: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.check_dim(point.len())?;
        let mut out = vec![0.0; point.len()];
        self.accumulate(point, 1.0, &mut out)?;
        Ok(out)
    }

    pub fn eval_with_gradient(&self, point: &[f64]) -> Result<(f64, Vec<f64>), ExprError> {
        self.check_dim(point.len())?;
        let mut out = vec![0.0; point.len()];
        let v = self.accumulate(point, 1.0, &mut out)?;
        Ok((v, out))
    }

    fn value(&self, p: &[f64]) -> Result<f64, ExprError> {
        let v = match &*self.node {
            Node::Const(c) => *c,
            Node::Var(i) => p[*i],
            Node::Affine { terms, offset } => {
                terms.iter().fold(*offset, |acc, (i, c)| acc + c * p[*i])
            }
            Node::Sum(items) => {
                let mut acc = 0.0;
                for e in items {
                    acc += e.value(p)?;
                }
                acc
            }
            Node::Scaled(c, e) => c * e.value(p)?,
            Node::Square(e) => {
                let a = e.value(p)?;
                a * a
            }
            Node::Powi(e, k) => e.value(p)?.powi(*k as i32),
            Node::Powf(e, q) => {
                let a = e.value(p)?;
                if a < 0.0 {
                    return Err(self.domain(a));
                }
                a.powf(*q)
            }
            Node::Exp(e) => e.value(p)?.exp(),
            Node::Ln(e) => {
                let a = e.value(p)?;
                if a <= 0.0 {
                    return Err(self.domain(a));
                }
                a.ln()
            }
            Node::Sin { arg, scale, shift } => (scale * arg.value(p)? + shift).sin(),
            Node::MaxZero(e) => e.value(p)?.max(0.0),
            Node::Abs(e) => e.value(p)?.abs(),
        };
        self.finite(v)
    }

    /// Adds `weight * grad(self)` into `out` and returns the value.
    fn accumulate(&self, p: &[f64], weight: f64, out: &mut [f64]) -> Result<f64, ExprError> {
        let v = match &*self.node {
            Node::Const(c) => *c,
            Node::Var(i) => {
                out[*i] += weight;
                p[*i]
            }
            Node::Affine { terms, offset } => {
                let mut acc = *offset;
                for (i, c) in terms {
                    out[*i] += weight * c;
                    acc += c * p[*i];
                }
                acc
            }
            Node::Sum(items) => {
                let mut acc = 0.0;
                for e in items {
                    acc += e.accumulate(p, weight, out)?;
                }
                acc
            }
            Node::Scaled(c, e) => c * e.accumulate(p, weight * c, out)?,
            Node::Square(e) => {
                let a = e.value(p)?;
                e.accumulate(p, weight * 2.0 * a, out)?;
                a * a
            }
            Node::Powi(e, k) => {
                let a = e.value(p)?;
                let d = if *k == 0 {
                    0.0
                } else {
                    *k as f64 * a.powi(*k as i32 - 1)
                };
                e.accumulate(p, weight * d, out)?;
                a.powi(*k as i32)
            }
            Node::Powf(e, q) => {
                let a = e.value(p)?;
                if a < 0.0 {
                    return Err(self.domain(a));
                }
                let d = if a == 0.0 {
                    if *q < 1.0 {
                        return Err(self.kink());
                    } else if *q == 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    q * a.powf(q - 1.0)
                };
                e.accumulate(p, weight * d, out)?;
                a.powf(*q)
            }
            Node::Exp(e) => {
                let a = e.value(p)?.exp();
                e.accumulate(p, weight * a, out)?;
                a
            }
            Node::Ln(e) => {
                let a = e.value(p)?;
                if a <= 0.0 {
                    return Err(self.domain(a));
                }
                e.accumulate(p, weight / a, out)?;
                a.ln()
            }
            Node::Sin { arg, scale, shift } => {
                let a = arg.value(p)?;
                let t = scale * a + shift;
                arg.accumulate(p, weight * scale * t.cos(), out)?;
                t.sin()
            }
            Node::MaxZero(e) => {
                let a = e.value(p)?;
                if a == 0.0 {
                    return Err(self.kink());
                }
                if a > 0.0 {
                    e.accumulate(p, weight, out)?;
                }
                a.max(0.0)
            }
            Node::Abs(e) => {
                let a = e.value(p)?;
                if a == 0.0 {
                    return Err(self.kink());
                }
                e.accumulate(p, weight * a.signum(), out)?;
                a.abs()
            }
        };
        self.finite(v)
    }

    fn finite(&self, v: f64) -> Result<f64, ExprError> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::NonFinite {
                node: self.node.label().to_string(),
            })
        }
    }

    fn domain(&self, value: f64) -> ExprError {
        ExprError::Domain {
            node: self.node.label().to_string(),
            value,
        }
    }

    fn kink(&self) -> ExprError {
        ExprError::NonDifferentiable {
            node: self.node.label().to_string(),
        }
    }

    /// Rebuilds the tree with every variable index passed through `map`.
    /// Curvature tags are kept.
    pub fn remap(&self, map: &dyn Fn(usize) -> usize) -> Expr {
        self.rebuild(&|node| match node {
            Node::Var(i) => Some(Expr::var(map(*i))),
            Node::Affine { terms, offset } => Some(Expr::affine(
                terms.iter().map(|(i, c)| (map(*i), *c)).collect(),
                *offset,
            )),
            _ => None,
        })
    }

    /// Replaces variable `index` by `replacement` everywhere.
    pub fn substitute(&self, index: usize, replacement: &Expr) -> Expr {
        self.rebuild(&|node| match node {
            Node::Var(i) if *i == index => Some(replacement.clone()),
            Node::Affine { terms, offset } if terms.iter().any(|(i, _)| *i == index) => {
                let mut items = vec![Expr::affine(
                    terms.iter().filter(|(i, _)| *i != index).cloned().collect(),
                    *offset,
                )];
                for (_, c) in terms.iter().filter(|(i, _)| *i == index) {
                    items.push(replacement.clone().scale(*c));
                }
                Some(Expr::sum(items))
            }
            _ => None,
        })
    }

    fn rebuild(&self, leaf: &dyn Fn(&Node) -> Option<Expr>) -> Expr {
        if let Some(e) = leaf(&self.node) {
            return e;
        }
        let node = match &*self.node {
            Node::Const(_) | Node::Var(_) | Node::Affine { .. } => return self.clone(),
            Node::Sum(items) => Node::Sum(items.iter().map(|e| e.rebuild(leaf)).collect()),
            Node::Scaled(c, e) => Node::Scaled(*c, e.rebuild(leaf)),
            Node::Square(e) => Node::Square(e.rebuild(leaf)),
            Node::Powi(e, k) => Node::Powi(e.rebuild(leaf), *k),
            Node::Powf(e, q) => Node::Powf(e.rebuild(leaf), *q),
            Node::Exp(e) => Node::Exp(e.rebuild(leaf)),
            Node::Ln(e) => Node::Ln(e.rebuild(leaf)),
            Node::Sin { arg, scale, shift } => Node::Sin {
                arg: arg.rebuild(leaf),
                scale: *scale,
                shift: *shift,
            },
            Node::MaxZero(e) => Node::MaxZero(e.rebuild(leaf)),
            Node::Abs(e) => Node::Abs(e.rebuild(leaf)),
        };
        let natural = natural_curvature(&self.node);
        let rebuilt = Expr::from_node(node);
        if self.curvature != natural {
            rebuilt.with_curvature(self.curvature)
        } else {
            rebuilt
        }
    }
}

fn append_sum(items: &mut Vec<Expr>, e: Expr) {
    match &*e.node {
        Node::Sum(inner) if e.curvature == natural_curvature(&e.node) => {
            items.extend(inner.iter().cloned())
        }
        _ => items.push(e),
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        let mut items = Vec::new();
        append_sum(&mut items, self);
        append_sum(&mut items, rhs);
        Expr::sum(items)
    }
}

impl Add<f64> for Expr {
    type Output = Expr;
    fn add(self, rhs: f64) -> Expr {
        self + Expr::constant(rhs)
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + (-rhs)
    }
}

impl Sub<f64> for Expr {
    type Output = Expr;
    fn sub(self, rhs: f64) -> Expr {
        self + Expr::constant(-rhs)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(-1.0)
    }
}

impl Mul<Expr> for f64 {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        rhs.scale(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Expr {
        Expr::var(i)
    }

    fn numeric_grad(e: &Expr, p: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..p.len())
            .map(|i| {
                let mut a = p.to_vec();
                let mut b = p.to_vec();
                a[i] += h;
                b[i] -= h;
                (e.eval(&a).unwrap() - e.eval(&b).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn evaluates_composite() {
        // exp(x0) + 3*(x1 - 1)^2 - ln(x2)
        let e = x(0).exp() + 3.0 * (x(1) - 1.0).square() - x(2).ln();
        let v = e.eval(&[0.0, 2.0, 1.0]).unwrap();
        assert!((v - 4.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let e = x(0).exp() + 3.0 * (x(1) - 1.0).square() - x(2).ln()
            + x(0).sin_affine(0.5, 0.3)
            + (x(1) + 2.0).powf(1.5)
            + x(2).powi(3)
            + (x(0) - 5.0).abs()
            + (x(1) + 1.0).max_zero();
        let p = [0.3, 0.7, 1.3];
        let g = e.gradient(&p).unwrap();
        let n = numeric_grad(&e, &p);
        for (a, b) in g.iter().zip(&n) {
            assert!((a - b).abs() < 1e-6, "{g:?} vs {n:?}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            x(0).ln().eval(&[0.0]),
            Err(ExprError::Domain { .. })
        ));
        assert!(matches!(
            x(0).ln().eval(&[-1.0]),
            Err(ExprError::Domain { .. })
        ));
        assert!(matches!(
            x(0).powf(0.5).eval(&[-1.0]),
            Err(ExprError::Domain { .. })
        ));
        assert!(x(0).powf(0.5).eval(&[0.0]).is_ok());
    }

    #[test]
    fn overflow_is_reported() {
        let e = x(0).exp();
        assert!(matches!(
            e.eval(&[1000.0]),
            Err(ExprError::NonFinite { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let e = x(3);
        assert_eq!(
            e.eval(&[1.0, 2.0]),
            Err(ExprError::Dimension { index: 3, dim: 2 })
        );
    }

    #[test]
    fn kinks_are_nondifferentiable() {
        assert!(matches!(
            x(0).abs().gradient(&[0.0]),
            Err(ExprError::NonDifferentiable { .. })
        ));
        assert!(matches!(
            x(0).max_zero().gradient(&[0.0]),
            Err(ExprError::NonDifferentiable { .. })
        ));
        assert!(matches!(
            x(0).powf(0.5).gradient(&[0.0]),
            Err(ExprError::NonDifferentiable { .. })
        ));
        assert_eq!(x(0).powf(2.5).gradient(&[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn natural_tags() {
        assert_eq!((x(0) + 2.0 * x(1)).curvature(), Curvature::Affine);
        assert_eq!(x(0).square().curvature(), Curvature::Convex);
        assert_eq!((-x(0).square()).curvature(), Curvature::Concave);
        assert_eq!(
            (x(0).square() - x(1).square()).curvature(),
            Curvature::Unknown
        );
        assert_eq!(x(0).powf(0.5).curvature(), Curvature::Concave);
        assert_eq!(x(0).ln().curvature(), Curvature::Concave);
        assert_eq!(x(0).square().exp().curvature(), Curvature::Convex);
        assert_eq!(x(0).sin().curvature(), Curvature::Unknown);
    }

    #[test]
    fn override_survives_remap() {
        let e = x(0).sin().with_curvature(Curvature::Concave);
        let r = e.remap(&|i| i + 2);
        assert_eq!(r.curvature(), Curvature::Concave);
        assert_eq!(r.eval(&[0.0, 0.0, 1.0]).unwrap(), 1f64.sin());
        assert_eq!(r.width(), 3);
    }

    #[test]
    fn substitute_into_affine_and_var() {
        let phi = Expr::affine(vec![(0, 2.0)], 1.0).exp();
        let g = x(1).square();
        let c = phi.substitute(0, &g);
        let v = c.eval(&[0.0, 3.0]).unwrap();
        assert!((v - 19f64.exp()).abs() < 1e-6 * 19f64.exp());
    }

    #[test]
    fn sum_flattening() {
        let e = x(0) + x(1) + x(2);
        match e.node() {
            Node::Sum(items) => assert_eq!(items.len(), 3),
            _ => panic!("expected a sum"),
        }
    }
}
