use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::BoxDomain;

use super::{Curvature, Expr};

const MIDPOINTS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
    /// Value at `t u + (1 - t) v`.
    pub lhs: f64,
    /// `t e(u) + (1 - t) e(v)`.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub tag: Curvature,
    pub passed: bool,
    pub checks: usize,
    pub counterexample: Option<Counterexample>,
    /// Evaluation failure inside the window, if any.
    pub error: Option<String>,
}

/// Samples pairs in `window` and checks the midpoint inequality implied by
/// the expression's own tag at t = 1/4, 1/2, 3/4.
pub fn curvature_audit(
    expr: &Expr,
    window: &BoxDomain,
    samples: usize,
    seed: u64,
) -> CurvatureReport {
    curvature_audit_masked(expr, expr.curvature(), window, None, samples, seed)
}

/// Like [`curvature_audit`] with an explicit tag, varying only the axes
/// where `free[i]` is true (the rest share one random base point per pair).
pub fn curvature_audit_masked(
    expr: &Expr,
    tag: Curvature,
    window: &BoxDomain,
    free: Option<&[bool]>,
    samples: usize,
    seed: u64,
) -> CurvatureReport {
    let mut report = CurvatureReport {
        tag,
        passed: true,
        checks: 0,
        counterexample: None,
        error: None,
    };
    if tag == Curvature::Unknown {
        return report;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = window.dim();
    let draw = |rng: &mut ChaCha8Rng, axis: usize| -> f64 {
        let (lo, hi) = (window.lower()[axis], window.upper()[axis]);
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    };
    let mut worst: Option<(f64, Counterexample)> = None;
    for _ in 0..samples {
        let base: Vec<f64> = (0..dim).map(|i| draw(&mut rng, i)).collect();
        let mut u = base.clone();
        let mut v = base;
        for i in 0..dim {
            if free.is_none_or(|f| f[i]) {
                u[i] = draw(&mut rng, i);
                v[i] = draw(&mut rng, i);
            }
        }
        let (eu, ev) = match (expr.eval(&u), expr.eval(&v)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                report.passed = false;
                report.error = Some(e.to_string());
                return report;
            }
        };
        for t in MIDPOINTS {
            let m: Vec<f64> = u
                .iter()
                .zip(&v)
                .map(|(a, b)| t * a + (1.0 - t) * b)
                .collect();
            let em = match expr.eval(&m) {
                Ok(x) => x,
                Err(e) => {
                    report.passed = false;
                    report.error = Some(e.to_string());
                    return report;
                }
            };
            report.checks += 1;
            let rhs = t * eu + (1.0 - t) * ev;
            let tol = 1e-9 * (1.0f64).max((t * eu).abs() + ((1.0 - t) * ev).abs());
            let gap = match tag {
                Curvature::Convex => em - rhs,
                Curvature::Concave => rhs - em,
                Curvature::Affine => (em - rhs).abs(),
                Curvature::Unknown => 0.0,
            };
            if gap > tol && worst.as_ref().is_none_or(|(w, _)| gap > *w) {
                worst = Some((
                    gap,
                    Counterexample {
                        u: u.clone(),
                        v: v.clone(),
                        t,
                        lhs: em,
                        rhs,
                    },
                ));
            }
        }
    }
    if let Some((_, c)) = worst {
        report.passed = false;
        report.counterexample = Some(c);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(dim: usize) -> BoxDomain {
        BoxDomain::unbounded(dim).clipped(10.0)
    }

    #[test]
    fn true_tags_pass() {
        let e = Expr::var(0).square() + Expr::var(1).exp().scale(0.01);
        let r = curvature_audit(&e, &window(2), 200, 1);
        assert!(r.passed, "{r:?}");
        assert_eq!(r.checks, 600);
    }

    #[test]
    fn wrong_tag_is_caught() {
        let e = Expr::var(0).sin().with_curvature(Curvature::Convex);
        let r = curvature_audit(&e, &window(1), 200, 7);
        assert!(!r.passed);
        let c = r.counterexample.unwrap();
        assert!(c.lhs > c.rhs);
    }

    #[test]
    fn affine_tag_on_square_fails() {
        let e = Expr::var(0).square().with_curvature(Curvature::Affine);
        assert!(!curvature_audit(&e, &window(1), 50, 3).passed);
    }

    #[test]
    fn mask_limits_the_check() {
        // x*y-like saddle: x^2 - y^2 is convex in x alone, not jointly
        let e = (Expr::var(0).square() - Expr::var(1).square()).with_curvature(Curvature::Convex);
        let w = window(2);
        assert!(
            curvature_audit_masked(&e, Curvature::Convex, &w, Some(&[true, false]), 200, 5).passed
        );
        assert!(!curvature_audit_masked(&e, Curvature::Convex, &w, None, 200, 5).passed);
    }

    #[test]
    fn domain_failure_is_reported() {
        let e = Expr::var(0).ln();
        let r = curvature_audit(&e, &window(1), 20, 2);
        assert!(!r.passed);
        assert!(r.error.is_some());
    }

    #[test]
    fn deterministic_for_a_seed() {
        let e = Expr::var(0).sin().with_curvature(Curvature::Concave);
        let a = curvature_audit(&e, &window(1), 100, 9);
        let b = curvature_audit(&e, &window(1), 100, 9);
        assert_eq!(a, b);
    }
}
