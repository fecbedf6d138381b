use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::expr::{curvature_audit_masked, Curvature, CurvatureReport};

use super::ScnForm;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: Option<String>,
    /// Offending point, when the check found one.
    pub counterexample: Option<Vec<f64>>,
}

impl CheckOutcome {
    fn pass(name: impl Into<String>) -> Self {
        CheckOutcome {
            name: name.into(),
            passed: true,
            detail: None,
            counterexample: None,
        }
    }

    fn from_curvature(name: String, r: CurvatureReport) -> Self {
        let detail = match (&r.error, &r.counterexample) {
            (Some(e), _) => Some(e.clone()),
            (None, Some(c)) => Some(format!("t = {}: value {} vs chord {}", c.t, c.lhs, c.rhs)),
            _ => None,
        };
        let counterexample = r.counterexample.map(|c| {
            c.u.iter()
                .zip(&c.v)
                .map(|(a, b)| c.t * a + (1.0 - c.t) * b)
                .collect()
        });
        CheckOutcome {
            name,
            passed: r.passed,
            detail,
            counterexample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub form: String,
    pub checks: Vec<CheckOutcome>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub(crate) fn sample_x(form: &ScnForm, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w = form.window();
    form.partition()
        .x_range()
        .map(|i| {
            let (lo, hi) = (w.lower()[i], w.upper()[i]);
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..=hi)
            }
        })
        .collect()
}

/// Checks every declaration a form makes: curvature of g per block, of each
/// constraint, joint convexity and sign claims, and the witness identity.
pub fn validate_form(form: &ScnForm, samples: usize, seed: u64) -> AuditReport {
    let p = form.partition();
    let window = form.window();
    let total = p.total();
    let mut checks = Vec::new();

    let xy_mask: Vec<bool> = (0..total).map(|i| i < p.n + p.m1).collect();
    checks.push(CheckOutcome::from_curvature(
        "g convex in (x,y)".into(),
        curvature_audit_masked(
            form.g(),
            Curvature::Convex,
            window,
            Some(&xy_mask),
            samples,
            seed,
        ),
    ));
    if p.m2 > 0 {
        let z_mask: Vec<bool> = xy_mask.iter().map(|b| !b).collect();
        checks.push(CheckOutcome::from_curvature(
            "g concave in z".into(),
            curvature_audit_masked(
                form.g(),
                Curvature::Concave,
                window,
                Some(&z_mask),
                samples,
                seed ^ 1,
            ),
        ));
    }
    if form.claims().g_jointly_convex {
        checks.push(CheckOutcome::from_curvature(
            "g jointly convex".into(),
            curvature_audit_masked(form.g(), Curvature::Convex, window, None, samples, seed ^ 2),
        ));
    }
    for (i, e) in form.ineq().iter().enumerate() {
        checks.push(CheckOutcome::from_curvature(
            format!("ineq[{i}] {}", e.curvature()),
            curvature_audit_masked(
                e,
                e.curvature(),
                window,
                None,
                samples,
                seed.wrapping_add(10 + i as u64),
            ),
        ));
    }
    for (j, e) in form.eq().iter().enumerate() {
        checks.push(CheckOutcome::from_curvature(
            format!("eq[{j}] affine"),
            curvature_audit_masked(
                e,
                Curvature::Affine,
                window,
                None,
                samples,
                seed.wrapping_add(1000 + j as u64),
            ),
        ));
    }

    if form.has_witness() {
        checks.push(witness_identity_check(form, samples, seed));
    }
    if let Some(sign) = form.claims().value_sign {
        checks.push(sign_check(form, sign, samples, seed));
    }

    AuditReport {
        form: form.name().to_string(),
        checks,
    }
}

fn witness_identity_check(form: &ScnForm, samples: usize, seed: u64) -> CheckOutcome {
    let name = "witness identity";
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5157);
    for _ in 0..samples {
        let x = sample_x(form, &mut rng);
        match form.witness_check(&x) {
            Ok(c) if c.identity_holds() => {}
            Ok(c) => {
                return CheckOutcome {
                    name: name.into(),
                    passed: false,
                    detail: Some(format!(
                        "max violation {:e}, gap {:e}",
                        c.max_violation,
                        c.gap.unwrap_or(0.0)
                    )),
                    counterexample: Some(c.point.into_vec()),
                }
            }
            Err(e) => {
                return CheckOutcome {
                    name: name.into(),
                    passed: false,
                    detail: Some(e.to_string()),
                    counterexample: Some(x),
                }
            }
        }
    }
    CheckOutcome::pass(name)
}

fn sign_check(form: &ScnForm, sign: super::ValueSign, samples: usize, seed: u64) -> CheckOutcome {
    let name = "value sign";
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x519);
    for _ in 0..samples {
        let x = sample_x(form, &mut rng);
        let value = if form.has_reference() {
            form.reference(&x)
        } else {
            form.witness_check(&x).map(|c| c.g_value)
        };
        match value {
            Ok(v) if sign.holds(v) => {}
            Ok(v) => {
                return CheckOutcome {
                    name: name.into(),
                    passed: false,
                    detail: Some(format!("f = {v} violates {sign:?}")),
                    counterexample: Some(x),
                }
            }
            Err(e) => {
                return CheckOutcome {
                    name: name.into(),
                    passed: false,
                    detail: Some(e.to_string()),
                    counterexample: Some(x),
                }
            }
        }
    }
    CheckOutcome::pass(name)
}

#[cfg(test)]
mod tests {
    use super::super::tests::abs_power_form;
    use super::*;
    use crate::domain::VarPartition;
    use crate::expr::Expr;

    #[test]
    fn abs_power_passes() {
        let r = validate_form(&abs_power_form(), 100, 3);
        assert!(r.passed(), "{r:#?}");
    }

    #[test]
    fn square_tagged_affine_fails_on_that_equality() {
        let p = VarPartition::new(1, 0, 1).unwrap();
        let f = ScnForm::builder("bad_eq", p)
            .g(Expr::var(0).square() - Expr::var(1))
            .eq(Expr::var(0).square())
            .build()
            .unwrap();
        let r = validate_form(&f, 50, 1);
        assert!(!r.check("eq[0] affine").unwrap().passed);
        assert!(r.check("g convex in (x,y)").unwrap().passed);
    }

    #[test]
    fn dc_form_passes_with_witness() {
        let p = VarPartition::new(1, 0, 1).unwrap();
        let x = Expr::var(0);
        let z = Expr::var(1);
        let f = ScnForm::builder("dc", p)
            .g(2.0 * x.clone().square() - z.clone())
            .ineq(x.square() - z)
            .witness(|x| Ok(vec![x[0] * x[0]]))
            .reference(|x| Ok(x[0] * x[0]))
            .build()
            .unwrap();
        let r = validate_form(&f, 100, 11);
        assert!(r.passed(), "{r:#?}");
        assert!(r.check("witness identity").unwrap().passed);
    }

    #[test]
    fn deterministic() {
        let f = abs_power_form();
        assert_eq!(validate_form(&f, 40, 5), validate_form(&f, 40, 5));
    }
}
