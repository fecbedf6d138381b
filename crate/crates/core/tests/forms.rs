use proptest::prelude::*;
use scnopt::audit::{audit_samples, registry_forms, witness_sweep, IdentityClass, Registry};
use scnopt::catalog::structured::quadratic;
use scnopt::form::validate_form;
use scnopt::ScnForm;

fn forms() -> Vec<ScnForm> {
    registry_forms().unwrap()
}

fn registered_failed(name: &str) -> bool {
    Registry::shipped()
        .get(name)
        .is_some_and(|e| e.class == IdentityClass::Failed)
}

#[test]
fn every_form_validates_or_is_registered_failed() {
    for f in forms() {
        let report = validate_form(&f, 50, 5);
        if registered_failed(f.name()) {
            continue;
        }
        assert!(
            report.passed(),
            "{}: {:?}",
            f.name(),
            report.failures().collect::<Vec<_>>()
        );
    }
}

#[test]
fn witness_sweep_holds_or_is_registered_failed() {
    for f in forms() {
        let sweep = witness_sweep(&f, &audit_samples(&f, 100, 11));
        assert_eq!(
            sweep.holds(),
            !registered_failed(f.name()),
            "{}: gap {:e}, violation {:e} at {:?}",
            f.name(),
            sweep.max_gap,
            sweep.max_violation,
            sweep.first_failure
        );
    }
}

/// Forms whose inequalities all carry convex tags and whose equalities are affine.
fn convex_feasible_sets() -> Vec<ScnForm> {
    forms()
        .into_iter()
        .filter(|f| {
            f.ineq().iter().all(|e| e.curvature().is_convex())
                && f.eq().iter().all(|e| e.is_affine_structurally())
        })
        .collect()
}

#[test]
fn convex_feasible_sets_are_not_empty() {
    assert!(convex_feasible_sets().len() >= 10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn membership_is_monotone_in_tol(k in 0usize..31, unit in prop::collection::vec(0.0f64..=1.0, 24), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let all = forms();
        let f = &all[k % all.len()];
        let w = f.window().clipped(10.0);
        let p: Vec<f64> = (0..w.dim()).map(|i| w.lower()[i] + (w.upper()[i] - w.lower()[i]) * unit[i % unit.len()]).collect();
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        if let (Ok(a), Ok(b)) = (f.membership_slice(&p, lo), f.membership_slice(&p, hi)) {
            prop_assert!(!a.feasible || b.feasible);
            prop_assert_eq!(a.max_violation(), b.max_violation());
        }
    }

    #[test]
    fn blends_of_witness_points_stay_feasible(k in 0usize..64, s in 0u64..1000, t in 0.0f64..=1.0) {
        let sets = convex_feasible_sets();
        let f = &sets[k % sets.len()];
        let xs = audit_samples(f, 2, s);
        let (Ok(a), Ok(b)) = (f.witness_check(&xs[0]), f.witness_check(&xs[1])) else {
            return Ok(());
        };
        prop_assume!(a.feasible && b.feasible);
        let p: Vec<f64> = a.point.as_slice().iter().zip(b.point.as_slice()).map(|(u, v)| t * u + (1.0 - t) * v).collect();
        let scale = p.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let r = f.membership_slice(&p, 0.0).unwrap();
        prop_assert!(r.max_violation() <= 1e-12 * scale * scale, "{} at t = {t}: {:e}", f.name(), r.max_violation());
    }

    #[test]
    fn quadratic_matches_direct_evaluation(
        b in prop::collection::vec(-2.0f64..2.0, 9),
        c in prop::collection::vec(-3.0f64..3.0, 3),
        x in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        // A = B^T B is positive semidefinite
        let a: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| (0..3).map(|k| b[3 * k + i] * b[3 * k + j]).sum()).collect()).collect();
        let f = quadratic(&a, &c).unwrap();
        let mut direct = 0.0;
        for i in 0..3 {
            direct += c[i] * x[i];
            for j in 0..3 {
                direct += x[i] * a[i][j] * x[j];
            }
        }
        let p = f.witness_eval(&x).unwrap();
        let g = f.eval_g(p.as_slice()).unwrap();
        prop_assert!((g - direct).abs() <= 1e-9 * direct.abs().max(1.0), "{g} vs {direct}");
        prop_assert!(direct >= c.iter().zip(&x).map(|(c, x)| c * x).sum::<f64>() - 1e-9 * direct.abs().max(1.0));
    }
}
