//! Multiplier estimation and residuals of the saddle KKT system.
//!
//! Over the (x, y) block: `∇g + Σ α_i ∇g_i + Σ α_{s+j} ∇h_j = 0`;
//! over the z block: `-∇g + Σ β_i ∇g_i + Σ β_{s+j} ∇h_j = 0`;
//! with `α_i g_i = β_i g_i = 0` and `α_i, β_i >= 0` for inequality rows.
//! Box bounds do not enter either system.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::domain::SaddlePoint;
use crate::error::ScnError;
use crate::form::ScnForm;

use super::nnls::nnls;

/// Inequalities with `g_i >= -ACTIVE_TOL` count as active.
pub const ACTIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    /// `s + r` multipliers of the (x, y) system.
    pub alpha: Vec<f64>,
    /// `s + r` multipliers of the z system.
    pub beta: Vec<f64>,
    pub stationarity_residual_xy: f64,
    pub stationarity_residual_z: f64,
    /// `Σ |α_i g_i| + Σ |β_i g_i|` over inequality rows.
    pub complementarity_residual: f64,
    /// `Σ max(-α_i, 0) + Σ max(-β_i, 0)` over inequality rows.
    pub sign_violation: f64,
    pub active: Vec<bool>,
}

struct Gradients {
    g: Vec<f64>,
    ineq: Vec<Vec<f64>>,
    eq: Vec<Vec<f64>>,
    ineq_values: Vec<f64>,
}

fn gradients(form: &ScnForm, p: &[f64]) -> Result<Gradients, ScnError> {
    let g = form
        .g()
        .gradient(p)
        .map_err(|e| ScnError::component("g", e))?;
    let ineq = form
        .ineq()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            e.gradient(p)
                .map_err(|err| ScnError::component(format!("ineq[{i}]"), err))
        })
        .collect::<Result<_, _>>()?;
    let eq = form
        .eq()
        .iter()
        .enumerate()
        .map(|(j, e)| {
            e.gradient(p)
                .map_err(|err| ScnError::component(format!("eq[{j}]"), err))
        })
        .collect::<Result<_, _>>()?;
    Ok(Gradients {
        g,
        ineq,
        eq,
        ineq_values: form.ineq_values(p)?,
    })
}

fn check_point(form: &ScnForm, p: &SaddlePoint) -> Result<(), ScnError> {
    if p.partition() != form.partition() {
        return Err(ScnError::Dimension {
            expected: form.partition().total(),
            got: p.as_slice().len(),
        });
    }
    Ok(())
}

/// Residual of `sign ∇g + Σ mult_k ∇c_k` restricted to `rows`.
fn stationarity(gr: &Gradients, rows: std::ops::Range<usize>, sign: f64, mult: &[f64]) -> f64 {
    rows.map(|r| {
        let cons = gr.ineq.iter().chain(&gr.eq);
        let v = sign * gr.g[r] + cons.zip(mult).map(|(c, m)| m * c[r]).sum::<f64>();
        v * v
    })
    .sum::<f64>()
    .sqrt()
}

fn assemble(
    form: &ScnForm,
    gr: &Gradients,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    active: Vec<bool>,
) -> KktReport {
    let part = form.partition();
    let s = gr.ineq.len();
    let comp = (0..s)
        .map(|i| (alpha[i] * gr.ineq_values[i]).abs() + (beta[i] * gr.ineq_values[i]).abs())
        .sum();
    let sign = (0..s)
        .map(|i| (-alpha[i]).max(0.0) + (-beta[i]).max(0.0))
        .sum();
    KktReport {
        stationarity_residual_xy: stationarity(gr, part.xy_range(), 1.0, &alpha),
        stationarity_residual_z: stationarity(gr, part.z_range(), -1.0, &beta),
        complementarity_residual: comp,
        sign_violation: sign,
        alpha,
        beta,
        active,
    }
}

/// Estimates multipliers by two nonnegative least-squares solves over the
/// active inequalities and both signs of each equality.
pub fn kkt_residual(form: &ScnForm, p: &SaddlePoint) -> Result<KktReport, ScnError> {
    check_point(form, p)?;
    let report = form.membership(p, ACTIVE_TOL)?;
    if !report.feasible {
        return Err(ScnError::Infeasible(format!(
            "KKT point violates the constraints by {:e}",
            report.max_violation().max(report.box_excess)
        )));
    }
    let gr = gradients(form, p.as_slice())?;
    let active: Vec<bool> = gr.ineq_values.iter().map(|v| *v >= -ACTIVE_TOL).collect();
    let mut cols: Vec<(&[f64], f64)> = Vec::new();
    for (c, _) in gr.ineq.iter().zip(&active).filter(|(_, a)| **a) {
        cols.push((c, 1.0));
    }
    for c in &gr.eq {
        cols.push((c, 1.0));
        cols.push((c, -1.0));
    }
    let solve = |rows: std::ops::Range<usize>, sign: f64| -> Result<Vec<f64>, ScnError> {
        let rows: Vec<usize> = rows.collect();
        let a = DMatrix::from_fn(rows.len(), cols.len(), |r, k| {
            cols[k].1 * cols[k].0[rows[r]]
        });
        let b = DVector::from_fn(rows.len(), |r, _| -sign * gr.g[rows[r]]);
        let v = nnls(&a, &b)?;
        let mut mult = vec![0.0; gr.ineq.len() + gr.eq.len()];
        let mut k = 0;
        for (i, a) in active.iter().enumerate() {
            if *a {
                mult[i] = v[k];
                k += 1;
            }
        }
        for j in 0..gr.eq.len() {
            mult[gr.ineq.len() + j] = v[k] - v[k + 1];
            k += 2;
        }
        Ok(mult)
    };
    let part = form.partition();
    let alpha = solve(part.xy_range(), 1.0)?;
    let beta = solve(part.z_range(), -1.0)?;
    Ok(assemble(form, &gr, alpha, beta, active))
}

/// Residuals of the KKT system for given multipliers.
pub fn kkt_check(
    form: &ScnForm,
    p: &SaddlePoint,
    alpha: &[f64],
    beta: &[f64],
) -> Result<KktReport, ScnError> {
    check_point(form, p)?;
    let rows = form.ineq().len() + form.eq().len();
    for m in [alpha, beta] {
        if m.len() != rows {
            return Err(ScnError::Dimension {
                expected: rows,
                got: m.len(),
            });
        }
    }
    let gr = gradients(form, p.as_slice())?;
    let active = gr.ineq_values.iter().map(|v| *v >= -ACTIVE_TOL).collect();
    Ok(assemble(form, &gr, alpha.to_vec(), beta.to_vec(), active))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{make_structured, StructuredKind};
    use crate::domain::VarPartition;
    use crate::expr::Expr;

    fn quartic_kkt() -> ScnForm {
        let p = VarPartition::new(1, 1, 1).unwrap();
        let (x, y, z) = (Expr::var(0), Expr::var(1), Expr::var(2));
        ScnForm::builder("quartic_kkt", p)
            .g(y.clone() + y.clone().powi(4) - z.clone() + x.clone().square() - z.clone())
            .ineq(y.clone().powi(4) - z.clone())
            .ineq(x.square() - z)
            .ineq(-y)
            .bounds(1, 0.0, f64::INFINITY)
            .bounds(2, 0.0, f64::INFINITY)
            .build()
            .unwrap()
    }

    fn origin() -> SaddlePoint {
        SaddlePoint::new(VarPartition::new(1, 1, 1).unwrap(), vec![0.0; 3]).unwrap()
    }

    #[test]
    fn given_multipliers_close_the_system() {
        let r = kkt_check(&quartic_kkt(), &origin(), &[1.0; 3], &[1.0; 3]).unwrap();
        assert_eq!(r.stationarity_residual_xy, 0.0);
        assert_eq!(r.stationarity_residual_z, 0.0);
        assert_eq!(r.complementarity_residual, 0.0);
        assert_eq!(r.sign_violation, 0.0);
    }

    #[test]
    fn estimated_multipliers_close_the_system() {
        let r = kkt_residual(&quartic_kkt(), &origin()).unwrap();
        assert!(r.stationarity_residual_xy < 1e-12);
        assert!(r.stationarity_residual_z < 1e-12);
        assert!((r.alpha[2] - 1.0).abs() < 1e-12);
        assert!((r.beta[0] + r.beta[1] - 2.0).abs() < 1e-12);
        assert_eq!(r.active, vec![true; 3]);
    }

    #[test]
    fn trivial_form_at_minimum() {
        let f = ScnForm::trivial("q", 2, Expr::var(0).square() + Expr::var(1).square()).unwrap();
        let p = SaddlePoint::new(f.partition(), vec![0.0, 0.0]).unwrap();
        let r = kkt_residual(&f, &p).unwrap();
        assert_eq!(r.stationarity_residual_xy, 0.0);
        assert!(r.alpha.is_empty() && r.beta.is_empty());
    }

    #[test]
    fn l0_example_fails_the_conditions() {
        let data = serde_json::json!({"n": 1, "g": "(sq (+ x0 -1))", "curvature": "convex", "lambda": 2.0});
        let f = make_structured(StructuredKind::SparseL0, &data).unwrap();
        let p = SaddlePoint::new(f.partition(), vec![0.0, 0.0, 1.0]).unwrap();
        let r = kkt_residual(&f, &p).unwrap();
        assert!(
            r.stationarity_residual_xy > 1e-3 || r.sign_violation > 0.0,
            "{r:?}"
        );
        // the hand-derived multipliers have the wrong sign
        let given = kkt_check(&f, &p, &[-3.0, -1.0, 0.0], &[4.0, 0.0, 0.0]).unwrap();
        assert!(given.sign_violation > 0.0);
    }

    #[test]
    fn infeasible_point_is_rejected() {
        let p = SaddlePoint::new(VarPartition::new(1, 1, 1).unwrap(), vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            kkt_residual(&quartic_kkt(), &p),
            Err(ScnError::Infeasible(_))
        ));
    }

    #[test]
    fn equality_multipliers_take_either_sign() {
        let p = VarPartition::new(1, 0, 0).unwrap();
        let f = ScnForm::builder("eq", p)
            .g(Expr::var(0))
            .eq(Expr::affine(vec![(0, 1.0)], -1.0))
            .build()
            .unwrap();
        let pt = SaddlePoint::new(p, vec![1.0]).unwrap();
        let r = kkt_residual(&f, &pt).unwrap();
        assert!((r.alpha[0] + 1.0).abs() < 1e-12);
        assert!(r.stationarity_residual_xy < 1e-12);
    }
}
