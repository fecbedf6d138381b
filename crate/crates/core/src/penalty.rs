//! Exact and smoothed penalty functions of the constrained min-max problem.
//!
//! With `P = Σ max(g_i, 0) + Σ |h_j|`:
//!
//! * `F = g + ρ P` and `G = -g + ρ P`, so `F + G = 2ρP`;
//! * `F_θ`, `G_θ` replace each violation `v` by `v^θ` (θ > 1), which is C¹;
//! * `G2 = -g + ρ Σ max(g_i, 0)² + ρ Σ h_j²`.
//!
//! Box bounds are not penalized; callers keep iterates inside the box.
//! At a zero violation the derivative of `v^θ` is taken as 0, and the exact
//! penalties use the one-sided convention `d max(v,0) = 1` only for `v > 0`
//! and `d|h| = sign(h)` with `sign(0) = 0`.

use crate::domain::SaddlePoint;
use crate::error::ScnError;
use crate::form::ScnForm;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    pub rho: f64,
    pub theta: f64,
}

impl PenaltyParams {
    pub fn new(rho: f64, theta: f64) -> Result<Self, ScnError> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(ScnError::InvalidParam(format!(
                "rho must be positive, got {rho}"
            )));
        }
        check_theta(theta)?;
        Ok(Self { rho, theta })
    }
}

fn check_theta(theta: f64) -> Result<(), ScnError> {
    if theta > 1.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(ScnError::InvalidParam(format!(
            "theta must exceed 1, got {theta}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Exact,
    Smoothed(f64),
    Squared,
}

fn axpy(out: &mut [f64], a: f64, v: &[f64]) {
    for (o, d) in out.iter_mut().zip(v) {
        *o += a * d;
    }
}

/// Value and gradient of `sign * g + rho * Σ φ(violations)`.
fn assemble(
    form: &ScnForm,
    p: &[f64],
    sign: f64,
    rho: f64,
    kind: Kind,
) -> Result<(f64, Vec<f64>), ScnError> {
    let total = form.partition().total();
    if p.len() != total {
        return Err(ScnError::Dimension {
            expected: total,
            got: p.len(),
        });
    }
    let (gv, gg) = form
        .g()
        .eval_with_gradient(p)
        .map_err(|e| ScnError::component("g", e))?;
    let mut value = sign * gv;
    let mut grad: Vec<f64> = gg.into_iter().map(|d| sign * d).collect();
    for (i, e) in form.ineq().iter().enumerate() {
        let v = e
            .eval(p)
            .map_err(|err| ScnError::component(format!("ineq[{i}]"), err))?;
        if v <= 0.0 {
            continue;
        }
        let (phi, dphi) = match kind {
            Kind::Exact => (v, 1.0),
            Kind::Smoothed(t) => (v.powf(t), t * v.powf(t - 1.0)),
            Kind::Squared => (v * v, 2.0 * v),
        };
        value += rho * phi;
        let dv = e
            .gradient(p)
            .map_err(|err| ScnError::component(format!("ineq[{i}]"), err))?;
        axpy(&mut grad, rho * dphi, &dv);
    }
    for (j, e) in form.eq().iter().enumerate() {
        let h = e
            .eval(p)
            .map_err(|err| ScnError::component(format!("eq[{j}]"), err))?;
        let a = h.abs();
        let (phi, dphi) = match kind {
            Kind::Exact => (a, if a > 0.0 { h.signum() } else { 0.0 }),
            Kind::Smoothed(t) => {
                if a == 0.0 {
                    (0.0, 0.0)
                } else {
                    (a.powf(t), t * a.powf(t - 1.0) * h.signum())
                }
            }
            Kind::Squared => (h * h, 2.0 * h),
        };
        value += rho * phi;
        if dphi != 0.0 {
            let dh = e
                .gradient(p)
                .map_err(|err| ScnError::component(format!("eq[{j}]"), err))?;
            axpy(&mut grad, rho * dphi, &dh);
        }
    }
    if !value.is_finite() {
        return Err(ScnError::Infeasible(format!(
            "penalty is not finite ({value})"
        )));
    }
    Ok((value, grad))
}

/// `P = Σ max(g_i, 0) + Σ |h_j|`.
pub fn total_violation(form: &ScnForm, p: &SaddlePoint) -> Result<f64, ScnError> {
    total_violation_slice(form, p.as_slice())
}

pub fn total_violation_slice(form: &ScnForm, p: &[f64]) -> Result<f64, ScnError> {
    let a: f64 = form.ineq_values(p)?.into_iter().map(|v| v.max(0.0)).sum();
    let b: f64 = form.eq_values(p)?.into_iter().map(f64::abs).sum();
    Ok(a + b)
}

pub fn penalty_f(form: &ScnForm, p: &SaddlePoint, rho: f64) -> Result<f64, ScnError> {
    Ok(form.eval_g(p.as_slice())? + rho * total_violation(form, p)?)
}

pub fn penalty_g(form: &ScnForm, p: &SaddlePoint, rho: f64) -> Result<f64, ScnError> {
    Ok(-form.eval_g(p.as_slice())? + rho * total_violation(form, p)?)
}

/// F with a one-sided gradient; used by the exactness probe.
pub fn penalty_f_subgradient(
    form: &ScnForm,
    p: &[f64],
    rho: f64,
) -> Result<(f64, Vec<f64>), ScnError> {
    assemble(form, p, 1.0, rho, Kind::Exact)
}

/// G with a one-sided gradient; used by the exactness probe.
pub fn penalty_g_subgradient(
    form: &ScnForm,
    p: &[f64],
    rho: f64,
) -> Result<(f64, Vec<f64>), ScnError> {
    assemble(form, p, -1.0, rho, Kind::Exact)
}

pub fn penalty_f_theta(
    form: &ScnForm,
    p: &SaddlePoint,
    rho: f64,
    theta: f64,
) -> Result<(f64, Vec<f64>), ScnError> {
    penalty_f_theta_slice(form, p.as_slice(), rho, theta)
}

pub fn penalty_f_theta_slice(
    form: &ScnForm,
    p: &[f64],
    rho: f64,
    theta: f64,
) -> Result<(f64, Vec<f64>), ScnError> {
    check_theta(theta)?;
    assemble(form, p, 1.0, rho, Kind::Smoothed(theta))
}

pub fn penalty_g_theta(
    form: &ScnForm,
    p: &SaddlePoint,
    rho: f64,
    theta: f64,
) -> Result<(f64, Vec<f64>), ScnError> {
    penalty_g_theta_slice(form, p.as_slice(), rho, theta)
}

pub fn penalty_g_theta_slice(
    form: &ScnForm,
    p: &[f64],
    rho: f64,
    theta: f64,
) -> Result<(f64, Vec<f64>), ScnError> {
    check_theta(theta)?;
    assemble(form, p, -1.0, rho, Kind::Smoothed(theta))
}

pub fn penalty_g2(form: &ScnForm, p: &SaddlePoint, rho: f64) -> Result<(f64, Vec<f64>), ScnError> {
    assemble(form, p.as_slice(), -1.0, rho, Kind::Squared)
}

/// Every `g_i <= eps`, every `|h_j| <= eps`, and the box holds to `eps`.
pub fn eps_feasible(form: &ScnForm, p: &SaddlePoint, eps: f64) -> Result<bool, ScnError> {
    Ok(form.membership(p, eps)?.feasible)
}
