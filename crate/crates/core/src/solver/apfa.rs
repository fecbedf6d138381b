//! Alternating penalty function algorithm over the smoothed penalties.
//!
//! Outer iteration k uses `ρ_k = ρ_1 N^(k-1)`: minimize `F_θ(·; z^k, ρ_k)` over
//! (x, y), then `G_θ(·; x^{k+1}, y^{k+1}, ρ_k)` over z inside a trust window
//! around `z^k`. The run stops once the step is at most ε and the new point is
//! ε-feasible.

use serde::{Deserialize, Serialize};

use crate::domain::{BoxDomain, SaddlePoint};
use crate::error::ScnError;
use crate::form::ScnForm;
use crate::penalty::{
    eps_feasible, penalty_f, penalty_f_theta_slice, penalty_g, penalty_g_theta_slice,
    total_violation,
};

use super::inner::{multistart_minimize, sample_starts, InnerParams, InnerResult};
use super::kkt::{kkt_residual, KktReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub eps: f64,
    pub rho1: f64,
    /// Penalty growth factor N.
    #[serde(rename = "N")]
    pub growth: f64,
    pub theta: f64,
    pub max_outer: usize,
    pub rho_cap: f64,
    /// Half-width of the z search window around the incumbent.
    pub trust_half_width: f64,
    /// Seeds the random inner restarts.
    pub seed: u64,
    pub inner: InnerParams,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            eps: 1e-6,
            rho1: 10.0,
            growth: 100.0,
            theta: 1.01,
            max_outer: 50,
            rho_cap: 1e12,
            trust_half_width: 1e4,
            seed: 0,
            inner: InnerParams::default(),
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), ScnError> {
        let bad = |what: String| Err(ScnError::InvalidParam(what));
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.rho1 >= 1.0) || !self.rho1.is_finite() {
            return bad(format!("rho1 must be at least 1, got {}", self.rho1));
        }
        if !(self.growth > 1.0) || !self.growth.is_finite() {
            return bad(format!("N must exceed 1, got {}", self.growth));
        }
        if !(self.theta > 1.0) || !self.theta.is_finite() {
            return bad(format!("theta must exceed 1, got {}", self.theta));
        }
        if !(self.rho_cap >= self.rho1) {
            return bad(format!(
                "rho_cap {} is below rho1 {}",
                self.rho_cap, self.rho1
            ));
        }
        if self.max_outer == 0 {
            return bad("max_outer must be at least 1".into());
        }
        if !(self.trust_half_width > 0.0) {
            return bad(format!(
                "trust_half_width must be positive, got {}",
                self.trust_half_width
            ));
        }
        self.inner.validate()
    }

    pub fn rho(&self, k: usize) -> f64 {
        self.rho1 * self.growth.powi(k as i32 - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    EpsFeasibleConverged,
    RhoCapReached,
    MaxOuterReached,
    InnerFailure,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::EpsFeasibleConverged => "eps_feasible_converged",
            SolveStatus::RhoCapReached => "rho_cap_reached",
            SolveStatus::MaxOuterReached => "max_outer_reached",
            SolveStatus::InnerFailure => "inner_failure",
        }
    }
}

/// One outer iteration, recorded at the accepted point `p^{k+1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub k: usize,
    pub rho: f64,
    /// Exact penalty `F = g + ρP`.
    #[serde(rename = "F")]
    pub f_value: f64,
    /// Exact penalty `G = -g + ρP`.
    #[serde(rename = "G")]
    pub g_value: f64,
    #[serde(rename = "P")]
    pub violation: f64,
    pub step_norm: f64,
    pub f_ref: Option<f64>,
    /// Projected-gradient norms left by the two inner solves.
    pub inner_xy_residual: f64,
    pub inner_z_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub point: SaddlePoint,
    pub status: SolveStatus,
    pub trace: Vec<TraceRecord>,
    pub multipliers: Option<KktReport>,
    pub diagnostic: Option<String>,
    /// Some z solve ended on the trust window rather than on the box.
    pub trust_window_binding: bool,
}

impl SolveResult {
    /// `P_k <= 2L/ρ_k` at every trace entry, with L the largest |F| or |G| seen.
    pub fn violation_bound_holds(&self) -> bool {
        let l = self
            .trace
            .iter()
            .map(|t| t.f_value.abs().max(t.g_value.abs()))
            .fold(0.0, f64::max);
        self.trace.iter().all(|t| t.violation <= 2.0 * l / t.rho)
    }

    pub fn final_violation(&self) -> Option<f64> {
        self.trace.last().map(|t| t.violation)
    }
}

fn block_objective<'a>(
    form: &'a ScnForm,
    base: &'a [f64],
    range: std::ops::Range<usize>,
    eval: impl Fn(&ScnForm, &[f64]) -> Result<(f64, Vec<f64>), ScnError> + Sync + 'a,
) -> impl Fn(&[f64]) -> Result<(f64, Vec<f64>), ScnError> + Sync + 'a {
    move |u: &[f64]| {
        let mut full = base.to_vec();
        full[range.clone()].copy_from_slice(u);
        let (v, g) = eval(form, &full)?;
        Ok((v, g[range.clone()].to_vec()))
    }
}

fn starts(warm: &[f64], window: &BoxDomain, restarts: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut s = vec![warm.to_vec()];
    s.extend(sample_starts(window, restarts, seed));
    s
}

fn on_boundary(v: f64, bound: f64) -> bool {
    bound.is_finite() && (v - bound).abs() <= 1e-12 * bound.abs().max(1.0)
}

pub fn apfa_solve(
    form: &ScnForm,
    params: &SolverParams,
    start: &SaddlePoint,
) -> Result<SolveResult, ScnError> {
    params.validate()?;
    let part = form.partition();
    if start.partition() != part {
        return Err(ScnError::Dimension {
            expected: part.total(),
            got: start.as_slice().len(),
        });
    }
    let mut p = start.as_slice().to_vec();
    form.domain().project(&mut p);
    let (xy, zr) = (part.xy_range(), part.z_range());
    let xy_box = form.domain().restrict(xy.clone());
    let xy_window = form.window().restrict(xy.clone());
    let z_box = form.domain().restrict(zr.clone());

    let mut trace = Vec::new();
    let mut status = SolveStatus::MaxOuterReached;
    let mut diagnostic = None;
    let mut trust_binding = false;
    for k in 1..=params.max_outer {
        let rho = params.rho(k);
        if rho > params.rho_cap {
            status = SolveStatus::RhoCapReached;
            break;
        }
        let seed = params.seed.wrapping_mul(0x9E37_79B9).wrapping_add(k as u64);
        let theta = params.theta;

        let step_xy = |p: &[f64]| -> Result<InnerResult, ScnError> {
            let obj = block_objective(form, p, xy.clone(), move |f, q| {
                penalty_f_theta_slice(f, q, rho, theta)
            });
            let st = starts(&p[xy.clone()], &xy_window, params.inner.restarts, seed);
            multistart_minimize(obj, &xy_box, &st, &params.inner)
        };
        let r_xy = match (!xy.is_empty()).then(|| step_xy(&p)).transpose() {
            Ok(r) => r,
            Err(e) => {
                status = SolveStatus::InnerFailure;
                diagnostic = Some(format!("(x, y) solve at k = {k}: {e}"));
                break;
            }
        };
        let mut next = p.clone();
        if let Some(r) = &r_xy {
            next[xy.clone()].copy_from_slice(&r.point);
        }

        let z_now = &p[zr.clone()];
        let trust = BoxDomain::new(
            z_now.iter().map(|v| v - params.trust_half_width).collect(),
            z_now.iter().map(|v| v + params.trust_half_width).collect(),
        )?;
        let z_dom = z_box.intersect(&trust).unwrap_or_else(|_| z_box.clone());
        let step_z = |q: &[f64]| -> Result<InnerResult, ScnError> {
            let obj = block_objective(form, q, zr.clone(), move |f, u| {
                penalty_g_theta_slice(f, u, rho, theta)
            });
            let st = starts(&q[zr.clone()], &z_dom, params.inner.restarts, seed ^ 0x5A5A);
            multistart_minimize(obj, &z_dom, &st, &params.inner)
        };
        let r_z = match (!zr.is_empty()).then(|| step_z(&next)).transpose() {
            Ok(r) => r,
            Err(e) => {
                status = SolveStatus::InnerFailure;
                diagnostic = Some(format!("z solve at k = {k}: {e}"));
                break;
            }
        };
        if let Some(r) = &r_z {
            next[zr.clone()].copy_from_slice(&r.point);
            for (i, v) in r.point.iter().enumerate() {
                let (tl, tu) = (trust.lower()[i], trust.upper()[i]);
                let (bl, bu) = (z_box.lower()[i], z_box.upper()[i]);
                if (on_boundary(*v, tl) && tl > bl) || (on_boundary(*v, tu) && tu < bu) {
                    trust_binding = true;
                }
            }
        }

        let step_norm = next
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        p = next;
        let point = SaddlePoint::new(part, p.clone())?;
        let f_ref = form.reference(point.x()).ok();
        trace.push(TraceRecord {
            k,
            rho,
            f_value: penalty_f(form, &point, rho)?,
            g_value: penalty_g(form, &point, rho)?,
            violation: total_violation(form, &point)?,
            step_norm,
            f_ref,
            inner_xy_residual: r_xy.map_or(0.0, |r| r.proj_grad_norm),
            inner_z_residual: r_z.map_or(0.0, |r| r.proj_grad_norm),
        });
        if step_norm <= params.eps && eps_feasible(form, &point, params.eps)? {
            status = SolveStatus::EpsFeasibleConverged;
            break;
        }
    }
    let point = SaddlePoint::new(part, p)?;
    let multipliers = kkt_residual(form, &point).ok();
    Ok(SolveResult {
        point,
        status,
        trace,
        multipliers,
        diagnostic,
        trust_window_binding: trust_binding,
    })
}
