#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scnopt::penalty::{penalty_f_theta_slice, penalty_g2};
use scnopt::{SaddlePoint, ScnForm};

/// Uniform points of the form's window, clipped at ±10.
pub fn window_points(form: &ScnForm, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let w = form.window().clipped(10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            w.lower()
                .iter()
                .zip(w.upper())
                .map(|(lo, hi)| {
                    if lo < hi {
                        rng.random_range(*lo..=*hi)
                    } else {
                        *lo
                    }
                })
                .collect()
        })
        .collect()
}

fn constraint_values(form: &ScnForm, p: &[f64]) -> Option<Vec<f64>> {
    let mut v = form.ineq_values(p).ok()?;
    v.extend(form.eq_values(p).ok()?);
    Some(v)
}

/// Smallest `|g_i|`, `|h_j|` over the five-point stencil at `p`.
fn stencil_margin(form: &ScnForm, p: &[f64], h: &[f64]) -> f64 {
    let mut margin = f64::INFINITY;
    let mut q = p.to_vec();
    let mut visit = |q: &[f64]| match constraint_values(form, q) {
        Some(v) => v.iter().for_each(|c| margin = margin.min(c.abs())),
        None => margin = 0.0,
    };
    visit(p);
    for i in 0..p.len() {
        for s in [-2.0, -1.0, 1.0, 2.0] {
            q[i] = p[i] + s * h[i];
            visit(&q);
        }
        q[i] = p[i];
    }
    margin
}

/// Steps tried per coordinate, relative to `max(1, |p_i|)`; the closest
/// estimate counts, so roundoff at large values and truncation near
/// singularities do not both bite.
pub const FD_STEPS: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];

/// `max_i |fd_i - grad_i| / max(1, |grad|_inf)` with fourth-order central
/// differences `fd` of `value`.
pub fn fd_error(value: impl Fn(&[f64]) -> Option<f64>, grad: &[f64], p: &[f64]) -> Option<f64> {
    let scale = grad.iter().fold(1.0f64, |m, g| m.max(g.abs()));
    let mut q = p.to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let mut best = f64::INFINITY;
        for step in FD_STEPS {
            let h = step * p[i].abs().max(1.0);
            let mut at = |s: f64| {
                q[i] = p[i] + s * h;
                let v = value(&q);
                q[i] = p[i];
                v
            };
            let (m2, m1, p1, p2) = (at(-2.0)?, at(-1.0)?, at(1.0)?, at(2.0)?);
            let fd = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
            best = best.min((fd - grad[i]).abs() / scale);
        }
        worst = worst.max(best);
    }
    Some(worst)
}

pub struct GradientCheck {
    pub checked: usize,
    pub skipped: usize,
    pub worst: f64,
}

/// Compares the gradients of `F_θ` and `G2` with finite differences on
/// `count` window points whose violations stay at least 1e-8 from zero.
pub fn smoothed_gradient_check(
    form: &ScnForm,
    count: usize,
    seed: u64,
    rho: f64,
    theta: f64,
) -> GradientCheck {
    let mut out = GradientCheck {
        checked: 0,
        skipped: 0,
        worst: 0.0,
    };
    let part = form.partition();
    for p in window_points(form, count, seed) {
        let h: Vec<f64> = p.iter().map(|v| FD_STEPS[0] * v.abs().max(1.0)).collect();
        if stencil_margin(form, &p, &h) < 1e-8 {
            out.skipped += 1;
            continue;
        }
        let Ok((_, gf)) = penalty_f_theta_slice(form, &p, rho, theta) else {
            out.skipped += 1;
            continue;
        };
        let sp = SaddlePoint::new(part, p.clone()).unwrap();
        let Ok((_, g2)) = penalty_g2(form, &sp, rho) else {
            out.skipped += 1;
            continue;
        };
        let ef = fd_error(
            |q| penalty_f_theta_slice(form, q, rho, theta).ok().map(|r| r.0),
            &gf,
            &p,
        );
        let e2 = fd_error(
            |q| {
                penalty_g2(form, &SaddlePoint::new(part, q.to_vec()).unwrap(), rho)
                    .ok()
                    .map(|r| r.0)
            },
            &g2,
            &p,
        );
        match (ef, e2) {
            (Some(a), Some(b)) => {
                out.checked += 1;
                out.worst = out.worst.max(a).max(b);
            }
            _ => out.skipped += 1,
        }
    }
    out
}
