//! Projected gradient descent over a box with Armijo backtracking along the
//! projection arc and Barzilai-Borwein trial steps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::ScnError;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 200;
/// Trial steps shorter than this, relative to the point scale, end a search.
const NEGLIGIBLE: f64 = 1e-13;
const STEP_RANGE: (f64, f64) = (1e-14, 1e14);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InnerParams {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub initial_step: f64,
    pub backtrack_factor: f64,
    /// Extra random starts on top of the warm start.
    pub restarts: usize,
}

impl Default for InnerParams {
    fn default() -> Self {
        InnerParams {
            max_iters: 5000,
            grad_tol: 1e-8,
            initial_step: 1.0,
            backtrack_factor: 0.5,
            restarts: 0,
        }
    }
}

impl InnerParams {
    pub fn validate(&self) -> Result<(), ScnError> {
        let bad = |what: &str| Err(ScnError::InvalidParam(what.to_string()));
        if self.max_iters == 0 {
            return bad("inner.max_iters must be at least 1");
        }
        if !(self.grad_tol > 0.0) {
            return bad("inner.grad_tol must be positive");
        }
        if !(self.initial_step > 0.0) || !self.initial_step.is_finite() {
            return bad("inner.initial_step must be positive and finite");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("inner.backtrack_factor must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Sup norm of `P(u - grad) - u` at the returned point.
    pub proj_grad_norm: f64,
    pub converged: bool,
    /// Objective after each accepted step, starting with the start value.
    pub values: Vec<f64>,
}

fn proj_grad_norm(domain: &BoxDomain, u: &[f64], g: &[f64]) -> f64 {
    let (lo, hi) = (domain.lower(), domain.upper());
    u.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (v, d))| ((v - d).clamp(lo[i], hi[i]) - v).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Accepted {
    point: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    s: Vec<f64>,
    t: f64,
}

/// Backtracking along the projection arc `P(u + t dir)` until
/// `f(trial) <= f(u) - ARMIJO dir.(trial - u)`.
fn arc_search<F>(
    objective: &F,
    domain: &BoxDomain,
    u: &[f64],
    f: f64,
    dir: &[f64],
    t0: f64,
    factor: f64,
) -> Option<Accepted>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>), ScnError>,
{
    let mut t = t0;
    let scale = u.iter().fold(1.0, |m: f64, v| m.max(v.abs()));
    let reach = dir.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    for _ in 0..MAX_BACKTRACKS {
        if t * reach < NEGLIGIBLE * scale {
            return None;
        }
        let mut trial: Vec<f64> = u.iter().zip(dir).map(|(v, d)| v + t * d).collect();
        domain.project(&mut trial);
        let s: Vec<f64> = trial.iter().zip(u).map(|(a, b)| a - b).collect();
        let slope = -dot(dir, &s);
        if slope >= 0.0 {
            return None;
        }
        if let Ok((value, grad)) = objective(&trial) {
            if value.is_finite()
                && grad.iter().all(|v| v.is_finite())
                && value <= f + ARMIJO * slope
            {
                return Some(Accepted {
                    point: trial,
                    value,
                    grad,
                    s,
                    t,
                });
            }
        }
        t *= factor;
    }
    None
}

/// One Gauss-Seidel pass of single-coordinate Armijo searches, each accepted
/// step doubled while the value keeps dropping. Used when the full projected
/// gradient step fails, which happens when some coordinates sit on a kink.
fn coordinate_pass<F>(
    objective: &F,
    domain: &BoxDomain,
    u: &[f64],
    f: f64,
    g: &[f64],
    params: &InnerParams,
) -> Option<Accepted>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>), ScnError>,
{
    let n = u.len();
    let (mut cur, mut fc, mut gc) = (u.to_vec(), f, g.to_vec());
    let mut moved = false;
    for i in 0..n {
        if gc[i] == 0.0 || !gc[i].is_finite() {
            continue;
        }
        let mut dir = vec![0.0; n];
        dir[i] = -gc[i];
        let t0 = params.initial_step / gc[i].abs().max(1.0);
        let Some(mut acc) = arc_search(
            objective,
            domain,
            &cur,
            fc,
            &dir,
            t0,
            params.backtrack_factor,
        ) else {
            continue;
        };
        for _ in 0..MAX_BACKTRACKS {
            let t = 2.0 * acc.t;
            let mut trial = cur.clone();
            trial[i] = cur[i] + t * dir[i];
            domain.project(&mut trial);
            if trial[i] == acc.point[i] {
                break;
            }
            match objective(&trial) {
                Ok((v, gv))
                    if v.is_finite() && gv.iter().all(|d| d.is_finite()) && v < acc.value =>
                {
                    acc = Accepted {
                        s: trial.iter().zip(&cur).map(|(a, b)| a - b).collect(),
                        point: trial,
                        value: v,
                        grad: gv,
                        t,
                    };
                }
                _ => break,
            }
        }
        cur = acc.point;
        fc = acc.value;
        gc = acc.grad;
        moved = true;
    }
    moved.then(|| Accepted {
        s: cur.iter().zip(u).map(|(a, b)| a - b).collect(),
        point: cur,
        value: fc,
        grad: gc,
        t: params.initial_step,
    })
}

/// Minimizes a smooth objective over `domain` from `start` (projected first).
///
/// Trial points where the objective errors or is not finite are treated as
/// `+inf` and rejected by the line search. When the gradient step fails, a
/// coordinate pass is tried before giving up.
pub fn inner_minimize<F>(
    objective: F,
    domain: &BoxDomain,
    start: &[f64],
    params: &InnerParams,
) -> Result<InnerResult, ScnError>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>), ScnError>,
{
    params.validate()?;
    if start.len() != domain.dim() {
        return Err(ScnError::Dimension {
            expected: domain.dim(),
            got: start.len(),
        });
    }
    let mut u = start.to_vec();
    domain.project(&mut u);
    let (mut f, mut g) = objective(&u)?;
    if !f.is_finite() || g.iter().any(|d| !d.is_finite()) {
        return Err(ScnError::NonFiniteStart);
    }
    let mut values = vec![f];
    let mut step = params.initial_step;
    let mut iterations = 0;
    let mut pg = proj_grad_norm(domain, &u, &g);
    while pg > params.grad_tol && iterations < params.max_iters {
        let descent: Vec<f64> = g.iter().map(|d| -d).collect();
        let mut accepted = arc_search(
            &objective,
            domain,
            &u,
            f,
            &descent,
            step,
            params.backtrack_factor,
        );
        if accepted.is_none() {
            accepted = coordinate_pass(&objective, domain, &u, f, &g, params);
        }
        let Some(acc) = accepted else {
            break;
        };
        let yv: Vec<f64> = acc.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&acc.s, &yv);
        step = if sy > 0.0 {
            (dot(&acc.s, &acc.s) / sy).clamp(STEP_RANGE.0, STEP_RANGE.1)
        } else {
            (2.0 * acc.t).clamp(params.initial_step, STEP_RANGE.1)
        };
        u = acc.point;
        f = acc.value;
        g = acc.grad;
        values.push(f);
        iterations += 1;
        pg = proj_grad_norm(domain, &u, &g);
    }
    Ok(InnerResult {
        converged: pg <= params.grad_tol,
        point: u,
        value: f,
        iterations,
        proj_grad_norm: pg,
        values,
    })
}

/// Uniform samples from `window`; unbounded sides are clipped to `[-10, 10]`.
pub fn sample_starts(window: &BoxDomain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let w = window.clipped(10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            w.lower()
                .iter()
                .zip(w.upper())
                .map(|(lo, hi)| {
                    if lo < hi {
                        rng.random_range(*lo..*hi)
                    } else {
                        *lo
                    }
                })
                .collect()
        })
        .collect()
}

/// Lowest value wins; ties go to the lexicographically smallest point.
pub(crate) fn better(a: &InnerResult, b: &InnerResult) -> bool {
    match a.value.total_cmp(&b.value) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => a
            .point
            .iter()
            .zip(&b.point)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .is_some_and(|o| o.is_lt()),
    }
}

/// Runs `inner_minimize` from every start in parallel and keeps the best.
///
/// Starts that fail are skipped; if all fail, the first error is returned.
pub fn multistart_minimize<F>(
    objective: F,
    domain: &BoxDomain,
    starts: &[Vec<f64>],
    params: &InnerParams,
) -> Result<InnerResult, ScnError>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>), ScnError> + Sync,
{
    if starts.is_empty() {
        return Err(ScnError::InvalidParam(
            "multistart needs at least one start".into(),
        ));
    }
    let runs: Vec<Result<InnerResult, ScnError>> = starts
        .par_iter()
        .map(|s| inner_minimize(&objective, domain, s, params))
        .collect();
    let mut best: Option<InnerResult> = None;
    let mut first_err = None;
    for r in runs {
        match r {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| better(&r, b)) {
                    best = Some(r);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one start ran"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(u: &[f64]) -> Result<(f64, Vec<f64>), ScnError> {
        Ok(((u[0] - 3.0).powi(2), vec![2.0 * (u[0] - 3.0)]))
    }

    fn interval(lo: f64, hi: f64) -> BoxDomain {
        BoxDomain::new(vec![lo], vec![hi]).unwrap()
    }

    #[test]
    fn interior_minimum() {
        let r =
            inner_minimize(quad, &interval(0.0, 10.0), &[0.0], &InnerParams::default()).unwrap();
        assert!((r.point[0] - 3.0).abs() < 1e-6);
        assert!(r.converged);
    }

    #[test]
    fn boundary_minimum() {
        let r = inner_minimize(quad, &interval(0.0, 2.0), &[0.0], &InnerParams::default()).unwrap();
        assert!((r.point[0] - 2.0).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn start_is_projected() {
        let r =
            inner_minimize(quad, &interval(5.0, 6.0), &[-4.0], &InnerParams::default()).unwrap();
        assert_eq!(r.point, vec![5.0]);
    }

    #[test]
    fn non_finite_start_is_rejected() {
        let f = |_: &[f64]| Ok((f64::NAN, vec![0.0]));
        assert!(matches!(
            inner_minimize(f, &interval(0.0, 1.0), &[0.5], &InnerParams::default()),
            Err(ScnError::NonFiniteStart)
        ));
    }

    #[test]
    fn failing_trials_are_rejected() {
        // the objective is undefined left of 1, the minimum sits at 1
        let f = |u: &[f64]| {
            if u[0] < 1.0 {
                Err(ScnError::Infeasible("outside".into()))
            } else {
                Ok((u[0] * u[0], vec![2.0 * u[0]]))
            }
        };
        let r = inner_minimize(f, &interval(-5.0, 5.0), &[4.0], &InnerParams::default()).unwrap();
        assert!(r.point[0] >= 1.0 && r.point[0] < 1.0 + 1e-6);
    }

    #[test]
    fn values_never_increase() {
        let rosen = |u: &[f64]| {
            let (a, b) = (u[0], u[1]);
            Ok((
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2),
                vec![
                    -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                    200.0 * (b - a * a),
                ],
            ))
        };
        let dom = BoxDomain::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let r = inner_minimize(rosen, &dom, &[-1.5, 1.5], &InnerParams::default()).unwrap();
        assert!(r.values.windows(2).all(|w| w[1] <= w[0]));
        assert!((r.point[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn coordinate_pass_moves_past_a_kink() {
        // u0 rests on a steep kink at 0.5; a joint gradient step crosses it for every t
        let f = |u: &[f64]| {
            let v = (0.5 - u[0]).max(0.0);
            let dv = if v > 0.0 { -101.0 * v.powf(0.01) } else { 0.0 };
            Ok((
                (u[1] - 3.0).powi(2) + 2.0 * u[0] + 100.0 * v.powf(1.01),
                vec![2.0 + dv, 2.0 * (u[1] - 3.0)],
            ))
        };
        let dom = BoxDomain::new(vec![-5.0, -5.0], vec![5.0, 5.0]).unwrap();
        let r = inner_minimize(f, &dom, &[0.5, 0.0], &InnerParams::default()).unwrap();
        assert!((r.point[1] - 3.0).abs() < 1e-6, "{r:?}");
        assert!((r.point[0] - 0.5).abs() < 1e-6);
        assert!(r.values.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn params_are_checked() {
        let p = InnerParams {
            backtrack_factor: 1.0,
            ..InnerParams::default()
        };
        assert!(inner_minimize(quad, &interval(0.0, 1.0), &[0.0], &p).is_err());
    }

    #[test]
    fn multistart_picks_lowest_then_smallest() {
        // two global minima at -1 and 1
        let w = |u: &[f64]| {
            Ok((
                (u[0] * u[0] - 1.0).powi(2),
                vec![4.0 * u[0] * (u[0] * u[0] - 1.0)],
            ))
        };
        let dom = interval(-3.0, 3.0);
        let r = multistart_minimize(w, &dom, &[vec![2.0], vec![-2.0]], &InnerParams::default())
            .unwrap();
        assert!(r.point[0] < 0.0);
        let again = multistart_minimize(w, &dom, &[vec![-2.0], vec![2.0]], &InnerParams::default())
            .unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn starts_are_seeded() {
        let w = BoxDomain::new(vec![0.0, f64::NEG_INFINITY], vec![1.0, f64::INFINITY]).unwrap();
        let a = sample_starts(&w, 5, 9);
        assert_eq!(a, sample_starts(&w, 5, 9));
        assert!(a
            .iter()
            .all(|s| (0.0..=1.0).contains(&s[0]) && s[1].abs() <= 10.0));
    }
}
