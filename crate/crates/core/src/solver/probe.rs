//! Empirical probes of penalty exactness and of stability under constraint
//! perturbations. Both produce reports rather than verdicts.

use serde::Serialize;

use crate::domain::SaddlePoint;
use crate::error::ScnError;
use crate::form::ScnForm;
use crate::penalty::{penalty_f_subgradient, penalty_g_subgradient};

use super::apfa::{apfa_solve, SolverParams};
use super::inner::{inner_minimize, sample_starts, InnerParams, InnerResult};

/// Improvement margin that counts as evidence against exactness.
pub const IMPROVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactnessEntry {
    pub rho: f64,
    /// `F(p*; ρ)`, which equals `g(p*)` at a feasible point.
    pub f_star: f64,
    pub best_f: f64,
    pub best_xy: Vec<f64>,
    pub f_improved: bool,
    pub g_star: f64,
    pub best_g: f64,
    pub best_z: Vec<f64>,
    pub g_improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactnessReport {
    pub entries: Vec<ExactnessEntry>,
}

impl ExactnessReport {
    /// Smallest probed ρ from which no probed ρ showed an improvement.
    pub fn empirical_threshold(&self) -> Option<f64> {
        let mut sorted: Vec<&ExactnessEntry> = self.entries.iter().collect();
        sorted.sort_by(|a, b| a.rho.total_cmp(&b.rho));
        let mut threshold = None;
        for e in sorted.into_iter().rev() {
            if e.f_improved || e.g_improved {
                break;
            }
            threshold = Some(e.rho);
        }
        threshold
    }
}

fn check_feasible(form: &ScnForm, p: &SaddlePoint) -> Result<(), ScnError> {
    if p.partition() != form.partition() {
        return Err(ScnError::Dimension {
            expected: form.partition().total(),
            got: p.as_slice().len(),
        });
    }
    if !form.membership(p, 1e-6)?.feasible {
        return Err(ScnError::Infeasible("probe point is not feasible".into()));
    }
    Ok(())
}

/// Best candidate among the sampled starts and the local solves from them.
fn search<F>(
    objective: F,
    form: &ScnForm,
    range: std::ops::Range<usize>,
    restarts: usize,
    seed: u64,
) -> Option<InnerResult>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>), ScnError> + Sync,
{
    use rayon::prelude::*;
    let dom = form.domain().restrict(range.clone());
    let window = form.window().restrict(range);
    let params = InnerParams {
        max_iters: 2000,
        ..InnerParams::default()
    };
    let runs: Vec<InnerResult> = sample_starts(&window, restarts, seed)
        .par_iter()
        .filter_map(|s| inner_minimize(&objective, &dom, s, &params).ok())
        .collect();
    runs.into_iter()
        .filter(|r| r.value.is_finite())
        .reduce(|a, b| if super::inner::better(&b, &a) { b } else { a })
}

/// Multistart search for points beating `F(p*)` over (x, y) with `z*` fixed
/// and `G(p*)` over z with `(x*, y*)` fixed, for each ρ. ρ = 0 is allowed.
pub fn exactness_probe(
    form: &ScnForm,
    p_star: &SaddlePoint,
    rho_list: &[f64],
    restarts: usize,
    seed: u64,
) -> Result<ExactnessReport, ScnError> {
    check_feasible(form, p_star)?;
    if restarts == 0 {
        return Err(ScnError::InvalidParam(
            "exactness probe needs at least one restart".into(),
        ));
    }
    let part = form.partition();
    let base = p_star.as_slice();
    let mut entries = Vec::new();
    for (n, &rho) in rho_list.iter().enumerate() {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(ScnError::InvalidParam(format!(
                "rho must be finite and nonnegative, got {rho}"
            )));
        }
        let seed = seed.wrapping_add(n as u64);
        let (f_star, _) = penalty_f_subgradient(form, base, rho)?;
        let (g_star, _) = penalty_g_subgradient(form, base, rho)?;
        let block = |range: std::ops::Range<usize>, sign_f: bool| {
            move |u: &[f64]| {
                let mut full = base.to_vec();
                full[range.clone()].copy_from_slice(u);
                let (v, g) = if sign_f {
                    penalty_f_subgradient(form, &full, rho)?
                } else {
                    penalty_g_subgradient(form, &full, rho)?
                };
                Ok((v, g[range.clone()].to_vec()))
            }
        };
        let (best_f, best_xy) = match search(
            block(part.xy_range(), true),
            form,
            part.xy_range(),
            restarts,
            seed,
        ) {
            Some(r) if r.value < f_star => (r.value, r.point),
            _ => (f_star, base[part.xy_range()].to_vec()),
        };
        let (best_g, best_z) = match search(
            block(part.z_range(), false),
            form,
            part.z_range(),
            restarts,
            seed ^ 1,
        ) {
            Some(r) if r.value < g_star => (r.value, r.point),
            _ => (g_star, base[part.z_range()].to_vec()),
        };
        entries.push(ExactnessEntry {
            rho,
            f_star,
            best_f,
            best_xy,
            f_improved: best_f < f_star - IMPROVE_TOL,
            g_star,
            best_g,
            best_z,
            g_improved: best_g < g_star - IMPROVE_TOL,
        });
    }
    Ok(ExactnessReport { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilitySample {
    pub eta: Vec<f64>,
    pub tau: Vec<f64>,
    /// `Σ max(η_i, 0) + Σ |τ_j|`.
    pub size: f64,
    /// `|g(p*) - g(p*_{η,τ})|`, absent when the perturbed solve failed.
    pub value_change: Option<f64>,
    pub ratio: Option<f64>,
    pub holds: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub rho: f64,
    pub samples: Vec<StabilitySample>,
    /// Smallest ρ for which every solved sample satisfies the bound.
    pub tightest_rho: f64,
    pub exceeds_rho: bool,
}

/// Solves each perturbed problem by APFA from `p*` and compares optimal values
/// against `ρ |(η, τ)|`.
pub fn stability_probe(
    form: &ScnForm,
    p_star: &SaddlePoint,
    perturbations: &[(Vec<f64>, Vec<f64>)],
    rho: f64,
    params: &SolverParams,
) -> Result<StabilityReport, ScnError> {
    check_feasible(form, p_star)?;
    let g_star = form.eval_g(p_star.as_slice())?;
    let mut samples = Vec::new();
    let mut tightest: f64 = 0.0;
    for (eta, tau) in perturbations {
        let size =
            eta.iter().map(|v| v.max(0.0)).sum::<f64>() + tau.iter().map(|v| v.abs()).sum::<f64>();
        let zero = eta.iter().chain(tau).all(|v| *v == 0.0);
        let solved = if zero {
            form.with_shifted_constraints(eta, tau).map(|_| g_star)
        } else {
            form.with_shifted_constraints(eta, tau).and_then(|pf| {
                let r = apfa_solve(&pf, params, p_star)?;
                pf.eval_g(r.point.as_slice())
            })
        };
        let sample = match solved {
            Ok(g) => {
                let change = (g_star - g).abs();
                let ratio = if size > 0.0 {
                    change / size
                } else if change == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                tightest = tightest.max(ratio);
                StabilitySample {
                    eta: eta.clone(),
                    tau: tau.clone(),
                    size,
                    value_change: Some(change),
                    ratio: Some(ratio),
                    holds: Some(change <= rho * size),
                    error: None,
                }
            }
            Err(e) => StabilitySample {
                eta: eta.clone(),
                tau: tau.clone(),
                size,
                value_change: None,
                ratio: None,
                holds: None,
                error: Some(e.to_string()),
            },
        };
        samples.push(sample);
    }
    Ok(StabilityReport {
        rho,
        samples,
        tightest_rho: tightest,
        exceeds_rho: tightest > rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{
        make_catalog_form, make_structured, CatalogId, CatalogParams, StructuredKind,
    };
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
            .window(0, -2.0, 2.0)
            .window(1, 0.0, 2.0)
            .build()
            .unwrap()
    }

    fn origin() -> SaddlePoint {
        SaddlePoint::new(VarPartition::new(1, 1, 1).unwrap(), vec![0.0; 3]).unwrap()
    }

    #[test]
    fn quartic_kkt_shows_no_improvement() {
        let r = exactness_probe(&quartic_kkt(), &origin(), &[10.0, 100.0], 16, 1).unwrap();
        for e in &r.entries {
            assert!(!e.f_improved && !e.g_improved, "{e:?}");
        }
        assert_eq!(r.empirical_threshold(), Some(10.0));
    }

    #[test]
    fn zero_rho_finds_improvement_when_g_can_drop() {
        let data = serde_json::json!({"n": 1, "g": "(sq (+ x0 -1))", "curvature": "convex", "lambda": 2.0});
        let f = make_structured(StructuredKind::SparseL0, &data).unwrap();
        let p = SaddlePoint::new(f.partition(), vec![0.0, 0.0, 1.0]).unwrap();
        let r = exactness_probe(&f, &p, &[0.0], 8, 2).unwrap();
        assert!(r.entries[0].f_improved);
    }

    #[test]
    fn dc_optimum_is_not_improved() {
        let f = make_catalog_form(CatalogId::Dc, &CatalogParams::new()).unwrap();
        let p = SaddlePoint::new(f.partition(), vec![0.0, 0.0]).unwrap();
        let r = exactness_probe(&f, &p, &[10.0], 16, 3).unwrap();
        assert!(
            !r.entries[0].f_improved && !r.entries[0].g_improved,
            "{r:?}"
        );
    }

    #[test]
    fn probe_is_deterministic() {
        let a = exactness_probe(&quartic_kkt(), &origin(), &[1.0], 8, 5).unwrap();
        let b = exactness_probe(&quartic_kkt(), &origin(), &[1.0], 8, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_perturbation_is_trivial() {
        let r = stability_probe(
            &quartic_kkt(),
            &origin(),
            &[(vec![0.0; 3], vec![])],
            10.0,
            &SolverParams::default(),
        )
        .unwrap();
        assert_eq!(r.samples[0].value_change, Some(0.0));
        assert_eq!(r.samples[0].holds, Some(true));
    }

    #[test]
    fn small_perturbation_respects_the_bound() {
        let r = stability_probe(
            &quartic_kkt(),
            &origin(),
            &[(vec![0.01; 3], vec![])],
            10.0,
            &SolverParams::default(),
        )
        .unwrap();
        let s = &r.samples[0];
        assert!((s.size - 0.03).abs() < 1e-15);
        assert_eq!(s.holds, Some(true), "{s:?}");
    }

    #[test]
    fn large_perturbation_reports_a_ratio() {
        let r = stability_probe(
            &quartic_kkt(),
            &origin(),
            &[(vec![10.0; 3], vec![])],
            10.0,
            &SolverParams::default(),
        )
        .unwrap();
        assert!(r.samples[0].ratio.is_some() || r.samples[0].error.is_some());
        assert_eq!(r.exceeds_rho, r.tightest_rho > 10.0);
    }

    #[test]
    fn shifted_form_dimensions_are_checked() {
        assert!(quartic_kkt().with_shifted_constraints(&[0.0], &[]).is_err());
    }
}
