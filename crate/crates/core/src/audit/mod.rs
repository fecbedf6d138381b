//! Brute-force grid oracles for the min-max identity, the per-form identity
//! audit and the known-issues registry.

mod registry;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{BoxDomain, SaddlePoint};
use crate::error::ScnError;
use crate::form::{ScnForm, WITNESS_TOL};

pub use registry::{
    audit_all, audit_form, registry_forms, AuditConfig, Registry, RegistryEntry, KNOWN_ISSUES,
    REGISTRY_AUDIT,
};

/// Largest `m1 + m2` the grid oracle accepts.
pub const GRID_DIM_CAP: usize = 4;
/// Largest number of (y, z) grid points per x.
pub const GRID_POINT_CAP: usize = 50_000_000;
/// Feasibility tolerance of grid points.
pub const GRID_FEAS_TOL: f64 = 1e-9;

/// A tensor grid over the `y ‖ z` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub bounds: BoxDomain,
    /// Points per axis; degenerate axes (`lo == hi`) use one point.
    pub resolution: usize,
}

impl Grid {
    pub fn new(bounds: BoxDomain, resolution: usize) -> Result<Self, ScnError> {
        if !bounds.is_bounded() {
            return Err(ScnError::InvalidParam("grid bounds must be finite".into()));
        }
        if resolution < 2 {
            return Err(ScnError::InvalidParam(format!(
                "grid resolution must be at least 2, got {resolution}"
            )));
        }
        Ok(Grid { bounds, resolution })
    }

    fn axis(&self, a: usize) -> Vec<f64> {
        let (lo, hi) = (self.bounds.lower()[a], self.bounds.upper()[a]);
        if lo == hi {
            return vec![lo];
        }
        let r = self.resolution - 1;
        (0..=r)
            .map(|i| lo + (hi - lo) * i as f64 / r as f64)
            .collect()
    }

    /// Largest spacing of each axis.
    pub fn steps(&self) -> Vec<f64> {
        (0..self.bounds.dim())
            .map(|a| {
                (self.bounds.upper()[a] - self.bounds.lower()[a]) / (self.resolution - 1) as f64
            })
            .collect()
    }

    fn points(&self, axes: &[Vec<f64>]) -> usize {
        axes.iter().map(Vec::len).product()
    }
}

/// Outcome of the grid min-max at one x.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinMax {
    /// `min_y max_z g`, or `+inf` when no grid point is feasible.
    pub value: f64,
    pub y: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
}

impl MinMax {
    pub fn is_feasible(&self) -> bool {
        self.value.is_finite()
    }
}

fn decode(mut idx: usize, axes: &[Vec<f64>], out: &mut [f64]) {
    for (a, vals) in axes.iter().enumerate().rev() {
        out[a] = vals[idx % vals.len()];
        idx /= vals.len();
    }
}

fn feasible(form: &ScnForm, p: &[f64]) -> bool {
    form.domain().excess(p) <= GRID_FEAS_TOL
        && form
            .ineq()
            .iter()
            .all(|e| e.eval(p).is_ok_and(|v| v <= GRID_FEAS_TOL))
        && form
            .eq()
            .iter()
            .all(|e| e.eval(p).is_ok_and(|v| v.abs() <= GRID_FEAS_TOL))
}

/// `min_y max_z { g(x, y, z) : (x, y, z) feasible }` over the grid. A y whose
/// z slice has no feasible point is skipped. Ties go to the lowest grid index.
pub fn grid_minmax(form: &ScnForm, x: &[f64], grid: &Grid) -> Result<MinMax, ScnError> {
    let p = form.partition();
    if x.len() != p.n {
        return Err(ScnError::Dimension {
            expected: p.n,
            got: x.len(),
        });
    }
    let d = p.m1 + p.m2;
    if d > GRID_DIM_CAP {
        return Err(ScnError::GridTooLarge {
            cap: GRID_DIM_CAP,
            got: d,
        });
    }
    if grid.bounds.dim() != d {
        return Err(ScnError::Dimension {
            expected: d,
            got: grid.bounds.dim(),
        });
    }
    let axes: Vec<Vec<f64>> = (0..d).map(|a| grid.axis(a)).collect();
    let total = grid.points(&axes);
    if total > GRID_POINT_CAP {
        return Err(ScnError::GridTooLarge {
            cap: GRID_POINT_CAP,
            got: total,
        });
    }
    let (y_axes, z_axes) = axes.split_at(p.m1);
    let ny: usize = y_axes.iter().map(Vec::len).product();
    let nz: usize = z_axes.iter().map(Vec::len).product();
    let best = (0..ny)
        .into_par_iter()
        .filter_map(|iy| {
            let mut pt = vec![0.0; p.total()];
            pt[..p.n].copy_from_slice(x);
            decode(iy, y_axes, &mut pt[p.y_range()]);
            let mut slice_max: Option<(f64, usize)> = None;
            for iz in 0..nz {
                decode(iz, z_axes, &mut pt[p.z_range()]);
                if !feasible(form, &pt) {
                    continue;
                }
                let Ok(g) = form.g().eval(&pt) else {
                    continue;
                };
                if slice_max.is_none_or(|(m, _)| g > m) {
                    slice_max = Some((g, iz));
                }
            }
            slice_max.map(|(v, iz)| (v, iy, iz))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(match best {
        None => MinMax {
            value: f64::INFINITY,
            y: None,
            z: None,
        },
        Some((value, iy, iz)) => {
            let mut y = vec![0.0; p.m1];
            let mut z = vec![0.0; p.m2];
            decode(iy, y_axes, &mut y);
            decode(iz, z_axes, &mut z);
            MinMax {
                value,
                y: Some(y),
                z: Some(z),
            }
        }
    })
}

/// Per-axis bound on `|∂g/∂(y, z)|` from random samples of the grid box at x.
pub fn sampled_lipschitz(
    form: &ScnForm,
    x: &[f64],
    grid: &Grid,
    samples: usize,
    seed: u64,
) -> Vec<f64> {
    let p = form.partition();
    let d = p.m1 + p.m2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bound = vec![0.0f64; d];
    let mut pt = vec![0.0; p.total()];
    pt[..p.n].copy_from_slice(x);
    for _ in 0..samples {
        for a in 0..d {
            let (lo, hi) = (grid.bounds.lower()[a], grid.bounds.upper()[a]);
            pt[p.n + a] = if lo < hi {
                rng.random_range(lo..=hi)
            } else {
                lo
            };
        }
        if let Ok(gr) = form.g().gradient(&pt) {
            for a in 0..d {
                if gr[p.n + a].is_finite() {
                    bound[a] = bound[a].max(gr[p.n + a].abs());
                }
            }
        }
    }
    bound
}

/// Per-axis bound on `|∂g/∂(y, z)|` sampled within one grid cell of each
/// center point `(x, y, z)`.
pub fn local_lipschitz(
    form: &ScnForm,
    centers: &[Vec<f64>],
    grid: &Grid,
    samples: usize,
    seed: u64,
) -> Vec<f64> {
    let p = form.partition();
    let d = p.m1 + p.m2;
    let h = grid.steps();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bound = vec![0.0f64; d];
    for c in centers {
        for k in 0..=samples {
            let mut pt = c.clone();
            for a in 0..d {
                let (lo, hi) = (grid.bounds.lower()[a], grid.bounds.upper()[a]);
                let v = c[p.n + a].clamp(lo, hi);
                let (l, u) = ((v - h[a]).max(lo), (v + h[a]).min(hi));
                pt[p.n + a] = if k == 0 || l >= u {
                    v
                } else {
                    rng.random_range(l..=u)
                };
            }
            if let Ok(gr) = form.g().gradient(&pt) {
                for a in 0..d {
                    if gr[p.n + a].is_finite() {
                        bound[a] = bound[a].max(gr[p.n + a].abs());
                    }
                }
            }
        }
    }
    bound
}

/// Audit class of a form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum IdentityClass {
    /// Witness identity and grid min-max identity both hold on every sample.
    #[serde(rename = "d2-and-d3-verified")]
    Verified,
    /// Witness identity holds; the min-max identity failed or is out of reach.
    #[serde(rename = "d2-only")]
    WitnessOnly,
    /// The witness identity fails somewhere.
    #[serde(rename = "failed")]
    Failed,
}

impl IdentityClass {
    pub fn as_str(self) -> &'static str {
        match self {
            IdentityClass::Verified => "d2-and-d3-verified",
            IdentityClass::WitnessOnly => "d2-only",
            IdentityClass::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            IdentityClass::Verified,
            IdentityClass::WitnessOnly,
            IdentityClass::Failed,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
    }
}

/// How the grid is chosen for each audited x.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub resolution: usize,
    /// Bounds over `y ‖ z`; defaults to the form window joined with the
    /// bounding box of the witness points at the audited xs.
    pub bounds: Option<BoxDomain>,
}

impl GridSpec {
    pub fn with_resolution(resolution: usize) -> Self {
        GridSpec {
            resolution,
            bounds: None,
        }
    }

    /// The largest resolution whose grid stays within `budget` points.
    pub fn budgeted(dims: usize, budget: usize, max_resolution: usize) -> Self {
        let r = if dims == 0 {
            max_resolution
        } else {
            ((budget as f64).powf(1.0 / dims as f64).floor() as usize).clamp(2, max_resolution)
        };
        GridSpec::with_resolution(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleAudit {
    pub x: Vec<f64>,
    pub reference: Option<f64>,
    /// `g` at the witness point.
    pub witness_value: Option<f64>,
    pub witness_violation: Option<f64>,
    pub d2_holds: bool,
    pub oracle: Option<MinMax>,
    /// `tol + Σ h_a L_a` used for the min-max comparison, `L_a` sampled near
    /// the witness and the grid saddle point.
    pub allowance: Option<f64>,
    /// `None` when the grid oracle could not run.
    pub d3_holds: Option<bool>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub form: String,
    pub class: IdentityClass,
    /// A point `(x, y, z)` showing the first failure.
    pub counterexample: Option<SaddlePoint>,
    pub samples: Vec<SampleAudit>,
}

impl IdentityReport {
    /// Counterexample in the registry notation `x=[..] y=[..] z=[..]`.
    pub fn counterexample_text(&self) -> String {
        match &self.counterexample {
            None => "none".into(),
            Some(p) => format_point(p),
        }
    }
}

pub fn format_point(p: &SaddlePoint) -> String {
    let block = |v: &[f64]| {
        v.iter()
            .map(|c| format!("{c:.6e}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    format!(
        "x=[{}] y=[{}] z=[{}]",
        block(p.x()),
        block(p.y()),
        block(p.z())
    )
}

/// Seeded uniform samples of x from the form's window.
pub fn audit_samples(form: &ScnForm, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let w = form
        .window()
        .restrict(form.partition().x_range())
        .clipped(10.0);
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

fn default_bounds(form: &ScnForm, xs: &[Vec<f64>]) -> Result<BoxDomain, ScnError> {
    let p = form.partition();
    let yz = p.n..p.total();
    let w = form.window().restrict(yz.clone()).clipped(10.0);
    let mut lower = w.lower().to_vec();
    let mut upper = w.upper().to_vec();
    for x in xs {
        if let Ok(pt) = form.witness_point(x) {
            for (a, v) in pt.as_slice()[yz.clone()].iter().enumerate() {
                if v.is_finite() {
                    lower[a] = lower[a].min(*v);
                    upper[a] = upper[a].max(*v);
                }
            }
        }
    }
    BoxDomain::new(lower, upper)
}

/// Witness identity and grid min-max identity at each x, and the resulting class.
///
/// The min-max identity passes at x when `|oracle - f(x)| <= tol + Σ h_a L_a`,
/// with `h_a` the grid spacing and `L_a` a bound on `|∂g/∂a|` sampled within
/// one cell of the witness and of the grid saddle point.
pub fn identity_audit(
    form: &ScnForm,
    xs: &[Vec<f64>],
    grid: &GridSpec,
    tol: f64,
) -> Result<IdentityReport, ScnError> {
    let p = form.partition();
    let d = p.m1 + p.m2;
    let grid = if d <= GRID_DIM_CAP {
        let bounds = match &grid.bounds {
            Some(b) => b.clone(),
            None => default_bounds(form, xs)?,
        };
        Some(Grid::new(bounds, grid.resolution)?)
    } else {
        None
    };
    let mut samples = Vec::new();
    let mut class = IdentityClass::Verified;
    let mut counterexample = None;
    for (i, x) in xs.iter().enumerate() {
        let reference = form.reference(x).ok();
        let check = form.witness_check(x);
        let (witness_value, witness_violation, d2_holds, witness_point) = match &check {
            Ok(c) => (
                Some(c.g_value),
                Some(c.max_violation),
                reference.is_some() && c.identity_holds(),
                Some(c.point.clone()),
            ),
            Err(_) => (None, None, false, None),
        };
        let mut note = check.as_ref().err().map(|e| e.to_string());
        if !d2_holds && class != IdentityClass::Failed {
            class = IdentityClass::Failed;
            counterexample = witness_point.clone().or_else(|| {
                SaddlePoint::from_blocks(p, x, &vec![0.0; p.m1], &vec![0.0; p.m2]).ok()
            });
        }
        let (oracle, allowance, d3_holds) = match (&grid, reference) {
            (Some(g), Some(r)) => match grid_minmax(form, x, g) {
                Ok(m) => {
                    let mut centers: Vec<Vec<f64>> = witness_point
                        .iter()
                        .map(|w| w.as_slice().to_vec())
                        .collect();
                    if let (Some(y), Some(z)) = (&m.y, &m.z) {
                        centers.push([x.as_slice(), y, z].concat());
                    }
                    let lip = local_lipschitz(form, &centers, g, 32, 0xD3 + i as u64);
                    let allow = tol + g.steps().iter().zip(&lip).map(|(h, l)| h * l).sum::<f64>();
                    let ok = m.is_feasible() && (m.value - r).abs() <= allow;
                    (Some(m), Some(allow), Some(ok))
                }
                Err(e) => {
                    note = Some(e.to_string());
                    (None, None, None)
                }
            },
            (None, _) => {
                note.get_or_insert_with(|| {
                    format!("grid oracle needs m1 + m2 <= {GRID_DIM_CAP}, got {d}")
                });
                (None, None, None)
            }
            (_, None) => (None, None, None),
        };
        if d3_holds != Some(true) && class == IdentityClass::Verified {
            class = IdentityClass::WitnessOnly;
            if let Some(m) = oracle.as_ref().filter(|m| m.is_feasible()) {
                let (y, z) = (
                    m.y.clone().unwrap_or_default(),
                    m.z.clone().unwrap_or_default(),
                );
                counterexample = SaddlePoint::from_blocks(p, x, &y, &z).ok();
            }
        }
        samples.push(SampleAudit {
            x: x.clone(),
            reference,
            witness_value,
            witness_violation,
            d2_holds,
            oracle,
            allowance,
            d3_holds,
            note,
        });
    }
    Ok(IdentityReport {
        form: form.name().to_string(),
        class,
        counterexample,
        samples,
    })
}

/// Largest `|g(witness(x)) - f(x)|` and witness violation over the samples,
/// with the first failing x. Used by the witness identity suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessSweep {
    pub form: String,
    pub samples: usize,
    pub max_gap: f64,
    pub max_violation: f64,
    pub first_failure: Option<Vec<f64>>,
}

impl WitnessSweep {
    pub fn holds(&self) -> bool {
        self.first_failure.is_none()
    }
}

pub fn witness_sweep(form: &ScnForm, xs: &[Vec<f64>]) -> WitnessSweep {
    let mut sweep = WitnessSweep {
        form: form.name().to_string(),
        samples: xs.len(),
        max_gap: 0.0,
        max_violation: 0.0,
        first_failure: None,
    };
    for x in xs {
        let ok = match form.witness_check(x) {
            Ok(c) => {
                let gap = c.gap.unwrap_or(f64::INFINITY);
                sweep.max_gap = sweep.max_gap.max(gap);
                sweep.max_violation = sweep.max_violation.max(c.max_violation);
                gap <= WITNESS_TOL && c.max_violation <= WITNESS_TOL && c.feasible
            }
            Err(_) => {
                sweep.max_gap = f64::INFINITY;
                false
            }
        };
        if !ok && sweep.first_failure.is_none() {
            sweep.first_failure = Some(x.clone());
        }
    }
    sweep
}
