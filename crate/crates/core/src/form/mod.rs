//! The SCN form `[g : g_1..g_s ; h_1..h_r]` over an (x, y, z) partition and box.

mod validate;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::domain::{BoxDomain, SaddlePoint, VarPartition};
use crate::error::ScnError;
use crate::expr::{Curvature, Expr};

pub(crate) use validate::sample_x;
pub use validate::{validate_form, AuditReport, CheckOutcome};

/// Maps x to the concatenated `y ‖ z` of a feasible point realizing f(x).
pub type WitnessFn = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>, ScnError> + Send + Sync>;
/// Direct evaluation of f(x).
pub type ReferenceFn = Arc<dyn Fn(&[f64]) -> Result<f64, ScnError> + Send + Sync>;

/// Absolute tolerance of the witness checks.
pub const WITNESS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueSign {
    Positive,
    Negative,
    Nonnegative,
}

impl ValueSign {
    pub fn holds(self, v: f64) -> bool {
        match self {
            ValueSign::Positive => v > 0.0,
            ValueSign::Negative => v < 0.0,
            ValueSign::Nonnegative => v >= 0.0,
        }
    }
}

/// Hypotheses a form declares about itself; the algebra checks them by sampling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Claims {
    /// g is convex in (x, y, z) jointly, not only in (x, y).
    pub g_jointly_convex: bool,
    /// Sign of g over the witness set, i.e. of f.
    pub value_sign: Option<ValueSign>,
}

#[derive(Clone)]
pub struct ScnForm {
    name: String,
    partition: VarPartition,
    domain: BoxDomain,
    window: BoxDomain,
    g: Expr,
    ineq: Vec<Expr>,
    eq: Vec<Expr>,
    witness: Option<WitnessFn>,
    reference: Option<ReferenceFn>,
    claims: Claims,
}

impl fmt::Debug for ScnForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScnForm")
            .field("name", &self.name)
            .field("partition", &self.partition)
            .field("s", &self.ineq.len())
            .field("r", &self.eq.len())
            .field("witness", &self.witness.is_some())
            .field("reference", &self.reference.is_some())
            .finish()
    }
}

/// Per-constraint violations at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport {
    /// `max(g_i, 0)`
    pub ineq: Vec<f64>,
    /// `|h_j|`
    pub eq: Vec<f64>,
    pub box_excess: f64,
    pub feasible: bool,
}

impl ViolationReport {
    pub fn max_violation(&self) -> f64 {
        self.ineq
            .iter()
            .chain(&self.eq)
            .copied()
            .fold(self.box_excess, f64::max)
    }

    /// Sum of constraint violations, box excluded.
    pub fn total(&self) -> f64 {
        self.ineq.iter().sum::<f64>() + self.eq.iter().sum::<f64>()
    }
}

/// Outcome of evaluating the witness at one x, without failing on a bad witness.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessCheck {
    pub point: SaddlePoint,
    pub g_value: f64,
    pub reference: Option<f64>,
    pub max_violation: f64,
    pub feasible: bool,
    /// `|g - f| / max(1, |f|)` when a reference exists.
    pub gap: Option<f64>,
}

impl WitnessCheck {
    pub fn identity_holds(&self) -> bool {
        self.feasible && self.gap.is_none_or(|g| g <= WITNESS_TOL)
    }
}

impl ScnForm {
    pub fn builder(name: impl Into<String>, partition: VarPartition) -> FormBuilder {
        FormBuilder {
            name: name.into(),
            partition,
            g: None,
            ineq: Vec::new(),
            eq: Vec::new(),
            domain: BoxDomain::unbounded(partition.total()),
            window: Vec::new(),
            witness: None,
            reference: None,
            claims: Claims::default(),
        }
    }

    /// A form with no auxiliaries: f = g. The expression's tag is kept.
    pub fn trivial(name: impl Into<String>, n: usize, g: Expr) -> Result<ScnForm, ScnError> {
        let partition = VarPartition::new(n, 0, 0)?;
        let convex = g.curvature().is_convex();
        let fx = g.clone();
        let mut b = ScnForm::builder(name, partition)
            .g(g)
            .witness(|_x| Ok(Vec::new()))
            .reference(move |x| Ok(fx.eval(x)?));
        b.claims.g_jointly_convex = convex;
        b.build()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn partition(&self) -> VarPartition {
        self.partition
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Finite sampling window used by audits.
    pub fn window(&self) -> &BoxDomain {
        &self.window
    }

    pub fn g(&self) -> &Expr {
        &self.g
    }

    pub fn ineq(&self) -> &[Expr] {
        &self.ineq
    }

    pub fn eq(&self) -> &[Expr] {
        &self.eq
    }

    pub fn claims(&self) -> Claims {
        self.claims
    }

    pub fn witness_fn(&self) -> Option<&WitnessFn> {
        self.witness.as_ref()
    }

    pub fn reference_fn(&self) -> Option<&ReferenceFn> {
        self.reference.as_ref()
    }

    pub fn has_witness(&self) -> bool {
        self.witness.is_some()
    }

    pub fn has_reference(&self) -> bool {
        self.reference.is_some()
    }

    pub fn renamed(mut self, name: impl Into<String>) -> ScnForm {
        self.name = name.into();
        self
    }

    pub fn with_window(mut self, window: BoxDomain) -> Result<ScnForm, ScnError> {
        if window.dim() != self.partition.total() || !window.is_bounded() {
            return Err(ScnError::InvalidParam(
                "sampling window must be finite and match the partition".into(),
            ));
        }
        self.window = window;
        Ok(self)
    }

    pub fn with_claims(mut self, claims: Claims) -> ScnForm {
        self.claims = claims;
        self
    }

    /// Replaces the tag on g; used to build deliberately mis-declared forms.
    pub fn with_g_curvature(mut self, curvature: Curvature) -> ScnForm {
        self.g = self.g.with_curvature(curvature);
        self
    }

    pub fn with_reference(mut self, reference: ReferenceFn) -> ScnForm {
        self.reference = Some(reference);
        self
    }

    pub fn with_witness(mut self, witness: WitnessFn) -> ScnForm {
        self.witness = Some(witness);
        self
    }

    /// The form with `g_i <= eta_i` and `h_j = tau_j`. Witness and reference
    /// describe the unperturbed function and are dropped.
    pub fn with_shifted_constraints(&self, eta: &[f64], tau: &[f64]) -> Result<ScnForm, ScnError> {
        for (v, len) in [(eta, self.ineq.len()), (tau, self.eq.len())] {
            if v.len() != len {
                return Err(ScnError::Dimension {
                    expected: len,
                    got: v.len(),
                });
            }
        }
        let shift = |es: &[Expr], by: &[f64]| -> Vec<Expr> {
            es.iter()
                .zip(by)
                .map(|(e, c)| (e.clone() - *c).with_curvature(e.curvature()))
                .collect()
        };
        let mut f = self.clone();
        f.ineq = shift(&self.ineq, eta);
        f.eq = shift(&self.eq, tau);
        f.witness = None;
        f.reference = None;
        f.name = format!("{}~perturbed", self.name);
        Ok(f)
    }

    fn check_point(&self, p: &[f64]) -> Result<(), ScnError> {
        if p.len() != self.partition.total() {
            return Err(ScnError::Dimension {
                expected: self.partition.total(),
                got: p.len(),
            });
        }
        Ok(())
    }

    fn check_x(&self, x: &[f64]) -> Result<(), ScnError> {
        if x.len() != self.partition.n {
            return Err(ScnError::Dimension {
                expected: self.partition.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval_g(&self, p: &[f64]) -> Result<f64, ScnError> {
        self.check_point(p)?;
        self.g.eval(p).map_err(|e| ScnError::component("g", e))
    }

    pub fn ineq_values(&self, p: &[f64]) -> Result<Vec<f64>, ScnError> {
        self.check_point(p)?;
        self.ineq
            .iter()
            .enumerate()
            .map(|(i, e)| {
                e.eval(p)
                    .map_err(|err| ScnError::component(format!("ineq[{i}]"), err))
            })
            .collect()
    }

    pub fn eq_values(&self, p: &[f64]) -> Result<Vec<f64>, ScnError> {
        self.check_point(p)?;
        self.eq
            .iter()
            .enumerate()
            .map(|(j, e)| {
                e.eval(p)
                    .map_err(|err| ScnError::component(format!("eq[{j}]"), err))
            })
            .collect()
    }

    pub fn membership(&self, p: &SaddlePoint, tol: f64) -> Result<ViolationReport, ScnError> {
        self.membership_slice(p.as_slice(), tol)
    }

    pub fn membership_slice(&self, p: &[f64], tol: f64) -> Result<ViolationReport, ScnError> {
        let ineq: Vec<f64> = self
            .ineq_values(p)?
            .into_iter()
            .map(|v| v.max(0.0))
            .collect();
        let eq: Vec<f64> = self.eq_values(p)?.into_iter().map(f64::abs).collect();
        let box_excess = self.domain.excess(p);
        let feasible = box_excess <= tol && ineq.iter().chain(&eq).all(|v| *v <= tol);
        Ok(ViolationReport {
            ineq,
            eq,
            box_excess,
            feasible,
        })
    }

    pub fn reference(&self, x: &[f64]) -> Result<f64, ScnError> {
        self.check_x(x)?;
        let r = self
            .reference
            .as_ref()
            .ok_or_else(|| ScnError::ReferenceAbsent(self.name.clone()))?;
        r(x)
    }

    /// Raw witness point for x, without feasibility or identity checks.
    pub fn witness_point(&self, x: &[f64]) -> Result<SaddlePoint, ScnError> {
        self.check_x(x)?;
        let w = self
            .witness
            .as_ref()
            .ok_or_else(|| ScnError::WitnessAbsent(self.name.clone()))?;
        let yz = w(x)?;
        let p = self.partition;
        if yz.len() != p.m1 + p.m2 {
            return Err(ScnError::WitnessInfeasible {
                form: self.name.clone(),
                detail: format!(
                    "witness returned {} values, expected {}",
                    yz.len(),
                    p.m1 + p.m2
                ),
            });
        }
        SaddlePoint::from_blocks(p, x, &yz[..p.m1], &yz[p.m1..])
    }

    pub fn witness_check(&self, x: &[f64]) -> Result<WitnessCheck, ScnError> {
        let point = self.witness_point(x)?;
        let reference = match &self.reference {
            Some(_) => Some(self.reference(x)?),
            None => None,
        };
        // a witness outside the box may leave the constraint domains
        let (report, g_value) = match (
            self.membership(&point, WITNESS_TOL),
            self.eval_g(point.as_slice()),
        ) {
            (Ok(r), Ok(g)) => (r, g),
            (Err(e), _) | (_, Err(e)) if self.domain.excess(point.as_slice()) <= WITNESS_TOL => {
                return Err(e)
            }
            _ => {
                return Ok(WitnessCheck {
                    point,
                    g_value: f64::NAN,
                    reference,
                    max_violation: f64::INFINITY,
                    feasible: false,
                    gap: None,
                })
            }
        };
        Ok(WitnessCheck {
            gap: reference.map(|r| (g_value - r).abs() / r.abs().max(1.0)),
            max_violation: report.max_violation(),
            feasible: report.feasible,
            reference,
            g_value,
            point,
        })
    }

    /// The witness point, failing unless it is feasible and realizes f(x).
    pub fn witness_eval(&self, x: &[f64]) -> Result<SaddlePoint, ScnError> {
        self.check_x(x)?;
        let x_excess = self.domain.restrict(self.partition.x_range()).excess(x);
        if x_excess > WITNESS_TOL {
            return Err(ScnError::InvalidParam(format!(
                "x lies outside S1 by {x_excess}"
            )));
        }
        let c = self.witness_check(x)?;
        if !c.feasible {
            return Err(ScnError::WitnessInfeasible {
                form: self.name.clone(),
                detail: format!("max violation {:e} at x = {x:?}", c.max_violation),
            });
        }
        if let Some(gap) = c.gap.filter(|g| *g > WITNESS_TOL) {
            return Err(ScnError::WitnessInfeasible {
                form: self.name.clone(),
                detail: format!(
                    "g = {} but f = {} (gap {gap:e}) at x = {x:?}",
                    c.g_value,
                    c.reference.unwrap_or(f64::NAN)
                ),
            });
        }
        Ok(c.point)
    }
}

pub struct FormBuilder {
    name: String,
    partition: VarPartition,
    g: Option<Expr>,
    ineq: Vec<Expr>,
    eq: Vec<Expr>,
    domain: BoxDomain,
    window: Vec<(usize, f64, f64)>,
    witness: Option<WitnessFn>,
    reference: Option<ReferenceFn>,
    claims: Claims,
}

impl FormBuilder {
    pub fn g(mut self, g: Expr) -> Self {
        self.g = Some(g);
        self
    }

    pub fn ineq(mut self, e: Expr) -> Self {
        self.ineq.push(e);
        self
    }

    pub fn eq(mut self, e: Expr) -> Self {
        self.eq.push(e);
        self
    }

    /// Sets the box interval of one flat coordinate.
    pub fn bounds(mut self, index: usize, lo: f64, hi: f64) -> Self {
        if index < self.domain.dim() {
            self.domain.set(index, lo, hi);
        }
        self
    }

    pub fn bounds_range(mut self, range: std::ops::Range<usize>, lo: f64, hi: f64) -> Self {
        for i in range {
            self = self.bounds(i, lo, hi);
        }
        self
    }

    pub fn domain(mut self, domain: BoxDomain) -> Self {
        self.domain = domain;
        self
    }

    /// Overrides the sampling window on one coordinate.
    pub fn window(mut self, index: usize, lo: f64, hi: f64) -> Self {
        self.window.push((index, lo, hi));
        self
    }

    pub fn witness(
        mut self,
        w: impl Fn(&[f64]) -> Result<Vec<f64>, ScnError> + Send + Sync + 'static,
    ) -> Self {
        self.witness = Some(Arc::new(w));
        self
    }

    pub fn witness_arc(mut self, w: WitnessFn) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn reference(
        mut self,
        r: impl Fn(&[f64]) -> Result<f64, ScnError> + Send + Sync + 'static,
    ) -> Self {
        self.reference = Some(Arc::new(r));
        self
    }

    pub fn reference_arc(mut self, r: ReferenceFn) -> Self {
        self.reference = Some(r);
        self
    }

    pub fn claims(mut self, claims: Claims) -> Self {
        self.claims = claims;
        self
    }

    pub fn build(self) -> Result<ScnForm, ScnError> {
        let total = self.partition.total();
        let g = self.g.ok_or_else(|| {
            ScnError::InvalidParam(format!("form `{}` has no objective", self.name))
        })?;
        let check = |what: String, e: &Expr| -> Result<(), ScnError> {
            if e.width() > total {
                Err(ScnError::Shape(format!(
                    "{what} references index {} outside the partition of size {total}",
                    e.width() - 1
                )))
            } else {
                Ok(())
            }
        };
        check("g".into(), &g)?;
        for (i, e) in self.ineq.iter().enumerate() {
            check(format!("ineq[{i}]"), e)?;
        }
        for (j, e) in self.eq.iter().enumerate() {
            check(format!("eq[{j}]"), e)?;
        }
        if self.domain.dim() != total {
            return Err(ScnError::Dimension {
                expected: total,
                got: self.domain.dim(),
            });
        }
        let domain = BoxDomain::new(self.domain.lower().to_vec(), self.domain.upper().to_vec())?;
        let mut window = domain.clipped(10.0);
        for (i, lo, hi) in self.window {
            if i >= total || !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(ScnError::InvalidParam(format!(
                    "bad window [{lo}, {hi}] on axis {i}"
                )));
            }
            window.set(i, lo, hi);
        }
        let ineq = self
            .ineq
            .into_iter()
            .map(|e| {
                if e.curvature().is_convex() {
                    e
                } else {
                    e.with_curvature(Curvature::Convex)
                }
            })
            .collect();
        let eq = self
            .eq
            .into_iter()
            .map(|e| e.with_curvature(Curvature::Affine))
            .collect();
        Ok(ScnForm {
            name: self.name,
            partition: self.partition,
            domain,
            window,
            g,
            ineq,
            eq,
            witness: self.witness,
            reference: self.reference,
            claims: self.claims,
        })
    }
}
