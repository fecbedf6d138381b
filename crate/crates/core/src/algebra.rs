//! Operations that build new forms from existing ones.
//!
//! Composite variables are ordered deterministically: the first operand's
//! y and z blocks, then the second operand's, then any auxiliaries the
//! operation introduces. Witnesses and references compose from the operands.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{BoxDomain, VarPartition};
use crate::error::ScnError;
use crate::expr::{curvature_audit_masked, Curvature, Expr};
use crate::form::{Claims, ReferenceFn, ScnForm, ValueSign, WitnessFn};

const HYPOTHESIS_SAMPLES: usize = 50;
const HYPOTHESIS_SEED: u64 = 0xA16E;

/// Where an operand's y and z blocks land in the composite partition.
#[derive(Debug, Clone, Copy)]
struct Slot {
    from: VarPartition,
    y_off: usize,
    z_off: usize,
}

impl Slot {
    fn map(&self, to: VarPartition, i: usize) -> usize {
        let n = self.from.n;
        if i < n {
            i
        } else if i < n + self.from.m1 {
            to.n + self.y_off + (i - n)
        } else {
            to.n + to.m1 + self.z_off + (i - n - self.from.m1)
        }
    }

    fn relocate(&self, to: VarPartition, e: &Expr) -> Expr {
        let slot = *self;
        e.remap(&move |i| slot.map(to, i))
    }

    fn copy_box(&self, to: VarPartition, src: &BoxDomain, dst: &mut BoxDomain) {
        for i in self.from.n..self.from.total() {
            dst.set(self.map(to, i), src.lower()[i], src.upper()[i]);
        }
    }
}

/// `(y, z, full point)`
type Split = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Witness of one operand split into its y and z parts, plus the full point.
fn component_witness(f: &ScnForm, x: &[f64]) -> Result<Split, ScnError> {
    let p = f.witness_point(x)?;
    let y = p.y().to_vec();
    let z = p.z().to_vec();
    Ok((y, z, p.into_vec()))
}

fn x_window(f1: &ScnForm, f2: Option<&ScnForm>, to: VarPartition, window: &mut BoxDomain) {
    for i in 0..to.n {
        let (mut lo, mut hi) = (f1.window().lower()[i], f1.window().upper()[i]);
        if let Some(f2) = f2 {
            let (a, b) = (f2.window().lower()[i], f2.window().upper()[i]);
            if a.max(lo) <= b.min(hi) {
                lo = lo.max(a);
                hi = hi.min(b);
            }
        }
        window.set(i, lo, hi);
    }
}

fn x_domain(f1: &ScnForm, f2: Option<&ScnForm>, to: VarPartition, domain: &mut BoxDomain) {
    for i in 0..to.n {
        let (mut lo, mut hi) = (f1.domain().lower()[i], f1.domain().upper()[i]);
        if let Some(f2) = f2 {
            lo = lo.max(f2.domain().lower()[i]);
            hi = hi.min(f2.domain().upper()[i]);
        }
        domain.set(i, lo, hi);
    }
}

fn same_n(f1: &ScnForm, f2: &ScnForm) -> Result<(), ScnError> {
    if f1.partition().n != f2.partition().n {
        return Err(ScnError::Dimension {
            expected: f1.partition().n,
            got: f2.partition().n,
        });
    }
    Ok(())
}

/// Checks the declared joint convexity and sign of `f`, then samples both.
fn require(f: &ScnForm, signs: &[ValueSign], op: &str) -> Result<(), ScnError> {
    let c = f.claims();
    if !c.g_jointly_convex {
        return Err(ScnError::Hypothesis(format!(
            "{op}: `{}` does not declare g jointly convex",
            f.name()
        )));
    }
    match c.value_sign {
        Some(s) if signs.contains(&s) => {}
        other => {
            return Err(ScnError::Hypothesis(format!(
                "{op}: `{}` declares sign {other:?}, needs one of {signs:?}",
                f.name()
            )))
        }
    }
    let r = curvature_audit_masked(
        f.g(),
        Curvature::Convex,
        f.window(),
        None,
        HYPOTHESIS_SAMPLES,
        HYPOTHESIS_SEED,
    );
    if !r.passed {
        return Err(ScnError::Hypothesis(format!(
            "{op}: g of `{}` is not jointly convex on its window",
            f.name()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(HYPOTHESIS_SEED);
    let sign = c.value_sign.expect("checked above");
    for _ in 0..HYPOTHESIS_SAMPLES {
        let x = crate::form::sample_x(f, &mut rng);
        let v = if f.has_reference() {
            f.reference(&x)?
        } else {
            f.witness_check(&x)?.g_value
        };
        if !sign.holds(v) {
            return Err(ScnError::Hypothesis(format!(
                "{op}: `{}` has value {v} at x = {x:?}, violating {sign:?}",
                f.name()
            )));
        }
    }
    Ok(())
}

fn combine_sign(a: Option<ValueSign>, b: Option<ValueSign>) -> Option<ValueSign> {
    use ValueSign::*;
    match (a?, b?) {
        (Positive, Positive) => Some(Positive),
        (Negative, Negative) => Some(Negative),
        (Positive | Nonnegative, Positive | Nonnegative) => Some(Nonnegative),
        _ => None,
    }
}

/// `a1 f1 + a2 f2` for `a1, a2 > 0`.
pub fn scaled_sum(f1: &ScnForm, f2: &ScnForm, a1: f64, a2: f64) -> Result<ScnForm, ScnError> {
    same_n(f1, f2)?;
    if !(a1 > 0.0 && a2 > 0.0) {
        return Err(ScnError::InvalidParam(format!(
            "scaled_sum needs positive weights, got {a1} and {a2}"
        )));
    }
    let (p1, p2) = (f1.partition(), f2.partition());
    let to = VarPartition::new(p1.n, p1.m1 + p2.m1, p1.m2 + p2.m2)?;
    let s1 = Slot {
        from: p1,
        y_off: 0,
        z_off: 0,
    };
    let s2 = Slot {
        from: p2,
        y_off: p1.m1,
        z_off: p1.m2,
    };

    let mut domain = BoxDomain::unbounded(to.total());
    x_domain(f1, Some(f2), to, &mut domain);
    s1.copy_box(to, f1.domain(), &mut domain);
    s2.copy_box(to, f2.domain(), &mut domain);
    let mut window = domain.clipped(10.0);
    x_window(f1, Some(f2), to, &mut window);
    s1.copy_box(to, f1.window(), &mut window);
    s2.copy_box(to, f2.window(), &mut window);

    let g = s1.relocate(to, f1.g()).scale(a1) + s2.relocate(to, f2.g()).scale(a2);
    let mut b = ScnForm::builder(format!("{a1}*{}+{a2}*{}", f1.name(), f2.name()), to)
        .g(g)
        .domain(domain)
        .claims(Claims {
            g_jointly_convex: f1.claims().g_jointly_convex && f2.claims().g_jointly_convex,
            value_sign: combine_sign(f1.claims().value_sign, f2.claims().value_sign),
        });
    for e in f1.ineq() {
        b = b.ineq(s1.relocate(to, e));
    }
    for e in f2.ineq() {
        b = b.ineq(s2.relocate(to, e));
    }
    for e in f1.eq() {
        b = b.eq(s1.relocate(to, e));
    }
    for e in f2.eq() {
        b = b.eq(s2.relocate(to, e));
    }
    if f1.has_witness() && f2.has_witness() {
        let (c1, c2) = (f1.clone(), f2.clone());
        b = b.witness(move |x| {
            let (y1, z1, _) = component_witness(&c1, x)?;
            let (y2, z2, _) = component_witness(&c2, x)?;
            Ok([y1, y2, z1, z2].concat())
        });
    }
    if f1.has_reference() && f2.has_reference() {
        let (c1, c2) = (f1.clone(), f2.clone());
        b = b.reference(move |x| Ok(a1 * c1.reference(x)? + a2 * c2.reference(x)?));
    }
    b.build()?.with_window(window)
}

/// `f1 f2` for jointly convex, nonnegative operands.
pub fn product(f1: &ScnForm, f2: &ScnForm) -> Result<ScnForm, ScnError> {
    same_n(f1, f2)?;
    let ok = [ValueSign::Nonnegative, ValueSign::Positive];
    require(f1, &ok, "product")?;
    require(f2, &ok, "product")?;
    let (p1, p2) = (f1.partition(), f2.partition());
    let to = VarPartition::new(p1.n, p1.m1 + p2.m1 + 2, p1.m2 + p2.m2 + 1)?;
    let s1 = Slot {
        from: p1,
        y_off: 0,
        z_off: 0,
    };
    let s2 = Slot {
        from: p2,
        y_off: p1.m1,
        z_off: p1.m2,
    };
    let yh1 = to.n + p1.m1 + p2.m1;
    let yh2 = yh1 + 1;
    let zh = to.total() - 1;

    let mut domain = BoxDomain::unbounded(to.total());
    x_domain(f1, Some(f2), to, &mut domain);
    s1.copy_box(to, f1.domain(), &mut domain);
    s2.copy_box(to, f2.domain(), &mut domain);
    let mut window = domain.clipped(10.0);
    x_window(f1, Some(f2), to, &mut window);
    s1.copy_box(to, f1.window(), &mut window);
    s2.copy_box(to, f2.window(), &mut window);

    let (y1, y2, z) = (Expr::var(yh1), Expr::var(yh2), Expr::var(zh));
    let g = (y1.clone() + y2.clone()).square().scale(0.5) - z.clone().scale(0.5);
    let mut b = ScnForm::builder(format!("({})*({})", f1.name(), f2.name()), to)
        .g(g)
        .domain(domain)
        .ineq(y1.clone().square() + y2.clone().square() - z)
        .ineq(s1.relocate(to, f1.g()) - y1)
        .ineq(s2.relocate(to, f2.g()) - y2)
        .claims(Claims {
            g_jointly_convex: true,
            value_sign: if f1.claims().value_sign == Some(ValueSign::Positive)
                && f2.claims().value_sign == Some(ValueSign::Positive)
            {
                Some(ValueSign::Positive)
            } else {
                Some(ValueSign::Nonnegative)
            },
        });
    for e in f1.ineq() {
        b = b.ineq(s1.relocate(to, e));
    }
    for e in f2.ineq() {
        b = b.ineq(s2.relocate(to, e));
    }
    for e in f1.eq() {
        b = b.eq(s1.relocate(to, e));
    }
    for e in f2.eq() {
        b = b.eq(s2.relocate(to, e));
    }
    if f1.has_witness() && f2.has_witness() {
        let (c1, c2) = (f1.clone(), f2.clone());
        b = b.witness(move |x| {
            let (y1, z1, full1) = component_witness(&c1, x)?;
            let (y2, z2, full2) = component_witness(&c2, x)?;
            let a = c1.eval_g(&full1)?;
            let bb = c2.eval_g(&full2)?;
            Ok([y1, y2, vec![a, bb], z1, z2, vec![a * a + bb * bb]].concat())
        });
    }
    if f1.has_reference() && f2.has_reference() {
        let (c1, c2) = (f1.clone(), f2.clone());
        b = b.reference(move |x| Ok(c1.reference(x)? * c2.reference(x)?));
    }
    b.build()?.with_window(window)
}

/// Appends auxiliaries `ybar = (yb1, yb2)` and `zbar` to `f`; returns the
/// partition, the slot of `f`, and the flat indices of the three auxiliaries.
fn with_three_aux(f: &ScnForm) -> Result<(VarPartition, Slot, usize, usize, usize), ScnError> {
    let p = f.partition();
    let to = VarPartition::new(p.n, p.m1 + 2, p.m2 + 1)?;
    let slot = Slot {
        from: p,
        y_off: 0,
        z_off: 0,
    };
    let yb1 = to.n + p.m1;
    Ok((to, slot, yb1, yb1 + 1, to.total() - 1))
}

fn base_boxes(f: &ScnForm, to: VarPartition, slot: Slot) -> (BoxDomain, BoxDomain) {
    let mut domain = BoxDomain::unbounded(to.total());
    x_domain(f, None, to, &mut domain);
    slot.copy_box(to, f.domain(), &mut domain);
    let mut window = domain.clipped(10.0);
    x_window(f, None, to, &mut window);
    slot.copy_box(to, f.window(), &mut window);
    (domain, window)
}

/// Operand values within this distance of zero count as zero in `power`.
const POWER_SNAP: f64 = 1e-12;

/// `f^a` for `a > 0`, f jointly convex and nonnegative.
pub fn power(f: &ScnForm, a: f64) -> Result<ScnForm, ScnError> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(ScnError::InvalidParam(format!(
            "power needs a > 0, got {a}"
        )));
    }
    if a == 1.0 {
        return Ok(f.clone());
    }
    require(f, &[ValueSign::Nonnegative, ValueSign::Positive], "power")?;
    if a > 1.0 {
        let rest = power(f, a - 1.0)?;
        return Ok(product(f, &rest)?.renamed(format!("({})^{a}", f.name())));
    }

    let (to, slot, yb1, yb2, zb) = with_three_aux(f)?;
    let (mut domain, mut window) = base_boxes(f, to, slot);
    for i in [yb1, yb2, zb] {
        domain.set(i, 0.0, f64::INFINITY);
        window.set(i, 0.0, 10.0);
    }
    let q = 2.0 / a;
    let (y1, y2, z) = (Expr::var(yb1), Expr::var(yb2), Expr::var(zb));
    let g = y1.clone() + y1.clone().powf(q) - z.clone() + y2.clone().square() - z.clone();
    let mut b = ScnForm::builder(format!("({})^{a}", f.name()), to)
        .g(g)
        .domain(domain)
        .ineq(y1.powf(q) - z.clone())
        .ineq(y2.clone().square() - z)
        .ineq(slot.relocate(to, f.g()) - y2)
        .claims(Claims {
            g_jointly_convex: true,
            value_sign: f.claims().value_sign,
        });
    for e in f.ineq() {
        b = b.ineq(slot.relocate(to, e));
    }
    for e in f.eq() {
        b = b.eq(slot.relocate(to, e));
    }
    if f.has_witness() {
        let c = f.clone();
        b = b.witness(move |x| {
            let (y, zz, full) = component_witness(&c, x)?;
            let v = c.eval_g(&full)?;
            if v < -POWER_SNAP {
                return Err(ScnError::Hypothesis(format!(
                    "power: operand value {v} < 0 at x = {x:?}"
                )));
            }
            // v^a has unbounded slope at 0, so roundoff there is snapped away
            let v = if v <= POWER_SNAP { 0.0 } else { v };
            let y1 = v.powf(a);
            let zbar = y1.powf(2.0 / a).max(v * v);
            Ok([y, vec![y1, v], zz, vec![zbar]].concat())
        });
    }
    if f.has_reference() {
        let c = f.clone();
        b = b.reference(move |x| Ok(c.reference(x)?.powf(a)));
    }
    b.build()?.with_window(window)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReciprocalMode {
    /// f < 0 with g convex; the result realizes `1/f`.
    SccnToScn,
    /// f > 0 with g convex; the result realizes `-1/f`.
    ScnToSccn,
}

/// Reciprocal construction with auxiliaries `ybar <= 0` and `zbar >= 0`.
pub fn reciprocal(f: &ScnForm, mode: ReciprocalMode) -> Result<ScnForm, ScnError> {
    let (sign, label) = match mode {
        ReciprocalMode::SccnToScn => (ValueSign::Negative, "1/"),
        ReciprocalMode::ScnToSccn => (ValueSign::Positive, "-1/"),
    };
    require(f, &[sign], "reciprocal")?;
    let (to, slot, yb1, yb2, zb) = with_three_aux(f)?;
    let (mut domain, mut window) = base_boxes(f, to, slot);
    for i in [yb1, yb2] {
        domain.set(i, f64::NEG_INFINITY, 0.0);
        window.set(i, -10.0, 0.0);
    }
    domain.set(zb, 0.0, f64::INFINITY);
    window.set(zb, 0.0, 10.0);

    let (y1, y2, z) = (Expr::var(yb1), Expr::var(yb2), Expr::var(zb));
    let g = y1.clone() + (y1.clone() + y2.clone()).square() - z.clone() - 2.0
        + y1.clone().square()
        + y2.clone().square()
        - z.clone();
    let mut b = ScnForm::builder(format!("{label}({})", f.name()), to)
        .g(g)
        .domain(domain)
        .ineq((y1.clone() + y2.clone()).square() - z.clone() - 2.0)
        .ineq(y1.square() + y2.clone().square() - z)
        .ineq(slot.relocate(to, f.g()) + y2)
        .claims(Claims {
            g_jointly_convex: true,
            value_sign: Some(ValueSign::Negative),
        });
    for e in f.ineq() {
        b = b.ineq(slot.relocate(to, e));
    }
    for e in f.eq() {
        b = b.eq(slot.relocate(to, e));
    }
    if f.has_witness() {
        let c = f.clone();
        b = b.witness(move |x| {
            let (y, zz, full) = component_witness(&c, x)?;
            let v = c.eval_g(&full)?;
            let (yb1, yb2) = match mode {
                ReciprocalMode::SccnToScn => (1.0 / v, v),
                ReciprocalMode::ScnToSccn => (-1.0 / v, -v),
            };
            Ok([y, vec![yb1, yb2], zz, vec![yb1 * yb1 + yb2 * yb2]].concat())
        });
    }
    if f.has_reference() {
        let c = f.clone();
        b = b.reference(move |x| {
            let v = c.reference(x)?;
            Ok(match mode {
                ReciprocalMode::SccnToScn => 1.0 / v,
                ReciprocalMode::ScnToSccn => -1.0 / v,
            })
        });
    }
    b.build()?.with_window(window)
}

/// Declared properties of the outer function in [`compose_monotone_convex`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhiProps {
    pub increasing: bool,
    pub convex: bool,
}

/// `phi(f(x))` for a univariate `phi` over variable 0, increasing and convex.
pub fn compose_monotone_convex(
    f: &ScnForm,
    phi: &Expr,
    props: PhiProps,
) -> Result<ScnForm, ScnError> {
    if !(props.increasing && props.convex) {
        return Err(ScnError::Hypothesis(
            "compose_monotone_convex: phi must be declared increasing and convex".into(),
        ));
    }
    if phi.width() > 1 {
        return Err(ScnError::Shape("phi must use only variable v0".into()));
    }
    let line = BoxDomain::new(vec![-10.0], vec![10.0])?;
    let r = curvature_audit_masked(
        phi,
        Curvature::Convex,
        &line,
        None,
        HYPOTHESIS_SAMPLES,
        HYPOTHESIS_SEED,
    );
    if !r.passed {
        return Err(ScnError::Hypothesis(
            "phi is not convex on [-10, 10]".into(),
        ));
    }
    let mut prev = phi.eval(&[-10.0])?;
    for k in 1..=200 {
        let v = phi.eval(&[-10.0 + 0.1 * k as f64])?;
        if v < prev - 1e-12 * prev.abs().max(1.0) {
            return Err(ScnError::Hypothesis(
                "phi is not increasing on [-10, 10]".into(),
            ));
        }
        prev = v;
    }

    let p = f.partition();
    let g = phi.substitute(0, f.g());
    let mut b = ScnForm::builder(format!("phi({})", f.name()), p)
        .g(g)
        .domain(f.domain().clone())
        .claims(Claims {
            g_jointly_convex: f.claims().g_jointly_convex,
            value_sign: None,
        });
    for e in f.ineq() {
        b = b.ineq(e.clone());
    }
    for e in f.eq() {
        b = b.eq(e.clone());
    }
    if let Some(w) = f.witness_fn() {
        b = b.witness_arc(w.clone());
    }
    if f.has_reference() {
        let c = f.clone();
        let phi = phi.clone();
        b = b.reference(move |x| Ok(phi.eval(&[c.reference(x)?])?));
    }
    b.build()?.with_window(f.window().clone())
}

/// Pre-composes `f` with a coordinate selection: the result takes x in R^n
/// and evaluates `f` at `(x[coords[0]], x[coords[1]], ...)`.
pub fn lift(f: &ScnForm, n: usize, coords: &[usize]) -> Result<ScnForm, ScnError> {
    let p = f.partition();
    if coords.len() != p.n {
        return Err(ScnError::Dimension {
            expected: p.n,
            got: coords.len(),
        });
    }
    if let Some(&bad) = coords.iter().find(|&&c| c >= n) {
        return Err(ScnError::InvalidParam(format!(
            "coordinate {bad} outside R^{n}"
        )));
    }
    let to = VarPartition::new(n, p.m1, p.m2)?;
    let map = {
        let coords = coords.to_vec();
        move |i: usize| if i < p.n { coords[i] } else { i - p.n + n }
    };
    let mut domain = BoxDomain::unbounded(to.total());
    let mut window = domain.clipped(10.0);
    for i in 0..p.total() {
        let j = map(i);
        domain.set(j, f.domain().lower()[i], f.domain().upper()[i]);
        window.set(j, f.window().lower()[i], f.window().upper()[i]);
    }
    let mut b = ScnForm::builder(format!("{}∘{coords:?}", f.name()), to)
        .g(f.g().remap(&map))
        .domain(domain)
        .claims(f.claims());
    for e in f.ineq() {
        b = b.ineq(e.remap(&map));
    }
    for e in f.eq() {
        b = b.eq(e.remap(&map));
    }
    let select = {
        let coords = coords.to_vec();
        move |x: &[f64]| -> Vec<f64> { coords.iter().map(|&c| x[c]).collect() }
    };
    if let Some(w) = f.witness_fn() {
        let w: WitnessFn = w.clone();
        let sel = select.clone();
        b = b.witness(move |x| w(&sel(x)));
    }
    if let Some(r) = f.reference_fn() {
        let r: ReferenceFn = Arc::clone(r);
        b = b.reference(move |x| r(&select(x)));
    }
    b.build()?.with_window(window)
}
