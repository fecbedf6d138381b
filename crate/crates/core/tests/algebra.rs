use proptest::prelude::*;
use scnopt::algebra::{power, product, scaled_sum};
use scnopt::audit::{audit_samples, witness_sweep};
use scnopt::form::validate_form;
use scnopt::{make_catalog_form, CatalogId, CatalogParams, ScnForm, VarPartition};

/// Scalar entries declaring a jointly convex, nonnegative g.
const OPERANDS: [CatalogId; 9] = [
    CatalogId::Sin0Pi,
    CatalogId::Entropy,
    CatalogId::PowA,
    CatalogId::PowA2n,
    CatalogId::ReluA,
    CatalogId::ReluB,
    CatalogId::ReluConvex,
    CatalogId::AbsPower,
    CatalogId::L0ScalarReg,
];

fn operand(k: usize) -> ScnForm {
    make_catalog_form(OPERANDS[k], &CatalogParams::new()).unwrap()
}

fn sums(a: VarPartition, b: VarPartition, dy: usize, dz: usize) -> VarPartition {
    VarPartition::new(a.n, a.m1 + b.m1 + dy, a.m2 + b.m2 + dz).unwrap()
}

fn assert_closed(f: &ScnForm, seed: u64) {
    let report = validate_form(f, 50, seed);
    assert!(
        report.passed(),
        "{}: {:?}",
        f.name(),
        report.failures().collect::<Vec<_>>()
    );
    let sweep = witness_sweep(f, &audit_samples(f, 100, seed));
    assert!(
        sweep.holds(),
        "{}: gap {:e} violation {:e} at {:?}",
        f.name(),
        sweep.max_gap,
        sweep.max_violation,
        sweep.first_failure
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn product_is_closed_and_adds_two_y_and_one_z(i in 0..OPERANDS.len(), j in 0..OPERANDS.len(), seed in 0u64..1000) {
        let (a, b) = (operand(i), operand(j));
        let f = product(&a, &b).unwrap();
        prop_assert_eq!(f.partition(), sums(a.partition(), b.partition(), 2, 1));
        assert_closed(&f, seed);
    }

    #[test]
    fn scaled_sum_is_closed_and_adds_nothing(i in 0..OPERANDS.len(), j in 0..OPERANDS.len(), a1 in 0.1f64..5.0, a2 in 0.1f64..5.0, seed in 0u64..1000) {
        let (a, b) = (operand(i), operand(j));
        let f = scaled_sum(&a, &b, a1, a2).unwrap();
        prop_assert_eq!(f.partition(), sums(a.partition(), b.partition(), 0, 0));
        assert_closed(&f, seed);
    }

    #[test]
    fn fractional_power_adds_two_y_and_one_z(i in 0..OPERANDS.len(), seed in 0u64..1000) {
        let f = operand(i);
        let h = power(&f, 0.5).unwrap();
        let p = f.partition();
        prop_assert_eq!(h.partition(), VarPartition::new(p.n, p.m1 + 2, p.m2 + 1).unwrap());
        assert_closed(&h, seed);
    }

    #[test]
    fn cube_is_a_product_chain(i in 0..OPERANDS.len(), seed in 0u64..1000) {
        let f = operand(i);
        let h = power(&f, 3.0).unwrap();
        let p = f.partition();
        prop_assert_eq!(h.partition(), VarPartition::new(p.n, 3 * p.m1 + 4, 3 * p.m2 + 2).unwrap());
        assert_closed(&h, seed);
    }

    #[test]
    fn product_of_powers_keeps_the_witness(i in 0..OPERANDS.len(), j in 0..OPERANDS.len(), a in 0.2f64..0.9, b in 0.2f64..0.9) {
        let f = product(&power(&operand(i), a).unwrap(), &power(&operand(j), b).unwrap()).unwrap();
        let sweep = witness_sweep(&f, &audit_samples(&f, 100, 9));
        prop_assert!(sweep.holds(), "{}: {:e}", f.name(), sweep.max_gap);
    }
}
