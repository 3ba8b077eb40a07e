mod common;

use std::f64::consts::PI;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn state_spec() -> impl Strategy<Value = StateSpec> {
    prop_oneof![
        (-2.0..2.0, -2.0..2.0).prop_map(|(a, b)| StateSpec::Coherent(a, b)),
        (0.0..1.0, 0.0..PI).prop_map(|(r, p)| StateSpec::Squeezed(r, p)),
        (0.5..2.5, -1.0..1.0f64, 0u8..2).prop_map(|(a, b, s)| StateSpec::Cat(a, b, s)),
        (0.0..PI, 0.0..2.0 * PI, 0.25..0.5).prop_map(|(t, p, e)| StateSpec::Gkp(t, p, e)),
        (1usize..4).prop_map(StateSpec::Fock),
    ]
}

fn op_spec() -> impl Strategy<Value = OpSpec> {
    let m = 0usize..2;
    prop_oneof![
        (0.0..PI).prop_map(OpSpec::Beamsplitter),
        (-1.5..1.5).prop_map(OpSpec::Cx),
        (-1.5..1.5).prop_map(OpSpec::Cz),
        (m.clone(), 0.0..2.0 * PI).prop_map(|(m, t)| OpSpec::Rotation(m, t)),
        (m.clone(), -1.0..1.0).prop_map(|(m, r)| OpSpec::Squeeze(m, r)),
        (m.clone(), -2.0..2.0, -2.0..2.0).prop_map(|(m, a, b)| OpSpec::Displace(m, a, b)),
        (m.clone(), -1.5..1.5).prop_map(|(m, s)| OpSpec::Phase(m, s)),
        (m.clone(), 0.1..1.0).prop_map(|(m, e)| OpSpec::Loss(m, e)),
        (m.clone(), 0.1..1.0, 0.0..1.0).prop_map(|(m, e, n)| OpSpec::ThermalLoss(m, e, n)),
        (m.clone(), 0.0..0.5).prop_map(|(m, s)| OpSpec::Noise(m, s)),
        (m, 1.0..2.0).prop_map(|(m, k)| OpSpec::Amplifier(m, k)),
    ]
}

fn single_mode_spec() -> impl Strategy<Value = StateSpec> {
    prop_oneof![
        (-2.0..2.0, -2.0..2.0).prop_map(|(a, b)| StateSpec::Coherent(a, b)),
        (0.5..2.5, -1.0..1.0f64, 0u8..2).prop_map(|(a, b, s)| StateSpec::Cat(a, b, s)),
        (0.0..PI, 0.0..2.0 * PI, 0.25..0.5).prop_map(|(t, p, e)| StateSpec::Gkp(t, p, e)),
        (1usize..4).prop_map(StateSpec::Fock),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weights_stay_normalized(a in state_spec(), b in state_spec(), ops in prop::collection::vec(op_spec(), 0..6)) {
        let d = normalization_drift(&a, &b, &ops);
        prop_assert!(d <= 1e-10, "drift {d:e}");
    }

    #[test]
    fn wigner_stays_real(a in state_spec(), b in state_spec(), ops in prop::collection::vec(op_spec(), 0..6), seed in any::<u64>()) {
        let r = reality_after(&a, &b, &ops, &mut ChaCha20Rng::seed_from_u64(seed));
        prop_assert!(r <= 1e-10, "reality {r:e}");
    }

    #[test]
    fn gaussian_conditioning_matches_schur_complement(seed in any::<u64>()) {
        let e = conditioning_error(&mut ChaCha20Rng::seed_from_u64(seed));
        prop_assert!(e <= 1e-10, "error {e:e}");
    }

    #[test]
    fn peak_counts_follow_the_product_law(
        a in state_spec(), b in state_spec(), ops in prop::collection::vec(op_spec(), 0..4), proj in single_mode_spec()
    ) {
        let bad = peak_count_violations(&a, &b, &ops, &proj);
        prop_assert!(bad.is_empty(), "{bad:?}");
    }

    #[test]
    fn loss_composes(s in single_mode_spec(), e1 in 0.05..1.0f64, e2 in 0.05..1.0f64) {
        let e = loss_semigroup_error(&s, e1, e2);
        prop_assert!(e <= 1e-8, "error {e:e}");
    }

    #[test]
    fn fock_damping_composes(s in single_mode_spec(), e1 in 0.01..0.5f64, e2 in 0.01..0.5f64) {
        let e = damping_semigroup_error(&s, e1, e2);
        prop_assert!(e <= 1e-8, "error {e:e}");
    }

    #[test]
    fn gate_products_are_symplectic(ops in prop::collection::vec(op_spec(), 1..12)) {
        let d = omega_defect(&ops);
        prop_assert!(d <= 1e-10, "defect {d:e}");
    }
}
