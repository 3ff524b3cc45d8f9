//! Invariants over randomly drawn inputs.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use zone2_relay::adaptive::{mlp_forward, MlpModel};
use zone2_relay::phasor::{from_sequence, to_sequence, Phasor, SequenceSet, ThreePhaseSet};
use zone2_relay::relay::{infeed_factor, mho_contains, zone2_adaptive, zone2_static};

fn phasor() -> impl Strategy<Value = Phasor> {
    (0.0..1e4f64, -PI..PI).prop_map(|(m, a)| Phasor::from_polar(m, a))
}

fn impedance() -> impl Strategy<Value = Complex64> {
    (0.1..200.0f64, 0.05..1.55f64).prop_map(|(m, a)| Complex64::from_polar(m, a))
}

fn close(a: Phasor, b: Phasor, scale: f64) -> bool {
    (a - b).magnitude() <= 1e-12 * scale.max(1.0)
}

proptest! {
    #[test]
    fn fortescue_round_trip(a in phasor(), b in phasor(), c in phasor()) {
        let abc = ThreePhaseSet::new(a, b, c);
        let back = from_sequence(&to_sequence(&abc));
        let s = a.magnitude() + b.magnitude() + c.magnitude();
        prop_assert!(close(back.a, a, s) && close(back.b, b, s) && close(back.c, c, s));
    }

    #[test]
    fn balanced_set_has_only_positive_sequence(a in phasor()) {
        let seq: SequenceSet = to_sequence(&ThreePhaseSet::balanced(a));
        prop_assert!(close(seq.positive, a, a.magnitude()));
        prop_assert!(seq.zero.magnitude() <= 1e-12 * a.magnitude().max(1.0));
        prop_assert!(seq.negative.magnitude() <= 1e-12 * a.magnitude().max(1.0));
    }

    #[test]
    fn mho_boundary_and_diameter(reach in impedance(), t in 0.0..1.0f64, theta in -PI..PI) {
        // every point on the diameter is inside, its far tip included
        prop_assert!(mho_contains(reach, reach * t));
        prop_assert!(mho_contains(reach, reach));
        // a point just outside the circle along any direction is rejected
        let centre = reach * 0.5;
        let out = centre + Complex64::from_polar(reach.norm() * 0.5 * (1.0 + 1e-9), theta);
        prop_assert!(!mho_contains(reach, out));
    }

    #[test]
    fn mho_excludes_reverse_direction(reach in impedance(), t in 1e-6..1.0f64) {
        prop_assert!(!mho_contains(reach, -reach * t));
    }

    #[test]
    fn adaptive_reach_is_affine_in_k(z_ab in impedance(), remote in impedance(), k1 in 0.5..20.0f64, k2 in 0.5..20.0f64) {
        let r = |k: f64| zone2_adaptive(z_ab, &[remote], Complex64::new(k, 0.0)).unwrap();
        let stat = zone2_static(z_ab, &[remote]).unwrap();
        // reach(k) - z_ab scales linearly with k, and k = 1 is the static setting
        let lhs = (r(k1) - z_ab) * k2;
        let rhs = (r(k2) - z_ab) * k1;
        prop_assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm().max(1.0));
        prop_assert!((r(1.0) - stat).norm() <= 1e-12 * stat.norm());
    }

    #[test]
    fn infeed_factor_is_one_without_remote_current(i_relay in phasor()) {
        prop_assume!(i_relay.magnitude() > 1e-3);
        let k = infeed_factor(Phasor::ZERO, i_relay).unwrap();
        prop_assert!((k - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn model_text_round_trips(params in proptest::collection::vec(-5.0..5.0f64, 3 * 4 + 1), x in 4.0..25.0f64) {
        let mut m = MlpModel::zeros(4);
        m.set_parameters(&params);
        let back: MlpModel = m.to_text().parse().unwrap();
        prop_assert_eq!(mlp_forward(&back, x).to_bits(), mlp_forward(&m, x).to_bits());
    }
}
