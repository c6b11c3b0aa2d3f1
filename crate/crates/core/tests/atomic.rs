use dqubit_core::atomic::{cg_weight, jz_expectation, qubit_sensitivity, QubitPair};
use dqubit_core::dynamics::make_synth_states;
use dqubit_core::{AtomConstants, Complex64, Manifold, Polarization, QuartetState, ZeemanState};
use proptest::prelude::*;

/// Squared ⟨j1 m1; 1 q | j m⟩ from the textbook closed forms for j = j1 and
/// j = j1 − 1 (Condon–Shortley tables for coupling with spin 1).
fn table_weight(two_j1: i32, two_m1: i32, q: i32, two_j: i32, two_m: i32) -> f64 {
    if two_m1 + 2 * q != two_m {
        return 0.0;
    }
    let j1 = two_j1 as f64 / 2.0;
    let m = two_m as f64 / 2.0;
    if two_j == two_j1 {
        match q {
            1 => (j1 + m) * (j1 - m + 1.0) / (2.0 * j1 * (j1 + 1.0)),
            0 => m * m / (j1 * (j1 + 1.0)),
            _ => (j1 - m) * (j1 + m + 1.0) / (2.0 * j1 * (j1 + 1.0)),
        }
    } else if two_j == two_j1 - 2 {
        match q {
            1 => (j1 - m) * (j1 - m + 1.0) / (2.0 * j1 * (2.0 * j1 + 1.0)),
            0 => (j1 - m) * (j1 + m) / (j1 * (2.0 * j1 + 1.0)),
            _ => (j1 + m + 1.0) * (j1 + m) / (2.0 * j1 * (2.0 * j1 + 1.0)),
        }
    } else {
        unreachable!()
    }
}

fn lower_states() -> Vec<ZeemanState> {
    Manifold::SHalf.states().chain(Manifold::DThreeHalf.states()).collect()
}

#[test]
fn cg_weights_match_textbook_table() {
    for lower in lower_states() {
        for upper in Manifold::PHalf.states() {
            for pol in Polarization::ALL {
                let q = pol.delta_two_m() / 2;
                let expected = table_weight(lower.manifold().two_j(), lower.two_mj(), q, 1, upper.two_mj());
                let got = cg_weight(lower, upper, pol).unwrap();
                assert!((got - expected).abs() < 1e-14, "{lower} → {upper} {pol:?}: {got} vs {expected}");
            }
        }
    }
    let w = cg_weight(ZeemanState::d(-3), ZeemanState::p(-1), Polarization::SigmaPlus).unwrap();
    assert!((w - 0.5).abs() < 1e-14);
}

#[test]
fn selection_rules_over_all_combinations() {
    let mut count = 0;
    for lower in lower_states() {
        for upper in Manifold::PHalf.states() {
            for pol in Polarization::ALL {
                count += 1;
                let w = cg_weight(lower, upper, pol).unwrap();
                let allowed = upper.two_mj() - lower.two_mj() == pol.delta_two_m();
                assert_eq!(w > 0.0, allowed, "{lower} → {upper} {pol:?}");
            }
        }
    }
    assert_eq!(count, 36);
    assert_eq!(cg_weight(ZeemanState::d(3), ZeemanState::p(1), Polarization::SigmaPlus).unwrap(), 0.0);
}

#[test]
fn decay_weights_sum_to_one_per_manifold() {
    for upper in Manifold::PHalf.states() {
        for manifold in [Manifold::SHalf, Manifold::DThreeHalf] {
            let mut total = 0.0;
            for lower in manifold.states() {
                for pol in Polarization::ALL {
                    total += cg_weight(lower, upper, pol).unwrap();
                }
            }
            assert!((total - 1.0).abs() < 1e-12, "{upper} into {manifold:?}: {total}");
        }
    }
    let c = AtomConstants::default();
    assert!((c.branching_fraction(Manifold::SHalf) + c.branching_fraction(Manifold::DThreeHalf) - 1.0).abs() < 1e-15);
}

#[test]
fn unconnected_manifolds_rejected() {
    assert!(cg_weight(ZeemanState::s(1), ZeemanState::d(1), Polarization::Pi).is_err());
    assert!(cg_weight(ZeemanState::p(1), ZeemanState::p(-1), Polarization::SigmaMinus).is_err());
}

#[test]
fn splittings() {
    let c = AtomConstants::default();
    assert!((c.zeeman_splitting(Manifold::SHalf, 1.0).unwrap() - 2.8e6).abs() < 1e-6);
    assert!((c.zeeman_splitting(Manifold::DThreeHalf, 2.2).unwrap() - 2.464e6).abs() < 1e-6);
    assert_eq!(c.zeeman_splitting(Manifold::DThreeHalf, 0.0).unwrap(), 0.0);
    assert!(c.zeeman_splitting(Manifold::DThreeHalf, -1.0).is_err());
}

#[test]
fn sensitivities() {
    let c = AtomConstants::default();
    let s = qubit_sensitivity(&c, &QubitPair::Zeeman(ZeemanState::s(-1), ZeemanState::s(1))).unwrap();
    let d = qubit_sensitivity(&c, &QubitPair::Zeeman(ZeemanState::d(3), ZeemanState::d(-1))).unwrap();
    let synth = make_synth_states(std::f64::consts::PI);
    let q = qubit_sensitivity(&c, &QubitPair::Quartet(synth.d1, synth.d2)).unwrap();
    assert!((s - 2.8).abs() < 1e-12);
    assert!((d - 8.0 / 5.0 * 1.4).abs() < 1e-12);
    assert_eq!(q, 0.0);
    assert!(s > d && d > q);

    let doubled = AtomConstants { mu_b: 2.0 * c.mu_b, ..c };
    let s2 = qubit_sensitivity(&doubled, &QubitPair::Zeeman(ZeemanState::s(-1), ZeemanState::s(1))).unwrap();
    assert!((s2 - 2.0 * s).abs() < 1e-12);
    assert!(qubit_sensitivity(&c, &QubitPair::Zeeman(ZeemanState::s(1), ZeemanState::d(1))).is_err());
}

#[test]
fn jz_examples() {
    let top = QuartetState::basis(3);
    assert_eq!(jz_expectation(top.amplitudes(), top.amplitudes()).unwrap().re, 1.5);
    let s = make_synth_states(0.4);
    assert!(jz_expectation(s.d1.amplitudes(), s.d2.amplitudes()).unwrap().norm() < 1e-15);
    let bad = [Complex64::new(1.0, 0.0); 4];
    assert!(jz_expectation(&bad, top.amplitudes()).is_err());
}

fn arb_state() -> impl Strategy<Value = QuartetState> {
    proptest::collection::vec(-1.0f64..1.0, 8).prop_filter_map("zero vector", |v| {
        QuartetState::normalized([
            Complex64::new(v[0], v[1]),
            Complex64::new(v[2], v[3]),
            Complex64::new(v[4], v[5]),
            Complex64::new(v[6], v[7]),
        ])
        .ok()
    })
}

proptest! {
    #[test]
    fn jz_is_hermitian(a in arb_state(), b in arb_state()) {
        let ab = jz_expectation(a.amplitudes(), b.amplitudes()).unwrap();
        let ba = jz_expectation(b.amplitudes(), a.amplitudes()).unwrap();
        prop_assert!((ab - ba.conj()).norm() < 1e-12);
        prop_assert!(jz_expectation(a.amplitudes(), a.amplitudes()).unwrap().im.abs() < 1e-12);
    }

    #[test]
    fn zeeman_state_parity_enforced(two_mj in -5i32..=5) {
        let ok = ZeemanState::new(Manifold::DThreeHalf, two_mj).is_ok();
        prop_assert_eq!(ok, two_mj.abs() <= 3 && two_mj % 2 != 0);
    }
}
