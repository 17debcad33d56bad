mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use nmr_pops::algebra::{classify_sticks, multiply, multiply_sticks, Verdict};
use nmr_pops::gates::{apply_sequence, compile, GateSpec};
use nmr_pops::spectrometer::{
    detect, pops_spectrum_by_subtraction, pops_spectrum_direct, RenderOptions,
    DEFAULT_TIP_ANGLE_RAD,
};
use nmr_pops::{
    five_qubit_system, make_pops, pi_pulse, pseudopure, thermal_state, BasisState, PopulationState,
    SpinSystem,
};

use common::random_system;

fn system() -> impl Strategy<Value = SpinSystem> {
    (2usize..=5, any::<u64>()).prop_map(|(n, seed)| random_system(n, seed))
}

fn system_and_state() -> impl Strategy<Value = (SpinSystem, u32)> {
    system().prop_flat_map(|sys| {
        let m = sys.num_states() as u32;
        (Just(sys), 0..m)
    })
}

fn random_gate(n: usize, pick: u64) -> GateSpec {
    let word: String = (0..n)
        .map(|k| if pick >> k & 1 == 1 { '1' } else { '0' })
        .collect();
    let t = (pick >> 8) as usize % n;
    if n >= 2 && pick >> 16 & 1 == 1 {
        let u = (t + 1 + (pick >> 20) as usize % (n - 1)) % n;
        GateSpec::cswap_from_bits(n, &word[..n - 2], t, u).unwrap()
    } else {
        GateSpec::cnot_from_bits(n, &word[..n - 1], t).unwrap()
    }
}

/// Transitions joining a level of one pair to a level of the other.
fn bridging_lines(
    sys: &SpinSystem,
    p: (BasisState, BasisState),
    q: (BasisState, BasisState),
) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for a in [p.0, p.1] {
        for b in [q.0, q.1] {
            if a.hamming(b) == 1 {
                out.insert(sys.transition_between(a, b).unwrap().label.to_string());
            }
        }
    }
    out
}

fn stick_labels(sys: &SpinSystem, a: &PopulationState, b: &PopulationState) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for sp in sys.species() {
        let da = detect(a, sys, sp, DEFAULT_TIP_ANGLE_RAD).unwrap();
        let db = detect(b, sys, sp, DEFAULT_TIP_ANGLE_RAD).unwrap();
        for s in multiply_sticks(&da, &db, true, false).unwrap().sticks {
            out.insert(s.label.to_string());
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pattern_sign_follows_bit((sys, idx) in system_and_state()) {
        let s = sys.state(idx as usize);
        for p in sys.pattern_of(s) {
            prop_assert_eq!(p.sign == 1, s.bit(p.spin) == 0);
        }
    }

    #[test]
    fn flipping_a_spin_keeps_its_peak((sys, idx) in system_and_state(), spin in 0usize..5) {
        let spin = spin % sys.n();
        let s = sys.state(idx as usize);
        let a = &sys.pattern_of(s)[spin];
        let b = &sys.pattern_of(s.flip(spin))[spin];
        prop_assert_eq!(&a.label, &b.label);
        prop_assert_eq!(a.sign, -b.sign);
        // and every other spin's peak moves
        for j in (0..sys.n()).filter(|&j| j != spin) {
            prop_assert_ne!(&sys.pattern_of(s)[j].label, &sys.pattern_of(s.flip(spin))[j].label);
        }
    }

    #[test]
    fn prepared_states_sum_to_zero((sys, idx) in system_and_state(), eps in 0.01f64..10.0) {
        let s = sys.state(idx as usize);
        prop_assert!(thermal_state(&sys).sum().abs() < 1e-12);
        prop_assert!(pseudopure(&sys, s, eps).unwrap().sum().abs() < 1e-12);
        for t in sys.enumerate_transitions() {
            prop_assert_eq!(make_pops(&sys, &t).unwrap().sum(), 0.0);
        }
    }

    #[test]
    fn gates_are_involutions_preserving_pops((sys, idx) in system_and_state(), pick in any::<u64>()) {
        let g = random_gate(sys.n(), pick);
        let seq = compile(&sys, &g).unwrap();
        let t = sys.enumerate_transitions()[idx as usize % sys.enumerate_transitions().len()].clone();
        let p = make_pops(&sys, &t).unwrap();
        let once = apply_sequence(&sys, &p, &seq, false).unwrap();
        prop_assert!(once.pops_members().is_some());
        prop_assert_eq!(once.sum(), 0.0);
        let twice = apply_sequence(&sys, &once, &seq, false).unwrap();
        prop_assert_eq!(twice.populations(), p.populations());
        let th = thermal_state(&sys);
        prop_assert_eq!(pi_pulse(&pi_pulse(&th, &t).unwrap(), &t).unwrap(), th.clone().with_kind(nmr_pops::StateKind::General));
    }

    #[test]
    fn detection_is_linear(
        sys in system(),
        xs in prop::collection::vec(-1.0f64..1.0, 32),
        ys in prop::collection::vec(-1.0f64..1.0, 32),
        a in -5.0f64..5.0,
        b in -5.0f64..5.0,
    ) {
        let m = sys.num_states();
        let x = PopulationState::from_populations(sys.n(), xs[..m].to_vec()).unwrap();
        let y = PopulationState::from_populations(sys.n(), ys[..m].to_vec()).unwrap();
        let combo = &(&x * a) + &(&y * b);
        for sp in sys.species() {
            let d = |s: &PopulationState| detect(s, &sys, sp, DEFAULT_TIP_ANGLE_RAD).unwrap();
            let (dc, dx, dy) = (d(&combo), d(&x), d(&y));
            for t in sys.enumerate_transitions().iter().filter(|t| sys.spin(t.spin).species == sp) {
                let rhs = a * dx.amplitude_of(&t.label) + b * dy.amplitude_of(&t.label);
                prop_assert!((dc.amplitude_of(&t.label) - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn product_support_is_the_bridging_lines(sys in system(), i in any::<u32>(), j in any::<u32>()) {
        let ts = sys.enumerate_transitions();
        let t1 = &ts[i as usize % ts.len()];
        let t2 = &ts[j as usize % ts.len()];
        let p1 = make_pops(&sys, t1).unwrap();
        let p2 = make_pops(&sys, t2).unwrap();
        let shared = [t1.lower, t1.upper].iter().any(|s| *s == t2.lower || *s == t2.upper);
        let got = stick_labels(&sys, &p1, &p2);
        if t1 == t2 {
            let mut want: BTreeSet<String> = sys.pattern_of(t1.lower).iter().map(|p| p.label.to_string()).collect();
            want.extend(sys.pattern_of(t1.upper).iter().map(|p| p.label.to_string()));
            prop_assert_eq!(got, want);
        } else if !shared {
            let want = bridging_lines(&sys, (t1.lower, t1.upper), (t2.lower, t2.upper));
            prop_assert_eq!(got, want);
        }
    }
}

#[test]
fn disjoint_pops_multiply_to_nothing() {
    // (vi)-(xiv) and (xix)-(xxvii): no level of one pair is adjacent to the other
    let sys = five_qubit_system();
    let p = |a: &str, b: &str| {
        let (a, b) = (sys.parse_state(a).unwrap(), sys.parse_state(b).unwrap());
        &pseudopure(&sys, a, 1.0).unwrap() - &pseudopure(&sys, b, 1.0).unwrap()
    };
    let got = stick_labels(&sys, &p("00101", "01101"), &p("10010", "11010"));
    assert!(got.is_empty(), "{got:?}");
}

#[test]
fn pops_sharing_no_state_do_not_isolate_one() {
    // B8 = (vi)-(xiv) and the B line of (v)-(xiii): the product keeps only the
    // bridging lines, which is neither a single state nor a pair
    let sys = five_qubit_system();
    let b8 = make_pops(&sys, &sys.transition_by_label("B8").unwrap()).unwrap();
    let other = make_pops(
        &sys,
        &sys.transition_between(
            sys.parse_state("00100").unwrap(),
            sys.parse_state("01100").unwrap(),
        )
        .unwrap(),
    )
    .unwrap();
    let product: Vec<_> = sys
        .species()
        .into_iter()
        .map(|sp| {
            let a = detect(&b8, &sys, sp, DEFAULT_TIP_ANGLE_RAD).unwrap();
            let b = detect(&other, &sys, sp, DEFAULT_TIP_ANGLE_RAD).unwrap();
            multiply_sticks(&a, &b, true, false).unwrap()
        })
        .collect();
    let labels: BTreeSet<String> = product
        .iter()
        .flat_map(|s| s.sticks.iter().map(|x| x.label.to_string()))
        .collect();
    assert_eq!(
        labels,
        BTreeSet::from(["E13".to_string(), "E14".to_string()])
    );
    let c = classify_sticks(&sys, &product).unwrap();
    assert_ne!(c.verdict, Verdict::SingleState);
    assert_ne!(c.verdict, Verdict::PopsPair);
}

#[test]
fn subtraction_matches_direct_path_without_noise() {
    let sys = five_qubit_system();
    let gate = compile(&sys, &GateSpec::cnot_from_bits(5, "0010", 4).unwrap()).unwrap();
    let opts = RenderOptions {
        relax: false,
        ..RenderOptions::noiseless()
    };
    for label in ["A8", "B8", "C13", "E1"] {
        let t = sys.transition_by_label(label).unwrap();
        for g in [None, Some(&gate)] {
            for sp in ["1H", "19F"] {
                let a = pops_spectrum_by_subtraction(&sys, &t, g, sp, &opts).unwrap();
                let b = pops_spectrum_direct(&sys, &t, g, sp, &opts).unwrap();
                assert_eq!(a.values, b.values);
            }
        }
    }
}

#[test]
fn seeds_reproduce_and_differ() {
    let sys = five_qubit_system();
    let t = sys.transition_by_label("A8").unwrap();
    let run = |seed| {
        let opts = RenderOptions {
            seed,
            ..RenderOptions::default()
        };
        pops_spectrum_by_subtraction(&sys, &t, None, "19F", &opts).unwrap()
    };
    assert_eq!(run(5).values, run(5).values);
    assert_ne!(run(5).values, run(6).values);
    let p = multiply(&run(5), &run(6), true, false).unwrap();
    assert_eq!(p.noise_sigma, None);
}
