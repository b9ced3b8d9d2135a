use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use voisim::policy::{
    access_function, dissemination_voi, one_shot_broadcast, prioritization_voi, Baseline, DisseminationInputs,
    LinkTerm, PolicySpec, PrioritizationInputs,
};
use voisim::ScenarioKind;

fn vec3() -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-3.0f64..3.0, 3).prop_map(DVector::from_vec)
}

fn mat3() -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.5f64..1.5, 9).prop_map(|v| DMatrix::from_row_slice(3, 3, &v))
}

#[test]
fn access_function_values() {
    assert_eq!(access_function(1.0, -2.5), -2.5);
    assert_eq!(access_function(0.0, 10.0), f64::NEG_INFINITY);
    assert_eq!(access_function(-1e-300, 10.0), f64::NEG_INFINITY);
}

#[test]
fn ties_send_nothing() {
    let e = DVector::from_vec(vec![1.0, 2.0, 3.0]);
    let a = DMatrix::identity(3, 3);
    let t = LinkTerm { mismatch: &e, success_rate: 0.5, omega_next: 1.0, a: &a };
    let out = prioritization_voi(
        &PrioritizationInputs { sources: [t, t], theta: [0.0, 0.0], delta_one: [0.0; 2], delta_two: [0.0; 2] },
        0,
    )
    .unwrap();
    assert_eq!(out.transmit, [false, false]);
}

#[test]
fn threshold_is_inclusive() {
    let e = DVector::from_vec(vec![1.0]);
    let a = DMatrix::identity(1, 1);
    let t = LinkTerm { mismatch: &e, success_rate: 0.5, omega_next: 1.0, a: &a };
    let out = dissemination_voi(&DisseminationInputs { links: [t, t], theta: 1.0, delta: 0.0 });
    assert_eq!(out.chi, 1.0);
    assert!(out.transmit);
}

#[test]
fn value_differences_can_force_collisions() {
    let e = DVector::from_vec(vec![1.0]);
    let a = DMatrix::identity(1, 1);
    let t = LinkTerm { mismatch: &e, success_rate: 1.0, omega_next: 1.0, a: &a };
    let res = prioritization_voi(
        &PrioritizationInputs { sources: [t, t], theta: [0.0, 0.0], delta_one: [0.0; 2], delta_two: [1.0, 1.0] },
        3,
    );
    assert!(res.is_err());
}

#[test]
fn policy_grammar_round_trips() {
    for s in ["voi", "periodic:15", "periodic:4:2", "random:0.25", "always", "never"] {
        let p: PolicySpec = s.parse().unwrap();
        assert_eq!(p.to_string(), s);
    }
    for bad in ["", "periodic", "periodic:0", "random:1.5", "sometimes", "periodic:3:x"] {
        assert!(bad.parse::<PolicySpec>().is_err(), "{bad}");
    }
}

#[test]
fn periodic_counts_over_spacecraft_horizon() {
    let p = Baseline::Periodic { period: 15, phase: 0 };
    let b = (0..=1000).filter(|&k| p.decide(ScenarioKind::Broadcast, k, 0).transmit[0]).count();
    assert_eq!(b, 67);
    let (mut first, mut second) = (0, 0);
    for k in 0..=1000 {
        let d = p.decide(ScenarioKind::MultiAccess, k, 0);
        first += d.transmit[0] as usize;
        second += d.transmit[1] as usize;
    }
    assert_eq!((first, second), (34, 33));
}

proptest! {
    #[test]
    fn sign_flip_symmetry(e1 in vec3(), e2 in vec3(), a1 in mat3(), a2 in mat3(),
                          s in prop::array::uniform2(0.0f64..=1.0), w in prop::array::uniform2(0.0f64..3.0),
                          theta in prop::array::uniform2(0.0f64..5.0)) {
        let (n1, n2) = (-&e1, -&e2);
        let b = |e: &DVector<f64>| {
            let t = |l: usize| LinkTerm { mismatch: e, success_rate: s[l], omega_next: w[l], a: &a1 };
            dissemination_voi(&DisseminationInputs { links: [t(0), t(1)], theta: theta[0], delta: 0.0 })
        };
        prop_assert_eq!(b(&e1), b(&n1));
        let m = |x: &DVector<f64>, y: &DVector<f64>| {
            prioritization_voi(&PrioritizationInputs {
                sources: [
                    LinkTerm { mismatch: x, success_rate: s[0], omega_next: w[0], a: &a1 },
                    LinkTerm { mismatch: y, success_rate: s[1], omega_next: w[1], a: &a2 },
                ],
                theta, delta_one: [0.0; 2], delta_two: [0.0; 2],
            }, 0).unwrap()
        };
        prop_assert_eq!(m(&e1, &e2), m(&n1, &n2));
        prop_assert_eq!(m(&e1, &e2), m(&e1, &n2));
    }

    #[test]
    fn mutual_exclusion(e1 in vec3(), e2 in vec3(), a1 in mat3(), a2 in mat3(),
                        s in prop::array::uniform2(0.0f64..=1.0), w in prop::array::uniform2(0.0f64..3.0),
                        theta in prop::array::uniform2(0.0f64..0.5)) {
        let out = prioritization_voi(&PrioritizationInputs {
            sources: [
                LinkTerm { mismatch: &e1, success_rate: s[0], omega_next: w[0], a: &a1 },
                LinkTerm { mismatch: &e2, success_rate: s[1], omega_next: w[1], a: &a2 },
            ],
            theta, delta_one: [0.0; 2], delta_two: [0.0; 2],
        }, 0);
        let out = out.unwrap();
        prop_assert!(!(out.transmit[0] && out.transmit[1]));
        prop_assert_eq!(out.rho[0], -out.rho[1]);
    }

    #[test]
    fn power_of_two_scaling_is_exact(e in vec3(), a in mat3(), s in prop::array::uniform2(0.0f64..=1.0),
                                     w in prop::array::uniform2(0.0f64..3.0), theta in 0.0f64..5.0, p in -20i32..20) {
        let c = 2f64.powi(p);
        let t = |l: usize, scale: f64| LinkTerm { mismatch: &e, success_rate: s[l], omega_next: w[l] * scale, a: &a };
        let base = dissemination_voi(&DisseminationInputs { links: [t(0, 1.0), t(1, 1.0)], theta, delta: 0.0 });
        let scaled = dissemination_voi(&DisseminationInputs { links: [t(0, c), t(1, c)], theta: theta * c, delta: 0.0 });
        prop_assert_eq!(base.transmit, scaled.transmit);
        prop_assert_eq!(base.chi * c, scaled.chi);
    }

    #[test]
    fn lambda_cutoff_is_monotone(nu in vec3(), k in mat3(), a in mat3(), w in prop::array::uniform2(0.0f64..3.0), theta in 0.0f64..5.0) {
        let decisions: Vec<bool> = (0..=100)
            .map(|i| i as f64 / 100.0)
            .map(|l| one_shot_broadcast(&nu, &k, &a, [1.0 - l, 1.0 - l], w, theta).transmit[0])
            .collect();
        prop_assert!(decisions.windows(2).all(|p| p[0] || !p[1]), "{:?}", decisions);
    }
}
