use nalgebra::DVector;
use proptest::prelude::*;

use voisim::channel::{multiaccess_gate, ChannelLink, ErasureRateProcess, Message};
use voisim::error::SimError;
use voisim::scenario::builtin;
use voisim::run_once;

fn msg(k: usize, x: f64) -> Message {
    Message { source: 0, sent_at: k, estimate: DVector::from_vec(vec![x, -x, 1.0 / 3.0]) }
}

#[test]
fn deliveries_on_two_links_are_uncorrelated() {
    let n = 100_000;
    let mut links = [0, 1].map(|i| ChannelLink::new(i, ErasureRateProcess::Constant(0.3), 77));
    let mut g = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for k in 0..n {
        for (l, link) in links.iter_mut().enumerate() {
            let d = link.send(k, Some(msg(k, 1.0))).unwrap().unwrap();
            g[l].push(d as u8 as f64);
            link.receive(k + 1);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m0, m1) = (mean(&g[0]), mean(&g[1]));
    let cov = g[0].iter().zip(&g[1]).map(|(a, b)| (a - m0) * (b - m1)).sum::<f64>() / n as f64;
    let corr = cov / (m0 * (1.0 - m0) * m1 * (1.0 - m1)).sqrt();
    // Standard error of a sample correlation near zero is 1/√n.
    assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "correlation {corr}");
}

#[test]
fn delivered_payload_is_bit_identical_and_one_step_late() {
    let mut link = ChannelLink::new(0, ErasureRateProcess::Constant(0.0), 1);
    let sent = msg(4, std::f64::consts::PI);
    assert_eq!(link.send(4, Some(sent.clone())).unwrap(), Some(true));
    let got = link.receive(5).unwrap();
    assert_eq!(got, sent);
    assert_eq!(link.receive(6), None);
}

#[test]
fn stale_packets_are_not_delivered_late() {
    let mut link = ChannelLink::new(0, ErasureRateProcess::Constant(0.0), 1);
    link.send(2, Some(msg(2, 1.0))).unwrap();
    assert_eq!(link.receive(7), None);
}

#[test]
fn erased_packets_never_arrive() {
    let mut link = ChannelLink::new(0, ErasureRateProcess::Constant(1.0), 1);
    for k in 0..100 {
        assert_eq!(link.send(k, Some(msg(k, 1.0))).unwrap(), Some(false));
        assert_eq!(link.receive(k + 1), None);
    }
}

#[test]
fn double_send_faults() {
    let mut link = ChannelLink::new(1, ErasureRateProcess::Constant(0.5), 1);
    link.send(3, None).unwrap();
    assert!(matches!(link.send(3, Some(msg(3, 1.0))), Err(SimError::DoubleSend { link: 1, step: 3 })));
}

#[test]
fn gate_rejects_two_senders() {
    assert!(multiaccess_gate(&[true, false], 0, "x").is_ok());
    assert!(matches!(multiaccess_gate(&[true, true], 5, "x"), Err(SimError::Collision { step: 5, .. })));
}

#[test]
fn gilbert_elliott_occupancy_and_rates() {
    let ge = ErasureRateProcess::gilbert_elliott(0.05, 0.6, 0.9, 0.7);
    let pi = ge.stationary();
    assert!((pi[1] - 0.1 / 0.4).abs() < 1e-12);
    assert!((ge.mean_rate() - (0.75 * 0.05 + 0.25 * 0.6)).abs() < 1e-12);
    let mut link = ChannelLink::new(0, ge, 5);
    let mut bad = 0usize;
    for k in 0..200_000 {
        bad += link.rate_state();
        link.advance_rate(k);
    }
    assert!((bad as f64 / 2e5 - 0.25).abs() < 0.02);
}

#[test]
fn invalid_rate_processes_are_rejected() {
    assert!(ErasureRateProcess::Constant(1.3).validate("links[0]").unwrap_err().to_string().contains("links[0]"));
    let bad_rows = ErasureRateProcess::Markov { states: vec![0.1, 0.2], transition: vec![vec![0.5, 0.4], vec![0.5, 0.5]], initial: 0 };
    assert!(bad_rows.validate("links[1]").is_err());
}

#[test]
fn delivery_draws_do_not_depend_on_policy() {
    // Where two policies both send on a link, the outcome is the same.
    let sc = builtin("spacecraft_broadcast").unwrap().with_horizon(300).unwrap();
    let a = run_once(&sc, &"always".parse().unwrap(), 21).unwrap();
    let b = run_once(&sc, &"random:0.5".parse().unwrap(), 21).unwrap();
    let mut shared = 0;
    for (x, y) in a.steps.iter().zip(&b.steps) {
        for l in 0..2 {
            if y.links[l].sent {
                shared += 1;
                assert_eq!(x.links[l].delivered, y.links[l].delivered, "step {} link {l}", x.k);
            }
        }
    }
    assert!(shared > 100);
}

proptest! {
    #[test]
    fn delivery_is_a_pure_function_of_seed_link_step(seed in any::<u64>(), k in 0usize..10_000, lambda in 0.0f64..=1.0) {
        let mut a = ChannelLink::new(1, ErasureRateProcess::Constant(lambda), seed);
        let mut b = ChannelLink::new(1, ErasureRateProcess::Constant(lambda), seed);
        b.send(k.wrapping_sub(1), None).ok();
        prop_assert_eq!(a.send(k, Some(msg(k, 0.0))).unwrap(), b.send(k, Some(msg(k, 0.0))).unwrap());
    }
}
