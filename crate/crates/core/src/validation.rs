//! Fast self-checks run by `voisim validate`.
//!
//! Each check pits an implementation path against an independent route
//! (a covariance-form filter, a direct encoder/decoder difference, the
//! closed-form one-shot rules, a binomial frequency band) and reports a
//! pass/fail line. `scale` multiplies every sample size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{ChannelLink, ErasureRateProcess, Message};
use crate::estimation::covariance_schedule;
use crate::linalg::{relative_frobenius, spd_inverse, symmetrize, Matrix, Vector};
use crate::model::{GaussMarkovModel, ModelSpec};
use crate::policy::{
    dissemination_voi, one_shot_broadcast, one_shot_multiaccess, prioritization_voi,
    DisseminationInputs, DisseminationOutcome, LinkTerm, OneShotSource, PrioritizationInputs,
};
use crate::scenario::builtin;
use crate::sim::run_once;
use crate::PolicySpec;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn scaled(base: usize, scale: f64) -> usize {
    ((base as f64 * scale).ceil() as usize).max(1)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let b = gaussian_matrix(rng, n, n);
    symmetrize(&(&b * b.transpose() + Matrix::identity(n, n) * 0.1))
}

/// Random stable system with `n` states and `m` outputs.
pub fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize, horizon: usize) -> GaussMarkovModel {
    let mut a = gaussian_matrix(rng, n, n) * 0.5;
    let norm = a.clone().singular_values().max();
    if norm > 0.95 {
        a *= 0.95 / norm;
    }
    ModelSpec::constant(
        a,
        gaussian_matrix(rng, m, n),
        random_spd(rng, n),
        random_spd(rng, m),
        Vector::from_fn(n, |_, _| rng.sample(StandardNormal)),
        random_spd(rng, n),
    )
    .build(horizon, "")
    .expect("random system is valid")
}

/// Textbook covariance-form recursion: `P⁻ = A P Aᵀ + W`,
/// `K = P⁻Cᵀ(C P⁻ Cᵀ + V)⁻¹`, `P = (I − K C) P⁻`.
pub fn covariance_form_schedule(model: &GaussMarkovModel) -> Vec<Matrix> {
    let n = model.state_dim();
    let update = |prior: &Matrix, k: usize| {
        let c = model.c(k);
        let s = c * prior * c.transpose() + model.v(k);
        let gain = prior * c.transpose() * spd_inverse(&symmetrize(&s)).expect("S is SPD");
        (Matrix::identity(n, n) - gain * c) * prior
    };
    let mut out = vec![update(model.initial_cov(), 0)];
    for k in 1..=model.horizon() {
        let a = model.a(k - 1);
        let prior = a * &out[k - 1] * a.transpose() + model.w(k - 1);
        out.push(update(&prior, k));
    }
    out
}

pub fn kalman_oracle(scale: f64) -> CheckResult {
    let systems = scaled(100, scale);
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b61_6c6d);
    let mut worst: f64 = 0.0;
    for _ in 0..systems {
        let n = rng.random_range(1..=5);
        let m = rng.random_range(1..=3);
        let model = random_system(&mut rng, n, m, 50);
        let info = match covariance_schedule(&model) {
            Ok(q) => q,
            Err(e) => {
                return CheckResult {
                    name: "kalman-oracle",
                    passed: false,
                    detail: e.to_string(),
                }
            }
        };
        for (q, p) in info.iter().zip(covariance_form_schedule(&model)) {
            worst = worst.max(relative_frobenius(q, &p));
        }
    }
    CheckResult {
        name: "kalman-oracle",
        passed: worst < 1e-9,
        detail: format!("{systems} systems, worst relative Frobenius error {worst:.3e}"),
    }
}

pub fn mismatch_identity(scale: f64) -> CheckResult {
    let runs = scaled(10, scale);
    let mut worst: f64 = 0.0;
    for name in ["spacecraft_broadcast", "spacecraft_multiaccess"] {
        let scenario = builtin(name).expect("built-in scenario");
        for seed in 0..runs as u64 {
            match run_once(&scenario, &PolicySpec::voi(), seed) {
                Ok(m) => worst = worst.max(m.max_mismatch_residual),
                Err(e) => {
                    return CheckResult {
                        name: "mismatch-identity",
                        passed: false,
                        detail: e.to_string(),
                    }
                }
            }
        }
    }
    CheckResult {
        name: "mismatch-identity",
        passed: worst < 1e-10,
        detail: format!("{} runs, worst residual {worst:.3e}", 2 * runs),
    }
}

/// One-shot agreement between the closed-form rules and the general rules
/// evaluated at `ẽ = K ν`. The broadcast general rule is a parameter so the
/// check itself can be exercised against a broken rule.
pub fn one_shot_agreement(
    scale: f64,
    broadcast_rule: fn(&DisseminationInputs) -> DisseminationOutcome,
) -> CheckResult {
    let draws = scaled(10_000, scale);
    let mut rng = ChaCha8Rng::seed_from_u64(0x636f_726f);
    let mut mismatches = 0;
    for _ in 0..draws {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=3);
        let nu: Vec<Vector> = (0..2).map(|_| Vector::from_fn(m, |_, _| rng.sample(StandardNormal))).collect();
        let gain: Vec<Matrix> = (0..2).map(|_| gaussian_matrix(&mut rng, n, m) * 0.3).collect();
        let a: Vec<Matrix> = (0..2).map(|_| gaussian_matrix(&mut rng, n, n)).collect();
        let success: [f64; 2] = [rng.random(), rng.random()];
        let omega: [f64; 2] = [rng.random::<f64>() * 2.0, rng.random::<f64>() * 2.0];
        let theta: [f64; 2] = [rng.random::<f64>() * 2.0, rng.random::<f64>() * 2.0];

        // Broadcast: one source, shared ν, K, A.
        let closed = one_shot_broadcast(&nu[0], &gain[0], &a[0], success, omega, theta[0]);
        let e0 = &gain[0] * &nu[0];
        let term = |l: usize| LinkTerm { mismatch: &e0, success_rate: success[l], omega_next: omega[l], a: &a[0] };
        let general = broadcast_rule(&DisseminationInputs { links: [term(0), term(1)], theta: theta[0], delta: 0.0 });
        if closed.transmit[0] != general.transmit {
            mismatches += 1;
        }

        // Multi-access: two sources.
        let closed = one_shot_multiaccess([0, 1].map(|j| OneShotSource {
            innovation: &nu[j],
            gain: &gain[j],
            a: &a[j],
            success: success[j],
            omega: omega[j],
            theta: theta[j],
        }));
        let e: Vec<Vector> = (0..2).map(|j| &gain[j] * &nu[j]).collect();
        let general = prioritization_voi(
            &PrioritizationInputs {
                sources: [0, 1].map(|j| LinkTerm { mismatch: &e[j], success_rate: success[j], omega_next: omega[j], a: &a[j] }),
                theta,
                delta_one: [0.0; 2],
                delta_two: [0.0; 2],
            },
            0,
        );
        match general {
            Ok(g) if g.transmit.to_vec() == closed.transmit => {}
            _ => mismatches += 1,
        }
    }
    CheckResult {
        name: "one-shot-agreement",
        passed: mismatches == 0,
        detail: format!("{draws} draws per channel kind, {mismatches} disagreements"),
    }
}

pub fn channel_rates(scale: f64) -> CheckResult {
    let sends = scaled(100_000, scale);
    let mut notes = Vec::new();
    let mut passed = true;
    for (i, lambda) in [0.1, 0.3, 0.9].into_iter().enumerate() {
        let mut link = ChannelLink::new(i, ErasureRateProcess::Constant(lambda), 0x6368_616e);
        let mut lost = 0usize;
        for k in 0..sends {
            let msg = Message { source: 0, sent_at: k, estimate: Vector::zeros(1) };
            if link.send(k, Some(msg)).expect("single send per step") == Some(false) {
                lost += 1;
            }
            link.receive(k + 1);
        }
        let freq = lost as f64 / sends as f64;
        let se = (lambda * (1.0 - lambda) / sends as f64).sqrt();
        let z = (freq - lambda) / se;
        passed &= z.abs() <= 3.0;
        notes.push(format!("λ={lambda}: {freq:.4} (z={z:+.2})"));
    }
    CheckResult {
        name: "channel-rates",
        passed,
        detail: format!("{sends} sends each; {}", notes.join(", ")),
    }
}

pub fn run_all(scale: f64) -> Vec<CheckResult> {
    vec![
        kalman_oracle(scale),
        mismatch_identity(scale),
        one_shot_agreement(scale, dissemination_voi),
        channel_rates(scale),
    ]
}
