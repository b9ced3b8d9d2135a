//! One simulation run: sources, encoders, policy, links and decoders stepped
//! together over the horizon.
//!
//! Per step `k` the order is fixed: deliver the messages sent at `k − 1` and
//! update the decoders, feed `y_k` to the encoders (with the acknowledgments
//! of `k − 1`), score the errors, decide, send.

use crate::channel::{multiaccess_gate, ChannelLink, Message};
use crate::error::SimError;
use crate::estimation::{Ack, DecoderState, EncoderState};
use crate::model::{sample_trajectory, Scenario, ScenarioKind};
use crate::policy::{
    dissemination_voi, prioritization_voi, Decision, DisseminationInputs, LinkTerm, PolicySpec,
    PrioritizationInputs,
};

/// What happened on one link at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkStep {
    /// Packet error rate `λ_k` known to the encoder.
    pub lambda: f64,
    pub sent: bool,
    /// `γ_k`, present only when a packet was sent.
    pub delivered: Option<bool>,
    /// `‖x_k − x̂_k‖²` at the decoder fed by this link.
    pub sq_error: f64,
    /// `‖x̌_k − x̂_k‖²` from the separately evolved encoder and decoder.
    pub mismatch_sq: f64,
    /// `tr Q_k` of the source carried by this link.
    pub posterior_trace: f64,
    /// `‖ẽ_k − (x̌_k − x̂_k)‖`: recursion against direct difference.
    pub mismatch_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub links: Vec<LinkStep>,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub scenario: String,
    pub kind: ScenarioKind,
    pub policy: String,
    pub seed: u64,
    pub horizon: usize,
    pub steps: Vec<StepRecord>,
    /// `Σ_k ‖e_k‖²` per link (monitor in broadcast, source in multi-access).
    pub total_mse: Vec<f64>,
    /// Sends per transmitter.
    pub transmissions: Vec<usize>,
    /// Sends carried by each link.
    pub link_transmissions: Vec<usize>,
    /// Sent but erased, per link.
    pub losses: Vec<usize>,
    pub phi: f64,
    pub max_mismatch_residual: f64,
}

impl RunMetrics {
    /// Number of transmitter sends over the run.
    pub fn total_transmissions(&self) -> usize {
        self.transmissions.iter().sum()
    }
}

fn decide(
    scenario: &Scenario,
    policy: &PolicySpec,
    k: usize,
    seed: u64,
    encoders: &[EncoderState],
    lambdas: &[f64],
) -> Result<Decision, SimError> {
    match policy {
        PolicySpec::Baseline(b) => Ok(b.decide(scenario.kind, k, seed)),
        PolicySpec::Voi(delta) => match scenario.kind {
            ScenarioKind::Broadcast => {
                let a = scenario.sources[0].a(k);
                let term = |l: usize| LinkTerm {
                    mismatch: &encoders[0].mismatches[l],
                    success_rate: 1.0 - lambdas[l],
                    omega_next: scenario.omega_at(l, k + 1),
                    a,
                };
                let inputs = DisseminationInputs {
                    links: [term(0), term(1)],
                    theta: scenario.theta_at(0, k),
                    delta: delta.common_at(k),
                };
                Ok(dissemination_voi(&inputs).into())
            }
            ScenarioKind::MultiAccess => {
                let term = |j: usize| LinkTerm {
                    mismatch: &encoders[j].mismatches[0],
                    success_rate: 1.0 - lambdas[j],
                    omega_next: scenario.omega_at(j, k + 1),
                    a: scenario.sources[j].a(k),
                };
                let inputs = PrioritizationInputs {
                    sources: [term(0), term(1)],
                    theta: [scenario.theta_at(0, k), scenario.theta_at(1, k)],
                    delta_one: delta.type_one_at(k),
                    delta_two: delta.type_two_at(k),
                };
                Ok(prioritization_voi(&inputs, k)?.into())
            }
        },
    }
}

/// Runs `policy` on `scenario` with all randomness derived from `seed`.
pub fn run_once(scenario: &Scenario, policy: &PolicySpec, seed: u64) -> Result<RunMetrics, SimError> {
    let horizon = scenario.horizon;
    let n_links = scenario.links.len();
    let n_tx = scenario.transmitters();
    let label = policy.to_string();

    let trajectories: Vec<_> = scenario
        .sources
        .iter()
        .enumerate()
        .map(|(j, model)| sample_trajectory(model, seed, j))
        .collect();
    // Position of each link inside its encoder's mismatch list.
    let slot: Vec<usize> = (0..n_links)
        .map(|l| {
            let src = scenario.source_of_link(l);
            scenario.links_of_source(src).iter().position(|&x| x == l).unwrap()
        })
        .collect();

    let mut links: Vec<ChannelLink> = scenario
        .links
        .iter()
        .enumerate()
        .map(|(l, spec)| ChannelLink::new(l, spec.rate.clone(), seed))
        .collect();
    let mut decoders: Vec<DecoderState> = (0..n_links)
        .map(|l| DecoderState::new(&scenario.sources[scenario.source_of_link(l)]))
        .collect();
    let mut encoders: Vec<EncoderState> = Vec::with_capacity(n_tx);
    let mut acks = vec![Ack::default(); n_links];

    let mut steps = Vec::with_capacity(horizon + 1);
    let mut total_mse = vec![0.0; n_links];
    let mut transmissions = vec![0; n_tx];
    let mut link_transmissions = vec![0; n_links];
    let mut losses = vec![0; n_links];
    let mut phi = 0.0;
    let mut max_residual: f64 = 0.0;

    for k in 0..=horizon {
        if k >= 1 {
            for (l, link) in links.iter_mut().enumerate() {
                let msg = link.receive(k);
                let model = &scenario.sources[scenario.source_of_link(l)];
                decoders[l].step(model, k, msg.as_ref().map(|m| &m.estimate));
            }
        }

        for (j, model) in scenario.sources.iter().enumerate() {
            let y = &trajectories[j].outputs[k];
            if k == 0 {
                let fed = scenario.links_of_source(j).len();
                encoders.push(EncoderState::init(model, y, fed)?);
            } else {
                let source_acks: Vec<Ack> = scenario
                    .links_of_source(j)
                    .iter()
                    .map(|&l| acks[l])
                    .collect();
                encoders[j].step(model, k, y, &source_acks)?;
            }
        }

        let lambdas: Vec<f64> = links.iter().map(ChannelLink::erasure_rate).collect();
        let mut link_steps = Vec::with_capacity(n_links);
        for l in 0..n_links {
            let src = scenario.source_of_link(l);
            let enc = &encoders[src];
            let x = &trajectories[src].states[k];
            let x_hat = &decoders[l].estimate;
            let sq_error = (x - x_hat).norm_squared();
            let direct = &enc.estimate - x_hat;
            let residual = (&enc.mismatches[slot[l]] - &direct).norm();
            max_residual = max_residual.max(residual);
            total_mse[l] += sq_error;
            phi += scenario.omega_at(l, k) * sq_error;
            link_steps.push(LinkStep {
                lambda: lambdas[l],
                sent: false,
                delivered: None,
                sq_error,
                mismatch_sq: direct.norm_squared(),
                posterior_trace: enc.posterior_cov.trace(),
                mismatch_residual: residual,
            });
        }

        let decision = decide(scenario, policy, k, seed, &encoders, &lambdas)?;
        if scenario.kind == ScenarioKind::MultiAccess {
            multiaccess_gate(&decision.transmit, k, &label)?;
        }
        for (t, &u) in decision.transmit.iter().enumerate() {
            if u {
                transmissions[t] += 1;
                phi += scenario.theta_at(t, k);
            }
        }

        for (l, link) in links.iter_mut().enumerate() {
            let src = scenario.source_of_link(l);
            let sent = decision.transmit[src];
            let payload = sent.then(|| Message {
                source: src,
                sent_at: k,
                estimate: encoders[src].estimate.clone(),
            });
            let gamma = link.send(k, payload)?;
            acks[l] = Ack {
                sent,
                delivered: gamma == Some(true),
            };
            if sent {
                link_transmissions[l] += 1;
                if gamma == Some(false) {
                    losses[l] += 1;
                }
            }
            link_steps[l].sent = sent;
            link_steps[l].delivered = gamma;
            link.advance_rate(k);
        }

        steps.push(StepRecord {
            k,
            links: link_steps,
            decision,
        });
    }

    Ok(RunMetrics {
        scenario: scenario.name.clone(),
        kind: scenario.kind,
        policy: label,
        seed,
        horizon,
        steps,
        total_mse,
        transmissions,
        link_transmissions,
        losses,
        phi,
        max_mismatch_residual: max_residual,
    })
}

/// Recomputes the loss from the step traces:
/// `Σ_k Σ_t θ_{t,k} u_{t,k} + Σ_k Σ_i ω_{i,k} ‖e_{i,k}‖²`.
pub fn compute_phi(metrics: &RunMetrics, scenario: &Scenario) -> Result<f64, SimError> {
    if metrics.steps.len() != scenario.horizon + 1 {
        return Err(SimError::Trace(format!(
            "{} steps recorded, horizon needs {}",
            metrics.steps.len(),
            scenario.horizon + 1
        )));
    }
    let mut cost = 0.0;
    let mut distortion = 0.0;
    for step in &metrics.steps {
        if step.links.len() != scenario.links.len()
            || step.decision.transmit.len() != scenario.transmitters()
        {
            return Err(SimError::Trace(format!("malformed record at step {}", step.k)));
        }
        for (t, &u) in step.decision.transmit.iter().enumerate() {
            if u {
                cost += scenario.theta_at(t, step.k);
            }
        }
        for (l, link) in step.links.iter().enumerate() {
            distortion += scenario.omega_at(l, step.k) * link.sq_error;
        }
    }
    Ok(cost + distortion)
}
