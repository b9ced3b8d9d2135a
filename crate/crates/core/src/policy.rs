//! Scheduling rules.
//!
//! The threshold policies weigh the expected reduction of the weighted
//! squared error at the next step against the cost of a transmission. For a
//! link with success rate `λ′`, next-step weight `ω` and mismatch `ẽ` the
//! expected reduction from one transmission is `λ′ ω ‖A ẽ‖²`. The broadcast
//! rule sums it over both monitors; the multi-access rule additionally gates
//! each source on being strictly more urgent than the other.
//!
//! The value-difference terms of the exact rules are carried as `delta`
//! inputs and are zero under the one-step lookahead used by default.

use std::fmt;
use std::str::FromStr;

use crate::error::{ConfigError, SimError};
use crate::linalg::{Matrix, Vector};
use crate::model::ScenarioKind;
use crate::rng::{uniform_at, StreamId, StreamKind};

/// `φ_y(x)`: `x` when `y > 0`, otherwise `−∞`.
pub fn access_function(gate: f64, value: f64) -> f64 {
    if gate > 0.0 {
        value
    } else {
        f64::NEG_INFINITY
    }
}

/// Per-link term of a threshold rule.
#[derive(Debug, Clone, Copy)]
pub struct LinkTerm<'a> {
    pub mismatch: &'a Vector,
    /// `λ′ = 1 − λ`.
    pub success_rate: f64,
    /// Error weight at the next step.
    pub omega_next: f64,
    pub a: &'a Matrix,
}

impl LinkTerm<'_> {
    /// `λ′ ω ẽᵀ Aᵀ A ẽ`.
    pub fn expected_gain(&self) -> f64 {
        let propagated = self.a * self.mismatch;
        self.success_rate * self.omega_next * propagated.norm_squared()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DisseminationInputs<'a> {
    pub links: [LinkTerm<'a>; 2],
    pub theta: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisseminationOutcome {
    pub chi: f64,
    pub transmit: bool,
}

/// Broadcast rule: transmit iff `φ_1(χ − θ) ≥ 0`.
pub fn dissemination_voi(inputs: &DisseminationInputs) -> DisseminationOutcome {
    let chi = inputs.links.iter().map(LinkTerm::expected_gain).sum::<f64>() + inputs.delta;
    DisseminationOutcome {
        chi,
        transmit: access_function(1.0, chi - inputs.theta) >= 0.0,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PrioritizationInputs<'a> {
    pub sources: [LinkTerm<'a>; 2],
    pub theta: [f64; 2],
    pub delta_one: [f64; 2],
    pub delta_two: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrioritizationOutcome {
    pub chi: [f64; 2],
    pub rho: [f64; 2],
    pub transmit: [bool; 2],
}

/// Multi-access rule: source `j` transmits iff `φ_{ρ_j}(χ_j − θ_j) ≥ 0`.
///
/// Fails when the supplied value differences let both sources fire.
pub fn prioritization_voi(
    inputs: &PrioritizationInputs,
    step: usize,
) -> Result<PrioritizationOutcome, SimError> {
    let gains = inputs.sources.map(|s| s.expected_gain());
    let chi = [gains[0] + inputs.delta_one[0], gains[1] + inputs.delta_one[1]];
    let rho = [
        gains[0] - gains[1] + inputs.delta_two[0],
        gains[1] - gains[0] + inputs.delta_two[1],
    ];
    let transmit = [0, 1].map(|j| access_function(rho[j], chi[j] - inputs.theta[j]) >= 0.0);
    if transmit[0] && transmit[1] {
        return Err(SimError::Collision {
            step,
            policy: "voi".into(),
        });
    }
    Ok(PrioritizationOutcome { chi, rho, transmit })
}

/// Decision of one step, with diagnostics. `transmit` has one entry per
/// transmitter; `rho` is empty for broadcast scenarios.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Decision {
    pub transmit: Vec<bool>,
    pub chi: Vec<f64>,
    pub rho: Vec<f64>,
}

impl From<DisseminationOutcome> for Decision {
    fn from(o: DisseminationOutcome) -> Self {
        Decision {
            transmit: vec![o.transmit],
            chi: vec![o.chi],
            rho: Vec::new(),
        }
    }
}

impl From<PrioritizationOutcome> for Decision {
    fn from(o: PrioritizationOutcome) -> Self {
        Decision {
            transmit: o.transmit.to_vec(),
            chi: o.chi.to_vec(),
            rho: o.rho.to_vec(),
        }
    }
}

/// Closed-form broadcast decision for a horizon of one step, written in
/// terms of the first innovation and gain.
#[allow(clippy::too_many_arguments)]
pub fn one_shot_broadcast(
    innovation: &Vector,
    gain: &Matrix,
    a: &Matrix,
    success: [f64; 2],
    omega: [f64; 2],
    theta: f64,
) -> Decision {
    let weight = success[0] * omega[0] + success[1] * omega[1];
    let chi = weight * (a * (gain * innovation)).norm_squared();
    Decision {
        transmit: vec![access_function(1.0, chi - theta) >= 0.0],
        chi: vec![chi],
        rho: Vec::new(),
    }
}

/// One source's data for [`one_shot_multiaccess`].
#[derive(Debug, Clone, Copy)]
pub struct OneShotSource<'a> {
    pub innovation: &'a Vector,
    pub gain: &'a Matrix,
    pub a: &'a Matrix,
    pub success: f64,
    pub omega: f64,
    pub theta: f64,
}

/// Closed-form multi-access decision for a horizon of one step.
pub fn one_shot_multiaccess(sources: [OneShotSource; 2]) -> Decision {
    let chi = sources.map(|s| s.success * s.omega * (s.a * (s.gain * s.innovation)).norm_squared());
    let rho = [chi[0] - chi[1], chi[1] - chi[0]];
    let transmit = [0, 1].map(|j| access_function(rho[j], chi[j] - sources[j].theta) >= 0.0);
    Decision {
        transmit: transmit.to_vec(),
        chi: chi.to_vec(),
        rho: rho.to_vec(),
    }
}

/// Innovation-independent reference schedules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    /// Fires at `k = phase, phase + period, …`. Multi-access firings
    /// alternate between the two sources, starting with source 0.
    Periodic { period: usize, phase: usize },
    /// Every step. Multi-access alternates sources step by step.
    Always,
    Never,
    /// Fires with probability `p`; a multi-access firing picks a source
    /// uniformly.
    Random { p: f64 },
}

impl Baseline {
    pub fn decide(&self, kind: ScenarioKind, k: usize, seed: u64) -> Decision {
        let fire_slot: Option<usize> = match *self {
            Baseline::Periodic { period, phase } => {
                (k >= phase && (k - phase).is_multiple_of(period)).then(|| (k - phase) / period)
            }
            Baseline::Always => Some(k),
            Baseline::Never => None,
            Baseline::Random { p } => {
                (uniform_at(seed, StreamId::new(StreamKind::Policy, 0), k) < p).then_some(k)
            }
        };
        let transmit = match (kind, fire_slot) {
            (ScenarioKind::Broadcast, slot) => vec![slot.is_some()],
            (ScenarioKind::MultiAccess, None) => vec![false, false],
            (ScenarioKind::MultiAccess, Some(slot)) => {
                let first = match self {
                    Baseline::Random { .. } => {
                        uniform_at(seed, StreamId::new(StreamKind::Policy, 1), k) < 0.5
                    }
                    _ => slot % 2 == 0,
                };
                vec![first, !first]
            }
        };
        Decision {
            transmit,
            chi: Vec::new(),
            rho: Vec::new(),
        }
    }
}

/// Value-difference schedules for the threshold rules. Empty schedules mean
/// zero; a single entry is constant over the horizon.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeltaSchedule {
    /// Broadcast `Δ_c`.
    pub common: Vec<f64>,
    /// Multi-access `Δ^I_j`.
    pub type_one: [Vec<f64>; 2],
    /// Multi-access `Δ^II_j`.
    pub type_two: [Vec<f64>; 2],
}

fn at(schedule: &[f64], k: usize) -> f64 {
    match schedule.len() {
        0 => 0.0,
        1 => schedule[0],
        _ => schedule.get(k).copied().unwrap_or(0.0),
    }
}

impl DeltaSchedule {
    pub fn is_zero(&self) -> bool {
        self.common.iter().all(|d| *d == 0.0)
            && self.type_one.iter().flatten().all(|d| *d == 0.0)
            && self.type_two.iter().flatten().all(|d| *d == 0.0)
    }

    pub fn common_at(&self, k: usize) -> f64 {
        at(&self.common, k)
    }

    pub fn type_one_at(&self, k: usize) -> [f64; 2] {
        [at(&self.type_one[0], k), at(&self.type_one[1], k)]
    }

    pub fn type_two_at(&self, k: usize) -> [f64; 2] {
        [at(&self.type_two[0], k), at(&self.type_two[1], k)]
    }
}

/// A scheduling policy selectable from the command line or a scenario file.
///
/// Text form: `voi`, `periodic:<period>[:<phase>]`, `random:<p>`, `always`,
/// `never`.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Voi(DeltaSchedule),
    Baseline(Baseline),
}

impl PolicySpec {
    pub fn voi() -> Self {
        PolicySpec::Voi(DeltaSchedule::default())
    }

    pub fn periodic(period: usize) -> Self {
        PolicySpec::Baseline(Baseline::Periodic { period, phase: 0 })
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Voi(d) if d.is_zero() => f.write_str("voi"),
            PolicySpec::Voi(_) => f.write_str("voi+delta"),
            PolicySpec::Baseline(Baseline::Periodic { period, phase: 0 }) => {
                write!(f, "periodic:{period}")
            }
            PolicySpec::Baseline(Baseline::Periodic { period, phase }) => {
                write!(f, "periodic:{period}:{phase}")
            }
            PolicySpec::Baseline(Baseline::Always) => f.write_str("always"),
            PolicySpec::Baseline(Baseline::Never) => f.write_str("never"),
            PolicySpec::Baseline(Baseline::Random { p }) => write!(f, "random:{p}"),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| ConfigError::Policy {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let mut parts = s.trim().split(':');
        let head = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let no_args = |p: PolicySpec| {
            if args.is_empty() {
                Ok(p)
            } else {
                Err(err("takes no arguments"))
            }
        };
        match head {
            "voi" => no_args(PolicySpec::voi()),
            "always" => no_args(PolicySpec::Baseline(Baseline::Always)),
            "never" => no_args(PolicySpec::Baseline(Baseline::Never)),
            "periodic" => {
                let parse = |t: &str| t.parse::<usize>().map_err(|_| err("expected an integer"));
                let (period, phase) = match args.as_slice() {
                    [p] => (parse(p)?, 0),
                    [p, ph] => (parse(p)?, parse(ph)?),
                    _ => return Err(err("expected periodic:<period>[:<phase>]")),
                };
                if period == 0 {
                    return Err(err("period must be positive"));
                }
                Ok(PolicySpec::Baseline(Baseline::Periodic { period, phase }))
            }
            "random" => match args.as_slice() {
                [p] => {
                    let p: f64 = p.parse().map_err(|_| err("expected a probability"))?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(err("probability must lie in [0, 1]"));
                    }
                    Ok(PolicySpec::Baseline(Baseline::Random { p }))
                }
                _ => Err(err("expected random:<p>")),
            },
            _ => Err(err("unknown policy (voi, periodic:<n>[:<phase>], random:<p>, always, never)")),
        }
    }
}
