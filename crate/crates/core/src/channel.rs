//! Packet-erasure links with one-step delay.
//!
//! A message handed to [`ChannelLink::send`] at step `k` is either erased or
//! comes out of [`ChannelLink::receive`] at step `k + 1`, bit-identical.

use crate::error::{ConfigError, SimError};
use crate::linalg::Vector;
use crate::rng::{uniform_at, StreamId, StreamKind};

/// Evolution of a link's packet error rate `λ_k`.
#[derive(Debug, Clone, PartialEq)]
pub enum ErasureRateProcess {
    Constant(f64),
    /// Finite-state Markov chain over erasure rates.
    Markov {
        states: Vec<f64>,
        transition: Vec<Vec<f64>>,
        initial: usize,
    },
}

impl ErasureRateProcess {
    /// Two-state Gilbert–Elliott chain starting in the good state.
    pub fn gilbert_elliott(good_rate: f64, bad_rate: f64, stay_good: f64, stay_bad: f64) -> Self {
        ErasureRateProcess::Markov {
            states: vec![good_rate, bad_rate],
            transition: vec![vec![stay_good, 1.0 - stay_good], vec![1.0 - stay_bad, stay_bad]],
            initial: 0,
        }
    }

    pub fn validate(&self, key: &str) -> Result<(), ConfigError> {
        let check_rate = |value: f64, key: String| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(ConfigError::RateOutOfRange { key, value })
            }
        };
        match self {
            ErasureRateProcess::Constant(l) => check_rate(*l, format!("{key}.lambda")),
            ErasureRateProcess::Markov {
                states,
                transition,
                initial,
            } => {
                if states.is_empty() {
                    return Err(ConfigError::dim(format!("{key}.states"), "at least 1 state", 0));
                }
                for (i, l) in states.iter().enumerate() {
                    check_rate(*l, format!("{key}.states[{i}]"))?;
                }
                if transition.len() != states.len() {
                    return Err(ConfigError::dim(
                        format!("{key}.transition"),
                        format!("{} rows", states.len()),
                        format!("{} rows", transition.len()),
                    ));
                }
                for (i, row) in transition.iter().enumerate() {
                    let row_key = format!("{key}.transition[{i}]");
                    if row.len() != states.len() {
                        return Err(ConfigError::dim(row_key, states.len(), row.len()));
                    }
                    let sum: f64 = row.iter().sum();
                    if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-12 {
                        return Err(ConfigError::NotStochastic { key: row_key });
                    }
                }
                if *initial >= states.len() {
                    return Err(ConfigError::dim(
                        format!("{key}.initial"),
                        format!("index below {}", states.len()),
                        initial,
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn initial_state(&self) -> usize {
        match self {
            ErasureRateProcess::Constant(_) => 0,
            ErasureRateProcess::Markov { initial, .. } => *initial,
        }
    }

    pub fn rate(&self, state: usize) -> f64 {
        match self {
            ErasureRateProcess::Constant(l) => *l,
            ErasureRateProcess::Markov { states, .. } => states[state],
        }
    }

    /// Next chain state given a uniform draw `u ∈ [0, 1)` (inverse CDF over
    /// the current row).
    pub fn next_state(&self, current: usize, u: f64) -> usize {
        match self {
            ErasureRateProcess::Constant(_) => current,
            ErasureRateProcess::Markov { transition, .. } => {
                let row = &transition[current];
                let mut acc = 0.0;
                for (j, p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return j;
                    }
                }
                // Rounding left a sliver above the last cumulative sum.
                row.iter().rposition(|p| *p > 0.0).unwrap_or(current)
            }
        }
    }

    /// Long-run erasure rate of the process (stationary mixture for chains).
    pub fn mean_rate(&self) -> f64 {
        match self {
            ErasureRateProcess::Constant(l) => *l,
            ErasureRateProcess::Markov { states, .. } => self
                .stationary()
                .iter()
                .zip(states)
                .map(|(p, l)| p * l)
                .sum(),
        }
    }

    /// Stationary distribution by power iteration; exact for `Constant`.
    pub fn stationary(&self) -> Vec<f64> {
        match self {
            ErasureRateProcess::Constant(_) => vec![1.0],
            ErasureRateProcess::Markov { transition, .. } => {
                let s = transition.len();
                let mut p = vec![1.0 / s as f64; s];
                for _ in 0..100_000 {
                    let mut next = vec![0.0; s];
                    for (i, pi) in p.iter().enumerate() {
                        for (j, t) in transition[i].iter().enumerate() {
                            next[j] += pi * t;
                        }
                    }
                    let diff: f64 = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
                    p = next;
                    if diff < 1e-15 {
                        break;
                    }
                }
                p
            }
        }
    }
}

/// Payload carried by a link: the encoder's estimate and the index of the
/// source it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub source: usize,
    pub sent_at: usize,
    pub estimate: Vector,
}

#[derive(Debug, Clone)]
pub struct ChannelLink {
    index: usize,
    seed: u64,
    process: ErasureRateProcess,
    state: usize,
    in_flight: Option<Message>,
    last_send: Option<usize>,
}

impl ChannelLink {
    pub fn new(index: usize, process: ErasureRateProcess, seed: u64) -> Self {
        let state = process.initial_state();
        ChannelLink {
            index,
            seed,
            process,
            state,
            in_flight: None,
            last_send: None,
        }
    }

    /// Packet error rate `λ_k` of the current step.
    pub fn erasure_rate(&self) -> f64 {
        self.process.rate(self.state)
    }

    pub fn rate_state(&self) -> usize {
        self.state
    }

    /// Offers a message at step `k`; `None` means the transmitter stays
    /// silent. Returns the delivery indicator `γ_k` when a message was sent.
    ///
    /// The delivery draw for `(link, k)` is fixed by the seed whether or not
    /// it ends up being used.
    pub fn send(&mut self, k: usize, payload: Option<Message>) -> Result<Option<bool>, SimError> {
        if self.last_send == Some(k) {
            return Err(SimError::DoubleSend {
                link: self.index,
                step: k,
            });
        }
        self.last_send = Some(k);
        let Some(msg) = payload else {
            return Ok(None);
        };
        let draw = uniform_at(self.seed, StreamId::new(StreamKind::Delivery, self.index), k);
        let delivered = draw >= self.erasure_rate();
        if delivered {
            self.in_flight = Some(msg);
        }
        Ok(Some(delivered))
    }

    /// Channel output `z_k`: the message sent at `k − 1` if it got through,
    /// otherwise `None` (the erasure symbol).
    pub fn receive(&mut self, k: usize) -> Option<Message> {
        match self.in_flight.take() {
            Some(msg) if k >= 1 && msg.sent_at == k - 1 => Some(msg),
            _ => None,
        }
    }

    /// Moves the rate process from step `k` to `k + 1`.
    pub fn advance_rate(&mut self, k: usize) {
        if let ErasureRateProcess::Markov { .. } = self.process {
            let u = uniform_at(self.seed, StreamId::new(StreamKind::RateChain, self.index), k);
            self.state = self.process.next_state(self.state, u);
        }
    }
}

/// Enforces the multi-access constraint `Σ u ≤ 1`.
pub fn multiaccess_gate(transmit: &[bool], step: usize, policy: &str) -> Result<(), SimError> {
    if transmit.iter().filter(|&&u| u).count() > 1 {
        Err(SimError::Collision {
            step,
            policy: policy.to_string(),
        })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(k: usize) -> Message {
        Message {
            source: 0,
            sent_at: k,
            estimate: Vector::from_vec(vec![0.1, -2.5e-7, std::f64::consts::PI]),
        }
    }

    #[test]
    fn perfect_channel_delivers_next_step() {
        let mut link = ChannelLink::new(0, ErasureRateProcess::Constant(0.0), 1);
        for k in 0..100 {
            assert_eq!(link.send(k, Some(msg(k))).unwrap(), Some(true));
            assert_eq!(link.receive(k + 1), Some(msg(k)));
        }
    }

    #[test]
    fn dead_channel_erases_everything() {
        let mut link = ChannelLink::new(0, ErasureRateProcess::Constant(1.0), 1);
        for k in 0..100 {
            assert_eq!(link.send(k, Some(msg(k))).unwrap(), Some(false));
            assert_eq!(link.receive(k + 1), None);
        }
    }

    #[test]
    fn silence_yields_erasure() {
        let mut link = ChannelLink::new(0, ErasureRateProcess::Constant(0.0), 1);
        assert_eq!(link.receive(0), None);
        assert_eq!(link.send(0, None).unwrap(), None);
        assert_eq!(link.receive(1), None);
    }

    #[test]
    fn double_send_is_a_fault() {
        let mut link = ChannelLink::new(3, ErasureRateProcess::Constant(0.2), 1);
        link.send(5, Some(msg(5))).unwrap();
        assert_eq!(
            link.send(5, Some(msg(5))),
            Err(SimError::DoubleSend { link: 3, step: 5 })
        );
    }

    #[test]
    fn stale_message_is_not_delivered_late() {
        let mut link = ChannelLink::new(0, ErasureRateProcess::Constant(0.0), 1);
        link.send(0, Some(msg(0))).unwrap();
        assert_eq!(link.receive(2), None);
    }

    #[test]
    fn identity_chain_never_moves() {
        let process = ErasureRateProcess::Markov {
            states: vec![0.1, 0.7],
            transition: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            initial: 1,
        };
        let mut link = ChannelLink::new(0, process, 9);
        for k in 0..1000 {
            assert_eq!(link.erasure_rate(), 0.7);
            link.advance_rate(k);
        }
    }

    #[test]
    fn constant_rate_never_moves() {
        let mut link = ChannelLink::new(0, ErasureRateProcess::Constant(0.3), 9);
        for k in 0..100 {
            link.advance_rate(k);
            assert_eq!(link.erasure_rate(), 0.3);
        }
    }

    #[test]
    fn gate() {
        assert!(multiaccess_gate(&[false, false], 0, "p").is_ok());
        assert!(multiaccess_gate(&[true, false], 0, "p").is_ok());
        assert!(multiaccess_gate(&[false, true], 0, "p").is_ok());
        assert_eq!(
            multiaccess_gate(&[true, true], 7, "p"),
            Err(SimError::Collision {
                step: 7,
                policy: "p".into()
            })
        );
    }

    #[test]
    fn validation() {
        assert!(ErasureRateProcess::Constant(1.3).validate("links[0]").is_err());
        assert!(ErasureRateProcess::gilbert_elliott(0.05, 0.6, 0.95, 0.95)
            .validate("l")
            .is_ok());
        let bad = ErasureRateProcess::Markov {
            states: vec![0.1, 0.2],
            transition: vec![vec![0.5, 0.6], vec![0.5, 0.5]],
            initial: 0,
        };
        assert!(matches!(bad.validate("l"), Err(ConfigError::NotStochastic { .. })));
    }

    #[test]
    fn stationary_two_state() {
        let ge = ErasureRateProcess::gilbert_elliott(0.05, 0.6, 0.9, 0.7);
        let p = ge.stationary();
        // π_good = (1 − p_bb) / ((1 − p_gg) + (1 − p_bb))
        assert!((p[0] - 0.3 / 0.4).abs() < 1e-12);
        assert!((ge.mean_rate() - (0.75 * 0.05 + 0.25 * 0.6)).abs() < 1e-12);
    }
}
