//! Encoder-side Kalman filtering and decoder-side prediction.
//!
//! The encoder runs the information-form filter and tracks, for every link
//! it feeds, the mismatch `ẽ = x̌ − x̂` between its own estimate and the one
//! held by that link's decoder. The mismatch is propagated from the filter
//! innovation and the acknowledgment history only; it never looks at the
//! decoder state.

use crate::error::SimError;
use crate::linalg::{all_finite, spd_condition, spd_inverse, symmetrize, Matrix, Vector};
use crate::model::GaussMarkovModel;

/// Prior covariances with a larger spectral condition number than this are
/// updated in covariance (Joseph) form instead of information form.
pub const INFORMATION_FORM_MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateForm {
    Information,
    Joseph,
}

/// What the encoder learned about one link at the previous step:
/// whether it sent (`u_{k−1}`) and whether the packet arrived (`γ_{k−1}`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Ack {
    pub sent: bool,
    pub delivered: bool,
}

impl Ack {
    pub fn delivered_now(self) -> bool {
        self.sent && self.delivered
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderState {
    pub step: usize,
    /// Filtered estimate `x̌_k`.
    pub estimate: Vector,
    /// One-step prediction `m_k`.
    pub predicted_mean: Vector,
    /// Posterior covariance `Q_k`.
    pub posterior_cov: Matrix,
    /// Prior covariance `M_k`.
    pub prior_cov: Matrix,
    pub gain: Matrix,
    pub innovation: Vector,
    /// `ẽ_{i,k}` for each link fed by this encoder.
    pub mismatches: Vec<Vector>,
    pub update_form: UpdateForm,
}

/// Measurement update of a prior covariance. Returns `(Q, K, form)`.
pub fn measurement_update(
    prior: &Matrix,
    c: &Matrix,
    v: &Matrix,
    step: usize,
) -> Result<(Matrix, Matrix, UpdateForm), SimError> {
    let v_inv = spd_inverse(v).ok_or_else(|| SimError::Numeric {
        step,
        what: "measurement covariance is not positive definite".into(),
    })?;
    let information = if spd_condition(prior) <= INFORMATION_FORM_MAX_CONDITION {
        spd_inverse(prior).and_then(|prior_inv| {
            let info = prior_inv + c.transpose() * &v_inv * c;
            spd_inverse(&symmetrize(&info))
        })
    } else {
        None
    };

    let (q, form) = match information {
        Some(q) => (symmetrize(&q), UpdateForm::Information),
        None => {
            let s = c * prior * c.transpose() + v;
            let s_inv = spd_inverse(&symmetrize(&s)).ok_or_else(|| SimError::Numeric {
                step,
                what: "innovation covariance is not positive definite".into(),
            })?;
            let k = prior * c.transpose() * s_inv;
            let n = prior.nrows();
            let i_kc = Matrix::identity(n, n) - &k * c;
            let q = &i_kc * prior * i_kc.transpose() + &k * v * k.transpose();
            (symmetrize(&q), UpdateForm::Joseph)
        }
    };
    let gain = &q * c.transpose() * v_inv;
    if !all_finite(&q) || !all_finite(&gain) {
        return Err(SimError::Numeric {
            step,
            what: "covariance update produced non-finite values".into(),
        });
    }
    Ok((q, gain, form))
}

/// Posterior covariances `Q_0..=Q_N`. They depend on the model only.
pub fn covariance_schedule(model: &GaussMarkovModel) -> Result<Vec<Matrix>, SimError> {
    let mut out = Vec::with_capacity(model.horizon() + 1);
    let (mut q, _, _) = measurement_update(model.initial_cov(), model.c(0), model.v(0), 0)?;
    out.push(q.clone());
    for k in 1..=model.horizon() {
        let a = model.a(k - 1);
        let prior = symmetrize(&(a * &q * a.transpose() + model.w(k - 1)));
        q = measurement_update(&prior, model.c(k), model.v(k), k)?.0;
        out.push(q.clone());
    }
    Ok(out)
}

fn check_vector(v: &Vector, step: usize, what: &str) -> Result<(), SimError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(SimError::Numeric {
            step,
            what: format!("non-finite {what}"),
        })
    }
}

impl EncoderState {
    /// Filter initialization from the first output `y_0`, with one mismatch
    /// per fed link.
    pub fn init(model: &GaussMarkovModel, y0: &Vector, links: usize) -> Result<Self, SimError> {
        if y0.len() != model.output_dim() {
            return Err(SimError::Numeric {
                step: 0,
                what: format!("output has {} entries, model expects {}", y0.len(), model.output_dim()),
            });
        }
        check_vector(y0, 0, "output")?;
        let prior = model.initial_cov().clone();
        let (q, k, form) = measurement_update(&prior, model.c(0), model.v(0), 0)?;
        let m = model.initial_mean().clone();
        let innovation = y0 - model.c(0) * &m;
        let correction = &k * &innovation;
        Ok(EncoderState {
            step: 0,
            estimate: &m + &correction,
            predicted_mean: m,
            posterior_cov: q,
            prior_cov: prior,
            gain: k,
            innovation,
            mismatches: vec![correction; links],
            update_form: form,
        })
    }

    /// Advances to step `k` given the output `y_k` and the acknowledgments
    /// for step `k − 1`, one per fed link.
    pub fn step(
        &mut self,
        model: &GaussMarkovModel,
        k: usize,
        y: &Vector,
        acks: &[Ack],
    ) -> Result<(), SimError> {
        debug_assert_eq!(k, self.step + 1);
        debug_assert_eq!(acks.len(), self.mismatches.len());
        check_vector(y, k, "output")?;
        let a = model.a(k - 1);
        let prior = symmetrize(&(a * &self.posterior_cov * a.transpose() + model.w(k - 1)));
        let (q, gain, form) = measurement_update(&prior, model.c(k), model.v(k), k)?;
        let predicted = a * &self.estimate;
        let innovation = y - model.c(k) * &predicted;
        let correction = &gain * &innovation;

        for (e, ack) in self.mismatches.iter_mut().zip(acks) {
            *e = if ack.delivered_now() {
                correction.clone()
            } else {
                a * &*e + &correction
            };
        }
        self.estimate = &predicted + &correction;
        check_vector(&self.estimate, k, "estimate")?;
        self.predicted_mean = predicted;
        self.prior_cov = prior;
        self.posterior_cov = q;
        self.gain = gain;
        self.innovation = innovation;
        self.update_form = form;
        self.step = k;
        Ok(())
    }

    /// Filter correction `K_k ν_k` of the current step.
    pub fn correction(&self) -> Vector {
        &self.gain * &self.innovation
    }
}

/// Remote estimator at one decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub step: usize,
    /// `x̂_k`.
    pub estimate: Vector,
    /// Steps since the last delivered message. Starts at 0 with the prior.
    pub age: usize,
    /// Whether the message sent at `k − 1` arrived.
    pub last_delivered: bool,
}

impl DecoderState {
    pub fn new(model: &GaussMarkovModel) -> Self {
        DecoderState {
            step: 0,
            estimate: model.initial_mean().clone(),
            age: 0,
            last_delivered: false,
        }
    }

    /// Advances to step `k` with the channel output: the encoder estimate
    /// `x̌_{k−1}` when a packet arrived, `None` on erasure.
    pub fn step(&mut self, model: &GaussMarkovModel, k: usize, delivered: Option<&Vector>) {
        let a = model.a(k - 1);
        match delivered {
            Some(x_check) => {
                self.estimate = a * x_check;
                self.age = 0;
                self.last_delivered = true;
            }
            None => {
                self.estimate = a * &self.estimate;
                self.age += 1;
                self.last_delivered = false;
            }
        }
        self.step = k;
    }
}
