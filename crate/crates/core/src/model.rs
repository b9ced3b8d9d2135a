//! Gauss–Markov sources and scenario topology.

use crate::channel::ErasureRateProcess;
use crate::error::ConfigError;
use crate::linalg::{
    all_finite, is_positive_definite, is_positive_semidefinite, psd_factor, Matrix, Vector,
};
use crate::rng::{standard_normals, stream_at, StreamId, StreamKind};

/// Partially observed linear source
/// `x_{k+1} = A_k x_k + w_k`, `y_k = C_k x_k + v_k` over steps `0..=horizon`.
///
/// All schedules are stored densely with `horizon + 1` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussMarkovModel {
    state_dim: usize,
    output_dim: usize,
    horizon: usize,
    a: Vec<Matrix>,
    c: Vec<Matrix>,
    w: Vec<Matrix>,
    v: Vec<Matrix>,
    initial_mean: Vector,
    initial_cov: Matrix,
}

/// Unexpanded model description. Each schedule holds either one entry
/// (constant over the horizon) or one entry per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub a: Vec<Matrix>,
    pub c: Vec<Matrix>,
    pub w: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub initial_mean: Vector,
    pub initial_cov: Matrix,
}

impl ModelSpec {
    pub fn constant(a: Matrix, c: Matrix, w: Matrix, v: Matrix, m0: Vector, cov0: Matrix) -> Self {
        ModelSpec {
            a: vec![a],
            c: vec![c],
            w: vec![w],
            v: vec![v],
            initial_mean: m0,
            initial_cov: cov0,
        }
    }

    /// Validates and expands the schedules. Diagnostics name keys relative to
    /// `prefix`, e.g. `sources[0].w`.
    pub fn build(self, horizon: usize, prefix: &str) -> Result<GaussMarkovModel, ConfigError> {
        let key = |k: &str| format!("{prefix}{k}");
        let n = self.initial_mean.len();
        if n == 0 {
            return Err(ConfigError::dim(key("m0"), "at least 1 entry", 0));
        }
        let m = self.c.first().map(|c| c.nrows()).unwrap_or(0);
        if m == 0 {
            return Err(ConfigError::dim(key("c"), "at least 1 row", 0));
        }

        let a = expand(self.a, horizon, &key("a"))?;
        let c = expand(self.c, horizon, &key("c"))?;
        let w = expand(self.w, horizon, &key("w"))?;
        let v = expand(self.v, horizon, &key("v"))?;

        for (k, mat) in a.iter().enumerate() {
            check_shape(mat, n, n, &key("a"), k)?;
        }
        for (k, mat) in c.iter().enumerate() {
            check_shape(mat, m, n, &key("c"), k)?;
        }
        for (k, mat) in w.iter().enumerate() {
            check_shape(mat, n, n, &key("w"), k)?;
            if !is_positive_definite(mat) {
                return Err(ConfigError::NotPositiveDefinite { key: key("w") });
            }
        }
        for (k, mat) in v.iter().enumerate() {
            check_shape(mat, m, m, &key("v"), k)?;
            if !is_positive_definite(mat) {
                return Err(ConfigError::NotPositiveDefinite { key: key("v") });
            }
        }
        check_shape(&self.initial_cov, n, n, &key("cov0"), 0)?;
        if !all_finite(&self.initial_cov) || self.initial_mean.iter().any(|x| !x.is_finite()) {
            return Err(ConfigError::NonFinite { key: key("m0") });
        }
        if !is_positive_semidefinite(&self.initial_cov) {
            return Err(ConfigError::NotPositiveSemiDefinite { key: key("cov0") });
        }

        Ok(GaussMarkovModel {
            state_dim: n,
            output_dim: m,
            horizon,
            a,
            c,
            w,
            v,
            initial_mean: self.initial_mean,
            initial_cov: self.initial_cov,
        })
    }
}

fn expand(schedule: Vec<Matrix>, horizon: usize, key: &str) -> Result<Vec<Matrix>, ConfigError> {
    match schedule.len() {
        1 => Ok(vec![schedule[0].clone(); horizon + 1]),
        len if len == horizon + 1 => Ok(schedule),
        len if len > horizon + 1 => Ok(schedule.into_iter().take(horizon + 1).collect()),
        found => Err(ConfigError::ScheduleLength {
            key: key.to_string(),
            expected: horizon + 1,
            found,
        }),
    }
}

fn check_shape(m: &Matrix, rows: usize, cols: usize, key: &str, step: usize) -> Result<(), ConfigError> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(ConfigError::dim(
            format!("{key}[{step}]"),
            format!("{rows}x{cols}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    if !all_finite(m) {
        return Err(ConfigError::NonFinite { key: key.to_string() });
    }
    Ok(())
}

impl GaussMarkovModel {
    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn a(&self, k: usize) -> &Matrix {
        &self.a[k]
    }

    pub fn c(&self, k: usize) -> &Matrix {
        &self.c[k]
    }

    pub fn w(&self, k: usize) -> &Matrix {
        &self.w[k]
    }

    pub fn v(&self, k: usize) -> &Matrix {
        &self.v[k]
    }

    pub fn initial_mean(&self) -> &Vector {
        &self.initial_mean
    }

    pub fn initial_cov(&self) -> &Matrix {
        &self.initial_cov
    }

    /// Back to the compact form: schedules whose entries are all equal
    /// collapse to a single entry.
    pub fn to_spec(&self) -> ModelSpec {
        fn compact(s: &[Matrix]) -> Vec<Matrix> {
            if s.iter().all(|m| m == &s[0]) {
                vec![s[0].clone()]
            } else {
                s.to_vec()
            }
        }
        ModelSpec {
            a: compact(&self.a),
            c: compact(&self.c),
            w: compact(&self.w),
            v: compact(&self.v),
            initial_mean: self.initial_mean.clone(),
            initial_cov: self.initial_cov.clone(),
        }
    }

    /// Same model over a different horizon. Shortening always works;
    /// lengthening requires constant schedules.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self, ConfigError> {
        self.to_spec().build(horizon, "")
    }
}

/// One sampled realization of a source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTrajectory {
    pub states: Vec<Vector>,
    pub outputs: Vec<Vector>,
}

impl SourceTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Samples states and outputs for steps `0..=horizon`.
///
/// `source` selects the random streams, so two sources in one scenario get
/// independent noise under the same `seed`.
pub fn sample_trajectory(model: &GaussMarkovModel, seed: u64, source: usize) -> SourceTrajectory {
    let n = model.state_dim;
    let m = model.output_dim;
    let horizon = model.horizon;
    let mut z_state = vec![0.0; n];
    let mut z_out = vec![0.0; m];

    let mut rng = stream_at(seed, StreamId::new(StreamKind::InitialState, source), 0);
    standard_normals(&mut rng, &mut z_state);
    let mut x = &model.initial_mean + psd_factor(&model.initial_cov) * Vector::from_column_slice(&z_state);

    let mut states = Vec::with_capacity(horizon + 1);
    let mut outputs = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        let mut rng = stream_at(seed, StreamId::new(StreamKind::MeasurementNoise, source), k);
        standard_normals(&mut rng, &mut z_out);
        let v = psd_factor(&model.v[k]) * Vector::from_column_slice(&z_out);
        outputs.push(&model.c[k] * &x + v);

        let next = if k < horizon {
            let mut rng = stream_at(seed, StreamId::new(StreamKind::ProcessNoise, source), k);
            standard_normals(&mut rng, &mut z_state);
            let w = psd_factor(&model.w[k]) * Vector::from_column_slice(&z_state);
            Some(&model.a[k] * &x + w)
        } else {
            None
        };
        states.push(x);
        match next {
            Some(nx) => x = nx,
            None => break,
        }
    }
    SourceTrajectory { states, outputs }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// One common source, one encoder, two monitors.
    Broadcast,
    /// Two sources sharing one channel to a common monitor.
    MultiAccess,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Broadcast => "broadcast",
            ScenarioKind::MultiAccess => "multiaccess",
        }
    }

    pub fn transmitters(self) -> usize {
        match self {
            ScenarioKind::Broadcast => 1,
            ScenarioKind::MultiAccess => 2,
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub name: String,
    pub rate: ErasureRateProcess,
}

/// A validated, fully expanded scenario.
///
/// Links are indexed `0, 1`. In a broadcast scenario both links carry the
/// single source and link `i` feeds monitor `i`. In a multi-access scenario
/// link `j` carries source `j` and feeds decoder `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub horizon: usize,
    pub sources: Vec<GaussMarkovModel>,
    pub links: Vec<LinkSpec>,
    /// Transmission cost per transmitter, `horizon + 1` entries each.
    pub theta: Vec<Vec<f64>>,
    /// Error weight per link (monitor or source), `horizon + 1` entries each.
    pub omega: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        kind: ScenarioKind,
        horizon: usize,
        sources: Vec<GaussMarkovModel>,
        links: Vec<LinkSpec>,
        theta: Vec<Vec<f64>>,
        omega: Vec<Vec<f64>>,
    ) -> Result<Self, ConfigError> {
        let expected_sources = kind.transmitters();
        if sources.len() != expected_sources {
            return Err(ConfigError::Topology(format!(
                "{kind} scenario needs {expected_sources} source(s), found {}",
                sources.len()
            )));
        }
        if links.len() != 2 {
            return Err(ConfigError::Topology(format!(
                "{kind} scenario needs 2 links, found {}",
                links.len()
            )));
        }
        if theta.len() != expected_sources {
            return Err(ConfigError::Topology(format!(
                "{kind} scenario needs {expected_sources} theta schedule(s), found {}",
                theta.len()
            )));
        }
        if omega.len() != 2 {
            return Err(ConfigError::Topology(format!(
                "{kind} scenario needs 2 omega schedules, found {}",
                omega.len()
            )));
        }
        for (i, s) in sources.iter().enumerate() {
            if s.horizon() != horizon {
                return Err(ConfigError::dim(format!("sources[{i}]"), horizon, s.horizon()));
            }
        }
        let theta = expand_weights(theta, horizon, "theta")?;
        let omega = expand_weights(omega, horizon, "omega")?;
        for (l, link) in links.iter().enumerate() {
            link.rate.validate(&format!("links[{l}]"))?;
        }
        Ok(Scenario {
            name: name.into(),
            kind,
            horizon,
            sources,
            links,
            theta,
            omega,
        })
    }

    pub fn transmitters(&self) -> usize {
        self.kind.transmitters()
    }

    /// Source (and transmitter) index feeding `link`.
    pub fn source_of_link(&self, link: usize) -> usize {
        match self.kind {
            ScenarioKind::Broadcast => 0,
            ScenarioKind::MultiAccess => link,
        }
    }

    pub fn links_of_source(&self, source: usize) -> Vec<usize> {
        (0..self.links.len())
            .filter(|&l| self.source_of_link(l) == source)
            .collect()
    }

    pub fn theta_at(&self, transmitter: usize, k: usize) -> f64 {
        self.theta[transmitter].get(k).copied().unwrap_or(0.0)
    }

    /// Error weight of `link` at step `k`; zero beyond the horizon.
    pub fn omega_at(&self, link: usize, k: usize) -> f64 {
        self.omega[link].get(k).copied().unwrap_or(0.0)
    }

    /// Same scenario with a different horizon (constant schedules only when
    /// lengthening).
    pub fn with_horizon(&self, horizon: usize) -> Result<Self, ConfigError> {
        let sources = self
            .sources
            .iter()
            .map(|s| s.with_horizon(horizon))
            .collect::<Result<Vec<_>, _>>()?;
        let squash = |s: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            s.iter()
                .map(|w| {
                    if w.iter().all(|x| *x == w[0]) {
                        vec![w[0]]
                    } else {
                        w.clone()
                    }
                })
                .collect()
        };
        Scenario::new(
            self.name.clone(),
            self.kind,
            horizon,
            sources,
            self.links.clone(),
            squash(&self.theta),
            squash(&self.omega),
        )
    }
}

fn expand_weights(
    schedules: Vec<Vec<f64>>,
    horizon: usize,
    key: &str,
) -> Result<Vec<Vec<f64>>, ConfigError> {
    schedules
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let key = format!("{key}[{i}]");
            let s = match s.len() {
                1 => vec![s[0]; horizon + 1],
                len if len > horizon => s.into_iter().take(horizon + 1).collect(),
                found => {
                    return Err(ConfigError::ScheduleLength {
                        key,
                        expected: horizon + 1,
                        found,
                    })
                }
            };
            if let Some(&bad) = s.iter().find(|x| !x.is_finite() || **x < 0.0) {
                return Err(ConfigError::NegativeWeight { key, value: bad });
            }
            Ok(s)
        })
        .collect()
}
