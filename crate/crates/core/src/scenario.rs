//! Scenario documents (TOML) and the built-in scenarios.
//!
//! Grammar, by example:
//!
//! ```toml
//! name = "demo"
//! kind = "broadcast"            # or "multiaccess"
//! horizon = 1000
//!
//! [[sources]]                   # one for broadcast, two for multiaccess
//! state_dim = 3
//! output_dim = 3
//! a = [[0.4, 0.4, 0.0], [0.4, 0.4, 0.0], [0.0, 0.0, 1.0]]   # row-major
//! c = 1.0                       # scalar s means s·I
//! w = { diag = [0.2, 0.2, 0.01], scale = 1e-6 }
//! v = { per_step = [1e-3, 2e-3] }   # one matrix per step (or a single one)
//! m0 = [0.0, 0.0, 0.0]
//! cov0 = { diag = [1.0, 1.0, 1.0], scale = 1e-3 }
//!
//! [[links]]                     # exactly two
//! name = "station-1"
//! rate = { process = "constant", lambda = 0.3 }
//! # rate = { process = "gilbert_elliott", good = 0.05, bad = 0.6, stay_good = 0.95, stay_bad = 0.95 }
//! # rate = { process = "markov", states = [0.1, 0.5], transition = [[0.9, 0.1], [0.2, 0.8]], initial = 0 }
//!
//! [weights]
//! theta = [1.1e-5]              # one schedule per transmitter
//! omega = [1.0, [1.0, 0.5, …]]  # one per link; a number or horizon+1 values
//!
//! [[policies]]                  # optional defaults for batch/compare
//! spec = "voi"
//! delta = { common = [0.0] }    # optional value-difference schedules
//!
//! [seeds]                       # optional
//! base = 1
//! count = 200                   # or: list = [3, 5, 8]
//!
//! [output]                      # optional
//! dir = "out"
//! plot = true
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ErasureRateProcess;
use crate::error::ConfigError;
use crate::linalg::{Matrix, Vector};
use crate::model::{GaussMarkovModel, LinkSpec, ModelSpec, Scenario, ScenarioKind};
use crate::policy::{DeltaSchedule, PolicySpec};

const BUILTINS: &[(&str, &str)] = &[
    ("spacecraft_broadcast", include_str!("../scenarios/spacecraft_broadcast.toml")),
    ("spacecraft_multiaccess", include_str!("../scenarios/spacecraft_multiaccess.toml")),
    (
        "spacecraft_broadcast_bursty",
        include_str!("../scenarios/spacecraft_broadcast_bursty.toml"),
    ),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindConfig {
    Broadcast,
    Multiaccess,
}

impl From<KindConfig> for ScenarioKind {
    fn from(k: KindConfig) -> Self {
        match k {
            KindConfig::Broadcast => ScenarioKind::Broadcast,
            KindConfig::Multiaccess => ScenarioKind::MultiAccess,
        }
    }
}

impl From<ScenarioKind> for KindConfig {
    fn from(k: ScenarioKind) -> Self {
        match k {
            ScenarioKind::Broadcast => KindConfig::Broadcast,
            ScenarioKind::MultiAccess => KindConfig::Multiaccess,
        }
    }
}

/// A matrix: scalar multiple of the identity, diagonal, or full rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixConfig {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
    Diag {
        diag: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSchedule {
    Constant(MatrixConfig),
    PerStep { per_step: Vec<MatrixConfig> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub state_dim: usize,
    pub output_dim: usize,
    pub a: MatrixSchedule,
    pub c: MatrixSchedule,
    pub w: MatrixSchedule,
    pub v: MatrixSchedule,
    pub m0: Vec<f64>,
    pub cov0: MatrixConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateConfig {
    Constant {
        lambda: f64,
    },
    Markov {
        states: Vec<f64>,
        transition: Vec<Vec<f64>>,
        #[serde(default)]
        initial: usize,
    },
    GilbertElliott {
        good: f64,
        bad: f64,
        stay_good: f64,
        stay_bad: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub name: String,
    pub rate: RateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSchedule {
    Constant(f64),
    PerStep(Vec<f64>),
}

impl WeightSchedule {
    fn values(&self) -> Vec<f64> {
        match self {
            WeightSchedule::Constant(x) => vec![*x],
            WeightSchedule::PerStep(v) => v.clone(),
        }
    }

    fn compact(values: &[f64]) -> Self {
        if values.iter().all(|x| *x == values[0]) {
            WeightSchedule::Constant(values[0])
        } else {
            WeightSchedule::PerStep(values.to_vec())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub theta: Vec<WeightSchedule>,
    pub omega: Vec<WeightSchedule>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub common: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub type_one: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub type_two: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub spec: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<DeltaConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsConfig {
    #[serde(default)]
    pub base: u64,
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub list: Option<Vec<u64>>,
}

fn one() -> usize {
    1
}

impl SeedsConfig {
    pub fn seeds(&self) -> Vec<u64> {
        match &self.list {
            Some(list) => list.clone(),
            None => (0..self.count as u64).map(|i| self.base + i).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default)]
    pub plot: bool,
}

/// The scenario document as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub kind: KindConfig,
    pub horizon: usize,
    pub sources: Vec<SourceConfig>,
    pub links: Vec<LinkConfig>,
    pub weights: WeightsConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub policies: Vec<PolicyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<SeedsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

fn parse_error(err: toml::de::Error) -> ConfigError {
    let msg = err.message().to_string();
    if let Some(rest) = msg.strip_prefix("missing field `") {
        if let Some(key) = rest.split('`').next() {
            return ConfigError::MissingKey { key: key.to_string() };
        }
    }
    ConfigError::Parse(err.to_string().trim().to_string())
}

fn matrix(cfg: &MatrixConfig, rows: usize, cols: usize, key: &str) -> Result<Matrix, ConfigError> {
    let shape = |r: usize, c: usize| ConfigError::dim(key, format!("{rows}x{cols}"), format!("{r}x{c}"));
    match cfg {
        MatrixConfig::Scalar(s) => {
            if rows != cols {
                return Err(ConfigError::dim(key, format!("{rows}x{cols} rows"), "scalar"));
            }
            Ok(Matrix::identity(rows, cols) * *s)
        }
        MatrixConfig::Diag { diag, scale } => {
            if rows != cols || diag.len() != rows {
                return Err(shape(diag.len(), diag.len()));
            }
            let s = scale.unwrap_or(1.0);
            Ok(Matrix::from_diagonal(&Vector::from_iterator(rows, diag.iter().map(|d| d * s))))
        }
        MatrixConfig::Rows(data) => {
            let found_cols = data.first().map(Vec::len).unwrap_or(0);
            if data.len() != rows || data.iter().any(|r| r.len() != cols) {
                return Err(shape(data.len(), found_cols));
            }
            Ok(Matrix::from_fn(rows, cols, |i, j| data[i][j]))
        }
    }
}

fn schedule(
    cfg: &MatrixSchedule,
    rows: usize,
    cols: usize,
    key: &str,
) -> Result<Vec<Matrix>, ConfigError> {
    match cfg {
        MatrixSchedule::Constant(m) => Ok(vec![matrix(m, rows, cols, key)?]),
        MatrixSchedule::PerStep { per_step } => per_step
            .iter()
            .enumerate()
            .map(|(k, m)| matrix(m, rows, cols, &format!("{key}[{k}]")))
            .collect(),
    }
}

fn matrix_config(m: &Matrix) -> MatrixConfig {
    let off_diagonal_zero = (0..m.nrows())
        .all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0));
    if m.is_square() && off_diagonal_zero {
        MatrixConfig::Diag {
            diag: m.diagonal().iter().copied().collect(),
            scale: None,
        }
    } else {
        MatrixConfig::Rows(m.row_iter().map(|r| r.iter().copied().collect()).collect())
    }
}

fn schedule_config(s: &[Matrix]) -> MatrixSchedule {
    if s.len() == 1 {
        MatrixSchedule::Constant(matrix_config(&s[0]))
    } else {
        MatrixSchedule::PerStep {
            per_step: s.iter().map(matrix_config).collect(),
        }
    }
}

impl SourceConfig {
    fn build(&self, horizon: usize, index: usize) -> Result<GaussMarkovModel, ConfigError> {
        let prefix = format!("sources[{index}].");
        let key = |k: &str| format!("{prefix}{k}");
        let (n, m) = (self.state_dim, self.output_dim);
        if self.m0.len() != n {
            return Err(ConfigError::dim(key("m0"), n, self.m0.len()));
        }
        ModelSpec {
            a: schedule(&self.a, n, n, &key("a"))?,
            c: schedule(&self.c, m, n, &key("c"))?,
            w: schedule(&self.w, n, n, &key("w"))?,
            v: schedule(&self.v, m, m, &key("v"))?,
            initial_mean: Vector::from_column_slice(&self.m0),
            initial_cov: matrix(&self.cov0, n, n, &key("cov0"))?,
        }
        .build(horizon, &prefix)
    }

    fn from_model(model: &GaussMarkovModel, name: Option<String>) -> Self {
        let spec = model.to_spec();
        SourceConfig {
            name,
            state_dim: model.state_dim(),
            output_dim: model.output_dim(),
            a: schedule_config(&spec.a),
            c: schedule_config(&spec.c),
            w: schedule_config(&spec.w),
            v: schedule_config(&spec.v),
            m0: spec.initial_mean.iter().copied().collect(),
            cov0: matrix_config(&spec.initial_cov),
        }
    }
}

impl RateConfig {
    fn process(&self) -> ErasureRateProcess {
        match self {
            RateConfig::Constant { lambda } => ErasureRateProcess::Constant(*lambda),
            RateConfig::Markov {
                states,
                transition,
                initial,
            } => ErasureRateProcess::Markov {
                states: states.clone(),
                transition: transition.clone(),
                initial: *initial,
            },
            RateConfig::GilbertElliott {
                good,
                bad,
                stay_good,
                stay_bad,
            } => ErasureRateProcess::gilbert_elliott(*good, *bad, *stay_good, *stay_bad),
        }
    }

    fn from_process(p: &ErasureRateProcess) -> Self {
        match p {
            ErasureRateProcess::Constant(lambda) => RateConfig::Constant { lambda: *lambda },
            ErasureRateProcess::Markov {
                states,
                transition,
                initial,
            } => RateConfig::Markov {
                states: states.clone(),
                transition: transition.clone(),
                initial: *initial,
            },
        }
    }
}

impl PolicyConfig {
    pub fn policy(&self) -> Result<PolicySpec, ConfigError> {
        let spec: PolicySpec = self.spec.parse()?;
        match (spec, &self.delta) {
            (spec, None) => Ok(spec),
            (PolicySpec::Voi(_), Some(d)) => {
                let pair = |v: &Vec<Vec<f64>>, key: &str| -> Result<[Vec<f64>; 2], ConfigError> {
                    match v.len() {
                        0 => Ok([Vec::new(), Vec::new()]),
                        2 => Ok([v[0].clone(), v[1].clone()]),
                        n => Err(ConfigError::dim(format!("policies.delta.{key}"), 2, n)),
                    }
                };
                Ok(PolicySpec::Voi(DeltaSchedule {
                    common: d.common.clone(),
                    type_one: pair(&d.type_one, "type_one")?,
                    type_two: pair(&d.type_two, "type_two")?,
                }))
            }
            (_, Some(_)) => Err(ConfigError::Policy {
                spec: self.spec.clone(),
                reason: "only voi accepts delta schedules".into(),
            }),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(parse_error)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    /// Validates and expands into a [`Scenario`].
    pub fn build(&self) -> Result<Scenario, ConfigError> {
        let kind: ScenarioKind = self.kind.into();
        let sources = self
            .sources
            .iter()
            .enumerate()
            .map(|(i, s)| s.build(self.horizon, i))
            .collect::<Result<Vec<_>, _>>()?;
        let links = self
            .links
            .iter()
            .map(|l| LinkSpec {
                name: l.name.clone(),
                rate: l.rate.process(),
            })
            .collect();
        let theta = self.weights.theta.iter().map(WeightSchedule::values).collect();
        let omega = self.weights.omega.iter().map(WeightSchedule::values).collect();
        let scenario = Scenario::new(self.name.clone(), kind, self.horizon, sources, links, theta, omega)?;
        // Surface bad policy blocks at load time too.
        self.policies()?;
        Ok(scenario)
    }

    pub fn policies(&self) -> Result<Vec<PolicySpec>, ConfigError> {
        self.policies.iter().map(PolicyConfig::policy).collect()
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.as_ref().map(SeedsConfig::seeds).unwrap_or_else(|| vec![0])
    }

    /// Compact document describing `scenario` (no policies, seeds or output).
    pub fn from_scenario(scenario: &Scenario) -> Self {
        ScenarioConfig {
            name: scenario.name.clone(),
            kind: scenario.kind.into(),
            horizon: scenario.horizon,
            sources: scenario
                .sources
                .iter()
                .map(|m| SourceConfig::from_model(m, None))
                .collect(),
            links: scenario
                .links
                .iter()
                .map(|l| LinkConfig {
                    name: l.name.clone(),
                    rate: RateConfig::from_process(&l.rate),
                })
                .collect(),
            weights: WeightsConfig {
                theta: scenario.theta.iter().map(|s| WeightSchedule::compact(s)).collect(),
                omega: scenario.omega.iter().map(|s| WeightSchedule::compact(s)).collect(),
            },
            policies: Vec::new(),
            seeds: None,
            output: None,
        }
    }
}

/// Reads a scenario document from disk.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    ScenarioConfig::from_toml(&text)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    load_config(path)?.build()
}

/// A built-in scenario name, or else a path to a scenario document.
pub fn resolve_config(reference: &str) -> Result<ScenarioConfig, ConfigError> {
    if let Some(text) = builtin_source(reference) {
        return ScenarioConfig::from_toml(text);
    }
    let path = Path::new(reference);
    if path.exists() {
        return load_config(path);
    }
    Err(ConfigError::UnknownScenario {
        name: reference.to_string(),
        builtins: builtin_names().join(", "),
    })
}

pub fn builtin(name: &str) -> Result<Scenario, ConfigError> {
    let text = builtin_source(name).ok_or_else(|| ConfigError::UnknownScenario {
        name: name.to_string(),
        builtins: builtin_names().join(", "),
    })?;
    ScenarioConfig::from_toml(text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "mini"
kind = "broadcast"
horizon = 4

[[sources]]
state_dim = 1
output_dim = 1
a = 0.9
c = 1.0
w = 1.0
v = 1.0
m0 = [0.0]
cov0 = 1.0

[[links]]
name = "l1"
rate = { process = "constant", lambda = 0.2 }

[[links]]
name = "l2"
rate = { process = "constant", lambda = 0.4 }

[weights]
theta = [0.5]
omega = [1.0, [1.0, 2.0, 3.0, 4.0, 5.0]]
"#;

    fn corrupt(from: &str, to: &str) -> ConfigError {
        assert!(MINIMAL.contains(from), "{from}");
        ScenarioConfig::from_toml(&MINIMAL.replacen(from, to, 1))
            .and_then(|c| c.build())
            .unwrap_err()
    }

    #[test]
    fn minimal_loads() {
        let s = ScenarioConfig::from_toml(MINIMAL).unwrap().build().unwrap();
        assert_eq!(s.omega[1], vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(s.theta[0].len(), 5);
        assert_eq!(s.omega_at(1, 5), 0.0);
    }

    #[test]
    fn one_diagnostic_per_corruption() {
        assert_eq!(corrupt("horizon = 4\n", ""), ConfigError::MissingKey { key: "horizon".into() });
        assert_eq!(
            corrupt("lambda = 0.2", "lambda = 1.3"),
            ConfigError::RateOutOfRange { key: "links[0].lambda".into(), value: 1.3 }
        );
        assert_eq!(
            corrupt("theta = [0.5]", "theta = [-0.5]"),
            ConfigError::NegativeWeight { key: "theta[0]".into(), value: -0.5 }
        );
        assert_eq!(
            corrupt("w = 1.0", "w = -1.0"),
            ConfigError::NotPositiveDefinite { key: "sources[0].w".into() }
        );
        assert_eq!(
            corrupt("v = 1.0", "v = 0.0"),
            ConfigError::NotPositiveDefinite { key: "sources[0].v".into() }
        );
        assert!(matches!(
            corrupt("m0 = [0.0]", "m0 = [0.0, 1.0]"),
            ConfigError::Dimension { ref key, .. } if key == "sources[0].m0"
        ));
        assert!(matches!(
            corrupt("[1.0, 2.0, 3.0, 4.0, 5.0]", "[1.0, 2.0]"),
            ConfigError::ScheduleLength { ref key, .. } if key == "omega[1]"
        ));
        assert!(matches!(
            corrupt("cov0 = 1.0", "cov0 = -1.0"),
            ConfigError::NotPositiveSemiDefinite { ref key } if key == "sources[0].cov0"
        ));
        assert!(matches!(corrupt("kind = \"broadcast\"", "kind = \"multiaccess\""), ConfigError::Topology(_)));
    }

    #[test]
    fn builtin_broadcast_values() {
        let s = builtin("spacecraft_broadcast").unwrap();
        assert_eq!(s.kind, ScenarioKind::Broadcast);
        assert_eq!(s.horizon, 1000);
        let src = &s.sources[0];
        let a = Matrix::from_row_slice(3, 3, &[0.4258, 0.4258, 0.0, 0.4258, 0.4258, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(src.a(0), &a);
        assert_eq!(src.a(1000), &a);
        let w = Matrix::from_diagonal(&Vector::from_vec(vec![0.2245e-6, 0.2245e-6, 0.0025e-6]));
        assert!((src.w(0) - w).amax() < 1e-20);
        assert_eq!(src.c(0), &Matrix::identity(3, 3));
        assert!((src.v(0) - Matrix::identity(3, 3) * 1e-3).amax() < 1e-20);
        assert_eq!(s.links[0].rate, ErasureRateProcess::Constant(0.3));
        assert_eq!(s.links[1].rate, ErasureRateProcess::Constant(0.1));
        assert!(s.theta[0].iter().all(|t| *t == 1.1e-5));
        assert!(s.omega.iter().flatten().all(|w| *w == 1.0));
    }

    #[test]
    fn builtin_multiaccess_values() {
        let s = builtin("spacecraft_multiaccess").unwrap();
        assert_eq!(s.kind, ScenarioKind::MultiAccess);
        assert_eq!(s.sources[0], s.sources[1]);
        assert!(s.theta.iter().flatten().all(|t| *t == 0.5e-5));
    }

    #[test]
    fn unknown_builtin_lists_names() {
        let err = resolve_config("no_such_scenario").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("spacecraft_broadcast") && msg.contains("spacecraft_multiaccess"));
    }

    #[test]
    fn every_builtin_roundtrips() {
        for name in builtin_names() {
            let s = builtin(name).unwrap();
            let text = ScenarioConfig::from_scenario(&s).to_toml();
            let back = ScenarioConfig::from_toml(&text).unwrap().build().unwrap();
            assert_eq!(back, s, "{name}");
        }
    }

    #[test]
    fn delta_only_for_voi() {
        let cfg = PolicyConfig {
            spec: "never".into(),
            delta: Some(DeltaConfig::default()),
        };
        assert!(cfg.policy().is_err());
        let cfg = PolicyConfig {
            spec: "voi".into(),
            delta: Some(DeltaConfig {
                common: vec![1e-6],
                ..Default::default()
            }),
        };
        assert!(matches!(cfg.policy().unwrap(), PolicySpec::Voi(d) if d.common_at(7) == 1e-6));
    }
}
