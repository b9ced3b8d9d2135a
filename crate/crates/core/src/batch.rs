//! Monte-Carlo batches with common random numbers.
//!
//! Every policy in a batch is run on the same seed list, so policy `i` and
//! the reference policy see identical source noise on every seed and the
//! per-seed differences can be averaged as paired samples.

use rayon::prelude::*;

use crate::error::SimError;
use crate::model::Scenario;
use crate::policy::PolicySpec;
use crate::sim::{run_once, RunMetrics};

/// Totals of one run, enough to rebuild every batch statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTotals {
    pub seed: u64,
    pub phi: f64,
    pub total_mse: Vec<f64>,
    pub transmissions: usize,
    pub losses: Vec<usize>,
}

impl From<&RunMetrics> for RunTotals {
    fn from(m: &RunMetrics) -> Self {
        RunTotals {
            seed: m.seed,
            phi: m.phi,
            total_mse: m.total_mse.clone(),
            transmissions: m.total_transmissions(),
            losses: m.losses.clone(),
        }
    }
}

/// Sample mean with its standard error (`None` for a single sample).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std_err: Option<f64>,
}

impl Stat {
    pub fn of(samples: impl IntoIterator<Item = f64>) -> Self {
        let xs: Vec<f64> = samples.into_iter().collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std_err = (xs.len() > 1).then(|| {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        Stat { mean, std_err }
    }

    /// `mean / std_err`; `None` when undefined. A zero standard error with a
    /// zero mean gives `Some(0)`.
    pub fn t_statistic(&self) -> Option<f64> {
        let se = self.std_err?;
        if se > 0.0 {
            Some(self.mean / se)
        } else if self.mean == 0.0 {
            Some(0.0)
        } else {
            Some(self.mean.signum() * f64::INFINITY)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySummary {
    pub policy: String,
    pub phi: Stat,
    pub total_mse: Vec<Stat>,
    pub transmissions: Stat,
    pub losses: Vec<Stat>,
}

/// Per-seed differences `policy − reference`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDiff {
    pub policy: String,
    pub reference: String,
    pub phi: Stat,
    pub total_mse: Vec<Stat>,
    pub transmissions: Stat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub policies: Vec<PolicySummary>,
    /// Every policy after the first against the first.
    pub paired: Vec<PairedDiff>,
    /// `runs[p][s]`: policy `p` on seed `seeds[s]`.
    pub runs: Vec<Vec<RunTotals>>,
}

fn summarize(policy: &PolicySpec, runs: &[RunTotals]) -> PolicySummary {
    let links = runs[0].total_mse.len();
    PolicySummary {
        policy: policy.to_string(),
        phi: Stat::of(runs.iter().map(|r| r.phi)),
        total_mse: (0..links).map(|l| Stat::of(runs.iter().map(|r| r.total_mse[l]))).collect(),
        transmissions: Stat::of(runs.iter().map(|r| r.transmissions as f64)),
        losses: (0..links).map(|l| Stat::of(runs.iter().map(|r| r.losses[l] as f64))).collect(),
    }
}

fn paired(policy: &PolicySpec, reference: &PolicySpec, a: &[RunTotals], b: &[RunTotals]) -> PairedDiff {
    let links = a[0].total_mse.len();
    PairedDiff {
        policy: policy.to_string(),
        reference: reference.to_string(),
        phi: Stat::of(a.iter().zip(b).map(|(x, y)| x.phi - y.phi)),
        total_mse: (0..links)
            .map(|l| Stat::of(a.iter().zip(b).map(|(x, y)| x.total_mse[l] - y.total_mse[l])))
            .collect(),
        transmissions: Stat::of(
            a.iter()
                .zip(b)
                .map(|(x, y)| x.transmissions as f64 - y.transmissions as f64),
        ),
    }
}

/// Runs every `(policy, seed)` pair on the current rayon pool.
pub fn run_batch(
    scenario: &Scenario,
    policies: &[PolicySpec],
    seeds: &[u64],
) -> Result<BatchSummary, SimError> {
    assert!(!policies.is_empty() && !seeds.is_empty(), "batch needs a policy and a seed");
    let jobs: Vec<(usize, u64)> = (0..policies.len())
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let totals: Vec<RunTotals> = jobs
        .par_iter()
        .map(|&(p, seed)| run_once(scenario, &policies[p], seed).map(|m| RunTotals::from(&m)))
        .collect::<Result<_, _>>()?;
    let runs: Vec<Vec<RunTotals>> = totals.chunks(seeds.len()).map(<[RunTotals]>::to_vec).collect();

    let summaries = policies.iter().zip(&runs).map(|(p, r)| summarize(p, r)).collect();
    let pairs = (1..policies.len())
        .map(|p| paired(&policies[p], &policies[0], &runs[p], &runs[0]))
        .collect();
    Ok(BatchSummary {
        scenario: scenario.name.clone(),
        seeds: seeds.to_vec(),
        policies: summaries,
        paired: pairs,
        runs,
    })
}

/// [`run_batch`] on a dedicated pool of `threads` workers (all cores when
/// `None`). Results do not depend on the worker count.
pub fn run_batch_with_threads(
    scenario: &Scenario,
    policies: &[PolicySpec],
    seeds: &[u64],
    threads: Option<usize>,
) -> Result<BatchSummary, SimError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    match builder.build() {
        Ok(pool) => pool.install(|| run_batch(scenario, policies, seeds)),
        Err(_) => run_batch(scenario, policies, seeds),
    }
}
