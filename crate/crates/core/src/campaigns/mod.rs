//! Sequential experimental-design loops over the three oracle modes: binary pools
//! (active search), continuous boxes (trust-region Bayesian optimization) and
//! real-valued pools (discrete Bayesian optimization), plus their baselines.

mod active_search;
mod discrete;
mod trust_region;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use active_search::{onestep_as_choice, onestep_choice_kernel, run_qvs_as};
pub use discrete::run_qvs_bayesopt_discrete;
pub use trust_region::{run_qvs_bayesopt_tr, TrustRegion, TrustRegionConfig, TrustRegionUpdate};

use crate::error::{Error, Result};
use crate::problems::{BinaryPool, Objective, RealPool};
use crate::select::argmax_lowest;
use crate::spectral::KernelSpec;
use crate::surrogates::{ClassifierConfig, GpConfig};
use crate::vendi::Order;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    QvsAs,
    OnestepAs,
    Random,
    DiversityBlindAs,
    QvsBayesoptTr,
    Turbo,
    Robot,
    QvsBayesoptDiscrete,
    Ucb,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 9] = [
        PolicyKind::QvsAs,
        PolicyKind::OnestepAs,
        PolicyKind::Random,
        PolicyKind::DiversityBlindAs,
        PolicyKind::QvsBayesoptTr,
        PolicyKind::Turbo,
        PolicyKind::Robot,
        PolicyKind::QvsBayesoptDiscrete,
        PolicyKind::Ucb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::QvsAs => "qvs-as",
            PolicyKind::OnestepAs => "onestep-as",
            PolicyKind::Random => "random",
            PolicyKind::DiversityBlindAs => "diversity-blind-as",
            PolicyKind::QvsBayesoptTr => "qvs-bayesopt-tr",
            PolicyKind::Turbo => "turbo",
            PolicyKind::Robot => "robot",
            PolicyKind::QvsBayesoptDiscrete => "qvs-bayesopt-discrete",
            PolicyKind::Ucb => "ucb",
        }
    }

    /// Whether the policy's behaviour depends on the configured order.
    pub fn uses_order(self) -> bool {
        matches!(
            self,
            PolicyKind::QvsAs
                | PolicyKind::OnestepAs
                | PolicyKind::QvsBayesoptTr
                | PolicyKind::QvsBayesoptDiscrete
        )
    }

    pub fn is_baseline(self) -> bool {
        matches!(
            self,
            PolicyKind::Random
                | PolicyKind::DiversityBlindAs
                | PolicyKind::Turbo
                | PolicyKind::Ucb
                | PolicyKind::Robot
        )
    }

    fn accepts(self, problem: &Problem<'_>) -> bool {
        match self {
            PolicyKind::Random => true,
            PolicyKind::QvsAs | PolicyKind::OnestepAs | PolicyKind::DiversityBlindAs => {
                matches!(problem, Problem::Binary(_))
            }
            PolicyKind::QvsBayesoptTr | PolicyKind::Turbo | PolicyKind::Robot => {
                matches!(problem, Problem::Continuous(_))
            }
            PolicyKind::QvsBayesoptDiscrete | PolicyKind::Ucb => {
                matches!(problem, Problem::Real(_))
            }
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown policy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    /// Oracle queries after the initial data.
    pub budget: usize,
    pub batch_size: usize,
    pub order: Order,
    pub seed: u64,
    /// Number of trust regions (and reported solutions) for continuous problems.
    pub regions: usize,
    /// Distance threshold for `robot`, in problem units.
    pub tau: Option<f64>,
    pub beta: f64,
    pub classifier: ClassifierConfig,
    pub gp: GpConfig,
    pub trust_region: TrustRegionConfig,
}

impl CampaignConfig {
    pub fn new(budget: usize, batch_size: usize, order: Order, seed: u64) -> Self {
        CampaignConfig {
            budget,
            batch_size,
            order,
            seed,
            regions: 1,
            tau: None,
            beta: 2.0,
            classifier: ClassifierConfig::default(),
            gp: GpConfig::default(),
            trust_region: TrustRegionConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "budget and batch size must be positive".into(),
            ));
        }
        if self.batch_size > self.budget {
            return Err(Error::InvalidParameter(format!(
                "batch size {} exceeds budget {}",
                self.batch_size, self.budget
            )));
        }
        if self.regions == 0 {
            return Err(Error::InvalidParameter(
                "at least one trust region is required".into(),
            ));
        }
        if let Some(t) = self.tau {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "tau must be nonnegative, got {t}"
                )));
            }
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be nonnegative, got {}",
                self.beta
            )));
        }
        self.classifier.validate()?;
        self.gp.validate()?;
        self.trust_region.validate()
    }
}

/// Policy state recorded next to each query.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Snapshot {
    /// Quality score the policy assigned to the item when it was selected.
    pub acquisition: Option<f64>,
    pub region: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    /// 0 for initial data, then 1, 2, ... per batch.
    pub iteration: usize,
    /// Pool index, `None` for continuous problems.
    pub index: Option<usize>,
    pub point: Vec<f64>,
    pub observation: f64,
    pub snapshot: Snapshot,
}

/// Append-only record of everything a campaign observed.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignLog {
    policy: PolicyKind,
    order: Order,
    entries: Vec<LogEntry>,
}

impl CampaignLog {
    pub fn new(policy: PolicyKind, order: Order) -> Self {
        CampaignLog {
            policy,
            order,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, entry: LogEntry) {
        self.entries.push(entry);
    }

    pub fn policy(&self) -> PolicyKind {
        self.policy
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn initial(&self) -> impl Iterator<Item = &LogEntry> {
        self.entries.iter().filter(|e| e.iteration == 0)
    }

    /// Entries spent from the budget (everything after the initial data).
    pub fn queries(&self) -> impl Iterator<Item = &LogEntry> {
        self.entries.iter().filter(|e| e.iteration > 0)
    }

    /// Points whose observation is a positive label.
    pub fn positives(&self) -> Vec<&[f64]> {
        self.entries
            .iter()
            .filter(|e| e.observation == 1.0)
            .map(|e| e.point.as_slice())
            .collect()
    }

    /// Running maximum of the observations, one value per entry.
    pub fn incumbent_trace(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.entries
            .iter()
            .map(|e| {
                best = best.max(e.observation);
                best
            })
            .collect()
    }
}

/// The oracle a campaign queries.
#[derive(Clone, Copy)]
pub enum Problem<'a> {
    Binary(&'a BinaryPool),
    Real(&'a RealPool),
    Continuous(&'a dyn Objective),
}

/// Data observed before the first policy decision.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Indices(Vec<usize>),
    Points(Vec<Vec<f64>>),
}

/// Runs `policy` on `problem` from `initial` until `cfg.budget` queries are spent.
pub fn run_campaign(
    policy: PolicyKind,
    problem: Problem<'_>,
    initial: &InitialData,
    cfg: &CampaignConfig,
    spec: &KernelSpec,
) -> Result<CampaignLog> {
    cfg.validate()?;
    spec.validate()?;
    if !policy.accepts(&problem) {
        return Err(Error::InvalidParameter(format!(
            "policy {policy} does not apply to this problem type"
        )));
    }
    match (problem, initial) {
        (Problem::Binary(pool), InitialData::Indices(init)) => {
            active_search::run_active_search(policy, pool, init, cfg, spec)
        }
        (Problem::Real(pool), InitialData::Indices(init)) => {
            discrete::run_discrete(policy, pool, init, cfg, spec)
        }
        (Problem::Continuous(f), InitialData::Points(init)) => {
            trust_region::run_continuous(policy, f, init, cfg, spec)
        }
        _ => Err(Error::InvalidParameter(
            "initial data does not match the problem type".into(),
        )),
    }
}

/// [`run_campaign`] restricted to the baseline policies.
pub fn run_baseline(
    policy: PolicyKind,
    problem: Problem<'_>,
    initial: &InitialData,
    cfg: &CampaignConfig,
    spec: &KernelSpec,
) -> Result<CampaignLog> {
    if !policy.is_baseline() {
        return Err(Error::InvalidParameter(format!(
            "{policy} is not a baseline policy"
        )));
    }
    run_campaign(policy, problem, initial, cfg, spec)
}

/// Affine map of `values` onto `[0, 1]`; a constant vector maps to all 0.5.
pub fn normalize_scores(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    if !range.is_finite() || range <= 0.0 {
        return vec![0.5; values.len()];
    }
    values
        .iter()
        .map(|v| ((v - lo) / range).clamp(0.0, 1.0))
        .collect()
}

/// The `n` candidates with the largest `values[c]`, picked one at a time with the same
/// tie rule as greedy selection (near-equal values go to the lower index).
pub(crate) fn top_n(values: &[f64], candidates: &[usize], n: usize) -> Vec<usize> {
    let mut remaining = candidates.to_vec();
    remaining.sort_unstable();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let Some((pos, _)) =
            argmax_lowest(remaining.iter().enumerate().map(|(p, &c)| (p, values[c])))
        else {
            break;
        };
        out.push(remaining.remove(pos));
    }
    out
}

/// Tracks which pool items have been queried.
pub(crate) struct PoolTracker {
    queried: Vec<bool>,
    observed: Vec<usize>,
}

impl PoolTracker {
    pub(crate) fn new(len: usize) -> Self {
        PoolTracker {
            queried: vec![false; len],
            observed: Vec::new(),
        }
    }

    pub(crate) fn mark(&mut self, index: usize) -> Result<()> {
        let len = self.queried.len();
        let slot = self
            .queried
            .get_mut(index)
            .ok_or(Error::IndexOutOfRange { index, len })?;
        if *slot {
            return Err(Error::RepeatedQuery(index));
        }
        *slot = true;
        self.observed.push(index);
        Ok(())
    }

    pub(crate) fn is_queried(&self, index: usize) -> bool {
        self.queried[index]
    }

    pub(crate) fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub(crate) fn unlabeled(&self) -> Vec<usize> {
        (0..self.queried.len())
            .filter(|&i| !self.queried[i])
            .collect()
    }
}

pub(crate) fn check_pool_budget(pool_len: usize, initial: usize, budget: usize) -> Result<()> {
    if initial + budget > pool_len {
        return Err(Error::PoolExhausted(format!(
            "{initial} initial items plus budget {budget} exceed the pool of {pool_len}"
        )));
    }
    Ok(())
}

/// Uniform draws without replacement from the unlabeled items.
pub(crate) fn random_batch(rng: &mut ChaCha8Rng, tracker: &PoolTracker, n: usize) -> Vec<usize> {
    let unlabeled = tracker.unlabeled();
    rand::seq::index::sample(rng, unlabeled.len(), n)
        .into_iter()
        .map(|k| unlabeled[k])
        .collect()
}

pub(crate) fn campaign_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_names_round_trip() {
        for p in PolicyKind::ALL {
            assert_eq!(p.name().parse::<PolicyKind>().unwrap(), p);
        }
        assert!("tuRBO".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_scores(&[2.0, 4.0, 3.0]), vec![0.0, 1.0, 0.5]);
        assert_eq!(normalize_scores(&[-7.0; 3]), vec![0.5; 3]);
        assert!(normalize_scores(&[]).is_empty());
    }

    #[test]
    fn top_n_breaks_ties_low() {
        assert_eq!(top_n(&[0.3, 0.9, 0.9, 0.1], &[3, 2, 1, 0], 2), vec![1, 2]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = CampaignConfig::new(10, 3, Order::SHANNON, 0);
        assert!(cfg.validate().is_ok());
        cfg.batch_size = 11;
        assert!(cfg.validate().is_err());
        cfg.batch_size = 2;
        cfg.tau = Some(-1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tracker_rejects_repeats() {
        let mut t = PoolTracker::new(3);
        t.mark(1).unwrap();
        assert_eq!(t.mark(1), Err(Error::RepeatedQuery(1)));
        assert_eq!(t.unlabeled(), vec![0, 2]);
        assert!(t.mark(5).is_err());
    }
}
