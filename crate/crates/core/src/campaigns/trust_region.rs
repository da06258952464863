use rand::Rng;

use super::{
    campaign_rng, normalize_scores, top_n, CampaignConfig, CampaignLog, LogEntry, PolicyKind,
    Snapshot,
};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::problems::Objective;
use crate::select::greedy_select_kernel;
use crate::spectral::{build_kernel_matrix, euclidean_distance, KernelSpec};
use crate::surrogates::{gp_fit, thompson_sample, FittedGp, RbfCovariance};

/// Side-length schedule for trust regions, in unit-box coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustRegionConfig {
    pub init_length: f64,
    pub min_length: f64,
    pub max_length: f64,
    pub success_tolerance: usize,
    pub failure_tolerance: usize,
    pub candidates_per_dim: usize,
    pub max_candidates: usize,
    /// Relative improvement over the incumbent that counts as a success.
    pub success_margin: f64,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        TrustRegionConfig {
            init_length: 0.8,
            min_length: 0.5f64.powi(7),
            max_length: 1.6,
            success_tolerance: 3,
            failure_tolerance: 5,
            candidates_per_dim: 50,
            max_candidates: 1000,
            success_margin: 1e-3,
        }
    }
}

impl TrustRegionConfig {
    pub fn validate(&self) -> Result<()> {
        let lengths_ok = self.min_length > 0.0
            && self.min_length <= self.init_length
            && self.init_length <= self.max_length
            && self.max_length.is_finite();
        if !lengths_ok {
            return Err(Error::InvalidParameter(
                "trust-region lengths need 0 < min <= init <= max".into(),
            ));
        }
        if self.success_tolerance == 0 || self.failure_tolerance == 0 {
            return Err(Error::InvalidParameter(
                "trust-region tolerances must be positive".into(),
            ));
        }
        if self.candidates_per_dim == 0 || self.max_candidates == 0 {
            return Err(Error::InvalidParameter(
                "candidate counts must be positive".into(),
            ));
        }
        if !(self.success_margin.is_finite() && self.success_margin >= 0.0) {
            return Err(Error::InvalidParameter(
                "success margin must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn candidates(&self, dim: usize) -> usize {
        (self.candidates_per_dim * dim).min(self.max_candidates)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrustRegionUpdate {
    Unchanged,
    Expanded,
    Shrunk,
    /// Side length fell below the minimum; the region must be restarted.
    Collapsed,
}

/// A box of side `length` around `center` in unit coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegion {
    pub center: Vec<f64>,
    pub length: f64,
    pub successes: usize,
    pub failures: usize,
    /// Best value among the region's own observations; `-inf` when it has none.
    pub incumbent: f64,
    members: Vec<usize>,
}

impl TrustRegion {
    pub fn new(center: Vec<f64>, cfg: &TrustRegionConfig) -> Self {
        TrustRegion {
            center,
            length: cfg.init_length,
            successes: 0,
            failures: 0,
            incumbent: f64::NEG_INFINITY,
            members: Vec::new(),
        }
    }

    /// `[center - L/2, center + L/2]` clipped to the unit box.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * self.length;
        let lo = self.center.iter().map(|c| (c - half).max(0.0)).collect();
        let hi = self.center.iter().map(|c| (c + half).min(1.0)).collect();
        (lo, hi)
    }

    /// Applies the outcome of one batch: `best_new` is the best value the region's
    /// queries returned.
    pub fn record(&mut self, best_new: f64, cfg: &TrustRegionConfig) -> TrustRegionUpdate {
        if self.incumbent == f64::NEG_INFINITY {
            self.incumbent = best_new;
            return TrustRegionUpdate::Unchanged;
        }
        if best_new > self.incumbent + cfg.success_margin * self.incumbent.abs() {
            self.successes += 1;
            self.failures = 0;
        } else {
            self.failures += 1;
            self.successes = 0;
        }
        self.incumbent = self.incumbent.max(best_new);
        if self.successes >= cfg.success_tolerance {
            self.length = (2.0 * self.length).min(cfg.max_length);
            self.successes = 0;
            TrustRegionUpdate::Expanded
        } else if self.failures >= cfg.failure_tolerance {
            self.length /= 2.0;
            self.failures = 0;
            if self.length < cfg.min_length {
                TrustRegionUpdate::Collapsed
            } else {
                TrustRegionUpdate::Shrunk
            }
        } else {
            TrustRegionUpdate::Unchanged
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        lo.iter()
            .zip(&hi)
            .map(|(l, h)| l + (h - l) * rng.random::<f64>())
            .collect()
    }
}

/// Trust-region Bayesian optimization choosing each batch by greedy qVS over Thompson
/// samples drawn jointly on the merged candidates of all regions.
pub fn run_qvs_bayesopt_tr(
    objective: &dyn Objective,
    initial: &[Vec<f64>],
    cfg: &CampaignConfig,
    spec: &KernelSpec,
) -> Result<CampaignLog> {
    cfg.validate()?;
    spec.validate()?;
    run_continuous(PolicyKind::QvsBayesoptTr, objective, initial, cfg, spec)
}

struct Observations {
    unit: Vec<Vec<f64>>,
    values: Vec<f64>,
}

fn evaluate(objective: &dyn Objective, x: &[f64]) -> Result<f64> {
    let y = objective.evaluate(x);
    if !y.is_finite() {
        return Err(Error::NonFinite("objective value"));
    }
    Ok(y)
}

pub(crate) fn run_continuous(
    policy: PolicyKind,
    objective: &dyn Objective,
    initial: &[Vec<f64>],
    cfg: &CampaignConfig,
    spec: &KernelSpec,
) -> Result<CampaignLog> {
    let domain = objective.domain();
    if let Some(p) = initial.iter().find(|p| !domain.contains(p)) {
        return Err(Error::InvalidParameter(format!(
            "initial point {p:?} lies outside the domain"
        )));
    }
    if policy == PolicyKind::Robot && cfg.tau.is_none() {
        return Err(Error::InvalidParameter(
            "robot requires a distance threshold tau".into(),
        ));
    }
    let mut rng = campaign_rng(cfg.seed);
    let mut log = CampaignLog::new(policy, cfg.order);

    if policy == PolicyKind::Random {
        for x in initial {
            let y = evaluate(objective, x)?;
            log.push(LogEntry {
                iteration: 0,
                index: None,
                point: x.clone(),
                observation: y,
                snapshot: Snapshot::default(),
            });
        }
        let (mut spent, mut iteration) = (0, 0);
        while spent < cfg.budget {
            iteration += 1;
            for _ in 0..cfg.batch_size.min(cfg.budget - spent) {
                let x = domain.sample(&mut rng);
                let y = evaluate(objective, &x)?;
                log.push(LogEntry {
                    iteration,
                    index: None,
                    point: x,
                    observation: y,
                    snapshot: Snapshot::default(),
                });
                spent += 1;
            }
        }
        return Ok(log);
    }

    let tr = cfg.trust_region;
    let unit_box = BoxDomain::unit(domain.dim())?;
    let m = cfg.regions;
    let mut data = Observations {
        unit: Vec::new(),
        values: Vec::new(),
    };
    let mut regions: Vec<TrustRegion> = Vec::with_capacity(m);
    for (i, x) in initial.iter().enumerate() {
        let y = evaluate(objective, x)?;
        data.unit.push(domain.to_unit(x));
        data.values.push(y);
        log.push(LogEntry {
            iteration: 0,
            index: None,
            point: x.clone(),
            observation: y,
            snapshot: Snapshot {
                acquisition: None,
                region: Some(i % m),
            },
        });
    }
    for r in 0..m {
        let members: Vec<usize> = (r..initial.len()).step_by(m).collect();
        let mut region = TrustRegion::new(Vec::new(), &tr);
        match members
            .iter()
            .copied()
            .max_by(|&a, &b| data.values[a].total_cmp(&data.values[b]).then(b.cmp(&a)))
        {
            Some(best) => {
                region.center = data.unit[best].clone();
                region.incumbent = data.values[best];
            }
            None => region.center = unit_box.sample(&mut rng),
        }
        region.members = members;
        regions.push(region);
    }

    let per_region = tr.candidates(domain.dim());
    let (mut spent, mut iteration) = (0, 0);
    while spent < cfg.budget {
        iteration += 1;
        let b = cfg.batch_size.min(cfg.budget - spent);
        let gp = if data.values.len() >= 2 {
            gp_fit(&data.unit, &data.values, &cfg.gp)?
        } else {
            let prior = RbfCovariance {
                lengthscale: cfg.gp.lengthscale,
            };
            FittedGp::condition(prior, data.unit.clone(), &data.values, &cfg.gp)?
        };

        let feasible = robot_feasibility(policy, &regions, domain, cfg.tau);
        let mut cand_unit: Vec<Vec<f64>> = Vec::with_capacity(m * per_region);
        let mut cand_region: Vec<usize> = Vec::with_capacity(m * per_region);
        for (r, region) in regions.iter().enumerate() {
            for _ in 0..per_region {
                let u = region.sample(&mut rng);
                if feasible
                    .as_ref()
                    .is_none_or(|f| f(r, &domain.from_unit(&u)))
                {
                    cand_unit.push(u);
                    cand_region.push(r);
                }
            }
        }
        if cand_unit.len() < b {
            return Err(Error::BatchTooLarge {
                requested: b,
                available: cand_unit.len(),
            });
        }
        let posterior = gp.posterior(&cand_unit)?;
        let draw = thompson_sample(&posterior, rng.random())?;
        let sample = draw.as_slice();
        let all: Vec<usize> = (0..cand_unit.len()).collect();
        let scores = normalize_scores(sample);
        let chosen = match policy {
            PolicyKind::QvsBayesoptTr => {
                let points: Vec<Vec<f64>> = cand_unit.iter().map(|u| domain.from_unit(u)).collect();
                let kernel = build_kernel_matrix(spec, &points)?;
                greedy_select_kernel(&kernel, &scores, cfg.order, b, &[], &all)?
            }
            PolicyKind::Turbo | PolicyKind::Robot => top_n(&scores, &all, b),
            other => unreachable!("{other} is not a trust-region policy"),
        };

        let mut best_new: Vec<Option<f64>> = vec![None; m];
        for c in chosen {
            let x = domain.from_unit(&cand_unit[c]);
            let y = evaluate(objective, &x)?;
            let r = cand_region[c];
            regions[r].members.push(data.values.len());
            data.unit.push(cand_unit[c].clone());
            data.values.push(y);
            best_new[r] = Some(best_new[r].map_or(y, |v: f64| v.max(y)));
            log.push(LogEntry {
                iteration,
                index: None,
                point: x,
                observation: y,
                snapshot: Snapshot {
                    acquisition: Some(sample[c]),
                    region: Some(r),
                },
            });
            spent += 1;
        }
        for (region, best) in regions.iter_mut().zip(best_new) {
            let Some(best) = best else { continue };
            if region.record(best, &tr) == TrustRegionUpdate::Collapsed {
                *region = TrustRegion::new(unit_box.sample(&mut rng), &tr);
                continue;
            }
            let top = region
                .members
                .iter()
                .copied()
                .max_by(|&a, &b| data.values[a].total_cmp(&data.values[b]).then(b.cmp(&a)))
                .expect("region received a query");
            region.center = data.unit[top].clone();
        }
    }
    Ok(log)
}

type Feasibility<'a> = Box<dyn Fn(usize, &[f64]) -> bool + 'a>;

/// For robot: a candidate of region `r` is kept only if it is at least `tau` (in problem
/// units) from the incumbents of every region ranked above `r`. Ranks follow incumbent
/// values, ties to the lower region index; regions without data impose nothing.
fn robot_feasibility<'a>(
    policy: PolicyKind,
    regions: &[TrustRegion],
    domain: &'a BoxDomain,
    tau: Option<f64>,
) -> Option<Feasibility<'a>> {
    if policy != PolicyKind::Robot {
        return None;
    }
    let tau = tau.expect("checked before the loop");
    let mut order: Vec<usize> = (0..regions.len()).collect();
    order.sort_by(|&a, &b| {
        regions[b]
            .incumbent
            .total_cmp(&regions[a].incumbent)
            .then(a.cmp(&b))
    });
    let mut rank = vec![0; regions.len()];
    for (k, &r) in order.iter().enumerate() {
        rank[r] = k;
    }
    let anchors: Vec<(usize, Vec<f64>)> = regions
        .iter()
        .enumerate()
        .filter(|(_, reg)| reg.incumbent > f64::NEG_INFINITY)
        .map(|(r, reg)| (rank[r], domain.from_unit(&reg.center)))
        .collect();
    Some(Box::new(move |r: usize, x: &[f64]| {
        anchors
            .iter()
            .filter(|(k, _)| *k < rank[r])
            .all(|(_, c)| euclidean_distance(c, x) >= tau)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{draw_initial_points, MultiPeak};
    use crate::vendi::Order;

    fn small_cfg(order: Order, seed: u64) -> CampaignConfig {
        let mut cfg = CampaignConfig::new(12, 4, order, seed);
        cfg.regions = 2;
        cfg.trust_region.candidates_per_dim = 20;
        cfg
    }

    #[test]
    fn expansion_and_shrinking_reset_counters() {
        let tr = TrustRegionConfig::default();
        let mut r = TrustRegion::new(vec![0.5, 0.5], &tr);
        assert_eq!(r.record(1.0, &tr), TrustRegionUpdate::Unchanged);
        assert_eq!(r.record(2.0, &tr), TrustRegionUpdate::Unchanged);
        assert_eq!(r.record(3.0, &tr), TrustRegionUpdate::Unchanged);
        assert_eq!(r.record(4.0, &tr), TrustRegionUpdate::Expanded);
        assert_eq!((r.length, r.successes, r.failures), (1.6, 0, 0));
        for _ in 0..3 {
            r.record(r.incumbent + 1.0, &tr);
        }
        assert_eq!(r.length, 1.6);
        for _ in 0..4 {
            assert_eq!(r.record(0.0, &tr), TrustRegionUpdate::Unchanged);
        }
        assert_eq!(r.record(0.0, &tr), TrustRegionUpdate::Shrunk);
        assert_eq!((r.length, r.failures), (0.8, 0));
    }

    #[test]
    fn tiny_improvements_count_as_failures() {
        let tr = TrustRegionConfig::default();
        let mut r = TrustRegion::new(vec![0.5], &tr);
        r.record(10.0, &tr);
        r.record(10.005, &tr);
        assert_eq!((r.successes, r.failures), (0, 1));
    }

    #[test]
    fn collapse_below_minimum() {
        let tr = TrustRegionConfig::default();
        let mut r = TrustRegion::new(vec![0.5], &tr);
        r.record(1.0, &tr);
        let mut last = TrustRegionUpdate::Unchanged;
        for _ in 0..5 * 8 {
            last = r.record(0.0, &tr);
            if last == TrustRegionUpdate::Collapsed {
                break;
            }
            assert!(r.length >= tr.min_length && r.length <= tr.max_length);
        }
        assert_eq!(last, TrustRegionUpdate::Collapsed);
    }

    #[test]
    fn bounds_are_clipped() {
        let tr = TrustRegionConfig::default();
        let r = TrustRegion::new(vec![0.1, 0.9], &tr);
        let (lo, hi) = r.bounds();
        assert_eq!(lo, vec![0.0, 0.5]);
        assert_eq!(hi, vec![0.5, 1.0]);
    }

    #[test]
    fn campaign_respects_budget_and_domain() {
        let f = MultiPeak::three_equal_peaks();
        let init = draw_initial_points(f.domain(), 5, 1);
        let spec = KernelSpec::gaussian(0.2).unwrap();
        for policy in [
            PolicyKind::QvsBayesoptTr,
            PolicyKind::Turbo,
            PolicyKind::Random,
        ] {
            let log =
                run_continuous(policy, &f, &init, &small_cfg(Order::SHANNON, 3), &spec).unwrap();
            assert_eq!(log.queries().count(), 12);
            assert!(log.entries().iter().all(|e| f.domain().contains(&e.point)));
            let trace = log.incumbent_trace();
            assert!(trace.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn robot_with_zero_tau_matches_turbo() {
        let f = MultiPeak::three_equal_peaks();
        let init = draw_initial_points(f.domain(), 6, 2);
        let spec = KernelSpec::gaussian(0.2).unwrap();
        let mut cfg = small_cfg(Order::COUNT, 9);
        let turbo = run_continuous(PolicyKind::Turbo, &f, &init, &cfg, &spec).unwrap();
        cfg.tau = Some(0.0);
        let robot = run_continuous(PolicyKind::Robot, &f, &init, &cfg, &spec).unwrap();
        assert_eq!(turbo.entries(), robot.entries());
    }

    #[test]
    fn robot_with_huge_tau_only_updates_the_top_region() {
        let f = MultiPeak::three_equal_peaks();
        let init = draw_initial_points(f.domain(), 6, 4);
        let spec = KernelSpec::gaussian(0.2).unwrap();
        let mut cfg = small_cfg(Order::COUNT, 1);
        cfg.regions = 3;
        cfg.tau = Some(10.0 * f.domain().diameter());
        let log = run_continuous(PolicyKind::Robot, &f, &init, &cfg, &spec).unwrap();
        let regions: Vec<usize> = log.queries().map(|e| e.snapshot.region.unwrap()).collect();
        assert!(regions.windows(2).all(|w| w[0] == w[1]), "{regions:?}");
    }

    #[test]
    fn robot_requires_tau() {
        let f = MultiPeak::three_equal_peaks();
        let spec = KernelSpec::gaussian(0.2).unwrap();
        assert!(run_continuous(
            PolicyKind::Robot,
            &f,
            &[],
            &small_cfg(Order::COUNT, 0),
            &spec
        )
        .is_err());
    }

    #[test]
    fn repeated_runs_are_identical() {
        let f = MultiPeak::three_equal_peaks();
        let init = draw_initial_points(f.domain(), 4, 8);
        let spec = KernelSpec::gaussian(0.2).unwrap();
        let cfg = small_cfg(Order::SHANNON, 2);
        let a = run_qvs_bayesopt_tr(&f, &init, &cfg, &spec).unwrap();
        let b = run_qvs_bayesopt_tr(&f, &init, &cfg, &spec).unwrap();
        assert_eq!(a, b);
    }
}
