use super::{
    campaign_rng, check_pool_budget, normalize_scores, random_batch, top_n, CampaignConfig,
    CampaignLog, LogEntry, PolicyKind, PoolTracker, Snapshot,
};
use crate::error::Result;
use crate::problems::RealPool;
use crate::select::greedy_select_kernel;
use crate::spectral::{build_kernel_matrix, validate_indices, KernelSpec};
use crate::surrogates::{gp_fit_pool, ucb_from_marginals};

/// Discrete Bayesian optimization where each batch maximizes the qVS of all observed
/// data plus the batch, with normalized UCB values as qualities. The pool kernel is
/// also the GP covariance.
pub fn run_qvs_bayesopt_discrete(
    pool: &RealPool,
    initial: &[usize],
    cfg: &CampaignConfig,
    spec: &KernelSpec,
) -> Result<CampaignLog> {
    cfg.validate()?;
    spec.validate()?;
    run_discrete(PolicyKind::QvsBayesoptDiscrete, pool, initial, cfg, spec)
}

pub(crate) fn run_discrete(
    policy: PolicyKind,
    pool: &RealPool,
    initial: &[usize],
    cfg: &CampaignConfig,
    spec: &KernelSpec,
) -> Result<CampaignLog> {
    validate_indices(initial, pool.len())?;
    check_pool_budget(pool.len(), initial.len(), cfg.budget)?;
    let kernel = match policy {
        PolicyKind::Random => None,
        _ => Some(build_kernel_matrix(spec, pool.points())?),
    };
    let mut rng = campaign_rng(cfg.seed);
    let mut tracker = PoolTracker::new(pool.len());
    let mut log = CampaignLog::new(policy, cfg.order);
    let observe = |log: &mut CampaignLog,
                   tracker: &mut PoolTracker,
                   iteration,
                   index: usize,
                   acq|
     -> Result<()> {
        tracker.mark(index)?;
        log.push(LogEntry {
            iteration,
            index: Some(index),
            point: pool.points()[index].clone(),
            observation: pool.value(index),
            snapshot: Snapshot {
                acquisition: acq,
                region: None,
            },
        });
        Ok(())
    };
    for &i in initial {
        observe(&mut log, &mut tracker, 0, i, None)?;
    }

    let all: Vec<usize> = (0..pool.len()).collect();
    let (mut spent, mut iteration) = (0, 0);
    while spent < cfg.budget {
        iteration += 1;
        let b = cfg.batch_size.min(cfg.budget - spent);
        let batch: Vec<(usize, Option<f64>)> = match &kernel {
            None => random_batch(&mut rng, &tracker, b)
                .into_iter()
                .map(|i| (i, None))
                .collect(),
            Some(kernel) => {
                let observed = tracker.observed().to_vec();
                let values: Vec<f64> = observed.iter().map(|&i| pool.value(i)).collect();
                let gp = gp_fit_pool(kernel, &observed, &values, &cfg.gp)?;
                let (means, vars) = gp.marginals(&all)?;
                let ucb = ucb_from_marginals(&means, &vars, cfg.beta)?;
                let ucb = ucb.as_slice();
                let unlabeled = tracker.unlabeled();
                // both policies see the same [0, 1] qualities, so near-ties are judged alike
                let scores = normalize_scores(ucb);
                let picked = match policy {
                    PolicyKind::QvsBayesoptDiscrete => {
                        greedy_select_kernel(kernel, &scores, cfg.order, b, &observed, &unlabeled)?
                    }
                    PolicyKind::Ucb => top_n(&scores, &unlabeled, b),
                    other => unreachable!("{other} is not a discrete BayesOpt policy"),
                };
                picked.into_iter().map(|i| (i, Some(ucb[i]))).collect()
            }
        };
        for (index, acq) in batch {
            observe(&mut log, &mut tracker, iteration, index, acq)?;
            spent += 1;
        }
    }
    Ok(log)
}
