use super::{
    campaign_rng, check_pool_budget, random_batch, top_n, CampaignConfig, CampaignLog, LogEntry,
    PolicyKind, PoolTracker, Snapshot,
};
use crate::error::{Error, Result};
use crate::problems::BinaryPool;
use crate::select::{argmax_lowest, greedy_select_kernel, SetExtension};
use crate::spectral::{build_kernel_matrix, validate_indices, KernelMatrix, KernelSpec};
use crate::surrogates::KnnClassifier;
use crate::vendi::{vendi_score_of_subset, Order};

/// Batch active search with the quality-weighted Vendi criterion.
pub fn run_qvs_as(
    pool: &BinaryPool,
    initial: &[usize],
    cfg: &CampaignConfig,
    spec: &KernelSpec,
) -> Result<CampaignLog> {
    cfg.validate()?;
    spec.validate()?;
    run_active_search(PolicyKind::QvsAs, pool, initial, cfg, spec)
}

/// Sequential one-step rule on a precomputed kernel: the candidate maximizing
/// `p(x) * (VS(D+ ∪ {x}) - VS(D+))`, ties to the earliest candidate.
/// Returns the candidate and its expected gain.
pub fn onestep_choice_kernel(
    kernel: &KernelMatrix,
    positives: &[usize],
    candidates: &[usize],
    probs: &[f64],
    order: Order,
) -> Result<(usize, f64)> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate set"));
    }
    if probs.len() != kernel.len() {
        return Err(Error::DimensionMismatch {
            expected: kernel.len(),
            found: probs.len(),
        });
    }
    validate_indices(positives, kernel.len())?;
    validate_indices(candidates, kernel.len())?;
    let base = vendi_score_of_subset(kernel, positives, order)?;
    let mut ext = SetExtension::new(kernel, positives, None)?;
    let (pos, gain) = argmax_lowest(
        candidates
            .iter()
            .enumerate()
            .map(|(k, &c)| (k, probs[c] * (ext.vendi_with(c, order) - base))),
    )
    .expect("nonempty candidates");
    Ok((candidates[pos], gain))
}

/// One-step choice for a pool where `observed` items have had their labels revealed.
pub fn onestep_as_choice(
    pool: &BinaryPool,
    observed: &[usize],
    cfg: &CampaignConfig,
    spec: &KernelSpec,
) -> Result<usize> {
    cfg.validate()?;
    validate_indices(observed, pool.len())?;
    let kernel = build_kernel_matrix(spec, pool.points())?;
    let mut tracker = PoolTracker::new(pool.len());
    for &i in observed {
        tracker.mark(i)?;
    }
    let scores = quality_scores(pool, &tracker, cfg)?;
    let positives: Vec<usize> = observed
        .iter()
        .copied()
        .filter(|&i| pool.label(i))
        .collect();
    onestep_choice_kernel(
        &kernel,
        &positives,
        &tracker.unlabeled(),
        &scores,
        cfg.order,
    )
    .map(|(i, _)| i)
}

/// Per-item qualities: 1 for observed positives, the classifier probability for
/// unlabeled items (0.5 before any data), 0 for observed negatives.
fn quality_scores(
    pool: &BinaryPool,
    tracker: &PoolTracker,
    cfg: &CampaignConfig,
) -> Result<Vec<f64>> {
    let observed = tracker.observed();
    let model = if observed.is_empty() {
        None
    } else {
        let points = observed.iter().map(|&i| pool.points()[i].clone()).collect();
        let labels = observed.iter().map(|&i| pool.label(i)).collect();
        Some(KnnClassifier::fit(points, labels, cfg.classifier)?)
    };
    Ok((0..pool.len())
        .map(|i| {
            if tracker.is_queried(i) {
                if pool.label(i) {
                    1.0
                } else {
                    0.0
                }
            } else {
                model.as_ref().map_or(0.5, |m| m.prob(&pool.points()[i]))
            }
        })
        .collect())
}

pub(crate) fn run_active_search(
    policy: PolicyKind,
    pool: &BinaryPool,
    initial: &[usize],
    cfg: &CampaignConfig,
    spec: &KernelSpec,
) -> Result<CampaignLog> {
    validate_indices(initial, pool.len())?;
    check_pool_budget(pool.len(), initial.len(), cfg.budget)?;
    if policy == PolicyKind::OnestepAs && cfg.batch_size != 1 {
        return Err(Error::InvalidParameter(
            "the one-step policy is sequential; batch size must be 1".into(),
        ));
    }
    let kernel = match policy {
        PolicyKind::QvsAs | PolicyKind::OnestepAs => {
            Some(build_kernel_matrix(spec, pool.points())?)
        }
        _ => None,
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
            observation: if pool.label(index) { 1.0 } else { 0.0 },
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

    let mut spent = 0;
    let mut iteration = 0;
    while spent < cfg.budget {
        iteration += 1;
        let b = cfg.batch_size.min(cfg.budget - spent);
        let batch: Vec<(usize, Option<f64>)> = if policy == PolicyKind::Random {
            random_batch(&mut rng, &tracker, b)
                .into_iter()
                .map(|i| (i, None))
                .collect()
        } else {
            let scores = quality_scores(pool, &tracker, cfg)?;
            let unlabeled = tracker.unlabeled();
            let positives: Vec<usize> = tracker
                .observed()
                .iter()
                .copied()
                .filter(|&i| pool.label(i))
                .collect();
            let picked = match policy {
                PolicyKind::QvsAs => greedy_select_kernel(
                    kernel.as_ref().expect("kernel built"),
                    &scores,
                    cfg.order,
                    b,
                    &positives,
                    &unlabeled,
                )?,
                PolicyKind::OnestepAs => {
                    let k = kernel.as_ref().expect("kernel built");
                    vec![onestep_choice_kernel(k, &positives, &unlabeled, &scores, cfg.order)?.0]
                }
                PolicyKind::DiversityBlindAs => top_n(&scores, &unlabeled, b),
                other => unreachable!("{other} is not an active-search policy"),
            };
            picked.into_iter().map(|i| (i, Some(scores[i]))).collect()
        };
        for (index, acq) in batch {
            observe(&mut log, &mut tracker, iteration, index, acq)?;
            spent += 1;
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{clustered_binary_pool, ClusterPoolParams};

    fn line_pool(n: usize, positive: &[usize]) -> BinaryPool {
        let points = (0..n).map(|i| vec![i as f64]).collect();
        let labels = (0..n).map(|i| positive.contains(&i)).collect();
        BinaryPool::new(points, labels).unwrap()
    }

    #[test]
    fn onestep_identical_points_picks_higher_probability() {
        let k = KernelMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let (i, gain) =
            onestep_choice_kernel(&k, &[], &[0, 1], &[0.6, 0.3], Order::SHANNON).unwrap();
        assert_eq!(i, 0);
        assert!((gain - 0.6).abs() < 1e-15);
    }

    #[test]
    fn onestep_prefers_novel_candidate_over_duplicate() {
        // item 0 is a known positive, item 1 duplicates it, item 2 is orthogonal
        let k = KernelMatrix::from_rows(&[
            vec![1.0, 1.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let probs = [1.0, 0.5, 0.5];
        let (i, gain) = onestep_choice_kernel(&k, &[0], &[1, 2], &probs, Order::SHANNON).unwrap();
        assert_eq!(i, 2);
        assert!((gain - 0.5).abs() < 1e-12);
    }

    #[test]
    fn onestep_zero_probabilities_pick_lowest() {
        let k = KernelMatrix::identity(4);
        let (i, gain) =
            onestep_choice_kernel(&k, &[0], &[1, 2, 3], &[1.0, 0.0, 0.0, 0.0], Order::SHANNON)
                .unwrap();
        assert_eq!((i, gain), (1, 0.0));
        assert!(onestep_choice_kernel(&k, &[0], &[], &[0.0; 4], Order::SHANNON).is_err());
    }

    #[test]
    fn budget_is_spent_exactly_without_repeats() {
        let pool = line_pool(30, &[3, 4, 20]);
        let spec = KernelSpec::gaussian(2.0).unwrap();
        let mut cfg = CampaignConfig::new(7, 3, Order::SHANNON, 5);
        cfg.classifier.k_neighbors = 3;
        for policy in [
            PolicyKind::QvsAs,
            PolicyKind::DiversityBlindAs,
            PolicyKind::Random,
        ] {
            let log = run_active_search(policy, &pool, &[0, 10], &cfg, &spec).unwrap();
            assert_eq!(log.queries().count(), 7);
            assert_eq!(log.len(), 9);
            let mut seen: Vec<usize> = log.entries().iter().map(|e| e.index.unwrap()).collect();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), 9);
            // batches of 3, 3, then a truncated 1
            let last: Vec<usize> = log.queries().map(|e| e.iteration).collect();
            assert_eq!(last, vec![1, 1, 1, 2, 2, 2, 3]);
        }
    }

    #[test]
    fn pool_budget_violation() {
        let pool = line_pool(5, &[1]);
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let cfg = CampaignConfig::new(4, 1, Order::SHANNON, 0);
        assert!(matches!(
            run_qvs_as(&pool, &[0, 1], &cfg, &spec),
            Err(Error::PoolExhausted(_))
        ));
    }

    #[test]
    fn onestep_requires_sequential_batches() {
        let pool = line_pool(6, &[1]);
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let cfg = CampaignConfig::new(2, 2, Order::SHANNON, 0);
        assert!(run_active_search(PolicyKind::OnestepAs, &pool, &[0], &cfg, &spec).is_err());
        let cfg = CampaignConfig::new(3, 1, Order::SHANNON, 0);
        let log = run_active_search(PolicyKind::OnestepAs, &pool, &[0], &cfg, &spec).unwrap();
        assert_eq!(log.queries().count(), 3);
    }

    #[test]
    fn onestep_pool_wrapper_agrees_with_kernel_form() {
        let pool = clustered_binary_pool(
            &ClusterPoolParams {
                pool_size: 60,
                ..ClusterPoolParams::two_cluster()
            },
            2,
        )
        .unwrap();
        let spec = KernelSpec::gaussian(0.3).unwrap();
        let cfg = CampaignConfig::new(1, 1, Order::SHANNON, 0);
        let observed = [0, 5, 9, 17];
        let idx = onestep_as_choice(&pool, &observed, &cfg, &spec).unwrap();
        assert!(!observed.contains(&idx));
    }

    #[test]
    fn equal_probabilities_batch_of_one_maximizes_vs_gain() {
        // no data yet: every probability is 0.5, so the choice is the VS-gain argmax
        let pool = line_pool(5, &[]);
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let cfg = CampaignConfig::new(2, 1, Order::SHANNON, 0);
        let kernel = build_kernel_matrix(&spec, pool.points()).unwrap();
        let scores = [0.5; 5];
        let a = greedy_select_kernel(&kernel, &scores, Order::SHANNON, 1, &[], &[0, 1, 2, 3, 4])
            .unwrap();
        let log = run_qvs_as(&pool, &[], &cfg, &spec).unwrap();
        assert_eq!(log.entries()[0].index, Some(a[0]));
    }
}
