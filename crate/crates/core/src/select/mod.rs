//! Maximizers of the quality-weighted Vendi score: sequential greedy selection over a
//! discrete pool and multi-start projected gradient ascent over a box.

mod bordered;
mod continuous;

pub(crate) use bordered::SetExtension;
pub use continuous::{batch_qvs, continuous_maximize, ContinuousBatch, ContinuousOptConfig};

use crate::error::{Error, Result};
use crate::spectral::{build_kernel_matrix, validate_indices, KernelMatrix, KernelSpec};
use crate::vendi::{quality_weighted_vendi_of_subset, validate_scores, Order, ScoredSet};

/// Relative margin below which two acquisition values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// True when `value` beats `best` by more than the tie margin.
#[inline]
pub fn improves(value: f64, best: f64) -> bool {
    value > best + TIE_TOLERANCE * best.abs().max(1.0)
}

/// Index of the maximum of `values` over `candidates` (scanned in the given order), first wins ties.
pub fn argmax_lowest<I: IntoIterator<Item = (usize, f64)>>(values: I) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values {
        match best {
            None => best = Some((i, v)),
            Some((_, b)) if improves(v, b) => best = Some((i, v)),
            _ => {}
        }
    }
    best
}

/// Greedy selection settings. Ties always go to the lowest index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GreedyConfig {
    pub batch_size: usize,
}

/// Greedily picks `cfg.batch_size` pool items maximizing the qVS of `fixed ∪ chosen`.
///
/// Candidates are every pool index not in `fixed`.
pub fn greedy_select(
    pool: &ScoredSet,
    spec: &KernelSpec,
    order: Order,
    cfg: GreedyConfig,
    fixed: &[usize],
) -> Result<Vec<usize>> {
    if pool.is_empty() {
        return Err(Error::Empty("selection pool"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidParameter(
            "batch size must be positive".into(),
        ));
    }
    let kernel = build_kernel_matrix(spec, pool.items())?;
    validate_indices(fixed, pool.len())?;
    let mut is_fixed = vec![false; pool.len()];
    for &f in fixed {
        is_fixed[f] = true;
    }
    let candidates: Vec<usize> = (0..pool.len()).filter(|&i| !is_fixed[i]).collect();
    greedy_select_kernel(
        &kernel,
        pool.scores(),
        order,
        cfg.batch_size,
        fixed,
        &candidates,
    )
}

/// Greedy selection on a precomputed pool kernel.
///
/// At each step the candidate maximizing `qVS(fixed ∪ chosen ∪ {x})` is appended;
/// `candidates` must be disjoint from `fixed`. Returns indices in selection order.
pub fn greedy_select_kernel(
    kernel: &KernelMatrix,
    scores: &[f64],
    order: Order,
    batch_size: usize,
    fixed: &[usize],
    candidates: &[usize],
) -> Result<Vec<usize>> {
    let n = kernel.len();
    if scores.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: scores.len(),
        });
    }
    validate_scores(scores)?;
    validate_indices(fixed, n)?;
    validate_indices(candidates, n)?;
    let mut in_fixed = vec![false; n];
    for &f in fixed {
        in_fixed[f] = true;
    }
    if let Some(&c) = candidates.iter().find(|&&c| in_fixed[c]) {
        return Err(Error::InvalidParameter(format!(
            "candidate {c} is also fixed"
        )));
    }
    if batch_size > candidates.len() {
        return Err(Error::BatchTooLarge {
            requested: batch_size,
            available: candidates.len(),
        });
    }

    let mut remaining: Vec<usize> = candidates.to_vec();
    remaining.sort_unstable();
    let mut chosen = Vec::with_capacity(batch_size);
    let mut base: Vec<usize> = fixed.to_vec();
    for _ in 0..batch_size {
        let (pos, _) = if base.is_empty() {
            argmax_lowest(remaining.iter().enumerate().map(|(p, &c)| (p, scores[c])))
        } else {
            let mut ext = SetExtension::new(kernel, &base, Some(scores))?;
            argmax_lowest(
                remaining
                    .iter()
                    .enumerate()
                    .map(|(p, &c)| (p, ext.qvs_with(c, scores[c], order))),
            )
        }
        .expect("batch size checked against candidate count");
        let pick = remaining.remove(pos);
        chosen.push(pick);
        base.push(pick);
    }
    Ok(chosen)
}

/// `qVS(current ∪ {candidate}) - qVS(current)` over a scored pool.
pub fn greedy_gain(
    pool: &ScoredSet,
    spec: &KernelSpec,
    order: Order,
    current: &[usize],
    candidate: usize,
) -> Result<f64> {
    let kernel = build_kernel_matrix(spec, pool.items())?;
    greedy_gain_kernel(&kernel, pool.scores(), order, current, candidate)
}

pub fn greedy_gain_kernel(
    kernel: &KernelMatrix,
    scores: &[f64],
    order: Order,
    current: &[usize],
    candidate: usize,
) -> Result<f64> {
    if current.contains(&candidate) {
        return Err(Error::InvalidParameter(format!(
            "candidate {candidate} is already in the set"
        )));
    }
    let mut extended = current.to_vec();
    extended.push(candidate);
    let after = quality_weighted_vendi_of_subset(kernel, scores, &extended, order)?;
    let before = quality_weighted_vendi_of_subset(kernel, scores, current, order)?;
    Ok(after - before)
}
