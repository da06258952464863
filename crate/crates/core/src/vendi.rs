//! The Vendi score family: order-`q` Vendi scores and their quality-weighted form.
//!
//! Normalized eigenvalues at or below [`SUPPORT_THRESHOLD`] are treated as exact
//! zeros for every order, so `VS_0` (the numerical rank) and the other orders are
//! computed on the same distribution.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::spectral::{build_kernel_matrix, eigen_symmetric, KernelMatrix, KernelSpec, Point};

pub const SUPPORT_THRESHOLD: f64 = 1e-10;

/// Orders this close to 1 use the Shannon branch.
const SHANNON_WINDOW: f64 = 1e-9;

/// Sensitivity order `q >= 0` of the score, possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    Finite(f64),
    Infinity,
}

impl Order {
    pub const SHANNON: Order = Order::Finite(1.0);
    pub const COUNT: Order = Order::Finite(0.0);

    pub fn new(q: f64) -> Result<Self> {
        if q.is_nan() || q < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "order must be >= 0, got {q}"
            )));
        }
        if q.is_infinite() {
            Ok(Order::Infinity)
        } else {
            Ok(Order::Finite(q))
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Order::Finite(q) => q,
            Order::Infinity => f64::INFINITY,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self, Order::Finite(q) if q == 0.0)
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Finite(q) => write!(f, "{q}"),
            Order::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Order::Infinity),
            _ => {
                let q: f64 = t
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("unknown order token `{t}`")))?;
                if q.is_infinite() {
                    return Err(Error::InvalidParameter(format!(
                        "spell infinity as `inf`, got `{t}`"
                    )));
                }
                Order::new(q)
            }
        }
    }
}

/// Parses a comma-separated list such as `0,1,inf`.
pub fn parse_order_list(s: &str) -> Result<Vec<Order>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Items paired with quality scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    items: Vec<Point>,
    scores: Vec<f64>,
}

impl ScoredSet {
    pub fn new(items: Vec<Point>, scores: Vec<f64>) -> Result<Self> {
        if items.len() != scores.len() {
            return Err(Error::DimensionMismatch {
                expected: items.len(),
                found: scores.len(),
            });
        }
        validate_scores(&scores)?;
        if let Some(first) = items.first() {
            if let Some(bad) = items.iter().find(|p| p.dim() != first.dim()) {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    found: bad.dim(),
                });
            }
        }
        Ok(ScoredSet { items, scores })
    }

    /// All scores set to 1, so the weighted score reduces to the plain one.
    pub fn unweighted(items: Vec<Point>) -> Result<Self> {
        let n = items.len();
        Self::new(items, vec![1.0; n])
    }

    pub fn items(&self) -> &[Point] {
        &self.items
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

pub(crate) fn validate_scores(scores: &[f64]) -> Result<()> {
    match scores
        .iter()
        .find(|s| !s.is_finite() || **s < 0.0 || **s > 1.0)
    {
        Some(s) => Err(Error::InvalidParameter(format!(
            "quality score {s} outside [0, 1]"
        ))),
        None => Ok(()),
    }
}

/// Score of a probability vector (entries summing to one). Empty input scores 0.
pub fn vendi_from_normalized(normalized: &[f64], order: Order) -> f64 {
    let n = normalized.len();
    if n == 0 {
        return 0.0;
    }
    let kept: f64 = normalized.iter().filter(|&&p| p > SUPPORT_THRESHOLD).sum();
    if kept <= 0.0 {
        return 0.0;
    }
    let support = || {
        normalized
            .iter()
            .filter(|&&p| p > SUPPORT_THRESHOLD)
            .map(|p| p / kept)
    };
    let value = match order {
        Order::Finite(0.0) => support().count() as f64,
        Order::Finite(q) if (q - 1.0).abs() < SHANNON_WINDOW => {
            let entropy: f64 = support().map(|p| -p * p.ln()).sum();
            entropy.exp()
        }
        Order::Finite(q) => {
            let max = support().fold(0.0, f64::max);
            let scaled: f64 = support().map(|p| (p / max).powf(q)).sum();
            let log_sum = q * max.ln() + scaled.ln();
            (log_sum / (1.0 - q)).exp()
        }
        Order::Infinity => 1.0 / support().fold(0.0, f64::max),
    };
    value.clamp(1.0, n as f64)
}

/// Score from raw (already PSD-checked) eigenvalues of a unit-diagonal matrix.
pub(crate) fn vendi_from_eigenvalues(eigenvalues: &[f64], order: Order) -> f64 {
    let total: f64 = eigenvalues.iter().map(|v| v.max(0.0)).sum();
    if eigenvalues.is_empty() || total <= 0.0 {
        return 0.0;
    }
    let normalized: Vec<f64> = eigenvalues.iter().map(|v| v.max(0.0) / total).collect();
    vendi_from_normalized(&normalized, order)
}

/// `VS_q` of the set whose kernel matrix is `m`; the empty set scores 0.
pub fn vendi_score(m: &KernelMatrix, order: Order) -> Result<f64> {
    if m.is_empty() {
        return Ok(0.0);
    }
    let spectrum = eigen_symmetric(m)?;
    Ok(vendi_from_normalized(&spectrum.normalized, order))
}

/// `mean(scores) * VS_q(items)`; 0 for an empty set.
pub fn quality_weighted_vendi_score(
    set: &ScoredSet,
    spec: &KernelSpec,
    order: Order,
) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let kernel = build_kernel_matrix(spec, set.items())?;
    let vs = vendi_score(&kernel, order)?;
    Ok(mean(set.scores()) * vs)
}

/// `VS_q` of a principal submatrix of a precomputed pool kernel.
pub fn vendi_score_of_subset(
    pool_kernel: &KernelMatrix,
    indices: &[usize],
    order: Order,
) -> Result<f64> {
    let sub = pool_kernel.submatrix(indices)?;
    vendi_score(&sub, order)
}

/// Quality-weighted score of a subset of a pool with per-item scores.
pub fn quality_weighted_vendi_of_subset(
    pool_kernel: &KernelMatrix,
    scores: &[f64],
    indices: &[usize],
    order: Order,
) -> Result<f64> {
    if scores.len() != pool_kernel.len() {
        return Err(Error::DimensionMismatch {
            expected: pool_kernel.len(),
            found: scores.len(),
        });
    }
    if indices.is_empty() {
        return Ok(0.0);
    }
    let vs = vendi_score_of_subset(pool_kernel, indices, order)?;
    let selected: Vec<f64> = indices.iter().map(|&i| scores[i]).collect();
    validate_scores(&selected)?;
    Ok(mean(&selected) * vs)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::KernelMatrix;

    fn rho_half() -> KernelMatrix {
        KernelMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap()
    }

    /// Entropy oracle straight from the closed-form spectrum (0.75, 0.25).
    fn shannon_oracle(ps: &[f64]) -> f64 {
        (-ps.iter().map(|p| p * p.ln()).sum::<f64>()).exp()
    }

    #[test]
    fn identity_scores_n() {
        let vs = vendi_score(&KernelMatrix::identity(3), Order::SHANNON).unwrap();
        assert!((vs - 3.0).abs() < 1e-12);
        for n in 1..7 {
            let vs = vendi_score(&KernelMatrix::identity(n), Order::Infinity).unwrap();
            assert!((vs - n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn all_ones_scores_one() {
        let k = KernelMatrix::from_rows(&vec![vec![1.0; 4]; 4]).unwrap();
        assert!((vendi_score(&k, Order::SHANNON).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_orders() {
        let k = rho_half();
        let expected = shannon_oracle(&[0.75, 0.25]);
        assert!((expected - 1.754765).abs() < 1e-6);
        assert!((vendi_score(&k, Order::SHANNON).unwrap() - expected).abs() < 1e-12);
        assert!((vendi_score(&k, Order::Finite(2.0)).unwrap() - 1.6).abs() < 1e-12);
        assert!((vendi_score(&k, Order::Infinity).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(vendi_score(&k, Order::COUNT).unwrap(), 2.0);
    }

    #[test]
    fn empty_set_scores_zero() {
        let empty = KernelMatrix::identity(0);
        assert_eq!(vendi_score(&empty, Order::SHANNON).unwrap(), 0.0);
        let set = ScoredSet::new(vec![], vec![]).unwrap();
        let spec = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(
            quality_weighted_vendi_score(&set, &spec, Order::SHANNON).unwrap(),
            0.0
        );
    }

    #[test]
    fn near_one_orders_use_shannon_branch() {
        let k = rho_half();
        let shannon = vendi_score(&k, Order::SHANNON).unwrap();
        let nearly = vendi_score(&k, Order::Finite(1.0 + 1e-12)).unwrap();
        assert_eq!(shannon, nearly);
        for q in [1.0 - 1e-4, 1.0 + 1e-4] {
            assert!((vendi_score(&k, Order::Finite(q)).unwrap() - shannon).abs() < 1e-3);
        }
    }

    #[test]
    fn large_orders_do_not_underflow() {
        let k = rho_half();
        let vs = vendi_score(&k, Order::Finite(2000.0)).unwrap();
        assert!(vs.is_finite());
        assert!((vs - 4.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn qvs_examples() {
        let pts = vec![
            Point::new(vec![0.0]).unwrap(),
            Point::new(vec![1e3]).unwrap(),
        ];
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let set = ScoredSet::new(pts.clone(), vec![1.0, 0.5]).unwrap();
        let v = quality_weighted_vendi_score(&set, &spec, Order::SHANNON).unwrap();
        assert!((v - 1.5).abs() < 1e-12);

        let unit = ScoredSet::unweighted(pts.clone()).unwrap();
        let k = build_kernel_matrix(&spec, &pts).unwrap();
        assert_eq!(
            quality_weighted_vendi_score(&unit, &spec, Order::SHANNON).unwrap(),
            vendi_score(&k, Order::SHANNON).unwrap()
        );

        let same = vec![
            Point::new(vec![0.3]).unwrap(),
            Point::new(vec![0.3]).unwrap(),
        ];
        let set = ScoredSet::new(same, vec![0.2, 0.2]).unwrap();
        let v = quality_weighted_vendi_score(&set, &spec, Order::SHANNON).unwrap();
        assert!((v - 0.2).abs() < 1e-12);
    }

    #[test]
    fn scored_set_validation() {
        let p = Point::new(vec![0.0]).unwrap();
        assert!(ScoredSet::new(vec![p.clone()], vec![1.5]).is_err());
        assert!(ScoredSet::new(vec![p.clone()], vec![-0.1]).is_err());
        assert!(ScoredSet::new(vec![p.clone()], vec![f64::NAN]).is_err());
        assert!(ScoredSet::new(vec![p.clone()], vec![]).is_err());
        assert!(
            ScoredSet::new(vec![p, Point::new(vec![0.0, 1.0]).unwrap()], vec![0.5, 0.5]).is_err()
        );
    }

    #[test]
    fn subset_scores() {
        let spec = KernelSpec::gaussian(0.6).unwrap();
        let pts: Vec<Vec<f64>> = (0..5)
            .map(|i| vec![i as f64 * 0.37, (i * i) as f64 * 0.11])
            .collect();
        let pool = build_kernel_matrix(&spec, &pts).unwrap();
        let all: Vec<usize> = (0..5).collect();
        assert_eq!(
            vendi_score_of_subset(&pool, &all, Order::SHANNON).unwrap(),
            vendi_score(&pool, Order::SHANNON).unwrap()
        );
        assert_eq!(
            vendi_score_of_subset(&pool, &[3], Order::SHANNON).unwrap(),
            1.0
        );
        // rebuild-and-compare
        let fresh = build_kernel_matrix(&spec, &[pts[4].clone(), pts[1].clone()]).unwrap();
        let a = vendi_score_of_subset(&pool, &[4, 1], Order::SHANNON).unwrap();
        let b = vendi_score(&fresh, Order::SHANNON).unwrap();
        assert!((a - b).abs() < 1e-10);
        assert!(matches!(
            vendi_score_of_subset(&pool, &[5], Order::SHANNON),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            vendi_score_of_subset(&pool, &[1, 1], Order::SHANNON),
            Err(Error::DuplicateIndex(1))
        ));
    }

    #[test]
    fn order_parsing() {
        assert_eq!("inf".parse::<Order>().unwrap(), Order::Infinity);
        assert_eq!(" 0.5".parse::<Order>().unwrap(), Order::Finite(0.5));
        assert!("-1".parse::<Order>().is_err());
        assert!("abc".parse::<Order>().is_err());
        assert_eq!(
            parse_order_list("0,1,inf").unwrap(),
            vec![Order::COUNT, Order::SHANNON, Order::Infinity]
        );
        assert_eq!(Order::Infinity.to_string(), "inf");
        assert_eq!(Order::Finite(0.5).to_string(), "0.5");
    }
}
