//! Oracles for the three campaign modes and the synthetic generators that build them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::spectral::squared_distance;

fn check_rows(points: &[Vec<f64>]) -> Result<usize> {
    let first = points.first().ok_or(Error::Empty("pool"))?;
    let dim = first.len();
    if dim == 0 {
        return Err(Error::Empty("feature vector"));
    }
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pool features"));
        }
    }
    Ok(dim)
}

/// Pool of items with hidden binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryPool {
    points: Vec<Vec<f64>>,
    labels: Vec<bool>,
}

impl BinaryPool {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self> {
        check_rows(&points)?;
        if labels.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: labels.len(),
            });
        }
        Ok(BinaryPool { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> bool {
        self.labels[index]
    }
}

/// Pool of items with hidden real-valued objective values.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPool {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl RealPool {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        check_rows(&points)?;
        if values.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pool values"));
        }
        Ok(RealPool { points, values })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }
}

/// Black-box objective over a box. Implementations are shared read-only across campaigns.
pub trait Objective: Send + Sync {
    fn domain(&self) -> &BoxDomain;
    fn evaluate(&self, x: &[f64]) -> f64;
}

/// Sum of isotropic Gaussian bumps plus optional deterministic noise.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPeak {
    domain: BoxDomain,
    centers: Vec<Vec<f64>>,
    heights: Vec<f64>,
    width: f64,
    noise: f64,
    noise_seed: u64,
}

impl MultiPeak {
    pub fn new(
        domain: BoxDomain,
        centers: Vec<Vec<f64>>,
        heights: Vec<f64>,
        width: f64,
    ) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Empty("peak centers"));
        }
        if heights.len() != centers.len() {
            return Err(Error::DimensionMismatch {
                expected: centers.len(),
                found: heights.len(),
            });
        }
        if let Some(c) = centers.iter().find(|c| c.len() != domain.dim()) {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                found: c.len(),
            });
        }
        if centers
            .iter()
            .flatten()
            .chain(&heights)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("peak parameters"));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "peak width must be positive, got {width}"
            )));
        }
        Ok(MultiPeak {
            domain,
            centers,
            heights,
            width,
            noise: 0.0,
            noise_seed: 0,
        })
    }

    /// Adds `noise * u(x)` with `u` a hash of the coordinates in `[-1, 1]`; repeated
    /// evaluations at the same point agree.
    pub fn with_noise(mut self, noise: f64, seed: u64) -> Result<Self> {
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise must be nonnegative, got {noise}"
            )));
        }
        self.noise = noise;
        self.noise_seed = seed;
        Ok(self)
    }

    /// Three unit-height peaks in `[0, 1]^2`.
    pub fn three_equal_peaks() -> Self {
        MultiPeak::new(
            BoxDomain::unit(2).expect("valid box"),
            vec![vec![0.2, 0.25], vec![0.8, 0.3], vec![0.45, 0.8]],
            vec![1.0; 3],
            0.08,
        )
        .expect("valid peaks")
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    fn hashed_unit(&self, x: &[f64]) -> f64 {
        let mut h = self.noise_seed;
        for v in x {
            h = splitmix64(h ^ v.to_bits());
        }
        (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Objective for MultiPeak {
    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        let two_w2 = 2.0 * self.width * self.width;
        let bumps: f64 = self
            .centers
            .iter()
            .zip(&self.heights)
            .map(|(c, h)| h * (-squared_distance(x, c) / two_w2).exp())
            .sum();
        if self.noise > 0.0 {
            bumps + self.noise * self.hashed_unit(x)
        } else {
            bumps
        }
    }
}

/// Binary pool with positives in Gaussian clusters over a uniform negative background
/// in `[-1, 1]^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPoolParams {
    pub pool_size: usize,
    pub positive_rate: f64,
    pub centers: Vec<Vec<f64>>,
    pub spread: f64,
}

impl ClusterPoolParams {
    pub fn two_cluster() -> Self {
        ClusterPoolParams {
            pool_size: 1000,
            positive_rate: 0.1,
            centers: vec![vec![-0.8, -0.8], vec![0.8, 0.8]],
            spread: 0.1,
        }
    }

    /// `count` clusters evenly spaced on a circle of `radius` around the origin.
    pub fn ring(count: usize, radius: f64) -> Self {
        let centers = (0..count)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![radius * a.cos(), radius * a.sin()]
            })
            .collect();
        ClusterPoolParams {
            pool_size: 1000,
            positive_rate: 0.1,
            centers,
            spread: 0.08,
        }
    }

    /// Positive count, `floor(rate * pool_size)`.
    pub fn positive_count(&self) -> usize {
        (self.positive_rate * self.pool_size as f64).floor() as usize
    }

    fn validate(&self) -> Result<usize> {
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "positive rate must lie in (0, 1), got {}",
                self.positive_rate
            )));
        }
        if self.positive_count() == 0 {
            return Err(Error::InvalidParameter(
                "positive rate times pool size is below one".into(),
            ));
        }
        if !(self.spread.is_finite() && self.spread > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cluster spread must be positive, got {}",
                self.spread
            )));
        }
        check_rows(&self.centers).map_err(|e| match e {
            Error::Empty(_) => Error::Empty("cluster centers"),
            other => other,
        })
    }

    /// Index of the cluster center nearest to `x`.
    pub fn nearest_center(&self, x: &[f64]) -> usize {
        nearest(&self.centers, x)
    }
}

pub(crate) fn nearest(centers: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = squared_distance(c, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Rows are shuffled so pool order carries no label information.
pub fn clustered_binary_pool(params: &ClusterPoolParams, seed: u64) -> Result<BinaryPool> {
    let dim = params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positives = params.positive_count();
    let mut rows: Vec<(Vec<f64>, bool)> = Vec::with_capacity(params.pool_size);
    for i in 0..positives {
        let c = &params.centers[i % params.centers.len()];
        let p = c
            .iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                v + params.spread * z
            })
            .collect();
        rows.push((p, true));
    }
    for _ in positives..params.pool_size {
        let p = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        rows.push((p, false));
    }
    rows.shuffle(&mut rng);
    let (points, labels) = rows.into_iter().unzip();
    BinaryPool::new(points, labels)
}

/// Real-valued pool in `[-1, 1]^2` whose high values sit in two separated bumps.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoGroupParams {
    pub pool_size: usize,
    pub centers: Vec<Vec<f64>>,
    pub width: f64,
    pub noise: f64,
}

impl Default for TwoGroupParams {
    fn default() -> Self {
        TwoGroupParams {
            pool_size: 400,
            centers: vec![vec![-0.6, 0.6], vec![0.6, -0.6]],
            width: 0.2,
            noise: 0.0,
        }
    }
}

pub fn two_group_pool(params: &TwoGroupParams, seed: u64) -> Result<RealPool> {
    if params.pool_size == 0 {
        return Err(Error::InvalidParameter("pool size must be positive".into()));
    }
    let dim = check_rows(&params.centers)?;
    let bumps = MultiPeak::new(
        BoxDomain::cube(dim, -1.0, 1.0)?,
        params.centers.clone(),
        vec![1.0; params.centers.len()],
        params.width,
    )?
    .with_noise(params.noise, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..params.pool_size)
        .map(|_| bumps.domain().sample(&mut rng))
        .collect();
    let values = points.iter().map(|p| bumps.evaluate(p)).collect();
    RealPool::new(points, values)
}

/// `count` distinct pool indices drawn uniformly, in draw order.
pub fn draw_initial_indices(pool_size: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count > pool_size {
        return Err(Error::BatchTooLarge {
            requested: count,
            available: pool_size,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, pool_size, count).into_vec())
}

pub fn draw_initial_points(domain: &BoxDomain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| domain.sample(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_count_uses_floor() {
        let mut p = ClusterPoolParams::two_cluster();
        p.pool_size = 500;
        let pool = clustered_binary_pool(&p, 3).unwrap();
        assert_eq!(pool.labels().iter().filter(|&&l| l).count(), 50);
        p.pool_size = 509;
        assert_eq!(p.positive_count(), 50);
    }

    #[test]
    fn generators_are_seeded() {
        let p = ClusterPoolParams::ring(4, 0.6);
        assert_eq!(
            clustered_binary_pool(&p, 1).unwrap(),
            clustered_binary_pool(&p, 1).unwrap()
        );
        assert_ne!(
            clustered_binary_pool(&p, 1).unwrap(),
            clustered_binary_pool(&p, 2).unwrap()
        );
        let g = TwoGroupParams::default();
        assert_eq!(
            two_group_pool(&g, 5).unwrap(),
            two_group_pool(&g, 5).unwrap()
        );
    }

    #[test]
    fn invalid_rates_are_rejected() {
        let mut p = ClusterPoolParams::two_cluster();
        for rate in [0.0, 1.0, -0.2, f64::NAN] {
            p.positive_rate = rate;
            assert!(clustered_binary_pool(&p, 0).is_err());
        }
        p.positive_rate = 0.001;
        p.pool_size = 10;
        assert!(clustered_binary_pool(&p, 0).is_err());
    }

    #[test]
    fn single_peak_at_origin_has_unit_value() {
        let f = MultiPeak::new(
            BoxDomain::cube(2, -1.0, 1.0).unwrap(),
            vec![vec![0.0, 0.0]],
            vec![1.0],
            0.3,
        )
        .unwrap();
        assert_eq!(f.evaluate(&[0.0, 0.0]), 1.0);
        assert!(f.evaluate(&[1.0, 1.0]) < 1e-4);
    }

    #[test]
    fn hashed_noise_is_repeatable_and_bounded() {
        let f = MultiPeak::three_equal_peaks().with_noise(0.05, 9).unwrap();
        let x = [0.31, 0.77];
        assert_eq!(f.evaluate(&x), f.evaluate(&x));
        let clean = MultiPeak::three_equal_peaks();
        for i in 0..50 {
            let x = [i as f64 / 50.0, 0.5];
            assert!((f.evaluate(&x) - clean.evaluate(&x)).abs() <= 0.05);
        }
    }

    #[test]
    fn initial_draws() {
        let idx = draw_initial_indices(10, 10, 4).unwrap();
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
        assert!(draw_initial_indices(3, 4, 0).is_err());
        let d = BoxDomain::cube(3, -2.0, 2.0).unwrap();
        assert!(draw_initial_points(&d, 7, 1).iter().all(|p| d.contains(p)));
    }
}
