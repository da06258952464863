use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::spectral::{squared_distance, KernelMatrix};

const MAX_JITTER: f64 = 1e-4;
const MIN_SIGNAL_VARIANCE: f64 = 1e-12;

/// Unit-variance correlation function over some input type.
pub trait Covariance {
    type Input: Clone;
    fn correlation(&self, a: &Self::Input, b: &Self::Input) -> f64;
}

/// Squared-exponential correlation on coordinate vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbfCovariance {
    pub lengthscale: f64,
}

impl Covariance for RbfCovariance {
    type Input = Vec<f64>;

    fn correlation(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        (-squared_distance(a, b) / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }
}

/// A precomputed pool kernel used as the GP correlation; inputs are pool indices.
#[derive(Debug, Clone, Copy)]
pub struct PoolCovariance<'k> {
    pub kernel: &'k KernelMatrix,
}

impl Covariance for PoolCovariance<'_> {
    type Input = usize;

    fn correlation(&self, a: &usize, b: &usize) -> f64 {
        self.kernel.get(*a, *b)
    }
}

/// How the RBF lengthscale is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum LengthscaleGrid {
    /// Use `GpConfig::lengthscale` as is.
    Fixed,
    /// `count` log-spaced multiples of the median pairwise distance, from 1e-2 to 1e2.
    Relative {
        count: usize,
    },
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpConfig {
    pub lengthscale: f64,
    /// Only used by the prior; fitted models take the label variance.
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub jitter: f64,
    pub grid: LengthscaleGrid,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            lengthscale: 1.0,
            signal_variance: 1.0,
            noise_variance: 1e-4,
            jitter: 1e-8,
            grid: LengthscaleGrid::Relative { count: 8 },
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lengthscale", self.lengthscale),
            ("signal_variance", self.signal_variance),
            ("noise_variance", self.noise_variance),
            ("jitter", self.jitter),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        match &self.grid {
            LengthscaleGrid::Relative { count: 0 } => Err(Error::InvalidParameter(
                "lengthscale grid needs at least one value".into(),
            )),
            LengthscaleGrid::Explicit(values)
                if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) =>
            {
                Err(Error::InvalidParameter(
                    "explicit lengthscale grid must be nonempty and positive".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

/// Joint posterior over a set of query inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorBatch {
    pub means: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// GP conditioned on (centered) observations, immutable once built.
#[derive(Debug, Clone)]
pub struct FittedGp<C: Covariance> {
    cov: C,
    inputs: Vec<C::Input>,
    signal_variance: f64,
    noise_variance: f64,
    jitter: f64,
    mean_offset: f64,
    factor: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
    log_marginal_likelihood: f64,
}

impl<C: Covariance> FittedGp<C> {
    /// Zero-mean prior with `cfg.signal_variance`.
    pub fn prior(cov: C, cfg: &GpConfig) -> Self {
        FittedGp {
            cov,
            inputs: Vec::new(),
            signal_variance: cfg.signal_variance,
            noise_variance: cfg.noise_variance,
            jitter: cfg.jitter,
            mean_offset: 0.0,
            factor: None,
            alpha: DVector::zeros(0),
            log_marginal_likelihood: 0.0,
        }
    }

    /// Conditions on `values` at `inputs`. Labels are centered by their mean and the
    /// signal variance is their sample variance; fewer than two points falls back to
    /// `cfg.signal_variance`.
    pub fn condition(
        cov: C,
        inputs: Vec<C::Input>,
        values: &[f64],
        cfg: &GpConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if inputs.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("GP labels"));
        }
        let n = values.len();
        if n == 0 {
            return Ok(Self::prior(cov, cfg));
        }
        let mean_offset = values.iter().sum::<f64>() / n as f64;
        let centered = DVector::from_iterator(n, values.iter().map(|v| v - mean_offset));
        let signal_variance = if n >= 2 {
            (centered.norm_squared() / (n - 1) as f64).max(MIN_SIGNAL_VARIANCE)
        } else {
            cfg.signal_variance
        };
        let gram = DMatrix::from_fn(n, n, |i, j| {
            let k = signal_variance * cov.correlation(&inputs[i], &inputs[j]);
            if i == j {
                k + cfg.noise_variance
            } else {
                k
            }
        });
        let (factor, jitter) = factorize(&gram, cfg.jitter)?;
        let alpha = factor.solve(&centered);
        let log_det_half: f64 = factor.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        let log_marginal_likelihood = -0.5 * centered.dot(&alpha)
            - log_det_half
            - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        Ok(FittedGp {
            cov,
            inputs,
            signal_variance,
            noise_variance: cfg.noise_variance,
            jitter,
            mean_offset,
            factor: Some(factor),
            alpha,
            log_marginal_likelihood,
        })
    }

    pub fn covariance_fn(&self) -> &C {
        &self.cov
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal_likelihood
    }

    fn cross(&self, queries: &[C::Input]) -> DMatrix<f64> {
        DMatrix::from_fn(self.inputs.len(), queries.len(), |i, j| {
            self.signal_variance * self.cov.correlation(&self.inputs[i], &queries[j])
        })
    }

    /// Exact conditional mean and covariance at `queries`, symmetrized and jittered.
    pub fn posterior(&self, queries: &[C::Input]) -> Result<PosteriorBatch> {
        let q = queries.len();
        let mut covariance = DMatrix::from_fn(q, q, |i, j| {
            self.signal_variance * self.cov.correlation(&queries[i], &queries[j])
        });
        let mut means = DVector::from_element(q, self.mean_offset);
        if let Some(factor) = &self.factor {
            let cross = self.cross(queries);
            means += cross.tr_mul(&self.alpha);
            let v =
                factor
                    .l_dirty()
                    .solve_lower_triangular(&cross)
                    .ok_or(Error::Factorization {
                        jitter: self.jitter,
                    })?;
            covariance -= v.tr_mul(&v);
        }
        let sym = (&covariance + covariance.transpose()) * 0.5;
        let mut covariance = sym;
        for i in 0..q {
            covariance[(i, i)] += self.jitter;
        }
        Ok(PosteriorBatch { means, covariance })
    }

    /// Posterior means and variances only, without the joint covariance.
    pub fn marginals(&self, queries: &[C::Input]) -> Result<(DVector<f64>, DVector<f64>)> {
        let q = queries.len();
        let mut means = DVector::from_element(q, self.mean_offset);
        let mut vars = DVector::from_iterator(
            q,
            queries
                .iter()
                .map(|x| self.signal_variance * self.cov.correlation(x, x) + self.jitter),
        );
        if let Some(factor) = &self.factor {
            let cross = self.cross(queries);
            means += cross.tr_mul(&self.alpha);
            let v =
                factor
                    .l_dirty()
                    .solve_lower_triangular(&cross)
                    .ok_or(Error::Factorization {
                        jitter: self.jitter,
                    })?;
            for j in 0..q {
                vars[j] -= v.column(j).norm_squared();
            }
        }
        Ok((means, vars))
    }
}

/// Cholesky with diagonal jitter escalating tenfold up to `1e-4`.
fn factorize(matrix: &DMatrix<f64>, start: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut jitter = start;
    loop {
        let mut m = matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(factor) = Cholesky::new(m) {
            return Ok((factor, jitter));
        }
        if jitter >= MAX_JITTER {
            return Err(Error::Factorization { jitter });
        }
        jitter = (jitter * 10.0).min(MAX_JITTER);
    }
}

/// Fits an RBF GP to real-valued labels, choosing the lengthscale by log marginal
/// likelihood over the configured grid.
pub fn gp_fit(
    points: &[Vec<f64>],
    values: &[f64],
    cfg: &GpConfig,
) -> Result<FittedGp<RbfCovariance>> {
    cfg.validate()?;
    if points.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "GP fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: p.len(),
        });
    }
    let grid = match &cfg.grid {
        LengthscaleGrid::Fixed => vec![cfg.lengthscale],
        LengthscaleGrid::Explicit(values) => values.clone(),
        LengthscaleGrid::Relative { count } => relative_grid(points, *count),
    };
    let mut best: Option<FittedGp<RbfCovariance>> = None;
    for lengthscale in grid {
        let fitted =
            FittedGp::condition(RbfCovariance { lengthscale }, points.to_vec(), values, cfg)?;
        if best
            .as_ref()
            .is_none_or(|b| fitted.log_marginal_likelihood > b.log_marginal_likelihood)
        {
            best = Some(fitted);
        }
    }
    Ok(best.expect("grid is nonempty"))
}

/// GP over pool indices whose correlation is the pool kernel itself.
pub fn gp_fit_pool<'k>(
    kernel: &'k KernelMatrix,
    indices: &[usize],
    values: &[f64],
    cfg: &GpConfig,
) -> Result<FittedGp<PoolCovariance<'k>>> {
    if let Some(&i) = indices.iter().find(|&&i| i >= kernel.len()) {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: kernel.len(),
        });
    }
    FittedGp::condition(PoolCovariance { kernel }, indices.to_vec(), values, cfg)
}

fn relative_grid(points: &[Vec<f64>], count: usize) -> Vec<f64> {
    let mut dists = Vec::with_capacity(points.len() * (points.len() - 1) / 2);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            dists.push(squared_distance(&points[i], &points[j]).sqrt());
        }
    }
    dists.sort_by(|a, b| a.total_cmp(b));
    let median = dists[dists.len() / 2];
    let base = if median > 0.0 { median } else { 1.0 };
    if count == 1 {
        return vec![base];
    }
    (0..count)
        .map(|k| base * 10f64.powf(-2.0 + 4.0 * k as f64 / (count - 1) as f64))
        .collect()
}

/// One joint draw `mean + L z` from the posterior, deterministic in `seed`.
pub fn thompson_sample(post: &PosteriorBatch, seed: u64) -> Result<DVector<f64>> {
    let n = post.means.len();
    let scale = (0..n)
        .map(|i| post.covariance[(i, i)])
        .fold(0.0f64, f64::max);
    if n == 0 || scale <= 0.0 {
        return Ok(post.means.clone());
    }
    let (factor, _) = factorize(&post.covariance, 1e-8 * scale)
        .map_err(|_| Error::Factorization { jitter: MAX_JITTER })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
    Ok(&post.means + factor.l_dirty().lower_triangle() * z)
}

/// `mean + beta * sd` from joint posterior output.
pub fn ucb_score(post: &PosteriorBatch, beta: f64) -> Result<DVector<f64>> {
    let vars = post.covariance.diagonal();
    ucb_from_marginals(&post.means, &vars, beta)
}

pub fn ucb_from_marginals(
    means: &DVector<f64>,
    variances: &DVector<f64>,
    beta: f64,
) -> Result<DVector<f64>> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must be nonnegative, got {beta}"
        )));
    }
    let scale = variances.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut out = means.clone();
    for (o, &v) in out.iter_mut().zip(variances.iter()) {
        if v < -1e-8 * scale {
            return Err(Error::NegativeVariance(v));
        }
        *o += beta * v.max(0.0).sqrt();
    }
    Ok(out)
}
