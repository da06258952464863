use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::spectral::{build_kernel_matrix_unchecked, jacobi_eigen, KernelSpec, Point, Spectrum};
use crate::vendi::{vendi_from_normalized, Order};

const ARMIJO: f64 = 1e-4;

/// Multi-start projected gradient ascent settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousOptConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub step_tolerance: f64,
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for ContinuousOptConfig {
    fn default() -> Self {
        ContinuousOptConfig {
            restarts: 10,
            max_iters: 500,
            step_tolerance: 1e-7,
            fd_step: 1e-5,
            seed: 0,
        }
    }
}

impl ContinuousOptConfig {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "restarts and max_iters must be positive".into(),
            ));
        }
        for (name, v) in [
            ("step_tolerance", self.step_tolerance),
            ("fd_step", self.fd_step),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Best batch found and its qVS.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousBatch {
    pub points: Vec<Point>,
    pub value: f64,
    pub restart: usize,
}

/// qVS of a batch stored as consecutive `dim`-sized chunks of `flat`.
pub fn batch_qvs<F>(
    spec: &KernelSpec,
    score_fn: &F,
    flat: &[f64],
    dim: usize,
    order: Order,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let points: Vec<&[f64]> = flat.chunks_exact(dim).collect();
    let mut total = 0.0;
    for p in &points {
        let s = score_fn(p);
        if !s.is_finite() {
            return Err(Error::NonFinite("score function output"));
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidParameter(format!(
                "score function returned {s}, outside [0, 1]"
            )));
        }
        total += s;
    }
    let kernel = build_kernel_matrix_unchecked(spec, &points);
    let eig = jacobi_eigen(kernel.as_matrix(), false)?;
    let spectrum = Spectrum::from_eigenvalues(eig.values)?;
    Ok(total / points.len() as f64 * vendi_from_normalized(&spectrum.normalized, order))
}

/// Maximizes the qVS of a batch of `batch_size` points in `domain`.
///
/// The whole batch is one `batch_size * dim` variable. Gradients are central finite
/// differences (one-sided against the box faces); steps are projected onto the box and
/// accepted by a halving Armijo line search. The best restart wins, ties to the earliest.
pub fn continuous_maximize<F>(
    spec: &KernelSpec,
    score_fn: F,
    domain: &BoxDomain,
    batch_size: usize,
    order: Order,
    cfg: &ContinuousOptConfig,
) -> Result<ContinuousBatch>
where
    F: Fn(&[f64]) -> f64,
{
    spec.validate()?;
    cfg.validate()?;
    if batch_size == 0 {
        return Err(Error::InvalidParameter(
            "batch size must be positive".into(),
        ));
    }
    let dim = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    for restart in 0..cfg.restarts {
        let start: Vec<f64> = (0..batch_size)
            .flat_map(|_| domain.sample(&mut rng))
            .collect();
        let (x, value) = ascend(spec, &score_fn, domain, start, order, cfg)?;
        if best.as_ref().is_none_or(|b| value > b.1) {
            best = Some((x, value, restart));
        }
    }
    let (x, value, restart) = best.expect("at least one restart");
    let points = x
        .chunks_exact(dim)
        .map(|c| Point::new(c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ContinuousBatch {
        points,
        value,
        restart,
    })
}

fn ascend<F>(
    spec: &KernelSpec,
    score_fn: &F,
    domain: &BoxDomain,
    mut x: Vec<f64>,
    order: Order,
    cfg: &ContinuousOptConfig,
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = domain.dim();
    let objective = |v: &[f64]| batch_qvs(spec, score_fn, v, dim, order);
    let widths: Vec<f64> = domain
        .lower()
        .iter()
        .zip(domain.upper())
        .map(|(lo, hi)| hi - lo)
        .collect();
    let min_width = widths.iter().copied().fold(f64::INFINITY, f64::min);
    let max_width = widths.iter().copied().fold(0.0, f64::max);

    let mut value = objective(&x)?;
    let mut grad = vec![0.0; x.len()];
    let mut trial = vec![0.0; x.len()];
    let mut step: Option<f64> = None;
    for _ in 0..cfg.max_iters {
        gradient(&objective, &mut x, domain, cfg.fd_step, &mut grad)?;
        let gmax = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if gmax == 0.0 {
            break;
        }
        let mut alpha = step
            .map_or(0.25 * min_width / gmax, |a| 2.0 * a)
            .min(0.5 * max_width / gmax);
        let accepted = loop {
            for (k, t) in trial.iter_mut().enumerate() {
                *t = x[k] + alpha * grad[k];
            }
            for chunk in trial.chunks_exact_mut(dim) {
                domain.project(chunk);
            }
            let moved = trial
                .iter()
                .zip(&x)
                .fold(0.0f64, |a, (t, v)| a.max((t - v).abs()));
            if moved < cfg.step_tolerance {
                break None;
            }
            let candidate = objective(&trial)?;
            let predicted: f64 = trial
                .iter()
                .zip(&x)
                .zip(&grad)
                .map(|((t, v), g)| g * (t - v))
                .sum();
            if candidate >= value + ARMIJO * predicted {
                break Some(candidate);
            }
            alpha *= 0.5;
        };
        match accepted {
            Some(v) => {
                std::mem::swap(&mut x, &mut trial);
                value = v;
                step = Some(alpha);
            }
            None => break,
        }
    }
    Ok((x, value))
}

fn gradient<O>(
    objective: &O,
    x: &mut [f64],
    domain: &BoxDomain,
    h: f64,
    grad: &mut [f64],
) -> Result<()>
where
    O: Fn(&[f64]) -> Result<f64>,
{
    let dim = domain.dim();
    let f0 = objective(x)?;
    for k in 0..x.len() {
        let (lo, hi) = (domain.lower()[k % dim], domain.upper()[k % dim]);
        let orig = x[k];
        let up = (orig + h).min(hi);
        let down = (orig - h).max(lo);
        x[k] = up;
        let f_up = if up > orig { objective(x)? } else { f0 };
        x[k] = down;
        let f_down = if down < orig { objective(x)? } else { f0 };
        x[k] = orig;
        grad[k] = if up > down {
            (f_up - f_down) / (up - down)
        } else {
            0.0
        };
    }
    Ok(())
}
