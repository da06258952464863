//! Spectrum of a kernel matrix grown by one item.
//!
//! With `K_S = Q diag(d) Q^T` known, appending item `x` gives a matrix similar to the
//! arrowhead `[[diag(d), z], [z^T, k(x, x)]]` with `z = Q^T k(S, x)`. Its eigenvalues
//! interlace `d` and are the roots of a monotone secular function, so each candidate
//! costs O(m^2) instead of a fresh O(m^3) eigendecomposition.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::{jacobi_eigen, KernelMatrix, NEGATIVE_EIGENVALUE_TOLERANCE};
use crate::vendi::{vendi_from_eigenvalues, Order};

const MAX_ROOT_ITERS: usize = 200;

/// Eigenvalues of `[[diag(d), z], [z^T, alpha]]`, unsorted, written into `out`.
pub(crate) fn arrowhead_eigenvalues(
    d: &[f64],
    z: &[f64],
    alpha: f64,
    out: &mut Vec<f64>,
    work: &mut Vec<(f64, f64)>,
) {
    debug_assert_eq!(d.len(), z.len());
    out.clear();
    work.clear();
    let scale = d
        .iter()
        .fold(alpha.abs(), |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = 8.0 * f64::EPSILON * scale;

    let mut pairs: Vec<(f64, f64)> = d.iter().copied().zip(z.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (di, zi) in pairs {
        if zi.abs() <= tol {
            out.push(di);
            continue;
        }
        if let Some(last) = work.last_mut() {
            if di - last.0 <= tol {
                // rotate the coupling onto one of the (numerically) equal poles
                last.1 = last.1.hypot(zi);
                out.push(di);
                continue;
            }
        }
        work.push((di, zi));
    }

    if work.is_empty() {
        out.push(alpha);
        return;
    }
    let znorm = work.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt();
    let r = work.len();
    let lowest = work[0].0.min(alpha) - znorm - tol;
    let highest = work[r - 1].0.max(alpha) + znorm + tol;
    let abs_tol = f64::EPSILON * scale;
    for k in 0..=r {
        let lo = if k == 0 { lowest } else { work[k - 1].0 };
        let hi = if k == r { highest } else { work[k].0 };
        out.push(secular_root(work, alpha, lo, hi, abs_tol));
    }
}

/// Root of `g(mu) = alpha - mu - sum z_i^2 / (d_i - mu)` inside `(lo, hi)`, where `g`
/// decreases strictly. Newton steps, falling back to bisection outside the bracket.
fn secular_root(poles: &[(f64, f64)], alpha: f64, lo: f64, hi: f64, abs_tol: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_ROOT_ITERS {
        let mut g = alpha - x;
        let mut dg = -1.0;
        for &(d, z) in poles {
            let inv = 1.0 / (d - x);
            let t = z * z * inv;
            g -= t;
            dg -= t * inv;
        }
        if g == 0.0 {
            return x;
        }
        if g > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - g / dg;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let tol = abs_tol + 2.0 * f64::EPSILON * next.abs();
        if (next - x).abs() <= tol || hi - lo <= tol {
            return next;
        }
        x = next;
    }
    x
}

/// Precomputed eigendecomposition of a base set, for scoring one-item extensions.
pub(crate) struct SetExtension<'k> {
    kernel: &'k KernelMatrix,
    base: Vec<usize>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    score_sum: f64,
    coupling: Vec<f64>,
    spectrum: Vec<f64>,
    work: Vec<(f64, f64)>,
}

impl<'k> SetExtension<'k> {
    pub(crate) fn new(
        kernel: &'k KernelMatrix,
        base: &[usize],
        scores: Option<&[f64]>,
    ) -> Result<Self> {
        let m = base.len();
        let (eigenvalues, eigenvectors) = if m == 0 {
            (Vec::new(), DMatrix::zeros(0, 0))
        } else {
            let sub = kernel.submatrix_unchecked(base);
            let eig = jacobi_eigen(sub.as_matrix(), true)?;
            if let Some(&worst) = eig.values.last() {
                if worst < NEGATIVE_EIGENVALUE_TOLERANCE {
                    return Err(Error::NotPositiveSemidefinite { eigenvalue: worst });
                }
            }
            (eig.values, eig.vectors.expect("vectors requested"))
        };
        let score_sum = scores.map_or(0.0, |s| base.iter().map(|&i| s[i]).sum());
        Ok(SetExtension {
            kernel,
            base: base.to_vec(),
            eigenvalues,
            eigenvectors,
            score_sum,
            coupling: vec![0.0; m],
            spectrum: Vec::with_capacity(m + 1),
            work: Vec::with_capacity(m),
        })
    }

    /// Eigenvalues of the base kernel extended by `candidate`.
    pub(crate) fn extended_spectrum(&mut self, candidate: usize) -> &[f64] {
        let m = self.base.len();
        let alpha = self.kernel.get(candidate, candidate);
        if m == 0 {
            self.spectrum.clear();
            self.spectrum.push(alpha);
            return &self.spectrum;
        }
        for j in 0..m {
            let col = self.eigenvectors.column(j);
            let mut acc = 0.0;
            for (i, &b) in self.base.iter().enumerate() {
                acc += col[i] * self.kernel.get(b, candidate);
            }
            self.coupling[j] = acc;
        }
        arrowhead_eigenvalues(
            &self.eigenvalues,
            &self.coupling,
            alpha,
            &mut self.spectrum,
            &mut self.work,
        );
        &self.spectrum
    }

    pub(crate) fn vendi_with(&mut self, candidate: usize, order: Order) -> f64 {
        let spectrum = self.extended_spectrum(candidate);
        vendi_from_eigenvalues(spectrum, order)
    }

    pub(crate) fn qvs_with(&mut self, candidate: usize, score: f64, order: Order) -> f64 {
        let mean = (self.score_sum + score) / (self.base.len() + 1) as f64;
        mean * self.vendi_with(candidate, order)
    }
}
