//! Kernels, kernel matrices and the symmetric eigensolver every score is built on.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Eigenvalues below this are treated as evidence of a non-PSD input.
pub const NEGATIVE_EIGENVALUE_TOLERANCE: f64 = -1e-8;

const MATRIX_TOLERANCE: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// A point of the search space, in problem units.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("point coordinates"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Similarity function with unit self-similarity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `exp(-|a - b|^2 / (2 l^2))`
    GaussianRbf { lengthscale: f64 },
    /// Cosine of the angle between the two coordinate vectors.
    Cosine,
    /// `1 - |a - b| / max_distance`, clamped to `[0, 1]`.
    DistanceDerived { max_distance: f64 },
}

impl KernelSpec {
    pub fn gaussian(lengthscale: f64) -> Result<Self> {
        let spec = KernelSpec::GaussianRbf { lengthscale };
        spec.validate()?;
        Ok(spec)
    }

    pub fn distance_derived(max_distance: f64) -> Result<Self> {
        let spec = KernelSpec::DistanceDerived { max_distance };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        match *self {
            KernelSpec::GaussianRbf { lengthscale } => check("lengthscale", lengthscale),
            KernelSpec::Cosine => Ok(()),
            KernelSpec::DistanceDerived { max_distance } => check("max_distance", max_distance),
        }
    }

    /// Kernel value on raw coordinate slices. Callers guarantee equal, finite dimensions.
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::GaussianRbf { lengthscale } => {
                let sq = squared_distance(a, b);
                (-sq / (2.0 * lengthscale * lengthscale)).exp()
            }
            KernelSpec::Cosine => {
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for (x, y) in a.iter().zip(b) {
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                if a == b {
                    return 1.0;
                }
                (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
            }
            KernelSpec::DistanceDerived { max_distance } => {
                (1.0 - squared_distance(a, b).sqrt() / max_distance).clamp(0.0, 1.0)
            }
        }
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

fn check_coords(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.iter().chain(b).any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("kernel arguments"));
    }
    if matches!(spec, KernelSpec::Cosine)
        && (a.iter().all(|&c| c == 0.0) || b.iter().all(|&c| c == 0.0))
    {
        return Err(Error::InvalidParameter(
            "cosine kernel is undefined for the zero vector".into(),
        ));
    }
    Ok(())
}

/// Evaluates `k(a, b)`.
pub fn kernel_eval(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64> {
    spec.validate()?;
    check_coords(spec, a, b)?;
    Ok(spec.eval_unchecked(a, b))
}

/// Symmetric PSD similarity matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    entries: DMatrix<f64>,
}

impl KernelMatrix {
    /// Wraps a matrix after checking symmetry, unit diagonal and the `[-1, 1]` range.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(Error::InvalidMatrix(format!(
                "{}x{} is not square",
                n,
                entries.ncols()
            )));
        }
        for i in 0..n {
            let d = entries[(i, i)];
            if !d.is_finite() || (d - 1.0).abs() > MATRIX_TOLERANCE {
                return Err(Error::InvalidMatrix(format!(
                    "diagonal entry {i} is {d}, expected 1"
                )));
            }
            for j in (i + 1)..n {
                let (a, b) = (entries[(i, j)], entries[(j, i)]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::NonFinite("kernel matrix"));
                }
                if (a - b).abs() > MATRIX_TOLERANCE {
                    return Err(Error::InvalidMatrix(format!(
                        "asymmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
                if a.abs() > 1.0 + MATRIX_TOLERANCE {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i}, {j}) = {a} outside [-1, 1]"
                    )));
                }
            }
        }
        Ok(KernelMatrix { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidMatrix("rows must all have length n".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        KernelMatrix {
            entries: DMatrix::identity(n, n),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Principal submatrix over `indices`, in the given order.
    pub fn submatrix(&self, indices: &[usize]) -> Result<KernelMatrix> {
        validate_indices(indices, self.len())?;
        Ok(self.submatrix_unchecked(indices))
    }

    pub(crate) fn submatrix_unchecked(&self, indices: &[usize]) -> KernelMatrix {
        let k = indices.len();
        KernelMatrix {
            entries: DMatrix::from_fn(k, k, |a, b| self.entries[(indices[a], indices[b])]),
        }
    }
}

/// Rejects out-of-range or repeated indices.
pub fn validate_indices(indices: &[usize], len: usize) -> Result<()> {
    let mut seen = vec![false; len];
    for &i in indices {
        if i >= len {
            return Err(Error::IndexOutOfRange { index: i, len });
        }
        if seen[i] {
            return Err(Error::DuplicateIndex(i));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Builds the pairwise kernel matrix of `items`.
pub fn build_kernel_matrix<P: AsRef<[f64]>>(
    spec: &KernelSpec,
    items: &[P],
) -> Result<KernelMatrix> {
    spec.validate()?;
    let first = items
        .first()
        .ok_or(Error::Empty("kernel matrix items"))?
        .as_ref();
    for item in items {
        check_coords(spec, first, item.as_ref())?;
    }
    Ok(build_kernel_matrix_unchecked(spec, items))
}

pub(crate) fn build_kernel_matrix_unchecked<P: AsRef<[f64]>>(
    spec: &KernelSpec,
    items: &[P],
) -> KernelMatrix {
    let n = items.len();
    let mut entries = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = spec.eval_unchecked(items[i].as_ref(), items[j].as_ref());
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    KernelMatrix { entries }
}

/// Eigenvalues of a kernel matrix, descending, with their normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl Spectrum {
    /// Clamps jitter-level negative eigenvalues and normalizes by the eigenvalue sum.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if let Some(&worst) = eigenvalues.iter().min_by(|a, b| a.total_cmp(b)) {
            if worst < NEGATIVE_EIGENVALUE_TOLERANCE {
                return Err(Error::NotPositiveSemidefinite { eigenvalue: worst });
            }
        }
        for v in eigenvalues.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = eigenvalues.iter().sum();
        let normalized = if total > 0.0 {
            eigenvalues.iter().map(|v| v / total).collect()
        } else {
            vec![0.0; eigenvalues.len()]
        };
        Ok(Spectrum {
            eigenvalues,
            normalized,
        })
    }
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues descending.
/// Column `i` of `vectors` pairs with `values[i]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Option<DMatrix<f64>>,
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below `1e-12 n`.
pub fn jacobi_eigen(matrix: &DMatrix<f64>, with_vectors: bool) -> Result<SymmetricEigen> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::InvalidMatrix(
            "eigensolver needs a square matrix".into(),
        ));
    }
    // row-major working copy
    let mut a: Vec<f64> = (0..n * n).map(|k| matrix[(k / n, k % n)]).collect();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigensolver input"));
    }
    let mut v = if with_vectors {
        let mut id = vec![0.0; n * n];
        for i in 0..n {
            id[i * n + i] = 1.0;
        }
        Some(id)
    } else {
        None
    };

    let threshold = 1e-12 * n as f64;
    let mut converged = n <= 1;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if (2.0 * off).sqrt() < threshold {
            converged = true;
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let new_rp = c * arp - s * arq;
                    let new_rq = s * arp + c * arq;
                    a[r * n + p] = new_rp;
                    a[p * n + r] = new_rp;
                    a[r * n + q] = new_rq;
                    a[q * n + r] = new_rq;
                }
                if let Some(v) = v.as_mut() {
                    for r in 0..n {
                        let vrp = v[r * n + p];
                        let vrq = v[r * n + q];
                        v[r * n + p] = c * vrp - s * vrq;
                        v[r * n + q] = s * vrp + c * vrq;
                    }
                }
            }
        }
    }
    if !converged {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if (2.0 * off).sqrt() >= threshold {
            return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = v.map(|v| DMatrix::from_fn(n, n, |r, c| v[r * n + order[c]]));
    Ok(SymmetricEigen { values, vectors })
}

/// Spectrum of a kernel matrix.
pub fn eigen_symmetric(m: &KernelMatrix) -> Result<Spectrum> {
    let eig = jacobi_eigen(&m.entries, false)?;
    Spectrum::from_eigenvalues(eig.values)
}
