use crate::error::{Error, Result};
use crate::spectral::squared_distance;

/// k-nearest-neighbour classifier with additive smoothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    pub k_neighbors: usize,
    pub smoothing: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            k_neighbors: 15,
            smoothing: 1.0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::InvalidParameter(
                "k_neighbors must be at least 1".into(),
            ));
        }
        if !(self.smoothing.is_finite() && self.smoothing > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "smoothing must be positive, got {}",
                self.smoothing
            )));
        }
        Ok(())
    }
}

/// `Pr(y = 1 | x, D)` from binary-labelled training points.
#[derive(Debug, Clone)]
pub struct KnnClassifier {
    points: Vec<Vec<f64>>,
    labels: Vec<bool>,
    cfg: ClassifierConfig,
}

impl KnnClassifier {
    pub fn fit(points: Vec<Vec<f64>>, labels: Vec<bool>, cfg: ClassifierConfig) -> Result<Self> {
        cfg.validate()?;
        if points.is_empty() {
            return Err(Error::Empty("classifier training data"));
        }
        if points.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: labels.len(),
            });
        }
        let dim = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.len(),
            });
        }
        Ok(KnnClassifier {
            points,
            labels,
            cfg,
        })
    }

    /// `(p + g) / (m + 2g)` over the `k` nearest training points, nearest-first with
    /// ties going to the lower training index.
    pub fn prob(&self, query: &[f64]) -> f64 {
        let mut dists: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (squared_distance(p, query), i))
            .collect();
        let k = self.cfg.k_neighbors.min(dists.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, cmp);
        }
        let positives = dists[..k].iter().filter(|(_, i)| self.labels[*i]).count();
        let g = self.cfg.smoothing;
        (positives as f64 + g) / (k as f64 + 2.0 * g)
    }
}

/// One-shot form of [`KnnClassifier::prob`].
pub fn classify_prob(
    points: &[Vec<f64>],
    labels: &[bool],
    cfg: &ClassifierConfig,
    query: &[f64],
) -> Result<f64> {
    let model = KnnClassifier::fit(points.to_vec(), labels.to_vec(), *cfg)?;
    if query.len() != points[0].len() {
        return Err(Error::DimensionMismatch {
            expected: points[0].len(),
            found: query.len(),
        });
    }
    Ok(model.prob(query))
}
