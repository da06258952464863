use rand::Rng;

use crate::error::{Error, Result};

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::Empty("box bounds"));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::NonFinite("box bounds"));
            }
            if lo >= hi {
                return Err(Error::InvalidParameter(format!(
                    "box lower bound {lo} must be below upper {hi}"
                )));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    /// `[lo, hi]^dim`
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn unit(dim: usize) -> Result<Self> {
        Self::cube(dim, 0.0, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// Euclidean projection (coordinatewise clamp).
    pub fn project(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| (v - lo) / (hi - lo))
            .collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| (lo + v * (hi - lo)).clamp(*lo, *hi))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(BoxDomain::new(vec![0.0], vec![0.0]).is_err());
        assert!(BoxDomain::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(BoxDomain::new(vec![f64::NEG_INFINITY], vec![1.0]).is_err());
        assert!(BoxDomain::new(vec![], vec![]).is_err());
    }

    #[test]
    fn unit_mapping_round_trips() {
        let d = BoxDomain::new(vec![-1.0, 2.0], vec![1.0, 6.0]).unwrap();
        let x = vec![0.5, 3.0];
        let u = d.to_unit(&x);
        assert_eq!(u, vec![0.75, 0.25]);
        assert_eq!(d.from_unit(&u), x);
        let mut y = vec![5.0, -5.0];
        d.project(&mut y);
        assert_eq!(y, vec![1.0, 2.0]);
        assert!(d.contains(&y));
    }
}
