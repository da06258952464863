//! Named synthetic problems shared by `gen` and run configurations.

use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use qvs::problems::{
    clustered_binary_pool, two_group_pool, BinaryPool, ClusterPoolParams, MultiPeak, Objective,
    RealPool, TwoGroupParams,
};
use qvs::BoxDomain;

use crate::dataset::Dataset;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(try_from = "String")]
pub enum Generator {
    TwoCluster,
    Ring,
    MultiPeak,
    TwoGroup,
}

impl Generator {
    pub const ALL: [Generator; 4] = [
        Generator::TwoCluster,
        Generator::Ring,
        Generator::MultiPeak,
        Generator::TwoGroup,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Generator::TwoCluster => "two-cluster-binary",
            Generator::Ring => "ring-of-clusters-binary",
            Generator::MultiPeak => "multi-peak-continuous",
            Generator::TwoGroup => "two-group-discrete-pool",
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Generator {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Generator::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Generator::ALL.iter().map(|g| g.name()).collect();
                CliError::config(format!(
                    "unknown generator `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

impl TryFrom<String> for Generator {
    type Error = CliError;

    fn try_from(s: String) -> CliResult<Self> {
        s.parse()
    }
}

/// Generator knobs; anything left unset takes the generator's default.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub pool_size: Option<usize>,
    pub positive_rate: Option<f64>,
    pub centers: Option<Vec<Vec<f64>>>,
    pub clusters: Option<usize>,
    pub radius: Option<f64>,
    pub spread: Option<f64>,
    pub heights: Option<Vec<f64>>,
    pub width: Option<f64>,
    pub noise: Option<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

pub enum Problem {
    Binary(BinaryPool),
    Real(RealPool),
    Continuous(MultiPeak),
}

impl Problem {
    pub fn pool_size(&self) -> Option<usize> {
        match self {
            Problem::Binary(p) => Some(p.len()),
            Problem::Real(p) => Some(p.len()),
            Problem::Continuous(_) => None,
        }
    }

    pub fn as_core(&self) -> qvs::campaigns::Problem<'_> {
        match self {
            Problem::Binary(p) => qvs::campaigns::Problem::Binary(p),
            Problem::Real(p) => qvs::campaigns::Problem::Real(p),
            Problem::Continuous(f) => qvs::campaigns::Problem::Continuous(f),
        }
    }
}

pub fn build(generator: Generator, params: &GeneratorParams, seed: u64) -> CliResult<Problem> {
    let problem = match generator {
        Generator::TwoCluster | Generator::Ring => {
            let mut p = match generator {
                Generator::TwoCluster => ClusterPoolParams::two_cluster(),
                _ => ClusterPoolParams::ring(
                    params.clusters.unwrap_or(4),
                    params.radius.unwrap_or(0.6),
                ),
            };
            if let Some(n) = params.pool_size {
                p.pool_size = n;
            }
            if let Some(r) = params.positive_rate {
                p.positive_rate = r;
            }
            if let Some(c) = &params.centers {
                p.centers = c.clone();
            }
            if let Some(s) = params.spread {
                p.spread = s;
            }
            Problem::Binary(clustered_binary_pool(&p, seed)?)
        }
        Generator::TwoGroup => {
            let mut p = TwoGroupParams::default();
            if let Some(n) = params.pool_size {
                p.pool_size = n;
            }
            if let Some(c) = &params.centers {
                p.centers = c.clone();
            }
            if let Some(w) = params.width {
                p.width = w;
            }
            if let Some(n) = params.noise {
                p.noise = n;
            }
            Problem::Real(two_group_pool(&p, seed)?)
        }
        Generator::MultiPeak => Problem::Continuous(multi_peak(params, seed)?),
    };
    Ok(problem)
}

fn multi_peak(params: &GeneratorParams, seed: u64) -> CliResult<MultiPeak> {
    let base = MultiPeak::three_equal_peaks();
    let domain = match (&params.lower, &params.upper) {
        (None, None) => base.domain().clone(),
        (Some(lo), Some(hi)) => BoxDomain::new(lo.clone(), hi.clone())?,
        _ => return Err(CliError::config("set both `lower` and `upper` or neither")),
    };
    let centers = params
        .centers
        .clone()
        .unwrap_or_else(|| base.centers().to_vec());
    let heights = params
        .heights
        .clone()
        .unwrap_or_else(|| vec![1.0; centers.len()]);
    let f = MultiPeak::new(
        domain,
        centers,
        heights,
        params.width.unwrap_or(base.width()),
    )?;
    Ok(f.with_noise(params.noise.unwrap_or(0.0), seed)?)
}

/// Dataset form of a generated problem. A continuous objective is sampled uniformly
/// at `pool_size` points (default 500).
pub fn to_dataset(problem: &Problem, params: &GeneratorParams, seed: u64) -> Dataset {
    match problem {
        Problem::Binary(p) => Dataset {
            points: p.points().to_vec(),
            labels: Some(p.labels().to_vec()),
            values: None,
        },
        Problem::Real(p) => Dataset {
            points: p.points().to_vec(),
            labels: None,
            values: Some(p.values().to_vec()),
        },
        Problem::Continuous(f) => {
            let n = params.pool_size.unwrap_or(500);
            let points = qvs::problems::draw_initial_points(f.domain(), n, seed);
            let values = points.iter().map(|x| f.evaluate(x)).collect();
            Dataset {
                points,
                labels: None,
                values: Some(values),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for g in Generator::ALL {
            assert_eq!(g.name().parse::<Generator>().unwrap(), g);
        }
        assert!("spiral".parse::<Generator>().is_err());
    }

    #[test]
    fn positive_count_uses_floor() {
        let params = GeneratorParams {
            pool_size: Some(500),
            positive_rate: Some(0.1),
            ..Default::default()
        };
        let Problem::Binary(p) = build(Generator::TwoCluster, &params, 1).unwrap() else {
            panic!()
        };
        assert_eq!(p.labels().iter().filter(|&&l| l).count(), 50);
        let params = GeneratorParams {
            pool_size: Some(99),
            positive_rate: Some(0.1),
            ..Default::default()
        };
        let Problem::Binary(p) = build(Generator::Ring, &params, 1).unwrap() else {
            panic!()
        };
        assert_eq!(p.labels().iter().filter(|&&l| l).count(), 9);
    }

    #[test]
    fn single_peak_at_origin_has_unit_height() {
        let params = GeneratorParams {
            centers: Some(vec![vec![0.0, 0.0]]),
            heights: Some(vec![1.0]),
            lower: Some(vec![-1.0, -1.0]),
            upper: Some(vec![1.0, 1.0]),
            ..Default::default()
        };
        let Problem::Continuous(f) = build(Generator::MultiPeak, &params, 0).unwrap() else {
            panic!()
        };
        assert_eq!(f.evaluate(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn bad_rates_are_config_errors() {
        let params = GeneratorParams {
            positive_rate: Some(1.5),
            ..Default::default()
        };
        assert_eq!(
            build(Generator::TwoCluster, &params, 0)
                .err()
                .unwrap()
                .exit_code(),
            2
        );
    }
}
