//! Quality-weighted Vendi scores and the diversity-aware experimental-design loops
//! built on them: batch active search and trust-region / discrete Bayesian optimization.

pub mod campaigns;
pub mod domain;
pub mod error;
pub mod evaluation;
pub mod problems;
pub mod select;
pub mod spectral;
pub mod surrogates;
pub mod vendi;

pub use domain::BoxDomain;
pub use error::{Error, Result};
pub use spectral::{
    build_kernel_matrix, eigen_symmetric, kernel_eval, KernelMatrix, KernelSpec, Point, Spectrum,
};
pub use vendi::{
    quality_weighted_vendi_score, vendi_score, vendi_score_of_subset, Order, ScoredSet,
};
