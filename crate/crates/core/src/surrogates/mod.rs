//! Surrogate models: a k-NN classifier for binary labels and a Gaussian process
//! regressor for real-valued labels.

mod classifier;
mod gp;

pub use classifier::{classify_prob, ClassifierConfig, KnnClassifier};
pub use gp::{
    gp_fit, gp_fit_pool, thompson_sample, ucb_from_marginals, ucb_score, Covariance, FittedGp,
    GpConfig, LengthscaleGrid, PoolCovariance, PosteriorBatch, RbfCovariance,
};
