//! Sufficient training set size estimation.
//!
//! The pipeline subsamples each dataset on a fixed size grid under stratified
//! cross-validation, keeps the best accuracy over five classifiers for every
//! training subset, builds exact order-statistic confidence bounds per size,
//! fits inverse power law learning curves `f(x) = alpha - beta * x^gamma` and
//! solves for the smallest size whose lower-bound accuracy is within a
//! tolerance of the estimated asymptote. Corpus-level tools relate the
//! resulting sizes to dataset characteristics and turn them into
//! recommendations.

pub mod analysis;
pub mod classifiers;
pub mod curves;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod matrix;
pub mod pipeline;
pub mod sampling;
pub mod seeding;

pub use error::{Error, Result};
pub use matrix::Matrix;
