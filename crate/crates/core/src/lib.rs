//! Filtering, smoothing, prediction and likelihood inference for
//! finite-state hidden Markov models and linear-Gaussian state-space
//! models, with bootstrap particle filtering for general models and
//! diagnostics for how fast the filter forgets its initial law.

pub mod error;
pub mod estimation;
pub mod forgetting;
pub mod hmm;
pub mod kalman;
pub mod model;
pub mod numeric;
pub mod particle;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{
    validate_model, DiscreteHmm, LinearGaussianModel, Model, ObservationSeries, StatePath,
    ValidationReport, Violation,
};
pub use numeric::{log_sum_exp, normalize_log_weights};
pub use rng::SeededGenerator;
pub use simulate::{simulate_hmm, simulate_lgssm};
