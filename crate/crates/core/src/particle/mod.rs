//! Bootstrap particle filtering for models given by a sampler and an
//! observation density.

mod filter;
mod models;
mod resample;

pub use filter::{
    bootstrap_filter, fixed_lag_smoother, pf_loglik, LogLikelihoodEstimate, ParticleFilterResult,
    ParticleFilterSettings, ParticleSet,
};
pub use models::{EmbeddedHmm, GaussianStateSpace, GenericStateSpaceModel, StateSpaceModel};
pub use resample::{
    effective_sample_size, multinomial_resample, systematic_resample, ResampleScheme,
};
