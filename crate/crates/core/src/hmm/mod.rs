//! Exact inference for finite-state hidden Markov models.
//!
//! Forward and backward passes use per-step normalization; the normalizers
//! are accumulated in log space to form the log-likelihood.

mod em;
mod enumerate;
mod filter;
mod viterbi;

pub use em::{baum_welch_step, fit_em, BaumWelchStep, EmFit};
pub use enumerate::{exact_posterior_enumeration, EnumerationResult, ENUMERATION_LIMIT};
pub use filter::{
    backward_smooth, forward_filter, predict_states, CategoricalPosteriorSequence, SmoothedSequence,
};
pub use viterbi::viterbi;
