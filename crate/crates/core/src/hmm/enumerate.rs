//! Brute-force posterior by enumerating every hidden path.
//!
//! Used as the reference for the recursions; it shares no code with them
//! beyond the model type.

use crate::error::{Error, Result};
use crate::model::{DiscreteHmm, ObservationSeries};
use crate::numeric::log_sum_exp_nonempty;

/// Largest number of paths the enumeration will visit.
pub const ENUMERATION_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationResult {
    pub smoothed: Vec<Vec<f64>>,
    pub filtered: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    /// Highest-probability path. Among exact ties the path that is smallest
    /// when compared from the last state backwards wins, which is the order
    /// Viterbi's lower-index backtracking produces.
    pub map_path: Vec<usize>,
    pub map_log_probability: f64,
}

/// Joint log-probabilities of all `K^len` prefixes of length `len`.
///
/// Path index `p` encodes `x_s = (p / K^s) % K`, so `x_1` varies fastest
/// and the final state is the most significant digit.
fn prefix_log_joints(model: &DiscreteHmm, symbols: &[usize], len: usize) -> Vec<f64> {
    let k = model.states();
    let count = k.pow(len as u32);
    let mut out = Vec::with_capacity(count);
    let mut path = vec![0usize; len];
    for p in 0..count {
        let mut rem = p;
        for x in path.iter_mut() {
            *x = rem % k;
            rem /= k;
        }
        let mut lw = model.initial[path[0]].ln() + model.emission[(path[0], symbols[0])].ln();
        for s in 1..len {
            lw = lw
                + model.transition[(path[s - 1], path[s])].ln()
                + model.emission[(path[s], symbols[s])].ln();
        }
        out.push(lw);
    }
    out
}

fn marginal_at(log_joints: &[f64], k: usize, s: usize) -> Vec<f64> {
    let total = log_sum_exp_nonempty(log_joints);
    let stride = k.pow(s as u32);
    let mut out = vec![0.0; k];
    for (p, &lw) in log_joints.iter().enumerate() {
        out[(p / stride) % k] += (lw - total).exp();
    }
    out
}

pub fn exact_posterior_enumeration(
    model: &DiscreteHmm,
    obs: &ObservationSeries,
) -> Result<EnumerationResult> {
    let symbols = model.check_observations(obs)?;
    let k = model.states();
    let n = symbols.len();
    let paths = (k as f64).powi(n as i32);
    if paths > ENUMERATION_LIMIT as f64 {
        return Err(Error::TooLarge {
            paths,
            limit: ENUMERATION_LIMIT,
        });
    }

    let mut filtered = Vec::with_capacity(n);
    for len in 1..=n {
        let lj = prefix_log_joints(model, symbols, len);
        if log_sum_exp_nonempty(&lj) == f64::NEG_INFINITY {
            return Err(Error::ImpossibleObservation { t: len - 1 });
        }
        filtered.push(marginal_at(&lj, k, len - 1));
    }

    let full = prefix_log_joints(model, symbols, n);
    let log_likelihood = log_sum_exp_nonempty(&full);
    let smoothed = (0..n).map(|s| marginal_at(&full, k, s)).collect();

    let mut best = 0;
    for (p, &lw) in full.iter().enumerate() {
        if lw > full[best] {
            best = p;
        }
    }
    let map_path = (0..n).map(|s| (best / k.pow(s as u32)) % k).collect();

    Ok(EnumerationResult {
        smoothed,
        filtered,
        log_likelihood,
        map_path,
        map_log_probability: full[best],
    })
}
