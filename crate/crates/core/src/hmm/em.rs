use nalgebra::DMatrix;

use super::filter::{backward_smooth, forward_filter};
use crate::error::{Error, Result};
use crate::model::{DiscreteHmm, ObservationSeries};

/// Outcome of one EM update.
#[derive(Debug, Clone, PartialEq)]
pub struct BaumWelchStep {
    pub model: DiscreteHmm,
    /// Log-likelihood of the input model.
    pub log_likelihood: f64,
    /// Expected transition counts `sum_t P(X_t = i, X_{t+1} = j | Y)`.
    pub transition_counts: DMatrix<f64>,
    /// Expected emission counts `sum_t P(X_t = i | Y) [y_t = m]`.
    pub emission_counts: DMatrix<f64>,
    /// States whose transition rows had zero expected occupancy and were
    /// left at their input values.
    pub frozen_transition_rows: Vec<usize>,
    /// Same for emission rows.
    pub frozen_emission_rows: Vec<usize>,
}

fn normalized_rows(
    counts: &DMatrix<f64>,
    fallback: &DMatrix<f64>,
    frozen: &mut Vec<usize>,
) -> DMatrix<f64> {
    let mut out = fallback.clone();
    for i in 0..counts.nrows() {
        let total: f64 = counts.row(i).iter().sum();
        if total > 0.0 && total.is_finite() {
            for j in 0..counts.ncols() {
                out[(i, j)] = counts[(i, j)] / total;
            }
        } else {
            frozen.push(i);
        }
    }
    out
}

/// One Baum–Welch iteration: forward-backward E-step, count-ratio M-step.
pub fn baum_welch_step(model: &DiscreteHmm, obs: &ObservationSeries) -> Result<BaumWelchStep> {
    let forward = forward_filter(model, obs, None)?;
    let smooth = backward_smooth(model, obs, &forward)?;
    let symbols = obs.as_symbols()?;
    let k = model.states();
    let m = model.symbols();

    let mut transition_counts = DMatrix::zeros(k, k);
    for slab in &smooth.pairwise {
        for i in 0..k {
            for j in 0..k {
                transition_counts[(i, j)] += slab[i][j];
            }
        }
    }
    let mut emission_counts = DMatrix::zeros(k, m);
    for (row, &y) in smooth.smoothed.iter().zip(symbols) {
        for i in 0..k {
            emission_counts[(i, y)] += row[i];
        }
    }

    let mut frozen_transition_rows = Vec::new();
    let mut frozen_emission_rows = Vec::new();
    let transition = normalized_rows(
        &transition_counts,
        &model.transition,
        &mut frozen_transition_rows,
    );
    let emission = normalized_rows(&emission_counts, &model.emission, &mut frozen_emission_rows);
    let init_total: f64 = smooth.smoothed[0].iter().sum();
    let initial = smooth.smoothed[0].iter().map(|p| p / init_total).collect();

    Ok(BaumWelchStep {
        model: DiscreteHmm {
            initial,
            transition,
            emission,
        },
        log_likelihood: forward.log_likelihood,
        transition_counts,
        emission_counts,
        frozen_transition_rows,
        frozen_emission_rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub model: DiscreteHmm,
    /// Log-likelihood of every accepted model, starting with the input.
    pub trace: Vec<f64>,
    /// Number of accepted updates, `trace.len() - 1`.
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates Baum–Welch until an update gains less than `tol` in
/// log-likelihood or `max_iter` updates have been accepted.
///
/// An update whose gain falls below `tol` is not accepted: the returned
/// model is the last one whose log-likelihood appears in `trace`.
pub fn fit_em(
    model0: &DiscreteHmm,
    obs: &ObservationSeries,
    tol: f64,
    max_iter: usize,
) -> Result<EmFit> {
    if !(tol > 0.0) {
        return Err(Error::Usage(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::Usage("max_iter must be at least 1".into()));
    }
    let first = baum_welch_step(model0, obs)?;
    let mut current = model0.clone();
    let mut trace = vec![first.log_likelihood];
    let mut candidate = first.model;
    let mut converged = false;

    while trace.len() <= max_iter {
        let step = baum_welch_step(&candidate, obs)?;
        let gain = step.log_likelihood - trace[trace.len() - 1];
        if gain < tol {
            converged = true;
            break;
        }
        trace.push(step.log_likelihood);
        current = std::mem::replace(&mut candidate, step.model);
    }
    let iterations = trace.len() - 1;
    Ok(EmFit {
        model: current,
        trace,
        iterations,
        converged,
    })
}
