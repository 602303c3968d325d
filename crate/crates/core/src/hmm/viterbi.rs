use crate::error::{Error, Result};
use crate::model::{DiscreteHmm, ObservationSeries, StatePath};

/// Most probable hidden path and its joint log-probability.
///
/// Ties go to the lower state index, both for the final state and at every
/// backtracking step.
pub fn viterbi(model: &DiscreteHmm, obs: &ObservationSeries) -> Result<(StatePath, f64)> {
    let symbols = model.check_observations(obs)?;
    let k = model.states();
    let n = symbols.len();
    let log_trans: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| model.transition[(i, j)].ln()).collect())
        .collect();
    let log_emit = |i: usize, y: usize| model.emission[(i, y)].ln();

    let mut delta: Vec<f64> = (0..k)
        .map(|i| model.initial[i].ln() + log_emit(i, symbols[0]))
        .collect();
    if delta.iter().all(|&d| d == f64::NEG_INFINITY) {
        return Err(Error::ImpossibleObservation { t: 0 });
    }
    let mut backptr = vec![vec![0usize; k]; n];
    for t in 1..n {
        let y = symbols[t];
        let mut next = vec![f64::NEG_INFINITY; k];
        for j in 0..k {
            let mut best = 0;
            let mut best_val = f64::NEG_INFINITY;
            for (i, d) in delta.iter().enumerate() {
                let v = d + log_trans[i][j];
                if v > best_val {
                    best_val = v;
                    best = i;
                }
            }
            backptr[t][j] = best;
            next[j] = best_val + log_emit(j, y);
        }
        if next.iter().all(|&d| d == f64::NEG_INFINITY) {
            return Err(Error::ImpossibleObservation { t });
        }
        delta = next;
    }

    let mut last = 0;
    for (i, &d) in delta.iter().enumerate() {
        if d > delta[last] {
            last = i;
        }
    }
    let mut path = vec![0usize; n];
    path[n - 1] = last;
    for t in (1..n).rev() {
        path[t - 1] = backptr[t][path[t]];
    }
    Ok((StatePath::Discrete(path), delta[last]))
}
