use crate::error::{Error, Result};
use crate::model::{DiscreteHmm, ObservationSeries, PROBABILITY_TOLERANCE};

/// Filtered laws `P(X_t | Y_1..Y_t)` plus the log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalPosteriorSequence {
    /// Row `t` is the filtered distribution at time `t`.
    pub filtered: Vec<Vec<f64>>,
    /// Per-step normalizers `p(y_t | y_1..y_{t-1})`.
    pub normalizers: Vec<f64>,
    pub log_likelihood: f64,
}

/// Smoothed laws `P(X_t | Y_1..Y_T)` and pairwise laws of consecutive states.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedSequence {
    pub smoothed: Vec<Vec<f64>>,
    /// `pairwise[t][i][j] = P(X_t = i, X_{t+1} = j | Y_1..Y_T)`, `T - 1` slabs.
    pub pairwise: Vec<Vec<Vec<f64>>>,
}

fn check_probability_vector(p: &[f64], k: usize, what: &str) -> Result<()> {
    if p.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "{what} has length {}, expected {k}",
            p.len()
        )));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Domain(format!(
            "{what} has a negative or non-finite entry"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE * 1e2 {
        return Err(Error::Domain(format!("{what} sums to {sum}")));
    }
    Ok(())
}

/// `row · transition`.
pub(crate) fn propagate(model: &DiscreteHmm, row: &[f64]) -> Vec<f64> {
    let k = model.states();
    let mut out = vec![0.0; k];
    for (i, &p) in row.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o += p * model.transition[(i, j)];
        }
    }
    out
}

/// Scaled forward recursion.
///
/// `initial_override` replaces the model's initial law when given; the
/// forgetting diagnostics launch the same filter from different priors.
pub fn forward_filter(
    model: &DiscreteHmm,
    obs: &ObservationSeries,
    initial_override: Option<&[f64]>,
) -> Result<CategoricalPosteriorSequence> {
    let symbols = model.check_observations(obs)?;
    let k = model.states();
    let initial = match initial_override {
        Some(p) => {
            check_probability_vector(p, k, "initial override")?;
            p
        }
        None => &model.initial,
    };

    let mut filtered: Vec<Vec<f64>> = Vec::with_capacity(symbols.len());
    let mut normalizers = Vec::with_capacity(symbols.len());
    let mut log_likelihood = 0.0;
    for (t, &y) in symbols.iter().enumerate() {
        let mut row = if t == 0 {
            initial.to_vec()
        } else {
            propagate(model, &filtered[t - 1])
        };
        let mut norm = 0.0;
        for (i, p) in row.iter_mut().enumerate() {
            *p *= model.emission[(i, y)];
            norm += *p;
        }
        if norm <= 0.0 {
            return Err(Error::ImpossibleObservation { t });
        }
        for p in row.iter_mut() {
            *p /= norm;
        }
        log_likelihood += norm.ln();
        normalizers.push(norm);
        filtered.push(row);
    }
    Ok(CategoricalPosteriorSequence {
        filtered,
        normalizers,
        log_likelihood,
    })
}

/// Scaled backward recursion combined with the forward pass.
pub fn backward_smooth(
    model: &DiscreteHmm,
    obs: &ObservationSeries,
    forward: &CategoricalPosteriorSequence,
) -> Result<SmoothedSequence> {
    let symbols = model.check_observations(obs)?;
    let n = symbols.len();
    if forward.filtered.len() != n || forward.normalizers.len() != n {
        return Err(Error::Usage(format!(
            "forward pass has {} steps but the series has {n}",
            forward.filtered.len()
        )));
    }
    let k = model.states();

    // beta[t][i] = p(y_{t+1..T} | x_t = i) / prod_{s>t} c_s
    let mut beta = vec![vec![1.0; k]; n];
    for t in (0..n - 1).rev() {
        let y = symbols[t + 1];
        let c = forward.normalizers[t + 1];
        for i in 0..k {
            let mut acc = 0.0;
            for j in 0..k {
                acc += model.transition[(i, j)] * model.emission[(j, y)] * beta[t + 1][j];
            }
            beta[t][i] = acc / c;
        }
    }

    let smoothed: Vec<Vec<f64>> = (0..n)
        .map(|t| {
            forward.filtered[t]
                .iter()
                .zip(&beta[t])
                .map(|(f, b)| f * b)
                .collect()
        })
        .collect();

    let mut pairwise = Vec::with_capacity(n.saturating_sub(1));
    for t in 0..n.saturating_sub(1) {
        let y = symbols[t + 1];
        let c = forward.normalizers[t + 1];
        let slab: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        forward.filtered[t][i]
                            * model.transition[(i, j)]
                            * model.emission[(j, y)]
                            * beta[t + 1][j]
                            / c
                    })
                    .collect()
            })
            .collect();
        pairwise.push(slab);
    }
    Ok(SmoothedSequence { smoothed, pairwise })
}

/// State laws `k` steps ahead: output `j` (1-based) is `filtered · P^j`.
pub fn predict_states(
    model: &DiscreteHmm,
    filtered: &[f64],
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    if steps == 0 {
        return Err(Error::Usage("prediction horizon must be at least 1".into()));
    }
    check_probability_vector(filtered, model.states(), "filtered distribution")?;
    let mut out = Vec::with_capacity(steps);
    let mut row = filtered.to_vec();
    for _ in 0..steps {
        row = propagate(model, &row);
        out.push(row.clone());
    }
    Ok(out)
}
