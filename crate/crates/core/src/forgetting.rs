//! Measures how quickly the discrete filter forgets its initial law.
//!
//! Two forward filters share the data but start from different priors; the
//! total-variation distance between their filtered rows is the forgetting
//! curve. A log-linear fit over a window of the curve gives an empirical
//! geometric rate, and the Dobrushin coefficient of the transition matrix
//! is the contraction rate of the prediction step alone.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hmm::forward_filter;
use crate::model::{DiscreteHmm, ObservationSeries};

/// Entries at or below this are floating-point residue and are left out of
/// the rate fit.
pub const TV_FLOOR: f64 = 1e-14;

/// `0.5 * sum |p_i - q_i|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Usage(format!(
            "cannot compare distributions of lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    let d = 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(d.clamp(0.0, 1.0))
}

/// Largest total-variation distance between two rows.
pub fn dobrushin_coefficient(transition: &DMatrix<f64>) -> f64 {
    let rows: Vec<Vec<f64>> = (0..transition.nrows())
        .map(|i| transition.row(i).iter().copied().collect())
        .collect();
    let mut worst = 0.0f64;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            worst = worst.max(tv_distance(&rows[i], &rows[j]).expect("rows of one matrix"));
        }
    }
    worst
}

/// `exp(slope)` of a least-squares line through `(t, ln curve[t])` for the
/// entries of `window` above [`TV_FLOOR`], clamped to `[0, 1]`.
pub fn fit_decay_rate(curve: &[f64], window: Range<usize>) -> Result<f64> {
    if window.start > window.end || window.end > curve.len() {
        return Err(Error::Usage(format!(
            "fit window {window:?} does not lie within a curve of length {}",
            curve.len()
        )));
    }
    let points: Vec<(f64, f64)> = window
        .filter(|&t| curve[t] > TV_FLOOR)
        .map(|t| (t as f64, curve[t].ln()))
        .collect();
    if points.len() < 2 {
        return Err(Error::DegenerateCurve {
            found: points.len(),
        });
    }
    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points
        .iter()
        .map(|(t, y)| (t - mean_t) * (y - mean_y))
        .sum();
    let sxx: f64 = points.iter().map(|(t, _)| (t - mean_t).powi(2)).sum();
    Ok((sxy / sxx).exp().clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForgettingCurve {
    pub tv: Vec<f64>,
    /// `None` when the window holds fewer than two entries above the floor.
    pub rho_hat: Option<f64>,
    pub fit_window: Range<usize>,
}

/// The default fit window `[T/4, 3T/4)`.
pub fn default_window(len: usize) -> Range<usize> {
    len / 4..(3 * len) / 4
}

pub fn forgetting_curve(
    model: &DiscreteHmm,
    obs: &ObservationSeries,
    prior_a: &[f64],
    prior_b: &[f64],
) -> Result<ForgettingCurve> {
    forgetting_curve_with_window(model, obs, prior_a, prior_b, default_window(obs.len()))
}

pub fn forgetting_curve_with_window(
    model: &DiscreteHmm,
    obs: &ObservationSeries,
    prior_a: &[f64],
    prior_b: &[f64],
    window: Range<usize>,
) -> Result<ForgettingCurve> {
    let fa = forward_filter(model, obs, Some(prior_a))?;
    let fb = forward_filter(model, obs, Some(prior_b))?;
    let tv = fa
        .filtered
        .iter()
        .zip(&fb.filtered)
        .map(|(p, q)| tv_distance(p, q))
        .collect::<Result<Vec<_>>>()?;
    let rho_hat = match fit_decay_rate(&tv, window.clone()) {
        Ok(rho) => Some(rho),
        Err(Error::DegenerateCurve { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(ForgettingCurve {
        tv,
        rho_hat,
        fit_window: window,
    })
}
