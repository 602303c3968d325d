//! Kalman filter, Rauch–Tung–Striebel smoother and k-step prediction for
//! [`LinearGaussianModel`].
//!
//! The log-likelihood uses the prediction-error decomposition:
//! `sum_t log N(y_t; C m_t|t-1, C P_t|t-1 Cᵀ + R)`. The covariance update
//! is the Joseph form followed by explicit symmetrization.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{LinearGaussianModel, ObservationSeries};
use crate::numeric::{symmetric_eigenvalues, symmetrize};

/// Innovation covariances with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative eigenvalue cutoff for the smoother's pseudo-inverse fallback.
pub const PINV_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosteriorSequence {
    pub filtered_means: Vec<DVector<f64>>,
    pub filtered_covs: Vec<DMatrix<f64>>,
    /// One-step predictions `x_t | y_1..y_{t-1}`; entry 0 is the initial law.
    pub predicted_means: Vec<DVector<f64>>,
    pub predicted_covs: Vec<DMatrix<f64>>,
    /// Innovation log-densities, one per step.
    pub log_likelihood_terms: Vec<f64>,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSmoothedSequence {
    pub smoothed_means: Vec<DVector<f64>>,
    pub smoothed_covs: Vec<DMatrix<f64>>,
    /// Time indices where a predicted covariance was singular and a
    /// pseudo-inverse replaced the inverse in the smoother gain.
    pub pseudo_inverse_steps: Vec<usize>,
}

/// Log-density of `N(v; 0, S)` given the Cholesky factor of `S`.
fn gaussian_log_density(innovation: &DVector<f64>, chol: &Cholesky<f64, nalgebra::Dyn>) -> f64 {
    let d = innovation.len() as f64;
    let log_det: f64 = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .take(innovation.len())
            .map(|v| v.ln())
            .sum::<f64>();
    let solved = chol.solve(innovation);
    -0.5 * (d * (2.0 * PI).ln() + log_det + innovation.dot(&solved))
}

pub fn kalman_filter(
    model: &LinearGaussianModel,
    obs: &ObservationSeries,
) -> Result<GaussianPosteriorSequence> {
    let report = model.validate();
    if !report.is_valid() {
        return Err(Error::InvalidModel(report));
    }
    let ys = model.check_observations(obs)?;
    let n = ys.len();
    let dx = model.state_dim();
    let identity = DMatrix::<f64>::identity(dx, dx);
    let ct = model.c.transpose();
    let at = model.a.transpose();

    let mut out = GaussianPosteriorSequence {
        filtered_means: Vec::with_capacity(n),
        filtered_covs: Vec::with_capacity(n),
        predicted_means: Vec::with_capacity(n),
        predicted_covs: Vec::with_capacity(n),
        log_likelihood_terms: Vec::with_capacity(n),
        log_likelihood: 0.0,
    };

    let mut mean = model.mu0.clone();
    let mut cov = model.sigma0.clone();
    for (t, y) in ys.iter().enumerate() {
        if t > 0 {
            mean = &model.a * &mean;
            cov = &model.a * &cov * &at + &model.q;
            symmetrize(&mut cov);
        }
        out.predicted_means.push(mean.clone());
        out.predicted_covs.push(cov.clone());

        let mut s = &model.c * &cov * &ct + &model.r;
        symmetrize(&mut s);
        let ev = symmetric_eigenvalues(&s);
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::NumericalDegeneracy { t, condition });
        }
        let chol = Cholesky::new(s).ok_or(Error::NumericalDegeneracy { t, condition })?;

        let innovation = y - &model.c * &mean;
        let term = gaussian_log_density(&innovation, &chol);
        out.log_likelihood_terms.push(term);
        out.log_likelihood += term;

        // K = P Cᵀ S⁻¹, computed as (S⁻¹ C P)ᵀ.
        let gain = chol.solve(&(&model.c * &cov)).transpose();
        mean = &mean + &gain * innovation;
        let residual = &identity - &gain * &model.c;
        cov = &residual * &cov * residual.transpose() + &gain * &model.r * gain.transpose();
        symmetrize(&mut cov);

        out.filtered_means.push(mean.clone());
        out.filtered_covs.push(cov.clone());
    }
    Ok(out)
}

/// Inverse of a symmetric PSD matrix, falling back to an eigenvalue
/// pseudo-inverse when Cholesky fails. The flag reports the fallback.
fn psd_inverse(m: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    if let Some(chol) = Cholesky::new(m.clone()) {
        let inv = chol.inverse();
        if inv.iter().all(|v| v.is_finite()) {
            return (inv, false);
        }
    }
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let top = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let cutoff = PINV_CUTOFF * top;
    let inv_vals = eig
        .eigenvalues
        .map(|v| if v > cutoff && v > 0.0 { 1.0 / v } else { 0.0 });
    let pinv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
    (pinv, true)
}

pub fn rts_smoother(
    model: &LinearGaussianModel,
    forward: &GaussianPosteriorSequence,
) -> Result<GaussianSmoothedSequence> {
    let n = forward.filtered_means.len();
    if n == 0 || forward.filtered_covs.len() != n || forward.predicted_covs.len() != n {
        return Err(Error::Usage("forward pass is empty or inconsistent".into()));
    }
    if forward.filtered_means[0].len() != model.state_dim() {
        return Err(Error::DimensionMismatch(
            "forward pass state dimension does not match the model".into(),
        ));
    }
    let at = model.a.transpose();
    let mut means = forward.filtered_means.clone();
    let mut covs = forward.filtered_covs.clone();
    let mut pseudo_inverse_steps = Vec::new();
    for t in (0..n - 1).rev() {
        let (pred_inv, fallback) = psd_inverse(&forward.predicted_covs[t + 1]);
        if fallback {
            pseudo_inverse_steps.push(t + 1);
        }
        let gain = &forward.filtered_covs[t] * &at * pred_inv;
        let mean =
            &forward.filtered_means[t] + &gain * (&means[t + 1] - &forward.predicted_means[t + 1]);
        let mut cov = &forward.filtered_covs[t]
            + &gain * (&covs[t + 1] - &forward.predicted_covs[t + 1]) * gain.transpose();
        symmetrize(&mut cov);
        means[t] = mean;
        covs[t] = cov;
    }
    pseudo_inverse_steps.reverse();
    Ok(GaussianSmoothedSequence {
        smoothed_means: means,
        smoothed_covs: covs,
        pseudo_inverse_steps,
    })
}

/// Propagates a Gaussian law `steps` times through the state equation.
pub fn kalman_predict(
    model: &LinearGaussianModel,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    steps: usize,
) -> Result<Vec<(DVector<f64>, DMatrix<f64>)>> {
    if steps == 0 {
        return Err(Error::Usage("prediction horizon must be at least 1".into()));
    }
    let dx = model.state_dim();
    if mean.len() != dx || cov.nrows() != dx || cov.ncols() != dx {
        return Err(Error::DimensionMismatch(format!(
            "prediction input must have state dimension {dx}"
        )));
    }
    let at = model.a.transpose();
    let mut m = mean.clone();
    let mut p = cov.clone();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        m = &model.a * &m;
        p = &model.a * &p * &at + &model.q;
        symmetrize(&mut p);
        out.push((m.clone(), p.clone()));
    }
    Ok(out)
}
