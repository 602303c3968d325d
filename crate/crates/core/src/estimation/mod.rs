//! Maximum-likelihood estimation over both model families.
//!
//! Models are mapped to unconstrained coordinates by [`pack`] and back by
//! [`unpack`]; [`fit_mle`] minimizes [`negative_loglik`] with
//! [`nelder_mead`]. Only interior models (strictly positive probabilities,
//! positive definite covariances) have coordinates. [`fit_mle_masked`]
//! optimizes a subset of blocks and copies the rest verbatim from a start
//! model, which is how boundary values such as `Q = 0` are held fixed.

mod nelder_mead;
mod transform;

pub use nelder_mead::{nelder_mead, NelderMeadSettings, OptimizerReport};
pub use transform::{pack, unpack, Block, Family, ParameterVector};

use crate::error::{Error, Result};
use crate::hmm::forward_filter;
use crate::kalman::kalman_filter;
use crate::model::{Model, ObservationSeries};

fn check_kind(family: Family, obs: &ObservationSeries) -> Result<()> {
    let expected = match family {
        Family::DiscreteHmm { .. } => "symbolic",
        Family::LinearGaussian { .. } => "real",
    };
    if obs.kind() != expected {
        return Err(Error::Usage(format!(
            "{family:?} parameters cannot score {} observations",
            obs.kind()
        )));
    }
    if let (Family::LinearGaussian { obs_dim, .. }, Ok(rows)) = (family, obs.as_real()) {
        if let Some((t, y)) = rows.iter().enumerate().find(|(_, y)| y.len() != obs_dim) {
            return Err(Error::Usage(format!(
                "observation at t={t} has dimension {}, parameters expect {obs_dim}",
                y.len()
            )));
        }
    }
    Ok(())
}

/// `-log p(y)` under a concrete model. Failures that an optimizer can step
/// away from are reported as `+inf`.
pub fn model_negative_loglik(model: &Model, obs: &ObservationSeries) -> Result<f64> {
    check_kind(Family::of(model), obs)?;
    let ll = match model {
        Model::Discrete(m) => forward_filter(m, obs, None).map(|f| f.log_likelihood),
        Model::Gaussian(m) => kalman_filter(m, obs).map(|f| f.log_likelihood),
    };
    match ll {
        Ok(v) if v.is_nan() => Ok(f64::INFINITY),
        Ok(v) => Ok(-v),
        Err(
            Error::ImpossibleObservation { .. }
            | Error::NumericalDegeneracy { .. }
            | Error::InvalidModel(_)
            | Error::NotPositiveSemidefinite { .. },
        ) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// `-log p(y | unpack(theta))`.
pub fn negative_loglik(theta: &ParameterVector, obs: &ObservationSeries) -> Result<f64> {
    check_kind(theta.family, obs)?;
    let model = match unpack(theta) {
        Ok(m) => m,
        Err(Error::Domain(_)) => return Ok(f64::INFINITY),
        Err(Error::DimensionMismatch(msg)) => return Err(Error::Usage(msg)),
        Err(e) => return Err(e),
    };
    model_negative_loglik(&model, obs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub step: f64,
}

impl Default for MleSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20_000,
            step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub model: Model,
    /// Coordinates of the free blocks, in packing order.
    pub theta: Vec<f64>,
    pub log_likelihood: f64,
    pub report: OptimizerReport,
}

fn assemble(template: &Model, free: &[Block], family: Family, z: &[f64]) -> Model {
    let mut model = template.clone();
    let mut offset = 0;
    for &block in free {
        let len = family.block_len(block);
        transform::unpack_block(&mut model, block, &z[offset..offset + len]);
        offset += len;
    }
    model
}

/// Minimizes the negative log-likelihood over every coordinate of `theta0`.
pub fn fit_mle(
    theta0: &ParameterVector,
    obs: &ObservationSeries,
    settings: &MleSettings,
) -> Result<MleFit> {
    let start = unpack(theta0)?;
    fit_mle_masked(&start, theta0.family.blocks(), obs, settings)
}

/// Minimizes over the listed blocks only. Blocks not listed keep the values
/// of `start`, which need not be interior.
pub fn fit_mle_masked(
    start: &Model,
    free: &[Block],
    obs: &ObservationSeries,
    settings: &MleSettings,
) -> Result<MleFit> {
    let family = Family::of(start);
    check_kind(family, obs)?;
    let free: Vec<Block> = family
        .blocks()
        .iter()
        .copied()
        .filter(|b| free.contains(b))
        .collect();
    let mut x0 = Vec::new();
    for &block in &free {
        transform::pack_block(start, block, &mut x0)?;
    }

    let objective = |z: &[f64]| -> f64 {
        if z.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        model_negative_loglik(&assemble(start, &free, family, z), obs).unwrap_or(f64::INFINITY)
    };

    if x0.is_empty() {
        let value = model_negative_loglik(start, obs)?;
        if !value.is_finite() {
            return Err(Error::OptimizerInit);
        }
        return Ok(MleFit {
            model: start.clone(),
            theta: x0,
            log_likelihood: -value,
            report: OptimizerReport {
                argmin: Vec::new(),
                value,
                iterations: 0,
                converged: true,
                spread: 0.0,
                best_history: vec![value],
            },
        });
    }

    let report = nelder_mead(
        objective,
        &x0,
        &NelderMeadSettings {
            step: settings.step,
            tol: settings.tol,
            max_iter: settings.max_iter,
        },
    )?;
    Ok(MleFit {
        model: assemble(start, &free, family, &report.argmin),
        theta: report.argmin.clone(),
        log_likelihood: -report.value,
        report,
    })
}
