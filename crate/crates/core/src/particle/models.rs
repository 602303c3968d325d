use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{DiscreteHmm, LinearGaussianModel};
use crate::numeric::psd_factor;
use crate::rng::SeededGenerator;

/// A state-space model described only through sampling and an observation
/// density, which is all the bootstrap filter needs.
///
/// `t` is the zero-based index of the state being produced or weighted.
/// Samplers write a state of length [`state_dim`](Self::state_dim) into
/// `out`, and must consume `rng` deterministically.
pub trait StateSpaceModel {
    fn state_dim(&self) -> usize;

    fn sample_initial(&self, rng: &mut SeededGenerator, out: &mut [f64]);

    fn sample_transition(&self, prev: &[f64], t: usize, rng: &mut SeededGenerator, out: &mut [f64]);

    /// `log p(y_t | x_t)`; finite or negative infinity.
    fn observation_log_density(&self, state: &[f64], obs: &[f64], t: usize) -> f64;
}

type InitFn = dyn Fn(&mut SeededGenerator, &mut [f64]) + Send + Sync;
type TransitionFn = dyn Fn(&[f64], usize, &mut SeededGenerator, &mut [f64]) + Send + Sync;
type DensityFn = dyn Fn(&[f64], &[f64], usize) -> f64 + Send + Sync;

/// Model assembled from closures.
pub struct GenericStateSpaceModel {
    state_dim: usize,
    init: Box<InitFn>,
    transition: Box<TransitionFn>,
    density: Box<DensityFn>,
}

impl GenericStateSpaceModel {
    pub fn new(
        state_dim: usize,
        init: impl Fn(&mut SeededGenerator, &mut [f64]) + Send + Sync + 'static,
        transition: impl Fn(&[f64], usize, &mut SeededGenerator, &mut [f64]) + Send + Sync + 'static,
        density: impl Fn(&[f64], &[f64], usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            state_dim,
            init: Box::new(init),
            transition: Box::new(transition),
            density: Box::new(density),
        }
    }
}

impl std::fmt::Debug for GenericStateSpaceModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GenericStateSpaceModel")
            .field("state_dim", &self.state_dim)
            .finish_non_exhaustive()
    }
}

impl StateSpaceModel for GenericStateSpaceModel {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn sample_initial(&self, rng: &mut SeededGenerator, out: &mut [f64]) {
        (self.init)(rng, out)
    }

    fn sample_transition(
        &self,
        prev: &[f64],
        t: usize,
        rng: &mut SeededGenerator,
        out: &mut [f64],
    ) {
        (self.transition)(prev, t, rng, out)
    }

    fn observation_log_density(&self, state: &[f64], obs: &[f64], t: usize) -> f64 {
        (self.density)(state, obs, t)
    }
}

/// A [`LinearGaussianModel`] seen through the sampling interface, with the
/// noise factors and observation precision computed once.
#[derive(Debug, Clone)]
pub struct GaussianStateSpace {
    model: LinearGaussianModel,
    init_factor: DMatrix<f64>,
    state_factor: DMatrix<f64>,
    obs_precision: DMatrix<f64>,
    obs_log_norm: f64,
}

impl GaussianStateSpace {
    pub fn new(model: &LinearGaussianModel) -> Result<Self> {
        let report = model.validate();
        if !report.is_valid() {
            return Err(Error::InvalidModel(report));
        }
        let chol = Cholesky::new(model.r.clone())
            .ok_or_else(|| Error::NotPositiveSemidefinite { what: "R".into() })?;
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let dy = model.obs_dim() as f64;
        Ok(Self {
            init_factor: psd_factor(&model.sigma0, "sigma0")?,
            state_factor: psd_factor(&model.q, "Q")?,
            obs_precision: chol.inverse(),
            obs_log_norm: -0.5 * (dy * (2.0 * PI).ln() + log_det),
            model: model.clone(),
        })
    }

    fn add_noise(factor: &DMatrix<f64>, rng: &mut SeededGenerator, out: &mut [f64]) {
        let z: Vec<f64> = (0..factor.ncols()).map(|_| rng.standard_normal()).collect();
        for (i, o) in out.iter_mut().enumerate() {
            for (j, zj) in z.iter().enumerate() {
                *o += factor[(i, j)] * zj;
            }
        }
    }
}

impl StateSpaceModel for GaussianStateSpace {
    fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    fn sample_initial(&self, rng: &mut SeededGenerator, out: &mut [f64]) {
        out.copy_from_slice(self.model.mu0.as_slice());
        Self::add_noise(&self.init_factor, rng, out);
    }

    fn sample_transition(
        &self,
        prev: &[f64],
        _t: usize,
        rng: &mut SeededGenerator,
        out: &mut [f64],
    ) {
        let a = &self.model.a;
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..prev.len()).map(|j| a[(i, j)] * prev[j]).sum();
        }
        Self::add_noise(&self.state_factor, rng, out);
    }

    fn observation_log_density(&self, state: &[f64], obs: &[f64], _t: usize) -> f64 {
        let c = &self.model.c;
        let resid = DVector::from_fn(obs.len(), |i, _| {
            obs[i] - (0..state.len()).map(|j| c[(i, j)] * state[j]).sum::<f64>()
        });
        self.obs_log_norm - 0.5 * resid.dot(&(&self.obs_precision * &resid))
    }
}

/// A [`DiscreteHmm`] with states and symbols carried as reals, so it can be
/// run through the particle filter and checked against exact inference.
#[derive(Debug, Clone)]
pub struct EmbeddedHmm {
    model: DiscreteHmm,
    transition_rows: Vec<Vec<f64>>,
}

impl EmbeddedHmm {
    pub fn new(model: &DiscreteHmm) -> Self {
        let transition_rows = (0..model.states())
            .map(|i| model.transition.row(i).iter().copied().collect())
            .collect();
        Self {
            model: model.clone(),
            transition_rows,
        }
    }
}

impl StateSpaceModel for EmbeddedHmm {
    fn state_dim(&self) -> usize {
        1
    }

    fn sample_initial(&self, rng: &mut SeededGenerator, out: &mut [f64]) {
        out[0] = rng.categorical(&self.model.initial) as f64;
    }

    fn sample_transition(
        &self,
        prev: &[f64],
        _t: usize,
        rng: &mut SeededGenerator,
        out: &mut [f64],
    ) {
        out[0] = rng.categorical(&self.transition_rows[prev[0] as usize]) as f64;
    }

    fn observation_log_density(&self, state: &[f64], obs: &[f64], _t: usize) -> f64 {
        let symbol = obs[0];
        if symbol < 0.0 || symbol.fract() != 0.0 || symbol as usize >= self.model.symbols() {
            return f64::NEG_INFINITY;
        }
        self.model.emission[(state[0] as usize, symbol as usize)].ln()
    }
}
