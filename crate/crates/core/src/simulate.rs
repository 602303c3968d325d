//! Forward simulation of the model classes.
//!
//! Draw order is part of the output contract. For the HMM each step draws
//! the state and then the symbol. For the linear-Gaussian model each step
//! draws `d_x` state-noise normals (initial-law normals at the first step)
//! followed by `d_y` observation-noise normals.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{DiscreteHmm, LinearGaussianModel, ObservationSeries, StatePath};
use crate::numeric::psd_factor;
use crate::rng::SeededGenerator;

pub fn simulate_hmm(
    model: &DiscreteHmm,
    len: usize,
    rng: &mut SeededGenerator,
) -> Result<(StatePath, ObservationSeries)> {
    if len == 0 {
        return Err(Error::Usage("simulation length must be at least 1".into()));
    }
    let report = model.validate();
    if !report.is_valid() {
        return Err(Error::InvalidModel(report));
    }
    let k = model.states();
    let rows = |m: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect()
    };
    let transition = rows(&model.transition);
    let emission = rows(&model.emission);

    let mut states = Vec::with_capacity(len);
    let mut symbols = Vec::with_capacity(len);
    let mut x = rng.categorical(&model.initial);
    debug_assert!(x < k);
    for t in 0..len {
        if t > 0 {
            x = rng.categorical(&transition[x]);
        }
        states.push(x);
        symbols.push(rng.categorical(&emission[x]));
    }
    Ok((
        StatePath::Discrete(states),
        ObservationSeries::Symbols(symbols),
    ))
}

fn draw_normals(rng: &mut SeededGenerator, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.standard_normal())
}

pub fn simulate_lgssm(
    model: &LinearGaussianModel,
    len: usize,
    rng: &mut SeededGenerator,
) -> Result<(StatePath, ObservationSeries)> {
    if len == 0 {
        return Err(Error::Usage("simulation length must be at least 1".into()));
    }
    let report = model.validate();
    if !report.is_valid() {
        return Err(Error::InvalidModel(report));
    }
    let dx = model.state_dim();
    let dy = model.obs_dim();
    let init_factor = psd_factor(&model.sigma0, "sigma0")?;
    let state_factor = psd_factor(&model.q, "Q")?;
    let obs_factor = psd_factor(&model.r, "R")?;

    let mut states = Vec::with_capacity(len);
    let mut observations = Vec::with_capacity(len);
    let mut x = &model.mu0 + &init_factor * draw_normals(rng, dx);
    for t in 0..len {
        if t > 0 {
            x = &model.a * &x + &state_factor * draw_normals(rng, dx);
        }
        let y = &model.c * &x + &obs_factor * draw_normals(rng, dy);
        states.push(x.clone());
        observations.push(y);
    }
    Ok((
        StatePath::Continuous(states),
        ObservationSeries::Real(observations),
    ))
}
