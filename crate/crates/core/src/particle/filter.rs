use std::collections::VecDeque;

use nalgebra::DVector;

use super::models::StateSpaceModel;
use super::resample::{effective_sample_size, resample, ResampleScheme};
use crate::error::{Error, Result};
use crate::model::ObservationSeries;
use crate::numeric::log_sum_exp_nonempty;
use crate::rng::SeededGenerator;

/// Lane reserved for the resampling stream at each time step.
const RESAMPLE_LANE: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleFilterSettings {
    pub particles: usize,
    /// Resample when `ESS / N` falls below this; `1.0` resamples every step.
    pub resample_threshold: f64,
    pub scheme: ResampleScheme,
}

impl Default for ParticleFilterSettings {
    fn default() -> Self {
        Self {
            particles: 1000,
            resample_threshold: 0.5,
            scheme: ResampleScheme::Systematic,
        }
    }
}

impl ParticleFilterSettings {
    pub fn new(particles: usize) -> Self {
        Self {
            particles,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::Usage("particle count must be at least 1".into()));
        }
        if !(self.resample_threshold > 0.0 && self.resample_threshold <= 1.0) {
            return Err(Error::Usage(format!(
                "resample threshold must lie in (0, 1], got {}",
                self.resample_threshold
            )));
        }
        Ok(())
    }
}

/// Weighted particle cloud. `particles` is row-major `N x d_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<f64>,
    pub state_dim: usize,
    /// Normalized: `log_sum_exp(log_weights) = 0`.
    pub log_weights: Vec<f64>,
    /// Number of observations assimilated.
    pub time_index: usize,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.particles[i * self.state_dim..(i + 1) * self.state_dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleFilterResult {
    pub filtered_means: Vec<DVector<f64>>,
    /// ESS after weighting and before any resampling at that step.
    pub ess_trace: Vec<f64>,
    pub log_likelihood_estimate: f64,
    pub resample_events: Vec<usize>,
    pub final_set: ParticleSet,
}

/// Weighted mean accumulated as offsets from the first particle, so a
/// cloud of identical particles has exactly that particle as its mean.
fn weighted_mean(x: &[f64], weights: &[f64], d: usize) -> DVector<f64> {
    let origin = &x[..d];
    let mut offset = vec![0.0; d];
    for (i, w) in weights.iter().enumerate() {
        for k in 0..d {
            offset[k] += w * (x[i * d + k] - origin[k]);
        }
    }
    DVector::from_fn(d, |k, _| origin[k] + offset[k])
}

fn gather(x: &[f64], parents: &[usize], d: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for &p in parents {
        out.extend_from_slice(&x[p * d..(p + 1) * d]);
    }
    out
}

/// Shared engine for filtering and fixed-lag smoothing. With `lag` set it
/// keeps the last `lag + 1` ancestral states of every particle.
fn run<M: StateSpaceModel + ?Sized>(
    model: &M,
    obs: &ObservationSeries,
    settings: &ParticleFilterSettings,
    rng: &mut SeededGenerator,
    lag: Option<usize>,
) -> Result<(ParticleFilterResult, Vec<DVector<f64>>)> {
    settings.check()?;
    let ys = obs.as_real()?;
    if ys.is_empty() {
        return Err(Error::Domain("observation series is empty".into()));
    }
    let n = settings.particles;
    let d = model.state_dim();
    let horizon = ys.len();
    let base_seed = rng.next_u64();

    let mut x = vec![0.0; n * d];
    let mut log_w = vec![-(n as f64).ln(); n];
    let mut new_log_w = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut log_likelihood = 0.0;
    let mut filtered_means = Vec::with_capacity(horizon);
    let mut ess_trace = Vec::with_capacity(horizon);
    let mut resample_events = Vec::new();

    let mut window: VecDeque<Vec<f64>> = VecDeque::new();
    let mut smoothed: Vec<DVector<f64>> = Vec::new();

    for (t, y) in ys.iter().enumerate() {
        let prev = if t == 0 { Vec::new() } else { x.clone() };
        for i in 0..n {
            let mut stream = SeededGenerator::stream(base_seed, t as u64, i as u64);
            let out = &mut x[i * d..(i + 1) * d];
            if t == 0 {
                model.sample_initial(&mut stream, out);
            } else {
                model.sample_transition(&prev[i * d..(i + 1) * d], t, &mut stream, out);
            }
        }

        for i in 0..n {
            let ld = model.observation_log_density(&x[i * d..(i + 1) * d], y.as_slice(), t);
            new_log_w[i] = log_w[i] + if ld.is_nan() { f64::NEG_INFINITY } else { ld };
        }
        // Carried weights are normalized, so this is log of the weighted
        // average of the unnormalized incremental weights.
        let increment = log_sum_exp_nonempty(&new_log_w);
        if !increment.is_finite() {
            return Err(Error::ParticleCollapse { t });
        }
        log_likelihood += increment;
        for i in 0..n {
            log_w[i] = new_log_w[i] - increment;
            weights[i] = log_w[i].exp();
        }
        let ess = effective_sample_size(&weights).clamp(1.0, n as f64);
        ess_trace.push(ess);
        filtered_means.push(weighted_mean(&x, &weights, d));

        if let Some(lag) = lag {
            window.push_back(x.clone());
            if window.len() > lag {
                let oldest = window.pop_front().expect("window is non-empty");
                smoothed.push(weighted_mean(&oldest, &weights, d));
            }
            if t + 1 == horizon {
                for slot in window.drain(..) {
                    smoothed.push(weighted_mean(&slot, &weights, d));
                }
            }
        }

        if settings.resample_threshold >= 1.0 || ess < settings.resample_threshold * n as f64 {
            let mut stream = SeededGenerator::stream(base_seed, t as u64, RESAMPLE_LANE);
            let parents = resample(settings.scheme, &weights, &mut stream);
            x = gather(&x, &parents, d);
            for slot in window.iter_mut() {
                *slot = gather(slot, &parents, d);
            }
            log_w.fill(-(n as f64).ln());
            resample_events.push(t);
        }
    }

    let result = ParticleFilterResult {
        filtered_means,
        ess_trace,
        log_likelihood_estimate: log_likelihood,
        resample_events,
        final_set: ParticleSet {
            particles: x,
            state_dim: d,
            log_weights: log_w,
            time_index: horizon,
        },
    };
    Ok((result, smoothed))
}

/// Bootstrap (sampling-importance-resampling) particle filter.
///
/// Particle `i` at step `t` draws from `SeededGenerator::stream(s, t, i)`
/// where `s` is the first draw of `rng`; resampling at step `t` uses lane
/// `u64::MAX`. The output therefore depends only on the generator state and
/// the inputs.
pub fn bootstrap_filter<M: StateSpaceModel + ?Sized>(
    model: &M,
    obs: &ObservationSeries,
    settings: &ParticleFilterSettings,
    rng: &mut SeededGenerator,
) -> Result<ParticleFilterResult> {
    run(model, obs, settings, rng, None).map(|(r, _)| r)
}

/// Estimates `E[X_t | Y_1..Y_min(t+lag, T)]` from ancestral paths truncated
/// at `lag` steps, using the same particle system as [`bootstrap_filter`].
/// `lag = 0` reproduces the filtered means exactly.
pub fn fixed_lag_smoother<M: StateSpaceModel + ?Sized>(
    model: &M,
    obs: &ObservationSeries,
    settings: &ParticleFilterSettings,
    lag: usize,
    rng: &mut SeededGenerator,
) -> Result<Vec<DVector<f64>>> {
    run(model, obs, settings, rng, Some(lag)).map(|(_, s)| s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogLikelihoodEstimate {
    pub mean: f64,
    /// Standard error of the mean; absent for a single replicate.
    pub std_error: Option<f64>,
    pub estimates: Vec<f64>,
}

/// Replicated log-likelihood estimate using seeds `seed, seed + 1, ...`.
pub fn pf_loglik<M: StateSpaceModel + ?Sized>(
    model: &M,
    obs: &ObservationSeries,
    settings: &ParticleFilterSettings,
    reps: usize,
    seed: u64,
) -> Result<LogLikelihoodEstimate> {
    if reps == 0 {
        return Err(Error::Usage("replicate count must be at least 1".into()));
    }
    let mut estimates = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut rng = SeededGenerator::new(seed.wrapping_add(rep as u64));
        let r = bootstrap_filter(model, obs, settings, &mut rng).map_err(|e| Error::Replicate {
            rep,
            source: Box::new(e),
        })?;
        estimates.push(r.log_likelihood_estimate);
    }
    let k = reps as f64;
    let mean = estimates.iter().sum::<f64>() / k;
    let std_error = (reps > 1).then(|| {
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    });
    Ok(LogLikelihoodEstimate {
        mean,
        std_error,
        estimates,
    })
}
