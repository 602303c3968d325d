use crate::error::{Error, Result};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadSettings {
    /// Offset of each initial vertex from `x0` along one coordinate axis.
    pub step: f64,
    /// Converged once `max f - min f` over the simplex falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NelderMeadSettings {
    fn default() -> Self {
        Self {
            step: 0.5,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerReport {
    pub argmin: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `max f - min f` over the final simplex.
    pub spread: f64,
    /// Best value at the start of every iteration, plus the final one.
    pub best_history: Vec<f64>,
}

fn eval(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn spread(values: &[f64]) -> f64 {
    let (lo, hi) = (values[0], values[values.len() - 1]);
    if lo == hi {
        0.0
    } else {
        hi - lo
    }
}

/// Point `c + coef * (x - c)`.
fn along(c: &[f64], x: &[f64], coef: f64) -> Vec<f64> {
    c.iter()
        .zip(x)
        .map(|(ci, xi)| ci + coef * (xi - ci))
        .collect()
}

/// Derivative-free minimization by the Nelder–Mead simplex method.
///
/// NaN objective values are treated as `+inf`. Vertex order is kept stable
/// across ties, so the run is fully deterministic.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    settings: &NelderMeadSettings,
) -> Result<OptimizerReport> {
    let d = x0.len();
    if d == 0 {
        return Err(Error::Usage(
            "optimizer needs at least one coordinate".into(),
        ));
    }
    if !(settings.step > 0.0 && settings.step.is_finite()) {
        return Err(Error::Usage(format!(
            "simplex step must be positive, got {}",
            settings.step
        )));
    }
    if !(settings.tol > 0.0) {
        return Err(Error::Usage(format!(
            "tolerance must be positive, got {}",
            settings.tol
        )));
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), eval(&mut f, x0)));
    for k in 0..d {
        let mut x = x0.to_vec();
        x[k] += settings.step;
        let v = eval(&mut f, &x);
        simplex.push((x, v));
    }
    if simplex.iter().all(|(_, v)| *v == f64::INFINITY) {
        return Err(Error::OptimizerInit);
    }

    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let values: Vec<f64> = simplex.iter().map(|s| s.1).collect();
        history.push(values[0]);
        let current_spread = spread(&values);
        if current_spread < settings.tol || iterations >= settings.max_iter {
            let (argmin, value) = simplex.swap_remove(0);
            return Ok(OptimizerReport {
                argmin,
                value,
                iterations,
                converged: current_spread < settings.tol,
                spread: current_spread,
                best_history: history,
            });
        }
        iterations += 1;

        let mut centroid = vec![0.0; d];
        for (x, _) in &simplex[..d] {
            centroid
                .iter_mut()
                .zip(x)
                .for_each(|(c, xi)| *c += xi / d as f64);
        }
        let (best, second_worst, worst) = (values[0], values[d - 1], values[d]);

        let xr = along(&centroid, &simplex[d].0, -REFLECT);
        let fr = eval(&mut f, &xr);
        if fr < best {
            let xe = along(&centroid, &simplex[d].0, -EXPAND);
            let fe = eval(&mut f, &xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < second_worst {
            simplex[d] = (xr, fr);
            continue;
        }
        let (xc, fc, accept) = if fr < worst {
            let xc = along(&centroid, &xr, CONTRACT);
            let fc = eval(&mut f, &xc);
            (xc, fc, fc <= fr)
        } else {
            let xc = along(&centroid, &simplex[d].0, CONTRACT);
            let fc = eval(&mut f, &xc);
            (xc, fc, fc < worst)
        };
        if accept {
            simplex[d] = (xc, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x = along(&anchor, &vertex.0, SHRINK);
            let v = eval(&mut f, &x);
            *vertex = (x, v);
        }
    }
}
