//! Brute-force quadrature filter and smoother for scalar linear-Gaussian
//! models, independent of the Kalman recursions.
//!
//! Densities live on a uniform grid. The transition integral is evaluated
//! directly, skipping source points with negligible mass and targets
//! outside the kernel band. Along a row of targets the Gaussian kernel is
//! advanced by the exact ratio recurrence
//! `k(d + 4h) = k(d) * exp(-(8dh + 16h^2) / 2q)`, so no `exp` is needed inside
//! the inner loop.

#![allow(dead_code)]

pub struct ScalarModel {
    pub a: f64,
    pub c: f64,
    pub q: f64,
    pub r: f64,
    pub mu0: f64,
    pub sigma0: f64,
}

pub struct GridMoments {
    pub filtered: Vec<(f64, f64)>,
    pub smoothed: Vec<(f64, f64)>,
    pub log_likelihood: f64,
}

pub struct Grid {
    pub lo: f64,
    pub step: f64,
    pub points: usize,
}

/// Mass below this fraction of the peak is treated as zero.
const NEGLIGIBLE: f64 = 1e-12;
/// Kernel half-width in standard deviations; beyond it the kernel is below
/// `exp(-32)` of its peak.
const BAND_SD: f64 = 8.0;

impl Grid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Self {
        let points = ((hi - lo) / step).round() as usize + 1;
        Self { lo, step, points }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    fn moments(&self, density: &[f64]) -> (f64, f64) {
        let mass: f64 = density.iter().sum();
        let mean = density
            .iter()
            .enumerate()
            .map(|(i, p)| p * self.x(i))
            .sum::<f64>()
            / mass;
        let var = density
            .iter()
            .enumerate()
            .map(|(i, p)| p * (self.x(i) - mean).powi(2))
            .sum::<f64>()
            / mass;
        (mean, var)
    }

    /// Calls `visit(i, first, row)` for every source `i` where `mask` is set,
    /// where `row[n]` is proportional to the transition density from `x_i` to
    /// `x_{first + n}` over the kernel band.
    fn for_each_row(
        &self,
        m: &ScalarModel,
        mask: &[bool],
        mut visit: impl FnMut(usize, usize, &[f64]),
    ) {
        let h = self.step;
        let half = BAND_SD * m.q.sqrt();
        let decay = (-16.0 * h * h / m.q).exp();
        let mut row = Vec::new();
        for (i, &active) in mask.iter().enumerate() {
            if !active {
                continue;
            }
            let centre = m.a * self.x(i);
            let first = (((centre - half - self.lo) / h).floor().max(0.0)) as usize;
            let last = ((((centre + half - self.lo) / h).ceil()) as usize).min(self.points - 1);
            if first > last {
                continue;
            }
            let d0 = self.x(first) - centre;
            let len = last - first + 1;
            // Four interleaved chains, each stepping 4h, so consecutive
            // multiplies do not depend on each other.
            let mut k = [0.0; 4];
            let mut ratio = [0.0; 4];
            for l in 0..4 {
                let d = d0 + l as f64 * h;
                k[l] = (-d * d / (2.0 * m.q)).exp();
                ratio[l] = (-(8.0 * d * h + 16.0 * h * h) / (2.0 * m.q)).exp();
            }
            row.clear();
            row.resize(len.div_ceil(4) * 4, 0.0);
            for chunk in row.chunks_exact_mut(4) {
                chunk.copy_from_slice(&k);
                for l in 0..4 {
                    k[l] *= ratio[l];
                    ratio[l] *= decay;
                }
            }
            row.truncate(len);
            visit(i, first, &row);
        }
    }
}

fn significant(density: &[f64]) -> Vec<bool> {
    let peak = density.iter().copied().fold(0.0, f64::max);
    density.iter().map(|&p| p > NEGLIGIBLE * peak).collect()
}

/// Filtered and smoothed `(mean, variance)` pairs plus the log-likelihood.
pub fn grid_posterior(m: &ScalarModel, ys: &[f64], grid: &Grid) -> GridMoments {
    let n = grid.points;
    let h = grid.step;
    let norm_q = 1.0 / (2.0 * std::f64::consts::PI * m.q).sqrt();
    let log_lik_at = |i: usize, y: f64| {
        let d = y - m.c * grid.x(i);
        -0.5 * (2.0 * std::f64::consts::PI * m.r).ln() - d * d / (2.0 * m.r)
    };

    let mut predicted: Vec<Vec<f64>> = Vec::with_capacity(ys.len());
    let mut filtered: Vec<Vec<f64>> = Vec::with_capacity(ys.len());
    let mut log_likelihood = 0.0;

    for (t, &y) in ys.iter().enumerate() {
        let pred: Vec<f64> = if t == 0 {
            (0..n)
                .map(|i| {
                    let d = grid.x(i) - m.mu0;
                    (-d * d / (2.0 * m.sigma0)).exp()
                        / (2.0 * std::f64::consts::PI * m.sigma0).sqrt()
                })
                .collect()
        } else {
            let prev: &Vec<f64> = &filtered[t - 1];
            let mut out = vec![0.0; n];
            grid.for_each_row(m, &significant(prev), |i, first, row| {
                let w = prev[i];
                out[first..first + row.len()]
                    .iter_mut()
                    .zip(row)
                    .for_each(|(o, k)| *o += w * k);
            });
            out.iter_mut().for_each(|v| *v *= norm_q * h);
            out
        };

        let logs: Vec<f64> = (0..n)
            .map(|i| {
                if pred[i] > 0.0 {
                    pred[i].ln() + log_lik_at(i, y)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut post: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let mass: f64 = post.iter().sum::<f64>() * h;
        log_likelihood += top + mass.ln();
        post.iter_mut().for_each(|v| *v /= mass);
        predicted.push(pred);
        filtered.push(post);
    }

    let horizon = ys.len();
    let mut smoothed: Vec<Vec<f64>> = vec![Vec::new(); horizon];
    smoothed[horizon - 1] = filtered[horizon - 1].clone();
    for t in (0..horizon - 1).rev() {
        let next = &smoothed[t + 1];
        let pred = &predicted[t + 1];
        let next_mask = significant(next);
        let ratio: Vec<f64> = (0..n)
            .map(|j| {
                if next_mask[j] && pred[j] > 0.0 {
                    next[j] / pred[j]
                } else {
                    0.0
                }
            })
            .collect();
        let mut back = vec![0.0; n];
        grid.for_each_row(m, &significant(&filtered[t]), |i, first, row| {
            back[i] = ratio[first..first + row.len()]
                .iter()
                .zip(row)
                .map(|(r, k)| r * k)
                .sum();
        });
        let mut s: Vec<f64> = (0..n)
            .map(|i| filtered[t][i] * back[i] * norm_q * h)
            .collect();
        let mass: f64 = s.iter().sum::<f64>() * h;
        s.iter_mut().for_each(|v| *v /= mass);
        smoothed[t] = s;
    }

    GridMoments {
        filtered: filtered.iter().map(|p| grid.moments(p)).collect(),
        smoothed: smoothed.iter().map(|p| grid.moments(p)).collect(),
        log_likelihood,
    }
}
