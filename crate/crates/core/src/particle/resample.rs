use crate::rng::SeededGenerator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResampleScheme {
    #[default]
    Systematic,
    Multinomial,
}

/// `1 / sum w_i^2`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn last_positive(weights: &[f64]) -> usize {
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .unwrap_or(weights.len() - 1)
}

/// Systematic resampling at positions `(i + u) / N` against the cumulative
/// weights. The output is sorted.
pub fn systematic_resample(weights: &[f64], u: f64) -> Vec<usize> {
    let n = weights.len();
    let cdf = cumulative(weights);
    let fallback = last_positive(weights);
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        let pos = (i as f64 + u) / n as f64;
        while j < n && cdf[j] <= pos {
            j += 1;
        }
        out.push(if j < n { j } else { fallback });
    }
    out
}

/// `N` independent categorical draws, in draw order.
pub fn multinomial_resample(weights: &[f64], rng: &mut SeededGenerator) -> Vec<usize> {
    let n = weights.len();
    let cdf = cumulative(weights);
    let fallback = last_positive(weights);
    (0..n)
        .map(|_| {
            let u = rng.uniform();
            let j = cdf.partition_point(|&c| c <= u);
            if j < n {
                j
            } else {
                fallback
            }
        })
        .collect()
}

pub(crate) fn resample(
    scheme: ResampleScheme,
    weights: &[f64],
    rng: &mut SeededGenerator,
) -> Vec<usize> {
    match scheme {
        ResampleScheme::Systematic => systematic_resample(weights, rng.uniform()),
        ResampleScheme::Multinomial => multinomial_resample(weights, rng),
    }
}
