//! Log-domain helpers and small dense linear-algebra routines.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative pivot floor for the semidefinite factorization.
pub const PIVOT_FLOOR: f64 = 1e-12;

/// `log(sum(exp(values)))` with a max-shift.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("log_sum_exp of an empty sequence".into()));
    }
    Ok(log_sum_exp_nonempty(values))
}

#[inline]
pub(crate) fn log_sum_exp_nonempty(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Maps log-weights to a probability vector.
pub fn normalize_log_weights(log_weights: &[f64]) -> Result<Vec<f64>> {
    let lse = log_sum_exp(log_weights)?;
    if lse == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    Ok(log_weights.iter().map(|&v| (v - lse).exp()).collect())
}

/// Replaces `m` with `(m + mᵀ) / 2`.
pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub(crate) fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s = m.clone();
    symmetrize(&mut s);
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Factor `F` with `F Fᵀ = S` for a symmetric positive semidefinite `S`.
///
/// Diagonally pivoted outer-product Cholesky. The factorization stops once
/// the largest remaining Schur-complement diagonal drops below
/// `PIVOT_FLOOR * max(diag(S))`; the remainder is then required to vanish
/// to the same tolerance, otherwise `S` is rejected as indefinite. Rows of
/// `F` follow the original ordering of `S`, so no permutation is needed by
/// callers.
pub fn psd_factor(s: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::DimensionMismatch(format!("{what} must be square")));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveSemidefinite { what: what.into() });
    }
    let scale = (0..n).map(|i| s[(i, i)].abs()).fold(0.0, f64::max);
    let floor = PIVOT_FLOOR * scale.max(f64::MIN_POSITIVE);

    let mut work = s.clone();
    symmetrize(&mut work);
    let mut factor = DMatrix::zeros(n, n);
    let mut done = vec![false; n];

    for k in 0..n {
        let pivot = (0..n)
            .filter(|&i| !done[i])
            .max_by(|&a, &b| work[(a, a)].total_cmp(&work[(b, b)]))
            .expect("at least one remaining index");
        let d = work[(pivot, pivot)];
        if d <= floor {
            break;
        }
        let root = d.sqrt();
        done[pivot] = true;
        factor[(pivot, k)] = root;
        for i in 0..n {
            if !done[i] {
                factor[(i, k)] = work[(i, pivot)] / root;
            }
        }
        for i in 0..n {
            if done[i] {
                continue;
            }
            for j in 0..n {
                if !done[j] {
                    work[(i, j)] -= factor[(i, k)] * factor[(j, k)];
                }
            }
        }
    }

    for i in 0..n {
        if done[i] {
            continue;
        }
        for j in 0..n {
            if !done[j] && work[(i, j)].abs() > floor.max(1e-12) {
                return Err(Error::NotPositiveSemidefinite { what: what.into() });
            }
        }
    }
    Ok(factor)
}
