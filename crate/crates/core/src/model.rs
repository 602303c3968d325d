//! Model and data types shared by every inference routine.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::{max_asymmetry, symmetric_eigenvalues};

/// Tolerance on probability rows. Rows within it are renormalized once on
/// construction, rows outside it are rejected.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Symmetry tolerance for covariance matrices.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Observed sequence `y_1, ..., y_T`, tagged by kind at construction.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationSeries {
    Symbols(Vec<usize>),
    Real(Vec<DVector<f64>>),
}

impl ObservationSeries {
    pub fn symbols(values: Vec<usize>) -> Self {
        ObservationSeries::Symbols(values)
    }

    /// Real-valued series from rows of equal length with finite entries.
    pub fn real(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut out = Vec::with_capacity(rows.len());
        for (t, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "observation at t={t} has dimension {}, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("non-finite observation at t={t}")));
            }
            out.push(DVector::from_vec(row));
        }
        Ok(ObservationSeries::Real(out))
    }

    /// Scalar real series.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::real(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn len(&self) -> usize {
        match self {
            ObservationSeries::Symbols(v) => v.len(),
            ObservationSeries::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ObservationSeries::Symbols(_) => "symbolic",
            ObservationSeries::Real(_) => "real",
        }
    }

    pub fn as_symbols(&self) -> Result<&[usize]> {
        match self {
            ObservationSeries::Symbols(v) => Ok(v),
            ObservationSeries::Real(_) => Err(Error::KindMismatch {
                expected: "symbolic",
                found: "real",
            }),
        }
    }

    pub fn as_real(&self) -> Result<&[DVector<f64>]> {
        match self {
            ObservationSeries::Real(v) => Ok(v),
            ObservationSeries::Symbols(_) => Err(Error::KindMismatch {
                expected: "real",
                found: "symbolic",
            }),
        }
    }
}

/// Hidden path `x_1, ..., x_T`.
#[derive(Debug, Clone, PartialEq)]
pub enum StatePath {
    Discrete(Vec<usize>),
    Continuous(Vec<DVector<f64>>),
}

impl StatePath {
    pub fn len(&self) -> usize {
        match self {
            StatePath::Discrete(v) => v.len(),
            StatePath::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One violated invariant: a path-like field locator plus a description.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }

    fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidModel(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

fn check_probability_row(report: &mut ValidationReport, field: String, row: &[f64]) {
    if let Some(j) = row.iter().position(|v| !v.is_finite() || *v < 0.0) {
        report.push(
            format!("{field}[{j}]"),
            format!("entry {} is not a finite nonnegative number", row[j]),
        );
        return;
    }
    let sum: f64 = row.iter().sum();
    let deficit = 1.0 - sum;
    if deficit.abs() > PROBABILITY_TOLERANCE {
        report.push(field, format!("row sums to {sum} (deficit {deficit:e})"));
    }
}

fn renormalize(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Finite-state hidden Markov model.
///
/// `transition[(i, j)] = P(x_{t+1} = j | x_t = i)` and
/// `emission[(i, m)] = P(y_t = m | x_t = i)`. The initial law is arbitrary
/// and need not be the stationary distribution of `transition`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteHmm {
    pub initial: Vec<f64>,
    pub transition: DMatrix<f64>,
    pub emission: DMatrix<f64>,
}

impl DiscreteHmm {
    /// Validates the parts and renormalizes rows that are within
    /// [`PROBABILITY_TOLERANCE`] of summing to one.
    pub fn new(
        initial: Vec<f64>,
        transition: DMatrix<f64>,
        emission: DMatrix<f64>,
    ) -> Result<Self> {
        let mut model = DiscreteHmm {
            initial,
            transition,
            emission,
        };
        model.validate().into_result()?;
        renormalize(&mut model.initial);
        for matrix in [&mut model.transition, &mut model.emission] {
            for i in 0..matrix.nrows() {
                let mut row: Vec<f64> = matrix.row(i).iter().copied().collect();
                renormalize(&mut row);
                for (j, v) in row.into_iter().enumerate() {
                    matrix[(i, j)] = v;
                }
            }
        }
        Ok(model)
    }

    /// Convenience constructor from nested rows.
    pub fn from_rows(initial: &[f64], transition: &[&[f64]], emission: &[&[f64]]) -> Result<Self> {
        Self::new(
            initial.to_vec(),
            rows_to_matrix(transition)?,
            rows_to_matrix(emission)?,
        )
    }

    pub fn states(&self) -> usize {
        self.initial.len()
    }

    pub fn symbols(&self) -> usize {
        self.emission.ncols()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let k = self.initial.len();
        if k == 0 {
            report.push("initial", "state count must be at least 1");
        }
        if self.transition.nrows() != k || self.transition.ncols() != k {
            report.push(
                "transition",
                format!(
                    "shape {}x{} does not match {k} states",
                    self.transition.nrows(),
                    self.transition.ncols()
                ),
            );
        }
        if self.emission.nrows() != k {
            report.push(
                "emission",
                format!("has {} rows, expected {k}", self.emission.nrows()),
            );
        }
        if self.emission.ncols() == 0 {
            report.push("emission", "symbol count must be at least 1");
        }
        if !report.is_valid() {
            return report;
        }
        check_probability_row(&mut report, "initial".into(), &self.initial);
        for (name, matrix) in [
            ("transition", &self.transition),
            ("emission", &self.emission),
        ] {
            for i in 0..matrix.nrows() {
                let row: Vec<f64> = matrix.row(i).iter().copied().collect();
                check_probability_row(&mut report, format!("{name}[{i}]"), &row);
            }
        }
        report
    }

    /// Rejects series that are not symbolic or use symbols outside `[0, M)`.
    pub(crate) fn check_observations<'a>(&self, obs: &'a ObservationSeries) -> Result<&'a [usize]> {
        let symbols = obs.as_symbols()?;
        if symbols.is_empty() {
            return Err(Error::Domain("observation series is empty".into()));
        }
        let m = self.symbols();
        if let Some((t, &s)) = symbols.iter().enumerate().find(|(_, &s)| s >= m) {
            return Err(Error::SymbolOutOfRange {
                t,
                symbol: s,
                alphabet: m,
            });
        }
        Ok(symbols)
    }
}

pub(crate) fn rows_to_matrix(rows: &[&[f64]]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Linear-Gaussian state-space model
///
/// ```text
/// x_1     ~ N(mu0, sigma0)
/// x_{t+1} = A x_t + w_t,   w_t ~ N(0, Q)
/// y_t     = C x_t + v_t,   v_t ~ N(0, R)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianModel {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub mu0: DVector<f64>,
    pub sigma0: DMatrix<f64>,
}

impl LinearGaussianModel {
    pub fn new(
        a: DMatrix<f64>,
        c: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        mu0: DVector<f64>,
        sigma0: DMatrix<f64>,
    ) -> Result<Self> {
        let model = LinearGaussianModel {
            a,
            c,
            q,
            r,
            mu0,
            sigma0,
        };
        model.validate().into_result()?;
        Ok(model)
    }

    /// One-dimensional model.
    pub fn scalar(a: f64, c: f64, q: f64, r: f64, mu0: f64, sigma0: f64) -> Result<Self> {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        Self::new(
            m(a),
            m(c),
            m(q),
            m(r),
            DVector::from_element(1, mu0),
            m(sigma0),
        )
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let dx = self.a.nrows();
        let dy = self.c.nrows();
        let shapes = [
            ("A", &self.a, dx, dx),
            ("C", &self.c, dy, dx),
            ("Q", &self.q, dx, dx),
            ("R", &self.r, dy, dy),
            ("sigma0", &self.sigma0, dx, dx),
        ];
        for (name, m, rows, cols) in shapes {
            if m.nrows() != rows || m.ncols() != cols {
                report.push(
                    name,
                    format!("shape {}x{}, expected {rows}x{cols}", m.nrows(), m.ncols()),
                );
            }
            if m.iter().any(|v| !v.is_finite()) {
                report.push(name, "contains non-finite entries");
            }
        }
        if dx == 0 {
            report.push("A", "state dimension must be at least 1");
        }
        if dy == 0 {
            report.push("C", "observation dimension must be at least 1");
        }
        if self.mu0.len() != dx {
            report.push("mu0", format!("length {}, expected {dx}", self.mu0.len()));
        }
        if self.mu0.iter().any(|v| !v.is_finite()) {
            report.push("mu0", "contains non-finite entries");
        }
        if !report.is_valid() {
            return report;
        }

        for (name, m, definite) in [
            ("Q", &self.q, false),
            ("R", &self.r, true),
            ("sigma0", &self.sigma0, false),
        ] {
            let asym = max_asymmetry(m);
            if asym > SYMMETRY_TOLERANCE {
                report.push(
                    name,
                    format!("{name} not symmetric (max asymmetry {asym:e})"),
                );
                continue;
            }
            let ev = symmetric_eigenvalues(m);
            let smallest = ev[0];
            let scale = ev.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
            if definite && smallest <= 0.0 {
                report.push(
                    name,
                    format!("{name} not positive definite (smallest eigenvalue {smallest:e})"),
                );
            } else if !definite && smallest < -SYMMETRY_TOLERANCE * scale {
                report.push(
                    name,
                    format!("{name} not positive semidefinite (smallest eigenvalue {smallest:e})"),
                );
            }
        }
        report
    }

    pub(crate) fn check_observations<'a>(
        &self,
        obs: &'a ObservationSeries,
    ) -> Result<&'a [DVector<f64>]> {
        let rows = obs.as_real()?;
        if rows.is_empty() {
            return Err(Error::Domain("observation series is empty".into()));
        }
        let dy = self.obs_dim();
        if let Some((t, y)) = rows.iter().enumerate().find(|(_, y)| y.len() != dy) {
            return Err(Error::DimensionMismatch(format!(
                "observation at t={t} has dimension {}, model expects {dy}",
                y.len()
            )));
        }
        Ok(rows)
    }
}

/// Either model family with a closed-form inference path.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Discrete(DiscreteHmm),
    Gaussian(LinearGaussianModel),
}

impl From<DiscreteHmm> for Model {
    fn from(m: DiscreteHmm) -> Self {
        Model::Discrete(m)
    }
}

impl From<LinearGaussianModel> for Model {
    fn from(m: LinearGaussianModel) -> Self {
        Model::Gaussian(m)
    }
}

/// Lists every violated invariant; an empty report means the model is valid.
pub fn validate_model(model: &Model) -> ValidationReport {
    match model {
        Model::Discrete(m) => m.validate(),
        Model::Gaussian(m) => m.validate(),
    }
}
