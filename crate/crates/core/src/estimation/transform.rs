//! Bijection between interior models and unconstrained coordinates.
//!
//! Probability vectors use additive log-ratios against the last entry,
//! `z_i = ln(p_i / p_last)`, inverted by a softmax with the last logit fixed
//! at zero. Covariances use the lower Cholesky factor with a log-diagonal,
//! flattened row by row over the lower triangle. Unconstrained matrices
//! and means are copied row-major.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{DiscreteHmm, LinearGaussianModel, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    DiscreteHmm { states: usize, symbols: usize },
    LinearGaussian { state_dim: usize, obs_dim: usize },
}

/// Named groups of coordinates, in packing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    Initial,
    Transition,
    Emission,
    A,
    C,
    Q,
    R,
    Mu0,
    Sigma0,
}

impl Block {
    pub fn name(self) -> &'static str {
        match self {
            Block::Initial => "initial",
            Block::Transition => "transition",
            Block::Emission => "emission",
            Block::A => "A",
            Block::C => "C",
            Block::Q => "Q",
            Block::R => "R",
            Block::Mu0 => "mu0",
            Block::Sigma0 => "sigma0",
        }
    }
}

fn tri(n: usize) -> usize {
    n * (n + 1) / 2
}

impl Family {
    pub fn of(model: &Model) -> Self {
        match model {
            Model::Discrete(m) => Family::DiscreteHmm {
                states: m.states(),
                symbols: m.symbols(),
            },
            Model::Gaussian(m) => Family::LinearGaussian {
                state_dim: m.state_dim(),
                obs_dim: m.obs_dim(),
            },
        }
    }

    pub fn blocks(self) -> &'static [Block] {
        match self {
            Family::DiscreteHmm { .. } => &[Block::Initial, Block::Transition, Block::Emission],
            Family::LinearGaussian { .. } => &[
                Block::A,
                Block::C,
                Block::Q,
                Block::R,
                Block::Mu0,
                Block::Sigma0,
            ],
        }
    }

    pub fn block_len(self, block: Block) -> usize {
        match (self, block) {
            (Family::DiscreteHmm { states: k, .. }, Block::Initial) => k - 1,
            (Family::DiscreteHmm { states: k, .. }, Block::Transition) => k * (k - 1),
            (
                Family::DiscreteHmm {
                    states: k,
                    symbols: m,
                },
                Block::Emission,
            ) => k * (m - 1),
            (Family::LinearGaussian { state_dim: dx, .. }, Block::A) => dx * dx,
            (
                Family::LinearGaussian {
                    state_dim: dx,
                    obs_dim: dy,
                },
                Block::C,
            ) => dy * dx,
            (Family::LinearGaussian { state_dim: dx, .. }, Block::Q | Block::Sigma0) => tri(dx),
            (Family::LinearGaussian { obs_dim: dy, .. }, Block::R) => tri(dy),
            (Family::LinearGaussian { state_dim: dx, .. }, Block::Mu0) => dx,
            _ => 0,
        }
    }

    /// Number of free coordinates.
    pub fn dim(self) -> usize {
        self.blocks().iter().map(|&b| self.block_len(b)).sum()
    }
}

/// Unconstrained coordinates of a model, tagged with its family.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    pub family: Family,
    pub values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(family: Family, values: Vec<f64>) -> Result<Self> {
        if values.len() != family.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{family:?} has {} coordinates, got {}",
                family.dim(),
                values.len()
            )));
        }
        Ok(Self { family, values })
    }
}

fn pack_probabilities(p: &[f64], field: &str, out: &mut Vec<f64>) -> Result<()> {
    if let Some(j) = p.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Boundary(format!(
            "{field}[{j}] = {} is not strictly positive",
            p[j]
        )));
    }
    let reference = p[p.len() - 1].ln();
    out.extend(p[..p.len() - 1].iter().map(|v| v.ln() - reference));
    Ok(())
}

fn unpack_probabilities(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(0.0f64, f64::max);
    let mut p: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    p.push((-max).exp());
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= sum);
    p
}

fn unpack_rows(matrix: &mut DMatrix<f64>, z: &[f64]) {
    let free = matrix.ncols() - 1;
    for i in 0..matrix.nrows() {
        let row = unpack_probabilities(&z[i * free..(i + 1) * free]);
        row.iter()
            .enumerate()
            .for_each(|(j, v)| matrix[(i, j)] = *v);
    }
}

fn pack_covariance(s: &DMatrix<f64>, field: &str, out: &mut Vec<f64>) -> Result<()> {
    let chol = Cholesky::new(s.clone())
        .ok_or_else(|| Error::Boundary(format!("{field} is not strictly positive definite")))?;
    let l = chol.l();
    for i in 0..l.nrows() {
        for j in 0..=i {
            out.push(if i == j { l[(i, i)].ln() } else { l[(i, j)] });
        }
    }
    Ok(())
}

fn unpack_covariance(z: &[f64], n: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    let mut it = z.iter();
    for i in 0..n {
        for j in 0..=i {
            let v = *it.next().expect("coordinate count checked");
            l[(i, j)] = if i == j { v.exp() } else { v };
        }
    }
    let mut s = &l * l.transpose();
    crate::numeric::symmetrize(&mut s);
    s
}

fn rows_of(m: &DMatrix<f64>) -> impl Iterator<Item = Vec<f64>> + '_ {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect())
}

/// Coordinates of one block of `model`.
pub(crate) fn pack_block(model: &Model, block: Block, out: &mut Vec<f64>) -> Result<()> {
    match (model, block) {
        (Model::Discrete(m), Block::Initial) => pack_probabilities(&m.initial, "initial", out),
        (Model::Discrete(m), Block::Transition | Block::Emission) => {
            let matrix = if block == Block::Transition {
                &m.transition
            } else {
                &m.emission
            };
            for (i, row) in rows_of(matrix).enumerate() {
                pack_probabilities(&row, &format!("{}[{i}]", block.name()), out)?;
            }
            Ok(())
        }
        (Model::Gaussian(m), Block::A | Block::C) => {
            let matrix = if block == Block::A { &m.a } else { &m.c };
            rows_of(matrix).for_each(|r| out.extend(r));
            Ok(())
        }
        (Model::Gaussian(m), Block::Q) => pack_covariance(&m.q, "Q", out),
        (Model::Gaussian(m), Block::R) => pack_covariance(&m.r, "R", out),
        (Model::Gaussian(m), Block::Sigma0) => pack_covariance(&m.sigma0, "sigma0", out),
        (Model::Gaussian(m), Block::Mu0) => {
            out.extend(m.mu0.iter());
            Ok(())
        }
        _ => Err(Error::Usage(format!(
            "block {} does not belong to this family",
            block.name()
        ))),
    }
}

/// Overwrites one block of `model` from its coordinates.
pub(crate) fn unpack_block(model: &mut Model, block: Block, z: &[f64]) {
    match model {
        Model::Discrete(m) => match block {
            Block::Initial => m.initial = unpack_probabilities(z),
            Block::Transition => unpack_rows(&mut m.transition, z),
            Block::Emission => unpack_rows(&mut m.emission, z),
            _ => {}
        },
        Model::Gaussian(m) => {
            let (dx, dy) = (m.state_dim(), m.obs_dim());
            match block {
                Block::A => m.a = DMatrix::from_row_slice(dx, dx, z),
                Block::C => m.c = DMatrix::from_row_slice(dy, dx, z),
                Block::Q => m.q = unpack_covariance(z, dx),
                Block::R => m.r = unpack_covariance(z, dy),
                Block::Sigma0 => m.sigma0 = unpack_covariance(z, dx),
                Block::Mu0 => m.mu0 = DVector::from_column_slice(z),
                _ => {}
            }
        }
    }
}

/// Template model of the right shape, used as the target of a full unpack.
fn blank(family: Family) -> Model {
    match family {
        Family::DiscreteHmm {
            states: k,
            symbols: m,
        } => Model::Discrete(DiscreteHmm {
            initial: vec![1.0 / k as f64; k],
            transition: DMatrix::from_element(k, k, 1.0 / k as f64),
            emission: DMatrix::from_element(k, m, 1.0 / m as f64),
        }),
        Family::LinearGaussian {
            state_dim: dx,
            obs_dim: dy,
        } => Model::Gaussian(LinearGaussianModel {
            a: DMatrix::zeros(dx, dx),
            c: DMatrix::zeros(dy, dx),
            q: DMatrix::identity(dx, dx),
            r: DMatrix::identity(dy, dy),
            mu0: DVector::zeros(dx),
            sigma0: DMatrix::identity(dx, dx),
        }),
    }
}

pub fn pack(model: &Model) -> Result<ParameterVector> {
    let family = Family::of(model);
    let mut values = Vec::with_capacity(family.dim());
    for &block in family.blocks() {
        pack_block(model, block, &mut values)?;
    }
    ParameterVector::new(family, values)
}

pub fn unpack(theta: &ParameterVector) -> Result<Model> {
    let family = theta.family;
    if theta.values.len() != family.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{family:?} has {} coordinates, got {}",
            family.dim(),
            theta.values.len()
        )));
    }
    if theta.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(
            "parameter vector has non-finite coordinates".into(),
        ));
    }
    let mut model = blank(family);
    let mut offset = 0;
    for &block in family.blocks() {
        let len = family.block_len(block);
        unpack_block(&mut model, block, &theta.values[offset..offset + len]);
        offset += len;
    }
    Ok(model)
}
