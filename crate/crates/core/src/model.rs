//! Observations, sampling distributions, dense matrices and the risk
//! functionals every estimator is judged by.
//!
//! Indices are 0-based everywhere in this crate. The CSV layer in
//! [`crate::io`] is the only place that converts to and from the 1-based
//! convention used in files.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Above this many terms, sums switch to Neumaier compensated summation.
pub const COMPENSATED_THRESHOLD: usize = 10_000;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidConfig(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::InvalidConfig(format!(
                    "row {r} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * other^T`, the product used to turn factor pairs into matrices.
    pub fn mul_transpose(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected_rows: other.rows,
                expected_cols: self.cols,
                rows: other.rows,
                cols: other.cols,
            });
        }
        let mut out = Self::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            let dst = &mut out.data[i * other.rows..(i + 1) * other.rows];
            for (j, d) in dst.iter_mut().enumerate() {
                *d = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn sum(&self) -> f64 {
        sum_values(self.data.iter().copied(), self.data.len())
    }

    pub fn frobenius_sq(&self) -> f64 {
        sum_values(self.data.iter().map(|v| v * v), self.data.len())
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<Self> {
        ensure_same_shape(self, other.rows, other.cols)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn add_assign(&mut self, other: &DenseMatrix) -> Result<()> {
        ensure_same_shape(self, other.rows, other.cols)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Singular values in decreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self
            .to_nalgebra()
            .singular_values()
            .iter()
            .copied()
            .collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn ensure_same_shape(m: &DenseMatrix, rows: usize, cols: usize) -> Result<()> {
    if m.rows != rows || m.cols != cols {
        return Err(Error::DimensionMismatch {
            expected_rows: rows,
            expected_cols: cols,
            rows: m.rows,
            cols: m.cols,
        });
    }
    Ok(())
}

/// Left-to-right sum; compensated (Neumaier) once `len` exceeds
/// [`COMPENSATED_THRESHOLD`].
pub fn sum_values(values: impl Iterator<Item = f64>, len: usize) -> f64 {
    if len <= COMPENSATED_THRESHOLD {
        return values.fold(0.0, |acc, v| acc + v);
    }
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// One observed entry, 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub i: usize,
    pub j: usize,
    pub y: f64,
}

/// The `n` noisy entry observations a fit conditions on. Duplicate `(i, j)`
/// pairs are kept as distinct samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    rows: usize,
    cols: usize,
    entries: Vec<Observation>,
}

impl ObservationSet {
    pub fn new(rows: usize, cols: usize, entries: Vec<Observation>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        for e in &entries {
            if e.i >= rows || e.j >= cols {
                return Err(Error::IndexOutOfRange {
                    i: e.i,
                    j: e.j,
                    m: rows,
                    p: cols,
                });
            }
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Observation] {
        &self.entries
    }

    /// The same data with rows and columns swapped.
    pub fn transposed(&self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            entries: self
                .entries
                .iter()
                .map(|e| Observation {
                    i: e.j,
                    j: e.i,
                    y: e.y,
                })
                .collect(),
        }
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::EmptyObservations);
        }
        Ok(())
    }
}

/// Entrywise sampling probabilities over the `m x p` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution {
    weights: DenseMatrix,
}

impl SamplingDistribution {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(weights: DenseMatrix) -> Result<Self> {
        if let Some(w) = weights.as_slice().iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "weight {w} is not a finite nonnegative number"
            )));
        }
        let total = weights.sum();
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { weights })
    }

    /// Rescales arbitrary nonnegative weights to sum to one.
    pub fn from_unnormalized(mut weights: DenseMatrix) -> Result<Self> {
        let total = weights.sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "weights must have a positive finite sum, got {total}"
            )));
        }
        weights.scale(1.0 / total);
        Self::new(weights)
    }

    pub fn uniform(rows: usize, cols: usize) -> Self {
        let w = 1.0 / (rows * cols) as f64;
        Self {
            weights: DenseMatrix::from_fn(rows, cols, |_, _| w),
        }
    }

    pub fn point_mass(rows: usize, cols: usize, i: usize, j: usize) -> Result<Self> {
        if i >= rows || j >= cols {
            return Err(Error::IndexOutOfRange {
                i,
                j,
                m: rows,
                p: cols,
            });
        }
        let mut weights = DenseMatrix::zeros(rows, cols);
        weights[(i, j)] = 1.0;
        Ok(Self { weights })
    }

    /// Row `i` gets mass proportional to `row_weights[i]`, spread evenly
    /// across its columns.
    pub fn row_weighted(row_weights: &[f64], cols: usize) -> Result<Self> {
        let rows = row_weights.len();
        Self::from_unnormalized(DenseMatrix::from_fn(rows, cols, |i, _| row_weights[i]))
    }

    pub fn weights(&self) -> &DenseMatrix {
        &self.weights
    }

    pub fn shape(&self) -> (usize, usize) {
        self.weights.shape()
    }

    pub fn is_uniform(&self) -> bool {
        let first = self.weights.as_slice()[0];
        self.weights.as_slice().iter().all(|w| *w == first)
    }
}

/// `r(M) = (1/n) sum (y_i - M_{x_i})^2`.
pub fn empirical_risk(obs: &ObservationSet, m: &DenseMatrix) -> Result<f64> {
    ensure_same_shape(m, obs.rows, obs.cols)?;
    obs.require_nonempty()?;
    let total = sum_values(
        obs.entries.iter().map(|e| {
            let r = e.y - m[(e.i, e.j)];
            r * r
        }),
        obs.len(),
    );
    Ok(total / obs.len() as f64)
}

/// `sum_ij A_ij^2 Pi_ij`.
pub fn weighted_frobenius_sq(a: &DenseMatrix, pi: &SamplingDistribution) -> Result<f64> {
    let (rows, cols) = pi.shape();
    ensure_same_shape(a, rows, cols)?;
    let n = a.data.len();
    Ok(sum_values(
        a.data
            .iter()
            .zip(pi.weights.as_slice())
            .map(|(v, w)| v * v * w),
        n,
    ))
}

/// `[(1/mp) ||Mhat - M0||_F^2]^{1/2}`.
pub fn rmse_per_entry(estimate: &DenseMatrix, truth: &DenseMatrix) -> Result<f64> {
    ensure_same_shape(estimate, truth.rows, truth.cols)?;
    let diff = estimate.sub(truth)?;
    Ok((diff.frobenius_sq() / diff.data.len() as f64).sqrt())
}
