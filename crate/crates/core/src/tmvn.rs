//! Gaussian sampling under axis-aligned box truncation.
//!
//! [`sample_box_tmvn`] runs coordinate-wise Gibbs sweeps: every free
//! coordinate is redrawn from its univariate conditional, which in
//! precision form has variance `1 / Lambda_ii` and mean
//! `(h_i - sum_{j != i} Lambda_ij x_j) / Lambda_ii` with `h = Lambda mu`.
//! Working from `h` keeps singular precisions (rows with few
//! observations, pinned spike columns) well defined.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Exp1, Open01};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

/// Default number of coordinate sweeps per conditional draw.
pub const DEFAULT_SWEEPS: usize = 2;

/// Standardized distance beyond which the exponential tail sampler is used.
const TAIL_THRESHOLD: f64 = 5.0;

const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// A multivariate normal restricted to `[lower, upper]`, stored in
/// canonical form `(Lambda, h = Lambda mu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxTruncatedGaussian {
    precision: DMatrix<f64>,
    shift: DVector<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxTruncatedGaussian {
    /// From a mean vector and precision matrix.
    pub fn new(
        mean: DVector<f64>,
        precision: DMatrix<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        if mean.len() != precision.nrows() {
            return Err(Error::LengthMismatch(mean.len(), precision.nrows()));
        }
        let shift = &precision * &mean;
        Self::from_canonical(shift, precision, lower, upper)
    }

    /// From the precision matrix and the linear term `h = Lambda mu`.
    pub fn from_canonical(
        shift: DVector<f64>,
        precision: DMatrix<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        let d = shift.len();
        if precision.nrows() != d || precision.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected_rows: d,
                expected_cols: d,
                rows: precision.nrows(),
                cols: precision.ncols(),
            });
        }
        if lower.len() != d {
            return Err(Error::LengthMismatch(lower.len(), d));
        }
        if upper.len() != d {
            return Err(Error::LengthMismatch(upper.len(), d));
        }
        if let Some((lo, hi)) = lower.iter().zip(&upper).find(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidInterval { lo: *lo, hi: *hi });
        }
        let scale = precision.amax().max(1.0);
        for i in 0..d {
            for j in 0..i {
                if (precision[(i, j)] - precision[(j, i)]).abs() > SYMMETRY_TOLERANCE * scale {
                    return Err(Error::NotPositiveDefinite(format!(
                        "asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if d > 0 {
            let min_eig = precision.clone().symmetric_eigenvalues().min();
            if min_eig < -SYMMETRY_TOLERANCE * scale {
                return Err(Error::NotPositiveDefinite(format!(
                    "smallest eigenvalue {min_eig}"
                )));
            }
        }
        Ok(Self {
            precision,
            shift,
            lower,
            upper,
        })
    }

    /// Zeroed buffer of dimension `d`, reused by the Gibbs engine.
    pub(crate) fn workspace(d: usize) -> Self {
        Self {
            precision: DMatrix::zeros(d, d),
            shift: DVector::zeros(d),
            lower: vec![0.0; d],
            upper: vec![0.0; d],
        }
    }

    pub(crate) fn parts_mut(
        &mut self,
    ) -> (&mut DMatrix<f64>, &mut DVector<f64>, &mut [f64], &mut [f64]) {
        (
            &mut self.precision,
            &mut self.shift,
            &mut self.lower,
            &mut self.upper,
        )
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// Mean of the untruncated Gaussian: the minimum-norm solution of
    /// `Lambda mu = h`.
    pub fn mean(&self) -> DVector<f64> {
        if let Some(chol) = self.precision.clone().cholesky() {
            return chol.solve(&self.shift);
        }
        let eig = self.precision.clone().symmetric_eigen();
        let cutoff = eig.eigenvalues.amax() * 1e-12 * self.dim() as f64;
        let mut mu = DVector::zeros(self.dim());
        for (k, lambda) in eig.eigenvalues.iter().enumerate() {
            if *lambda > cutoff {
                let q = eig.eigenvectors.column(k);
                mu += q * (q.dot(&self.shift) / lambda);
            }
        }
        mu
    }
}

#[inline]
fn upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

#[inline]
fn upper_tail_inv(q: f64) -> f64 {
    std::f64::consts::SQRT_2 * erfc_inv(2.0 * q)
}

/// Standard normal restricted to `[a, b]`, `a < b`.
fn standard_truncated<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    // Narrow boxes: uniform proposal, acceptance at least 1/e.
    let min_sq = if a <= 0.0 && b >= 0.0 { 0.0 } else { (a * a).min(b * b) };
    let max_sq = (a * a).max(b * b);
    if max_sq - min_sq <= 2.0 {
        loop {
            let z = a + (b - a) * rng.random::<f64>();
            let u: f64 = rng.sample(Open01);
            if u.ln() <= -0.5 * (z * z - min_sq) {
                return z;
            }
        }
    }
    if a >= TAIL_THRESHOLD {
        return exponential_tail(a, b, rng);
    }
    if b <= -TAIL_THRESHOLD {
        return -exponential_tail(-b, -a, rng);
    }
    let u: f64 = rng.sample(Open01);
    let z = if a >= 0.0 {
        let (qa, qb) = (upper_tail(a), upper_tail(b));
        upper_tail_inv(qa - u * (qa - qb))
    } else if b <= 0.0 {
        let (qa, qb) = (upper_tail(-b), upper_tail(-a));
        -upper_tail_inv(qa - u * (qa - qb))
    } else {
        let (pa, pb) = (upper_tail(-a), upper_tail(-b));
        -upper_tail_inv(pa + u * (pb - pa))
    };
    z.clamp(a, b)
}

/// Robert's translated-exponential rejection sampler on `[a, b]`, `a > 0`.
fn exponential_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = rng.sample(Exp1);
        let z = a + e / rate;
        if z > b {
            continue;
        }
        let u: f64 = rng.sample(Open01);
        if u.ln() <= -0.5 * (z - rate) * (z - rate) {
            return z;
        }
    }
}

/// One draw from `N(mu, sigma^2)` conditioned on `[lo, hi]`.
pub fn sample_truncated_univariate<R: Rng + ?Sized>(
    mu: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::InvalidInterval { lo, hi });
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
    }
    Ok(truncated_draw(mu, sigma, lo, hi, rng))
}

#[inline]
fn truncated_draw<R: Rng + ?Sized>(mu: f64, sigma: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    if !sigma.is_finite() {
        return lo + (hi - lo) * rng.random::<f64>();
    }
    let z = standard_truncated((lo - mu) / sigma, (hi - mu) / sigma, rng);
    (mu + sigma * z).clamp(lo, hi)
}

/// Runs `sweeps` coordinate-Gibbs sweeps from `current` and returns the
/// final state.
pub fn sample_box_tmvn<R: Rng + ?Sized>(
    dist: &BoxTruncatedGaussian,
    current: &[f64],
    sweeps: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if current.len() != dist.dim() {
        return Err(Error::LengthMismatch(current.len(), dist.dim()));
    }
    if let Some(coord) = (0..dist.dim())
        .find(|&i| !(dist.lower[i] <= current[i] && current[i] <= dist.upper[i]))
    {
        return Err(Error::OutsideBox { coord });
    }
    if let Some(i) = (0..dist.dim()).find(|&i| dist.precision[(i, i)] < 0.0) {
        return Err(Error::NotPositiveDefinite(format!(
            "negative conditional precision at coordinate {i}"
        )));
    }
    let mut x = current.to_vec();
    gibbs_sweeps(dist, &mut x, sweeps, rng);
    Ok(x)
}

/// In-place sweeps without input validation. Zero-width coordinates are
/// pinned; coordinates without conditional precision are uniform on
/// their interval.
pub(crate) fn gibbs_sweeps<R: Rng + ?Sized>(
    dist: &BoxTruncatedGaussian,
    x: &mut [f64],
    sweeps: usize,
    rng: &mut R,
) {
    let d = x.len();
    for i in 0..d {
        if dist.lower[i] == dist.upper[i] {
            x[i] = dist.lower[i];
        }
    }
    for _ in 0..sweeps {
        for i in 0..d {
            let (lo, hi) = (dist.lower[i], dist.upper[i]);
            if lo == hi {
                continue;
            }
            let lambda_ii = dist.precision[(i, i)];
            if lambda_ii <= 0.0 {
                x[i] = lo + (hi - lo) * rng.random::<f64>();
                continue;
            }
            let mut h = dist.shift[i];
            for (j, xj) in x.iter().enumerate() {
                if j != i {
                    h -= dist.precision[(i, j)] * xj;
                }
            }
            x[i] = truncated_draw(h / lambda_ii, lambda_ii.sqrt().recip(), lo, hi, rng);
        }
    }
}
