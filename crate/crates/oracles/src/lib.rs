//! Brute-force references for tiny instances.
//!
//! These are slow and only meant for tests: a midpoint-rule quadrature of
//! the tempered posterior mean over the full prior support, and plain
//! rejection sampling of box-truncated Gaussians.

use bmc_core::model::{DenseMatrix, ObservationSet};
use bmc_core::prior::{rank_indicator_pmf, PriorConfig};
use bmc_core::tmvn::BoxTruncatedGaussian;
use bmc_core::{Error, Result};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

pub const MIN_POINTS_PER_DIM: usize = 11;
pub const MAX_DIMS: usize = 4;

/// Tensor grid over the latent coordinates `(U, V)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureGrid {
    pub points_per_dim: usize,
}

impl QuadratureGrid {
    pub fn new(points_per_dim: usize) -> Result<Self> {
        if points_per_dim < MIN_POINTS_PER_DIM {
            return Err(Error::InvalidConfig(format!(
                "quadrature needs at least {MIN_POINTS_PER_DIM} points per dimension, got {points_per_dim}"
            )));
        }
        Ok(Self { points_per_dim })
    }
}

/// Running `sum w` and `sum w M` with weights kept as `exp(log_w - shift)`.
struct Accumulator {
    shift: f64,
    weight: f64,
    moment: Vec<f64>,
}

impl Accumulator {
    fn new(len: usize) -> Self {
        Self {
            shift: f64::NEG_INFINITY,
            weight: 0.0,
            moment: vec![0.0; len],
        }
    }

    fn add(&mut self, log_w: f64, m: &[f64]) {
        if log_w > self.shift {
            let r = (self.shift - log_w).exp();
            self.weight *= r;
            self.moment.iter_mut().for_each(|x| *x *= r);
            self.shift = log_w;
        }
        let w = (log_w - self.shift).exp();
        self.weight += w;
        for (acc, v) in self.moment.iter_mut().zip(m) {
            *acc += w * v;
        }
    }
}

/// `int M exp(-lambda r(M)) dpi / int exp(-lambda r(M)) dpi` by the midpoint
/// rule over every rank stratum, weighted by the rank pmf. Spike columns
/// are pinned at zero when `kappa = 0` and integrated over `[-kappa, kappa]`
/// otherwise.
pub fn quadrature_posterior_mean(
    obs: &ObservationSet,
    cfg: &PriorConfig,
    lambda: f64,
    grid: &QuadratureGrid,
) -> Result<DenseMatrix> {
    cfg.validate()?;
    QuadratureGrid::new(grid.points_per_dim)?;
    if obs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("lambda must be nonnegative, got {lambda}")));
    }
    let (m, p, width) = (obs.rows(), obs.cols(), cfg.width);
    let dims = (m + p) * width;
    if dims > MAX_DIMS {
        return Err(Error::InvalidConfig(format!(
            "quadrature supports at most {MAX_DIMS} latent dimensions, got {dims}"
        )));
    }
    let pmf = rank_indicator_pmf(cfg)?;
    let n = obs.len() as f64;
    let pts = grid.points_per_dim;
    // Coordinate c is U[i, l] for c < m * width, else V[j, l].
    let column = |c: usize| c % width;
    let mut acc = Accumulator::new(m * p);
    let mut product = vec![0.0; m * p];
    for (k, pk) in pmf.iter().enumerate().map(|(i, pk)| (i + 1, pk)) {
        let half: Vec<f64> = (0..dims).map(|c| cfg.half_width(column(c), k)).collect();
        let active: Vec<usize> = (0..dims).filter(|&c| half[c] > 0.0).collect();
        let total = pts.pow(active.len() as u32);
        let mut x = vec![0.0; dims];
        for cell in 0..total {
            let mut rest = cell;
            for &c in &active {
                let a = rest % pts;
                rest /= pts;
                let h = 2.0 * half[c] / pts as f64;
                x[c] = -half[c] + (a as f64 + 0.5) * h;
            }
            let (u, v) = x.split_at(m * width);
            for i in 0..m {
                for j in 0..p {
                    product[i * p + j] = (0..width).map(|l| u[i * width + l] * v[j * width + l]).sum();
                }
            }
            let risk = obs
                .entries()
                .iter()
                .map(|e| (e.y - product[e.i * p + e.j]).powi(2))
                .sum::<f64>()
                / n;
            // Each stratum's prior is uniform on its grid, so every cell
            // carries mass pk / total.
            acc.add(pk.ln() - (total as f64).ln() - lambda * risk, &product);
        }
    }
    let mean: Vec<f64> = acc.moment.iter().map(|s| s / acc.weight).collect();
    DenseMatrix::from_row_major(m, p, mean)
}

/// Exact draws from a box-truncated Gaussian with the number of proposals
/// it took.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionSample {
    pub draws: Vec<Vec<f64>>,
    pub proposals: u64,
}

impl RejectionSample {
    pub fn acceptance_rate(&self) -> f64 {
        self.draws.len() as f64 / self.proposals as f64
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.draws.first().map_or(0, Vec::len);
        let n = self.draws.len() as f64;
        (0..d).map(|c| self.draws.iter().map(|x| x[c]).sum::<f64>() / n).collect()
    }

    /// Sample covariance with the `n - 1` denominator.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let mu = self.mean();
        let d = mu.len();
        let n = self.draws.len() as f64;
        let mut cov = vec![vec![0.0; d]; d];
        for x in &self.draws {
            for a in 0..d {
                for b in 0..d {
                    cov[a][b] += (x[a] - mu[a]) * (x[b] - mu[b]);
                }
            }
        }
        cov.iter_mut().flatten().for_each(|c| *c /= n - 1.0);
        cov
    }
}

pub const MIN_ACCEPTANCE: f64 = 1e-6;
/// Proposals made before the acceptance rate is judged.
const PILOT: u64 = 10_000_000;

/// Proposes from the untruncated Gaussian and keeps draws inside the box.
/// Fails once the observed acceptance rate after a pilot run is below
/// [`MIN_ACCEPTANCE`]; such boxes need the tail-robust sampler instead.
pub fn rejection_tmvn<R: Rng + ?Sized>(
    dist: &BoxTruncatedGaussian,
    count: usize,
    rng: &mut R,
) -> Result<RejectionSample> {
    if count == 0 {
        return Err(Error::InvalidConfig("count must be positive".into()));
    }
    let chol = dist
        .precision()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("rejection oracle needs a positive definite precision".into()))?;
    let mu = dist.mean();
    let lt = chol.l().transpose();
    let d = dist.dim();
    let mut draws = Vec::with_capacity(count);
    let mut proposals = 0u64;
    while draws.len() < count {
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let noise = lt
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
        let x: Vec<f64> = (0..d).map(|c| mu[c] + noise[c]).collect();
        proposals += 1;
        if dist.contains(&x) {
            draws.push(x);
        }
        if proposals >= PILOT && (draws.len() as f64) < MIN_ACCEPTANCE * proposals as f64 {
            return Err(Error::InvalidConfig(format!(
                "acceptance rate {} below {MIN_ACCEPTANCE}; this box is outside what the rejection oracle can test",
                draws.len() as f64 / proposals as f64
            )));
        }
    }
    Ok(RejectionSample { draws, proposals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use bmc_core::model::Observation;
    use bmc_core::rng::stream;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn one_by_one(ys: &[f64]) -> ObservationSet {
        ObservationSet::new(1, 1, ys.iter().map(|&y| Observation { i: 0, j: 0, y }).collect()).unwrap()
    }

    fn cfg(bound: f64) -> PriorConfig {
        PriorConfig::new(bound, 1, 0.5, 0.0).unwrap()
    }

    #[test]
    fn zero_lambda_gives_prior_mean() {
        let obs = one_by_one(&[0.9, 1.1]);
        let mean = quadrature_posterior_mean(&obs, &cfg(1.0), 0.0, &QuadratureGrid::new(101).unwrap()).unwrap();
        assert!(mean[(0, 0)].abs() < 1e-6);

        let obs = ObservationSet::new(2, 1, vec![Observation { i: 0, j: 0, y: 1.0 }]).unwrap();
        let mean = quadrature_posterior_mean(&obs, &cfg(1.0), 0.0, &QuadratureGrid::new(21).unwrap()).unwrap();
        assert!(mean[(0, 0)].abs() < 1e-6 && mean[(1, 0)].abs() < 1e-6);
    }

    #[test]
    fn large_lambda_concentrates_on_observation() {
        // L = 1/2 keeps M in [-1, 1]; y = 0.7 lies inside.
        let obs = one_by_one(&[0.7]);
        let mean = quadrature_posterior_mean(&obs, &cfg(0.5), 200.0, &QuadratureGrid::new(801).unwrap()).unwrap();
        assert!((mean[(0, 0)] - 0.7).abs() < 0.02, "{}", mean[(0, 0)]);
        // Outside the support the mean sits near the boundary.
        let obs = one_by_one(&[3.0]);
        let mean = quadrature_posterior_mean(&obs, &cfg(0.5), 200.0, &QuadratureGrid::new(801).unwrap()).unwrap();
        assert!(mean[(0, 0)] > 0.9 && mean[(0, 0)] <= 1.0, "{}", mean[(0, 0)]);
    }

    #[test]
    fn refinement_is_consistent() {
        let obs = one_by_one(&[0.8, 1.3, 0.4, 1.0, 0.9]);
        let coarse = quadrature_posterior_mean(&obs, &cfg(1.0), 5.0, &QuadratureGrid::new(400).unwrap()).unwrap();
        let fine = quadrature_posterior_mean(&obs, &cfg(1.0), 5.0, &QuadratureGrid::new(800).unwrap()).unwrap();
        assert!((coarse[(0, 0)] - fine[(0, 0)]).abs() < 1e-4);
    }

    #[test]
    fn rank_strata_and_pinned_columns() {
        // 1x1 with K = 2: four coordinates, the rank-1 stratum pins two.
        let obs = one_by_one(&[0.5, 0.6]);
        // K = 2 exceeds min(m, p) = 1 for fitting but is fine for the prior.
        let c = PriorConfig::new(1.0, 2, 0.5, 0.0).unwrap();
        let mean = quadrature_posterior_mean(&obs, &c, 3.0, &QuadratureGrid::new(15).unwrap()).unwrap();
        assert!(mean[(0, 0)] > 0.0 && mean[(0, 0)] < 0.6);
    }

    #[test]
    fn rejects_oversized_grids() {
        let obs = ObservationSet::new(3, 2, vec![Observation { i: 0, j: 0, y: 1.0 }]).unwrap();
        assert!(quadrature_posterior_mean(&obs, &cfg(1.0), 1.0, &QuadratureGrid { points_per_dim: 11 }).is_err());
        assert!(QuadratureGrid::new(5).is_err());
    }

    #[test]
    fn univariate_acceptance_rate() {
        let dist = BoxTruncatedGaussian::new(DVector::zeros(1), DMatrix::identity(1, 1), vec![-1.0], vec![1.0]).unwrap();
        let s = rejection_tmvn(&dist, 50_000, &mut stream(1, "test", 0)).unwrap();
        let rate = s.acceptance_rate();
        let p = 0.682_689_492_137_085_9;
        let se = (p * (1.0 - p) / s.proposals as f64).sqrt();
        assert!((rate - p).abs() < 4.0 * se, "{rate}");
        assert!(s.draws.iter().all(|x| dist.contains(x)));
    }

    #[test]
    fn hopeless_box_is_an_error() {
        let dist = BoxTruncatedGaussian::new(DVector::zeros(1), DMatrix::identity(1, 1), vec![8.0], vec![9.0]).unwrap();
        assert!(rejection_tmvn(&dist, 1, &mut stream(2, "test", 0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn sign_flip_symmetry(ys in proptest::collection::vec(-2.0f64..2.0, 1..4), lambda in 0.1f64..10.0) {
            let grid = QuadratureGrid::new(41).unwrap();
            let a = quadrature_posterior_mean(&one_by_one(&ys), &cfg(1.0), lambda, &grid).unwrap();
            let neg: Vec<f64> = ys.iter().map(|y| -y).collect();
            let b = quadrature_posterior_mean(&one_by_one(&neg), &cfg(1.0), lambda, &grid).unwrap();
            prop_assert!((a[(0, 0)] + b[(0, 0)]).abs() < 1e-10);
        }
    }
}
