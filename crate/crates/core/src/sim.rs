//! Synthetic experiments.
//!
//! Every series uses a square `m x m` truth and observes
//! `n = round(fraction * m^2)` entries drawn from `Pi`:
//!
//! 1. `M0 = U0 V0^T` with `m x 2` Gaussian factors, `N(0, 1)` noise;
//! 2. series 1 plus `(1/100) Z0 W0^T` with `m x 50` Gaussian factors;
//! 3. series 1 truth, noise uniform on `[-1, 1]`;
//! 4. series 1 truth, Student-t noise with 5 degrees of freedom (not
//!    rescaled).
//!
//! Factor entries are `N(0, 20/sqrt(m))` with the second parameter read as
//! a variance unless `gaussian_param_is_variance` is off.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Normal, StudentT, Uniform};

use crate::bounds::{lambda_experiment, lambda_gauss, lambda_star, NoiseSpec};
use crate::error::{Error, Result};
use crate::gibbs::{run_conjugate_prior, run_uniform_prior, FitOutput, GibbsConfig};
use crate::model::{rmse_per_entry, DenseMatrix, Observation, ObservationSet, SamplingDistribution};
use crate::prior::{ConjugatePriorConfig, PriorConfig};
use crate::rng::{derive_seed, stream};

/// Rank of the leading part of every truth.
pub const TRUTH_RANK: usize = 2;
/// Width of the small perturbation in series 2.
pub const PERTURBATION_WIDTH: usize = 50;
pub const PERTURBATION_SCALE: f64 = 0.01;
/// Degrees of freedom of the series-4 noise.
pub const HEAVY_TAIL_DOF: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Gaussian { sd: f64 },
    Uniform { half_width: f64 },
    StudentT { dof: f64 },
}

impl NoiseModel {
    pub fn for_series(series: u8) -> Result<Self> {
        match series {
            1 | 2 => Ok(Self::Gaussian { sd: 1.0 }),
            3 => Ok(Self::Uniform { half_width: 1.0 }),
            4 => Ok(Self::StudentT { dof: HEAVY_TAIL_DOF }),
            s => Err(Error::InvalidConfig(format!("series must be 1, 2, 3 or 4, got {s}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Gaussian { sd } => sd > 0.0 && sd.is_finite(),
            Self::Uniform { half_width } => half_width > 0.0 && half_width.is_finite(),
            Self::StudentT { dof } => dof > 2.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDistribution(format!("invalid noise model {self:?}")))
        }
    }

    /// `n` i.i.d. draws.
    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.validate()?;
        let bad = |e: &dyn fmt::Display| Error::InvalidDistribution(e.to_string());
        Ok(match *self {
            Self::Gaussian { sd } => {
                let d = Normal::new(0.0, sd).map_err(|e| bad(&e))?;
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Self::Uniform { half_width } => {
                let d = Uniform::new_inclusive(-half_width, half_width).map_err(|e| bad(&e))?;
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Self::StudentT { dof } => {
                let d = StudentT::new(dof).map_err(|e| bad(&e))?;
                (0..n).map(|_| d.sample(rng)).collect()
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Estimator {
    Uniform,
    Conjugate,
}

impl Estimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Conjugate => "conjugate",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "conjugate" => Ok(Self::Conjugate),
            other => Err(Error::InvalidConfig(format!("unknown estimator '{other}'"))),
        }
    }
}

/// How the inverse temperature is chosen from `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaMode {
    /// `n / (4 sigma^2)`.
    #[default]
    Experiment,
    /// `n / (2C)`.
    Star,
    /// `n / (2 sigma^2)`.
    Gauss,
}

impl LambdaMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Experiment => "experiment",
            Self::Star => "star",
            Self::Gauss => "gauss",
        }
    }

    pub fn resolve(&self, n: usize, bound: f64, noise: &NoiseSpec) -> Result<f64> {
        noise.validate()?;
        if n == 0 {
            return Err(Error::EmptyObservations);
        }
        match self {
            Self::Experiment => Ok(lambda_experiment(n, noise.sigma)),
            Self::Star => lambda_star(n, bound, noise),
            Self::Gauss => Ok(lambda_gauss(n, noise.sigma)),
        }
    }
}

impl FromStr for LambdaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "experiment" => Ok(Self::Experiment),
            "star" => Ok(Self::Star),
            "gauss" => Ok(Self::Gauss),
            other => Err(Error::InvalidConfig(format!("unknown lambda mode '{other}'"))),
        }
    }
}

/// One replication of one series at one size.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub series: u8,
    pub m: usize,
    pub observe_fraction: f64,
    /// Seed of this replication; all substreams derive from it.
    pub seed: u64,
    pub prior: PriorConfig,
    pub conjugate: ConjugatePriorConfig,
    /// `seed` is overwritten by the replication seed.
    pub gibbs: GibbsConfig,
    pub lambda_mode: LambdaMode,
    /// Noise constants used to resolve `lambda`.
    pub noise_bound: NoiseSpec,
    pub estimators: Vec<Estimator>,
    pub gaussian_param_is_variance: bool,
    pub without_replacement: bool,
    /// `None` means uniform sampling.
    pub sampling: Option<SamplingDistribution>,
    /// Number of randomly chosen entries whose traces are recorded.
    pub monitored_entries: usize,
}

impl ExperimentSpec {
    /// Standard experiment settings for `series` at size `m`.
    pub fn experiment_defaults(series: u8, m: usize, seed: u64) -> Self {
        let mut prior = PriorConfig::EXPERIMENT;
        if series == 4 {
            prior.tau = 0.25;
        }
        Self {
            series,
            m,
            observe_fraction: 0.2,
            seed,
            prior,
            conjugate: ConjugatePriorConfig::EXPERIMENT,
            gibbs: GibbsConfig::default(),
            lambda_mode: LambdaMode::Experiment,
            noise_bound: NoiseSpec { sigma: 1.0, xi: 1.0 },
            estimators: vec![Estimator::Uniform, Estimator::Conjugate],
            gaussian_param_is_variance: true,
            without_replacement: false,
            sampling: None,
            monitored_entries: 0,
        }
    }

    pub fn observation_count(&self) -> usize {
        (self.observe_fraction * (self.m * self.m) as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        NoiseModel::for_series(self.series)?;
        if self.m == 0 {
            return Err(Error::InvalidConfig("m must be positive".into()));
        }
        if self.series == 2 && self.m < PERTURBATION_WIDTH {
            return Err(Error::SeriesTwoDimension(self.m));
        }
        if !(self.observe_fraction > 0.0 && self.observe_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "observe_fraction must lie in (0, 1], got {}",
                self.observe_fraction
            )));
        }
        if self.observation_count() == 0 {
            return Err(Error::EmptyObservations);
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig("no estimator selected".into()));
        }
        if let Some(pi) = &self.sampling {
            if pi.shape() != (self.m, self.m) {
                let (rows, cols) = pi.shape();
                return Err(Error::DimensionMismatch {
                    expected_rows: self.m,
                    expected_cols: self.m,
                    rows,
                    cols,
                });
            }
        }
        self.prior.validate()?;
        self.conjugate.validate()?;
        self.gibbs.validate()?;
        self.noise_bound.validate()
    }

    pub fn sampling_distribution(&self) -> SamplingDistribution {
        self.sampling
            .clone()
            .unwrap_or_else(|| SamplingDistribution::uniform(self.m, self.m))
    }
}

/// Seed of replication `rep` of `(series, m)` below the master seed.
pub fn replication_seed(master: u64, series: u8, m: usize, rep: usize) -> u64 {
    let s = derive_seed(master, "replication", u64::from(series));
    let s = derive_seed(s, "replication", m as u64);
    derive_seed(s, "replication", rep as u64)
}

/// One results row.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseRecord {
    pub series: u8,
    pub m: usize,
    pub replication: usize,
    pub estimator: Estimator,
    pub rmse: f64,
    pub seconds: f64,
    pub seed: u64,
}

fn gaussian_factor<R: Rng + ?Sized>(rows: usize, cols: usize, sd: f64, rng: &mut R) -> Result<DenseMatrix> {
    let normal = Normal::new(0.0, sd).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    Ok(DenseMatrix::from_fn(rows, cols, |_, _| normal.sample(rng)))
}

/// Ground truth for `series` at size `m x m`.
pub fn gen_ground_truth<R: Rng + ?Sized>(
    series: u8,
    m: usize,
    gaussian_param_is_variance: bool,
    rng: &mut R,
) -> Result<DenseMatrix> {
    NoiseModel::for_series(series)?;
    if m == 0 {
        return Err(Error::InvalidConfig("m must be positive".into()));
    }
    if series == 2 && m < PERTURBATION_WIDTH {
        return Err(Error::SeriesTwoDimension(m));
    }
    let param = 20.0 / (m as f64).sqrt();
    let sd = if gaussian_param_is_variance { param.sqrt() } else { param };
    let u = gaussian_factor(m, TRUTH_RANK, sd, rng)?;
    let v = gaussian_factor(m, TRUTH_RANK, sd, rng)?;
    let mut m0 = u.mul_transpose(&v)?;
    if series == 2 {
        let z = gaussian_factor(m, PERTURBATION_WIDTH, sd, rng)?;
        let w = gaussian_factor(m, PERTURBATION_WIDTH, sd, rng)?;
        let mut extra = z.mul_transpose(&w)?;
        extra.scale(PERTURBATION_SCALE);
        m0.add_assign(&extra)?;
    }
    Ok(m0)
}

/// `n` i.i.d. positions from `pi` (with replacement) plus noise.
pub fn sample_observations<R: Rng + ?Sized>(
    m0: &DenseMatrix,
    pi: &SamplingDistribution,
    n: usize,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<ObservationSet> {
    let positions = sample_positions(m0, pi, n, false, rng)?;
    add_noise(m0, positions, noise, rng)
}

/// `n` distinct positions drawn sequentially from `pi` without
/// replacement, plus noise.
pub fn sample_observations_without_replacement<R: Rng + ?Sized>(
    m0: &DenseMatrix,
    pi: &SamplingDistribution,
    n: usize,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<ObservationSet> {
    let positions = sample_positions(m0, pi, n, true, rng)?;
    add_noise(m0, positions, noise, rng)
}

fn sample_positions<R: Rng + ?Sized>(
    m0: &DenseMatrix,
    pi: &SamplingDistribution,
    n: usize,
    distinct: bool,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    if pi.shape() != m0.shape() {
        let (rows, cols) = pi.shape();
        return Err(Error::DimensionMismatch {
            expected_rows: m0.rows(),
            expected_cols: m0.cols(),
            rows,
            cols,
        });
    }
    if n == 0 {
        return Err(Error::EmptyObservations);
    }
    let p = m0.cols();
    let weights = pi.weights().as_slice();
    let flat: Vec<usize> = if distinct {
        let support = weights.iter().filter(|w| **w > 0.0).count();
        if n > support {
            return Err(Error::InvalidConfig(format!(
                "cannot draw {n} distinct entries from a support of {support}"
            )));
        }
        rand::seq::index::sample_weighted(rng, weights.len(), |k| weights[k], n)
            .map_err(|e| Error::InvalidDistribution(e.to_string()))?
            .into_iter()
            .collect()
    } else {
        let index = WeightedIndex::new(weights).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
        (0..n).map(|_| index.sample(rng)).collect()
    };
    Ok(flat.into_iter().map(|k| (k / p, k % p)).collect())
}

fn add_noise<R: Rng + ?Sized>(
    m0: &DenseMatrix,
    positions: Vec<(usize, usize)>,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<ObservationSet> {
    let eps = noise.sample_n(positions.len(), rng)?;
    let entries = positions
        .into_iter()
        .zip(eps)
        .map(|((i, j), e)| Observation { i, j, y: m0[(i, j)] + e })
        .collect();
    ObservationSet::new(m0.rows(), m0.cols(), entries)
}

/// The generated data of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub truth: DenseMatrix,
    pub observations: ObservationSet,
}

/// Truth and observations for `spec`, from the `truth`, `sample` and
/// `noise` substreams of `spec.seed`.
pub fn simulate(spec: &ExperimentSpec) -> Result<SimulatedData> {
    spec.validate()?;
    let truth = gen_ground_truth(
        spec.series,
        spec.m,
        spec.gaussian_param_is_variance,
        &mut stream(spec.seed, "truth", 0),
    )?;
    let pi = spec.sampling_distribution();
    let n = spec.observation_count();
    let positions = sample_positions(&truth, &pi, n, spec.without_replacement, &mut stream(spec.seed, "sample", 0))?;
    let noise = NoiseModel::for_series(spec.series)?;
    let observations = add_noise(&truth, positions, &noise, &mut stream(spec.seed, "noise", 0))?;
    Ok(SimulatedData { truth, observations })
}

/// Fit results of one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorRun {
    pub estimator: Estimator,
    pub fit: FitOutput,
    pub rmse: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub data: SimulatedData,
    pub lambda: f64,
    pub monitored: Vec<(usize, usize)>,
    pub runs: Vec<EstimatorRun>,
}

impl ExperimentOutcome {
    pub fn records(&self, spec: &ExperimentSpec, replication: usize) -> Vec<RmseRecord> {
        self.runs
            .iter()
            .map(|r| RmseRecord {
                series: spec.series,
                m: spec.m,
                replication,
                estimator: r.estimator,
                rmse: r.rmse,
                seconds: r.seconds,
                seed: spec.seed,
            })
            .collect()
    }

    pub fn run(&self, estimator: Estimator) -> Option<&EstimatorRun> {
        self.runs.iter().find(|r| r.estimator == estimator)
    }
}

/// Distinct entries to monitor, drawn from the `monitor` substream.
pub fn pick_monitored(seed: u64, m: usize, p: usize, count: usize) -> Vec<(usize, usize)> {
    let count = count.min(m * p);
    let mut rng = stream(seed, "monitor", 0);
    rand::seq::index::sample(&mut rng, m * p, count)
        .into_iter()
        .map(|k| (k / p, k % p))
        .collect()
}

/// Simulates one replication and fits every requested estimator to it.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let data = simulate(spec)?;
    let obs = &data.observations;
    let lambda = spec.lambda_mode.resolve(obs.len(), spec.prior.bound, &spec.noise_bound)?;
    let gibbs = GibbsConfig {
        seed: spec.seed,
        ..spec.gibbs
    };
    let monitored = pick_monitored(spec.seed, obs.rows(), obs.cols(), spec.monitored_entries);
    let mut runs = Vec::with_capacity(spec.estimators.len());
    for &estimator in &spec.estimators {
        let start = Instant::now();
        let fit = match estimator {
            Estimator::Uniform => run_uniform_prior(obs, &spec.prior, lambda, &gibbs, &monitored)?,
            Estimator::Conjugate => run_conjugate_prior(obs, &spec.conjugate, lambda, &gibbs, &monitored)?,
        };
        let seconds = start.elapsed().as_secs_f64();
        let rmse = rmse_per_entry(&fit.estimate, &data.truth)?;
        runs.push(EstimatorRun {
            estimator,
            fit,
            rmse,
            seconds,
        });
    }
    Ok(ExperimentOutcome {
        data,
        lambda,
        monitored,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::weighted_frobenius_sq;

    #[test]
    fn series_one_is_rank_two() {
        let m0 = gen_ground_truth(1, 30, true, &mut stream(1, "test", 0)).unwrap();
        let s = m0.singular_values();
        assert!(s[2] < 1e-8 * s[0]);
        assert!(s[1] > 1e-3 * s[0]);
    }

    #[test]
    fn series_two_is_near_rank_two() {
        let mut a = stream(2, "test", 0);
        let m0 = gen_ground_truth(2, 60, true, &mut a).unwrap();
        // Replay the same stream to recover the two pieces.
        let mut b = stream(2, "test", 0);
        let sd = (20.0 / 60f64.sqrt()).sqrt();
        let u = gaussian_factor(60, 2, sd, &mut b).unwrap();
        let v = gaussian_factor(60, 2, sd, &mut b).unwrap();
        let z = gaussian_factor(60, 50, sd, &mut b).unwrap();
        let w = gaussian_factor(60, 50, sd, &mut b).unwrap();
        let low = u.mul_transpose(&v).unwrap();
        let mut extra = z.mul_transpose(&w).unwrap();
        extra.scale(0.01);
        let dist = m0.sub(&low).unwrap().frobenius_sq().sqrt();
        assert!(dist <= extra.frobenius_sq().sqrt() * (1.0 + 1e-12));
        assert!(s_rank_gap(&m0));
    }

    fn s_rank_gap(m0: &DenseMatrix) -> bool {
        let s = m0.singular_values();
        s[2] > 1e-8 * s[0] && s[2] < 0.2 * s[1]
    }

    #[test]
    fn series_two_needs_fifty_columns() {
        assert!(matches!(
            gen_ground_truth(2, 40, true, &mut stream(3, "test", 0)),
            Err(Error::SeriesTwoDimension(40))
        ));
        assert!(gen_ground_truth(5, 40, true, &mut stream(3, "test", 0)).is_err());
    }

    #[test]
    fn entry_variance_follows_variance_reading() {
        let m = 200;
        let v = 20.0 / (m as f64).sqrt();
        let mut total = 0.0;
        let mut count = 0usize;
        for rep in 0..200 {
            let m0 = gen_ground_truth(1, m, true, &mut stream(4, "test", rep)).unwrap();
            total += m0.frobenius_sq();
            count += m * m;
        }
        let var = total / count as f64;
        assert!((var / (2.0 * v * v) - 1.0).abs() < 0.1, "{var}");

        // Read as a standard deviation, the entry variance is 2 v^4.
        let mut total_sd = 0.0;
        for rep in 0..200 {
            total_sd += gen_ground_truth(1, m, false, &mut stream(5, "test", rep)).unwrap().frobenius_sq();
        }
        let var_sd = total_sd / count as f64;
        assert!((var_sd / (2.0 * v.powi(4)) - 1.0).abs() < 0.1, "{var_sd}");
    }

    #[test]
    fn noiseless_limit() {
        let m0 = DenseMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64);
        let obs = sample_observations(
            &m0,
            &SamplingDistribution::uniform(4, 3),
            50,
            &NoiseModel::Gaussian { sd: 1e-12 },
            &mut stream(5, "test", 0),
        )
        .unwrap();
        assert!(obs.entries().iter().all(|e| (e.y - m0[(e.i, e.j)]).abs() < 1e-10));
    }

    #[test]
    fn uniform_cell_frequencies() {
        let m0 = DenseMatrix::zeros(10, 10);
        let n = 100_000;
        let obs = sample_observations(
            &m0,
            &SamplingDistribution::uniform(10, 10),
            n,
            &NoiseModel::Gaussian { sd: 1.0 },
            &mut stream(6, "test", 0),
        )
        .unwrap();
        let mut counts = [0usize; 100];
        for e in obs.entries() {
            counts[e.i * 10 + e.j] += 1;
        }
        let tol = 4.0 * (0.01f64 * 0.99 / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 0.01).abs() < tol);
        }
    }

    #[test]
    fn point_mass_sampling() {
        let m0 = DenseMatrix::zeros(3, 3);
        let pi = SamplingDistribution::point_mass(3, 3, 0, 0).unwrap();
        let obs = sample_observations(&m0, &pi, 20, &NoiseModel::Uniform { half_width: 1.0 }, &mut stream(7, "test", 0)).unwrap();
        assert!(obs.entries().iter().all(|e| e.i == 0 && e.j == 0 && e.y.abs() <= 1.0));
        assert!(sample_observations_without_replacement(&m0, &pi, 2, &NoiseModel::Uniform { half_width: 1.0 }, &mut stream(7, "test", 1)).is_err());
    }

    #[test]
    fn without_replacement_is_distinct() {
        let m0 = DenseMatrix::zeros(8, 8);
        let obs = sample_observations_without_replacement(
            &m0,
            &SamplingDistribution::uniform(8, 8),
            40,
            &NoiseModel::Gaussian { sd: 1.0 },
            &mut stream(8, "test", 0),
        )
        .unwrap();
        let mut seen: Vec<(usize, usize)> = obs.entries().iter().map(|e| (e.i, e.j)).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 40);
    }

    #[test]
    fn multiplicity_matches_fraction() {
        let m = 30;
        let reps = 50;
        let mut cell0 = Vec::new();
        for rep in 0..reps {
            let data = simulate(&ExperimentSpec::experiment_defaults(1, m, rep)).unwrap();
            assert_eq!(data.observations.len(), 180);
            // A fixed cell has multiplicity Binomial(n, 1/m^2) with mean 0.2.
            cell0.push(data.observations.entries().iter().filter(|e| e.i == 0 && e.j == 0).count() as f64);
        }
        let mean = cell0.iter().sum::<f64>() / reps as f64;
        let sd = (180.0f64 * (1.0 / 900.0) * (1.0 - 1.0 / 900.0)).sqrt();
        assert!((mean - 0.2).abs() < 4.0 * sd / (reps as f64).sqrt());
    }

    #[test]
    fn pythagorean_identity() {
        // Noise-free Y: R(M) - R(M0) = E[(M0_X - M_X)^2] - 0 = |M - M0|^2_{F,Pi}.
        let mut rng = stream(9, "test", 0);
        let m0 = DenseMatrix::from_fn(5, 4, |_, _| rng.random_range(-2.0..2.0));
        let m = DenseMatrix::from_fn(5, 4, |_, _| rng.random_range(-2.0..2.0));
        let pi = SamplingDistribution::from_unnormalized(DenseMatrix::from_fn(5, 4, |i, j| 1.0 + (i + 2 * j) as f64)).unwrap();
        let n = 200_000;
        let obs = sample_observations(&m0, &pi, n, &NoiseModel::Gaussian { sd: 1e-300 }, &mut rng).unwrap();
        let losses: Vec<f64> = obs
            .entries()
            .iter()
            .map(|e| (e.y - m[(e.i, e.j)]).powi(2) - (e.y - m0[(e.i, e.j)]).powi(2))
            .collect();
        let mean = losses.iter().sum::<f64>() / n as f64;
        let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let exact = weighted_frobenius_sq(&m.sub(&m0).unwrap(), &pi).unwrap();
        assert!((mean - exact).abs() < 3.0 * (var / n as f64).sqrt(), "{mean} vs {exact}");
    }

    #[test]
    fn simulate_is_deterministic_and_counts() {
        let spec = ExperimentSpec::experiment_defaults(3, 20, 11);
        let a = simulate(&spec).unwrap();
        assert_eq!(a, simulate(&spec).unwrap());
        assert_eq!(a.observations.len(), 80);
        assert!(simulate(&ExperimentSpec::experiment_defaults(2, 40, 1)).is_err());
    }

    #[test]
    fn replication_seeds_differ() {
        let a = replication_seed(1, 1, 100, 0);
        assert_ne!(a, replication_seed(1, 1, 100, 1));
        assert_ne!(a, replication_seed(1, 2, 100, 0));
        assert_ne!(a, replication_seed(1, 1, 200, 0));
        assert_eq!(a, replication_seed(1, 1, 100, 0));
    }

    #[test]
    fn tiny_experiment_runs_and_replays() {
        let mut spec = ExperimentSpec::experiment_defaults(1, 12, 5);
        spec.gibbs = GibbsConfig {
            burn_in: 20,
            iterations: 40,
            ..GibbsConfig::default()
        };
        spec.prior.width = 3;
        spec.conjugate.width = 3;
        spec.monitored_entries = 2;
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a.runs.len(), 2);
        for (x, y) in a.runs.iter().zip(&b.runs) {
            assert_eq!(x.fit, y.fit);
            assert!(x.rmse.is_finite());
        }
        assert_eq!(a.monitored.len(), 2);
        assert_eq!(a.lambda, 29.0 / 4.0);
        let recs = a.records(&spec, 3);
        assert_eq!(recs[0].estimator, Estimator::Uniform);
        assert_eq!(recs[1].replication, 3);
    }

    #[test]
    fn parse_names() {
        assert_eq!("conjugate".parse::<Estimator>().unwrap(), Estimator::Conjugate);
        assert!("gaussian".parse::<Estimator>().is_err());
        assert_eq!("star".parse::<LambdaMode>().unwrap(), LambdaMode::Star);
        let noise = NoiseSpec { sigma: 1.0, xi: 1.0 };
        assert_eq!(LambdaMode::Experiment.resolve(2000, 50.0, &noise).unwrap(), 500.0);
        assert_eq!(LambdaMode::Gauss.resolve(2000, 50.0, &noise).unwrap(), 1000.0);
        assert!((LambdaMode::Star.resolve(120, 1.0, &noise).unwrap() - 1.0).abs() < 1e-15);
    }
}
