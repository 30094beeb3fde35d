//! Flat `key = value` run configuration.
//!
//! Blank lines and text after `#` are ignored. Keys are case-sensitive;
//! unknown keys are errors. [`RunConfig::canonical`] prints every key in a
//! fixed order, so two configs with the same resolved values print
//! identically.
//!
//! ```text
//! seed = 7
//! series = all        # or 1, 2, 3, 4, or a list such as 1,4
//! m = 100, 200
//! replications = 4
//! L = 50
//! K = 5
//! tau = 0.5
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bounds::NoiseSpec;
use crate::error::{Error, Result};
use crate::gibbs::GibbsConfig;
use crate::model::SamplingDistribution;
use crate::prior::{ConjugatePriorConfig, PriorConfig};
use crate::sim::{replication_seed, Estimator, ExperimentSpec, LambdaMode};

/// Which estimators to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimatorChoice {
    Uniform,
    Conjugate,
    #[default]
    Both,
}

impl EstimatorChoice {
    pub fn estimators(&self) -> Vec<Estimator> {
        match self {
            Self::Uniform => vec![Estimator::Uniform],
            Self::Conjugate => vec![Estimator::Conjugate],
            Self::Both => vec![Estimator::Uniform, Estimator::Conjugate],
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Conjugate => "conjugate",
            Self::Both => "both",
        }
    }
}

impl FromStr for EstimatorChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "conjugate" => Ok(Self::Conjugate),
            "both" => Ok(Self::Both),
            other => Err(Error::InvalidConfig(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Sampling distribution over entries.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SamplingChoice {
    #[default]
    Uniform,
    /// Row weights rising linearly from 1 (first row) to `ratio` (last row).
    RowLinear { ratio: f64 },
}

impl SamplingChoice {
    /// `None` for uniform sampling.
    pub fn build(&self, m: usize, p: usize) -> Result<Option<SamplingDistribution>> {
        match *self {
            Self::Uniform => Ok(None),
            Self::RowLinear { ratio } => {
                if !(ratio > 0.0 && ratio.is_finite()) {
                    return Err(Error::InvalidConfig(format!("row weight ratio must be positive, got {ratio}")));
                }
                let span = (m.max(2) - 1) as f64;
                let weights: Vec<f64> = (0..m).map(|i| 1.0 + (ratio - 1.0) * i as f64 / span).collect();
                SamplingDistribution::row_weighted(&weights, p).map(Some)
            }
        }
    }

    fn render(&self) -> String {
        match self {
            Self::Uniform => "uniform".into(),
            Self::RowLinear { ratio } => format!("row_linear:{ratio}"),
        }
    }
}

impl FromStr for SamplingChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "uniform" {
            return Ok(Self::Uniform);
        }
        if let Some(r) = s.strip_prefix("row_linear:") {
            let ratio = r
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad row_linear ratio '{r}'")))?;
            return Ok(Self::RowLinear { ratio });
        }
        Err(Error::InvalidConfig(format!(
            "unknown sampling '{s}' (expected uniform or row_linear:<ratio>)"
        )))
    }
}

/// Every tunable of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub series: Vec<u8>,
    pub m: Vec<usize>,
    pub replications: usize,
    pub observe_fraction: f64,
    pub bound: f64,
    pub width: usize,
    pub tau: f64,
    /// `tau` used for series 4.
    pub tau_heavy_tail: f64,
    pub kappa: f64,
    pub a: f64,
    pub b: f64,
    pub lambda_mode: LambdaMode,
    pub sigma: f64,
    pub xi: f64,
    pub epsilon: f64,
    pub burn_in: usize,
    pub iterations: usize,
    pub thin: usize,
    pub inner_sweeps: usize,
    pub estimator: EstimatorChoice,
    pub gaussian_param_is_variance: bool,
    pub without_replacement: bool,
    pub sampling: SamplingChoice,
    pub trace_entries: usize,
    pub max_lag: usize,
    /// 0 means all available cores.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = GibbsConfig::default();
        Self {
            seed: 0,
            series: vec![1],
            m: vec![100],
            replications: 4,
            observe_fraction: 0.2,
            bound: PriorConfig::EXPERIMENT.bound,
            width: PriorConfig::EXPERIMENT.width,
            tau: PriorConfig::EXPERIMENT.tau,
            tau_heavy_tail: 0.25,
            kappa: PriorConfig::EXPERIMENT.kappa,
            a: ConjugatePriorConfig::EXPERIMENT.a,
            b: ConjugatePriorConfig::EXPERIMENT.b,
            lambda_mode: LambdaMode::Experiment,
            sigma: 1.0,
            xi: 1.0,
            epsilon: 0.05,
            burn_in: g.burn_in,
            iterations: g.iterations,
            thin: g.thin,
            inner_sweeps: g.inner_sweeps,
            estimator: EstimatorChoice::Both,
            gaussian_param_is_variance: true,
            without_replacement: false,
            sampling: SamplingChoice::Uniform,
            trace_entries: 4,
            max_lag: crate::diagnostics::DEFAULT_MAX_LAG,
            workers: 0,
        }
    }
}

/// Keys in canonical order.
pub const KEYS: &[&str] = &[
    "seed",
    "series",
    "m",
    "replications",
    "observe_fraction",
    "L",
    "K",
    "tau",
    "tau_heavy_tail",
    "kappa",
    "a",
    "b",
    "lambda_mode",
    "sigma",
    "xi",
    "epsilon",
    "burn_in",
    "iterations",
    "thin",
    "inner_sweeps",
    "estimator",
    "gaussian_param_is_variance",
    "without_replacement",
    "sampling",
    "trace_entries",
    "max_lag",
    "workers",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("invalid value '{value}' for {key}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(|s| parse_value(key, s.trim()))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::InvalidConfig(format!("{key} needs at least one value")));
    }
    Ok(items)
}

fn parse_series(value: &str) -> Result<Vec<u8>> {
    if value == "all" {
        return Ok(vec![1, 2, 3, 4]);
    }
    let series: Vec<u8> = parse_list("series", value)?;
    if let Some(s) = series.iter().find(|s| !(1..=4).contains(*s)) {
        return Err(Error::InvalidConfig(format!("series must be 1, 2, 3, 4 or all, got {s}")));
    }
    Ok(series)
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text, path)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, path)
    }

    /// Applies the assignments in `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        let err = |line: usize, message: String| Error::Parse {
            path: PathBuf::from(path),
            line: line as u64,
            message,
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(idx + 1, format!("expected key = value, found '{line}'")))?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::InvalidConfig(msg) => err(idx + 1, msg),
                other => other,
            })?;
        }
        Ok(())
    }

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "series" => self.series = parse_series(value)?,
            "m" => self.m = parse_list(key, value)?,
            "replications" => self.replications = parse_value(key, value)?,
            "observe_fraction" => self.observe_fraction = parse_value(key, value)?,
            "L" => self.bound = parse_value(key, value)?,
            "K" => self.width = parse_value(key, value)?,
            "tau" => self.tau = parse_value(key, value)?,
            "tau_heavy_tail" => self.tau_heavy_tail = parse_value(key, value)?,
            "kappa" => self.kappa = parse_value(key, value)?,
            "a" => self.a = parse_value(key, value)?,
            "b" => self.b = parse_value(key, value)?,
            "lambda_mode" => self.lambda_mode = value.parse()?,
            "sigma" => self.sigma = parse_value(key, value)?,
            "xi" => self.xi = parse_value(key, value)?,
            "epsilon" => self.epsilon = parse_value(key, value)?,
            "burn_in" => self.burn_in = parse_value(key, value)?,
            "iterations" => self.iterations = parse_value(key, value)?,
            "thin" => self.thin = parse_value(key, value)?,
            "inner_sweeps" => self.inner_sweeps = parse_value(key, value)?,
            "estimator" => self.estimator = value.parse()?,
            "gaussian_param_is_variance" => self.gaussian_param_is_variance = parse_value(key, value)?,
            "without_replacement" => self.without_replacement = parse_value(key, value)?,
            "sampling" => self.sampling = value.parse()?,
            "trace_entries" => self.trace_entries = parse_value(key, value)?,
            "max_lag" => self.max_lag = parse_value(key, value)?,
            "workers" => self.workers = parse_value(key, value)?,
            "delta" => {
                return Err(Error::InvalidConfig(
                    "delta is derived as sqrt(2L/K) and cannot be set".into(),
                ))
            }
            other => return Err(Error::InvalidConfig(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "seed" => self.seed.to_string(),
            "series" => join(&self.series),
            "m" => join(&self.m),
            "replications" => self.replications.to_string(),
            "observe_fraction" => self.observe_fraction.to_string(),
            "L" => self.bound.to_string(),
            "K" => self.width.to_string(),
            "tau" => self.tau.to_string(),
            "tau_heavy_tail" => self.tau_heavy_tail.to_string(),
            "kappa" => self.kappa.to_string(),
            "a" => self.a.to_string(),
            "b" => self.b.to_string(),
            "lambda_mode" => self.lambda_mode.as_str().into(),
            "sigma" => self.sigma.to_string(),
            "xi" => self.xi.to_string(),
            "epsilon" => self.epsilon.to_string(),
            "burn_in" => self.burn_in.to_string(),
            "iterations" => self.iterations.to_string(),
            "thin" => self.thin.to_string(),
            "inner_sweeps" => self.inner_sweeps.to_string(),
            "estimator" => self.estimator.as_str().into(),
            "gaussian_param_is_variance" => self.gaussian_param_is_variance.to_string(),
            "without_replacement" => self.without_replacement.to_string(),
            "sampling" => self.sampling.render(),
            "trace_entries" => self.trace_entries.to_string(),
            "max_lag" => self.max_lag.to_string(),
            "workers" => self.workers.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// Every key in canonical order, one `key = value` per line.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.value_of(key));
        }
        out
    }

    /// Like [`canonical`](Self::canonical) without `workers`, which never
    /// changes results.
    pub fn canonical_for_hash(&self) -> String {
        self.canonical()
            .lines()
            .filter(|l| !l.starts_with("workers "))
            .map(|l| format!("{l}\n"))
            .collect()
    }

    pub fn prior(&self, series: u8) -> PriorConfig {
        PriorConfig {
            bound: self.bound,
            width: self.width,
            tau: if series == 4 { self.tau_heavy_tail } else { self.tau },
            kappa: self.kappa,
        }
    }

    pub fn conjugate(&self) -> ConjugatePriorConfig {
        ConjugatePriorConfig {
            a: self.a,
            b: self.b,
            width: self.width,
        }
    }

    pub fn gibbs(&self) -> GibbsConfig {
        GibbsConfig {
            burn_in: self.burn_in,
            iterations: self.iterations,
            thin: self.thin,
            inner_sweeps: self.inner_sweeps,
            seed: self.seed,
        }
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            sigma: self.sigma,
            xi: self.xi,
        }
    }

    /// Spec of replication `rep` of `(series, m)`.
    pub fn experiment_spec(&self, series: u8, m: usize, rep: usize) -> Result<ExperimentSpec> {
        let spec = ExperimentSpec {
            series,
            m,
            observe_fraction: self.observe_fraction,
            seed: replication_seed(self.seed, series, m, rep),
            prior: self.prior(series),
            conjugate: self.conjugate(),
            gibbs: self.gibbs(),
            lambda_mode: self.lambda_mode,
            noise_bound: self.noise(),
            estimators: self.estimator.estimators(),
            gaussian_param_is_variance: self.gaussian_param_is_variance,
            without_replacement: self.without_replacement,
            sampling: self.sampling.build(m, m)?,
            monitored_entries: self.trace_entries,
        };
        spec.validate()?;
        Ok(spec)
    }
}
