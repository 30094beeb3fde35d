//! Command-line front end for `bmc-core`.

pub mod commands;
pub mod manifest;

use std::path::{Path, PathBuf};

use anyhow::Context;
use bmc_core::config::RunConfig;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bmc", version, about = "Bayesian noisy matrix completion")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand. They override the config file,
/// which overrides the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma list of series (1-4) or `all`.
    #[arg(long, global = true)]
    pub series: Option<String>,
    /// Comma list of matrix sizes.
    #[arg(long, global = true)]
    pub m: Option<String>,
    /// `uniform`, `conjugate` or `both`.
    #[arg(long, global = true)]
    pub estimator: Option<String>,
    /// `experiment`, `star` or `gauss`.
    #[arg(long, global = true)]
    pub lambda_mode: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub replications: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Any config key, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Write ground truth and observations for every (series, m, replication).
    Simulate,
    /// Fit an observations file with the configured estimators.
    Fit {
        observations: PathBuf,
        /// Row count, when the file has no `# shape` line.
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
    },
    /// Run the full simulation study and summarize RMSE.
    Experiment,
    /// Evaluate the oracle bound and its constants.
    Bound {
        #[arg(long, default_value_t = 2)]
        rank: usize,
        /// Approximation error of the rank-`rank` oracle.
        #[arg(long, default_value_t = 0.0)]
        approx_error: f64,
        /// Sample size; defaults to `observe_fraction * m * p`.
        #[arg(long)]
        n: Option<usize>,
        /// Column count; defaults to `m`.
        #[arg(long)]
        p: Option<usize>,
        /// Comma list of sample sizes; writes `bound_grid.csv`.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Autocorrelation of monitored entries under both samplers.
    Acf {
        /// Trace file of the uniform-prior sampler.
        #[arg(long, requires = "conjugate_trace")]
        uniform_trace: Option<PathBuf>,
        /// Trace file of the conjugate sampler.
        #[arg(long, requires = "uniform_trace")]
        conjugate_trace: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit { .. } => "fit",
            Command::Experiment => "experiment",
            Command::Bound { .. } => "bound",
            Command::Acf { .. } => "acf",
        }
    }
}

impl GlobalArgs {
    /// Defaults, then the config file, then `--set`, then dedicated flags.
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got '{kv}'"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        let flags: [(&str, Option<String>); 7] = [
            ("seed", self.seed.map(|s| s.to_string())),
            ("series", self.series.clone()),
            ("m", self.m.clone()),
            ("estimator", self.estimator.clone()),
            ("lambda_mode", self.lambda_mode.clone()),
            ("workers", self.workers.map(|w| w.to_string())),
            ("replications", self.replications.map(|r| r.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, &v).with_context(|| format!("--{}", k.replace('_', "-")))?;
            }
        }
        Ok(cfg)
    }

    pub fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }
}

/// Resolves the configuration and runs the command on a pool of
/// `workers` threads. Returns the text to print on stdout.
pub fn run(cli: &Cli) -> anyhow::Result<String> {
    let cfg = cli.global.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .context("building worker pool")?;
    pool.install(|| commands::dispatch(&cli.command, &cfg, &cli.global))
}
