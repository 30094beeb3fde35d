use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context};
use bmc_core::bounds::{auxiliary_constants, constant_c, lambda_star, oracle_bound_with, BoundInputs, LogTerm};
use bmc_core::config::RunConfig;
use bmc_core::diagnostics::{acf, compare_acf_decay, summarize_replications, Faster, TraceSeries};
use bmc_core::gibbs::{run_conjugate_prior, run_uniform_prior, FitOutput};
use bmc_core::io;
use bmc_core::model::ObservationSet;
use bmc_core::sim::{pick_monitored, run_experiment, simulate, Estimator, ExperimentOutcome, ExperimentSpec};
use rayon::prelude::*;

use crate::manifest::RunManifest;
use crate::{Command, GlobalArgs};

pub fn dispatch(command: &Command, cfg: &RunConfig, global: &GlobalArgs) -> anyhow::Result<String> {
    let manifest = RunManifest::new(command.name(), global.config_path(), cfg);
    let out = &global.out;
    match command {
        Command::Simulate => simulate_cmd(cfg, &manifest, out),
        Command::Fit { observations, rows, cols } => {
            let shape = match (rows, cols) {
                (Some(r), Some(c)) => Some((*r, *c)),
                (Some(r), None) => Some((*r, *r)),
                (None, Some(_)) => bail!("--cols needs --rows"),
                (None, None) => None,
            };
            fit_cmd(cfg, &manifest, out, observations, shape)
        }
        Command::Experiment => experiment_cmd(cfg, &manifest, out),
        Command::Bound {
            rank,
            approx_error,
            n,
            p,
            grid,
        } => bound_cmd(cfg, &manifest, out, *rank, *approx_error, *n, *p, grid.as_deref()),
        Command::Acf {
            uniform_trace,
            conjugate_trace,
        } => match (uniform_trace, conjugate_trace) {
            (Some(u), Some(c)) => acf_from_files(cfg, &manifest, out, u, c),
            _ => acf_from_run(cfg, &manifest, out),
        },
    }
}

fn prepare_out(out: &Path, manifest: &RunManifest) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    manifest.write(out)
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> bmc_core::error::Result<()>,
) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    body(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

/// Every `(series, m, replication)` spec, validated up front.
pub fn experiment_specs(cfg: &RunConfig) -> anyhow::Result<Vec<(usize, ExperimentSpec)>> {
    let mut specs = Vec::new();
    for &series in &cfg.series {
        for &m in &cfg.m {
            for rep in 0..cfg.replications {
                specs.push((rep, cfg.experiment_spec(series, m, rep)?));
            }
        }
    }
    Ok(specs)
}

fn simulate_cmd(cfg: &RunConfig, manifest: &RunManifest, out: &Path) -> anyhow::Result<String> {
    let specs = experiment_specs(cfg)?;
    prepare_out(out, manifest)?;
    let header = manifest.header();
    let mut report = String::new();
    for (rep, spec) in &specs {
        let data = simulate(spec)?;
        let stem = format!("s{}_m{}_r{}", spec.series, spec.m, rep);
        let truth = out.join(format!("truth_{stem}.csv"));
        let obs = out.join(format!("obs_{stem}.csv"));
        write_file(&truth, |w| io::write_matrix(w, &data.truth, &header))?;
        write_file(&obs, |w| io::write_observations(w, &data.observations, &header))?;
        writeln!(report, "{} ({} observations)", obs.display(), data.observations.len())?;
    }
    Ok(report)
}

/// Result of fitting one observation set with the configured estimators.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub lambda: f64,
    pub monitored: Vec<(usize, usize)>,
    pub fits: Vec<(Estimator, FitOutput)>,
}

/// Fits `obs` as the `fit` command does: `tau` (not `tau_heavy_tail`),
/// lambda from `lambda_mode`, sampler seed `cfg.seed`.
pub fn fit_observations(cfg: &RunConfig, obs: &ObservationSet) -> anyhow::Result<FitReport> {
    let prior = cfg.prior(1);
    let lambda = cfg.lambda_mode.resolve(obs.len(), cfg.bound, &cfg.noise())?;
    let gibbs = cfg.gibbs();
    let monitored = pick_monitored(cfg.seed, obs.rows(), obs.cols(), cfg.trace_entries);
    let fits = cfg
        .estimator
        .estimators()
        .into_iter()
        .map(|est| {
            let fit = match est {
                Estimator::Uniform => run_uniform_prior(obs, &prior, lambda, &gibbs, &monitored)?,
                Estimator::Conjugate => run_conjugate_prior(obs, &cfg.conjugate(), lambda, &gibbs, &monitored)?,
            };
            Ok((est, fit))
        })
        .collect::<bmc_core::error::Result<_>>()?;
    Ok(FitReport { lambda, monitored, fits })
}

fn fit_cmd(
    cfg: &RunConfig,
    manifest: &RunManifest,
    out: &Path,
    path: &Path,
    shape: Option<(usize, usize)>,
) -> anyhow::Result<String> {
    let obs = io::read_observations(path, shape)?;
    let report = fit_observations(cfg, &obs)?;
    prepare_out(out, manifest)?;
    let header = manifest.header();
    let mut text = String::new();
    writeln!(
        text,
        "{}x{} matrix, {} observations, lambda = {}",
        obs.rows(),
        obs.cols(),
        obs.len(),
        report.lambda
    )?;
    for (est, fit) in &report.fits {
        let estimate = out.join(format!("estimate_{est}.csv"));
        write_file(&estimate, |w| io::write_matrix(w, &fit.estimate, &header))?;
        write_file(&out.join(format!("trace_{est}.csv")), |w| io::write_trace(w, fit, &header))?;
        writeln!(
            text,
            "{est}: {} (selection counts {:?})",
            estimate.display(),
            fit.selection_counts
        )?;
    }
    Ok(text)
}

fn experiment_cmd(cfg: &RunConfig, manifest: &RunManifest, out: &Path) -> anyhow::Result<String> {
    ensure!(cfg.replications >= 1, "replications must be at least 1");
    let specs = experiment_specs(cfg)?;
    prepare_out(out, manifest)?;
    let outcomes: Vec<ExperimentOutcome> = specs
        .par_iter()
        .map(|(_, spec)| run_experiment(spec))
        .collect::<bmc_core::error::Result<_>>()?;

    let records: Vec<_> = specs
        .iter()
        .zip(&outcomes)
        .flat_map(|((rep, spec), o)| o.records(spec, *rep))
        .collect();
    let summary = summarize_replications(&records);
    let header = manifest.header();
    write_file(&out.join("results.csv"), |w| io::write_results(w, &records, &header))?;
    write_file(&out.join("summary.csv"), |w| io::write_summary(w, &summary, &header))?;

    let mut text = String::new();
    writeln!(text, "{:>6} {:>5} {:>10} {:>5}  rmse", "series", "m", "estimator", "reps")?;
    for row in &summary {
        writeln!(
            text,
            "{:>6} {:>5} {:>10} {:>5}  {}",
            row.series,
            row.m,
            row.estimator,
            row.replications,
            row.formatted()
        )?;
    }

    for ((rep, spec), outcome) in specs.iter().zip(&outcomes) {
        if *rep != 0 {
            continue;
        }
        let stem = format!("s{}_m{}", spec.series, spec.m);
        for run in &outcome.runs {
            let path = out.join(format!("trace_{stem}_{}.csv", run.estimator));
            write_file(&path, |w| io::write_trace(w, &run.fit, &header))?;
        }
        if let (Some(u), Some(c)) = (outcome.run(Estimator::Uniform), outcome.run(Estimator::Conjugate)) {
            let pairs = entry_pairs(&u.fit, &c.fit);
            writeln!(text, "series {} m {}:", spec.series, spec.m)?;
            text.push_str(&acf_pairs(cfg, manifest, out, &stem, &pairs)?);
        }
    }
    Ok(text)
}

/// `(label, uniform trace, conjugate trace)` per monitored entry.
type EntryPair = (String, Vec<f64>, Vec<f64>);

fn entry_label(i: usize, j: usize) -> String {
    format!("M[{}:{}]", i + 1, j + 1)
}

fn entry_pairs(uniform: &FitOutput, conjugate: &FitOutput) -> Vec<EntryPair> {
    uniform
        .monitored
        .iter()
        .enumerate()
        .map(|(idx, &(i, j))| (entry_label(i, j), uniform.entry_trace(idx), conjugate.entry_trace(idx)))
        .collect()
}

/// `M[3:7]` becomes `M3-7`.
fn file_label(label: &str) -> String {
    label
        .chars()
        .filter_map(|c| match c {
            '[' | ']' => None,
            ':' => Some('-'),
            c => Some(c),
        })
        .collect()
}

/// Writes one ACF file per entry and reports which sampler's ACF decays
/// faster. Entries whose trace is constant or too short are reported and
/// skipped.
fn acf_pairs(
    cfg: &RunConfig,
    manifest: &RunManifest,
    out: &Path,
    stem: &str,
    pairs: &[EntryPair],
) -> anyhow::Result<String> {
    let header = manifest.header();
    let mut text = String::new();
    let (mut uniform_wins, mut conjugate_wins, mut compared) = (0, 0, 0);
    for (label, u, c) in pairs {
        let max_lag = cfg.max_lag.min(u.len().min(c.len()).saturating_sub(1));
        let acfs = acf(&TraceSeries::new(label.as_str(), u.clone()), max_lag)
            .and_then(|a| Ok((a, acf(&TraceSeries::new(label.as_str(), c.clone()), max_lag)?)));
        let (au, ac) = match acfs {
            Ok(v) => v,
            Err(e) => {
                writeln!(text, "  {label}: skipped ({e})")?;
                continue;
            }
        };
        let name = if stem.is_empty() {
            format!("acf_{}.csv", file_label(label))
        } else {
            format!("acf_{stem}_{}.csv", file_label(label))
        };
        write_file(&out.join(name), |w| io::write_acf(w, &au, &ac, &header))?;
        let cmp = compare_acf_decay(&au, &ac)?;
        compared += 1;
        let verdict = match cmp.verdict {
            Faster::First => {
                uniform_wins += 1;
                "uniform"
            }
            Faster::Second => {
                conjugate_wins += 1;
                "conjugate"
            }
            Faster::Tie => "tie",
        };
        writeln!(
            text,
            "  {label}: sum|acf| uniform {:.3}, conjugate {:.3}, faster decay: {verdict}",
            cmp.summed_abs_first, cmp.summed_abs_second
        )?;
    }
    writeln!(
        text,
        "  faster ACF decay (summed |acf| over lags 1..{}, a proxy for mixing): uniform {uniform_wins}, conjugate {conjugate_wins} of {compared} entries",
        cfg.max_lag
    )?;
    Ok(text)
}

fn acf_from_files(
    cfg: &RunConfig,
    manifest: &RunManifest,
    out: &Path,
    uniform: &Path,
    conjugate: &Path,
) -> anyhow::Result<String> {
    let u = io::read_trace(uniform)?;
    let c = io::read_trace(conjugate)?;
    let pairs: Vec<EntryPair> = u
        .into_iter()
        .map(|(label, values)| {
            let other = c
                .iter()
                .find(|(l, _)| *l == label)
                .with_context(|| format!("{} has no column {label}", conjugate.display()))?;
            Ok((label, values, other.1.clone()))
        })
        .collect::<anyhow::Result<_>>()?;
    ensure!(!pairs.is_empty(), "{} has no monitored entries", uniform.display());
    prepare_out(out, manifest)?;
    acf_pairs(cfg, manifest, out, "", &pairs)
}

/// Runs replication 0 of the first configured series and size with both
/// samplers and compares their traces.
fn acf_from_run(cfg: &RunConfig, manifest: &RunManifest, out: &Path) -> anyhow::Result<String> {
    let series = cfg.series[0];
    let m = cfg.m[0];
    let mut spec = cfg.experiment_spec(series, m, 0)?;
    spec.estimators = vec![Estimator::Uniform, Estimator::Conjugate];
    spec.monitored_entries = spec.monitored_entries.max(1);
    let outcome = run_experiment(&spec)?;
    prepare_out(out, manifest)?;
    let u = outcome.run(Estimator::Uniform).expect("uniform run requested");
    let c = outcome.run(Estimator::Conjugate).expect("conjugate run requested");
    let mut text = format!("series {series} m {m} replication 0:\n");
    text.push_str(&acf_pairs(cfg, manifest, out, "", &entry_pairs(&u.fit, &c.fit))?);
    Ok(text)
}

#[allow(clippy::too_many_arguments)]
fn bound_cmd(
    cfg: &RunConfig,
    manifest: &RunManifest,
    out: &Path,
    rank: usize,
    approx_error: f64,
    n: Option<usize>,
    p: Option<usize>,
    grid: Option<&str>,
) -> anyhow::Result<String> {
    let m = cfg.m[0];
    let p = p.unwrap_or(m);
    let noise = cfg.noise();
    let l = cfg.bound;
    let inputs = |n: usize| BoundInputs {
        m,
        p,
        n,
        rank,
        approx_error,
        epsilon: cfg.epsilon,
        bound: l,
        tau: cfg.tau,
        noise,
    };

    if let Some(grid) = grid {
        let ns: Vec<usize> = grid
            .split(',')
            .map(|s| s.trim().parse().with_context(|| format!("--grid: not a sample size: '{s}'")))
            .collect::<anyhow::Result<_>>()?;
        let mut csv = String::from("n,lambda_star,bound_sharp,bound_loose\n");
        for n in ns {
            let inp = inputs(n);
            writeln!(
                csv,
                "{n},{},{},{}",
                lambda_star(n, l, &noise)?,
                oracle_bound_with(&inp, LogTerm::Sharp)?,
                oracle_bound_with(&inp, LogTerm::Loose)?
            )?;
        }
        prepare_out(out, manifest)?;
        let path = out.join("bound_grid.csv");
        let mut body = String::new();
        for c in manifest.header() {
            writeln!(body, "# {c}")?;
        }
        body.push_str(&csv);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        return Ok(csv);
    }

    let n = n.unwrap_or_else(|| (cfg.observe_fraction * (m * p) as f64).round() as usize);
    let inp = inputs(n);
    let lam = lambda_star(n, l, &noise)?;
    let aux = auxiliary_constants(lam, n, l, &noise)?;
    let mut text = String::new();
    writeln!(text, "m = {m}, p = {p}, n = {n}, rank = {rank}, L = {l}, sigma = {}, xi = {}", noise.sigma, noise.xi)?;
    writeln!(text, "C = {}", constant_c(l, &noise)?)?;
    writeln!(text, "w = {}", aux.w)?;
    writeln!(text, "C_sigma_L = {}", aux.c_sigma_l)?;
    writeln!(text, "lambda_star = {lam}")?;
    writeln!(text, "alpha = {}", aux.alpha)?;
    writeln!(text, "beta = {}", aux.beta)?;
    writeln!(text, "bound = {}", oracle_bound_with(&inp, LogTerm::Sharp)?)?;
    writeln!(text, "bound_loose = {}", oracle_bound_with(&inp, LogTerm::Loose)?)?;
    Ok(text)
}
