//! Multi-chain Gibbs sampler for the structured uniform prior.
//!
//! Chain `k` (1-based) keeps the rank index fixed at `k`. Given `V`, row
//! `i` of `U` has conditional density proportional to
//! `phi(U_i; Sigma_i (2 lambda/n) sum_{obs in row i} y V_j, Sigma_i)` on the
//! box `|U_il| <= delta` (`l <= k`), `|U_il| <= kappa` (`l > k`), where
//! `Sigma_i^{-1} = (2 lambda/n) sum_{obs in row i} V_j^T V_j`. Rows of `V`
//! are updated the same way with the roles of rows and columns swapped.
//!
//! Each round every chain is advanced once, then one chain is selected with
//! probability proportional to `P(k) exp(-lambda r(U_k V_k^T))` evaluated at
//! its current state. The estimate averages the selected chain's `U V^T`
//! over the kept rounds.

use rand::Rng;
use rayon::prelude::*;

use super::{check_lambda, check_monitored, factor_risk, Adjacency, FitOutput, GibbsConfig, RoundRecord};
use crate::error::{Error, Result};
use crate::model::{dot, DenseMatrix, ObservationSet};
use crate::prior::{rank_indicator_pmf, sample_prior_given_rank, FactorPair, PriorConfig};
use crate::rng::{stream, StreamRng};
use crate::tmvn::{gibbs_sweeps, BoxTruncatedGaussian};

/// `K` chains, one per rank index, plus selection weights and the running
/// posterior-mean sum.
#[derive(Debug, Clone)]
pub struct ChainEnsemble {
    /// `chains[k - 1]` has active rank `k`.
    pub chains: Vec<FactorPair>,
    pub lambda: f64,
    /// Selection probabilities from the latest round.
    pub weights: Vec<f64>,
    /// Empirical risk of each chain at the latest selection.
    pub risks: Vec<f64>,
    /// Sum of the selected `U V^T` over accumulated rounds.
    pub mean_accumulator: DenseMatrix,
    pub draws_accumulated: usize,
    rngs: Vec<StreamRng>,
}

impl ChainEnsemble {
    /// Chain `k` starts from a prior draw conditional on rank `k`, using
    /// the `init[k]` substream; it then evolves on the `chain[k]` substream.
    pub fn initialize(obs: &ObservationSet, cfg: &PriorConfig, lambda: f64, seed: u64) -> Result<Self> {
        check_lambda(lambda)?;
        cfg.validate_for_fit(obs.rows(), obs.cols(), obs.len().max(1))?;
        let width = cfg.width;
        let chains = (1..=width)
            .map(|k| {
                let mut rng = stream(seed, "init", k as u64);
                sample_prior_given_rank(cfg, obs.rows(), obs.cols(), k, &mut rng)
            })
            .collect();
        let rngs = (1..=width).map(|k| stream(seed, "chain", k as u64)).collect();
        let pmf = rank_indicator_pmf(cfg)?;
        Ok(Self {
            chains,
            lambda,
            weights: pmf,
            risks: vec![f64::NAN; width],
            mean_accumulator: DenseMatrix::zeros(obs.rows(), obs.cols()),
            draws_accumulated: 0,
            rngs,
        })
    }

    /// Average of the accumulated draws, if any.
    pub fn posterior_mean(&self) -> Option<DenseMatrix> {
        if self.draws_accumulated == 0 {
            return None;
        }
        let mut mean = self.mean_accumulator.clone();
        mean.scale(1.0 / self.draws_accumulated as f64);
        Some(mean)
    }

    /// Advances every chain by one full sweep. Chains own their streams, so
    /// the result does not depend on how the work is scheduled.
    fn advance(&mut self, rows: &Adjacency, cols: &Adjacency, scale: f64, cfg: &PriorConfig, sweeps: usize) {
        self.chains
            .par_iter_mut()
            .zip(self.rngs.par_iter_mut())
            .for_each(|(chain, rng)| sweep_in_place(chain, rows, cols, scale, cfg, sweeps, rng));
    }

    /// Adds the selected chain's `U V^T` to the running sum; returns the
    /// largest absolute entry of that draw.
    fn accumulate(&mut self, k: usize) -> f64 {
        let chain = &self.chains[k - 1];
        let p = self.mean_accumulator.cols();
        let mut max_abs = 0.0_f64;
        let acc = self.mean_accumulator.as_mut_slice();
        for i in 0..chain.u.rows() {
            let ui = chain.u.row(i);
            for j in 0..p {
                let v = dot(ui, chain.v.row(j));
                acc[i * p + j] += v;
                max_abs = max_abs.max(v.abs());
            }
        }
        self.draws_accumulated += 1;
        max_abs
    }
}

/// Writes the conditional of one factor row into `dist`.
fn fill_conditional(
    dist: &mut BoxTruncatedGaussian,
    neighbors: &[(usize, f64)],
    other: &DenseMatrix,
    scale: f64,
    k: usize,
    cfg: &PriorConfig,
) {
    let width = other.cols();
    let (prec, shift, lower, upper) = dist.parts_mut();
    prec.fill(0.0);
    shift.fill(0.0);
    for &(j, y) in neighbors {
        let v = other.row(j);
        for a in 0..width {
            shift[a] += y * v[a];
            for b in 0..=a {
                prec[(a, b)] += v[a] * v[b];
            }
        }
    }
    for a in 0..width {
        shift[a] *= scale;
        for b in 0..=a {
            let x = prec[(a, b)] * scale;
            prec[(a, b)] = x;
            prec[(b, a)] = x;
        }
        let h = cfg.half_width(a, k);
        lower[a] = -h;
        upper[a] = h;
    }
}

/// Conditional of `U_i` given `V` for a chain at rank `k`, with mean
/// `Sigma_i (2 lambda/n) sum y V_j` and precision
/// `(2 lambda/n) sum V_j^T V_j` over the observations in row `i`.
pub fn row_conditional(
    i: usize,
    v: &DenseMatrix,
    obs: &ObservationSet,
    lambda: f64,
    k: usize,
    cfg: &PriorConfig,
) -> Result<BoxTruncatedGaussian> {
    check_lambda(lambda)?;
    obs.require_nonempty()?;
    if i >= obs.rows() {
        return Err(Error::IndexOutOfRange {
            i,
            j: 0,
            m: obs.rows(),
            p: obs.cols(),
        });
    }
    if v.rows() != obs.cols() || v.cols() != cfg.width {
        return Err(Error::DimensionMismatch {
            expected_rows: obs.cols(),
            expected_cols: cfg.width,
            rows: v.rows(),
            cols: v.cols(),
        });
    }
    if k == 0 || k > cfg.width {
        return Err(Error::InvalidConfig(format!("rank index {k} outside 1..={}", cfg.width)));
    }
    let neighbors: Vec<(usize, f64)> = obs
        .entries()
        .iter()
        .filter(|e| e.i == i)
        .map(|e| (e.j, e.y))
        .collect();
    let mut dist = BoxTruncatedGaussian::workspace(cfg.width);
    fill_conditional(&mut dist, &neighbors, v, 2.0 * lambda / obs.len() as f64, k, cfg);
    Ok(dist)
}

fn sweep_in_place<R: Rng + ?Sized>(
    chain: &mut FactorPair,
    rows: &Adjacency,
    cols: &Adjacency,
    scale: f64,
    cfg: &PriorConfig,
    sweeps: usize,
    rng: &mut R,
) {
    let k = chain.rank;
    let mut dist = BoxTruncatedGaussian::workspace(cfg.width);
    for i in 0..chain.u.rows() {
        fill_conditional(&mut dist, rows.neighbors(i), &chain.v, scale, k, cfg);
        gibbs_sweeps(&dist, chain.u.row_mut(i), sweeps, rng);
    }
    for j in 0..chain.v.rows() {
        fill_conditional(&mut dist, cols.neighbors(j), &chain.u, scale, k, cfg);
        gibbs_sweeps(&dist, chain.v.row_mut(j), sweeps, rng);
    }
}

/// One full Gibbs sweep over the rows of `U`, then the rows of `V`.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    chain: &FactorPair,
    obs: &ObservationSet,
    lambda: f64,
    cfg: &PriorConfig,
    gibbs_cfg: &GibbsConfig,
    rng: &mut R,
) -> Result<FactorPair> {
    check_lambda(lambda)?;
    obs.require_nonempty()?;
    gibbs_cfg.validate()?;
    if chain.u.rows() != obs.rows() || chain.v.rows() != obs.cols() {
        return Err(Error::DimensionMismatch {
            expected_rows: obs.rows(),
            expected_cols: obs.cols(),
            rows: chain.u.rows(),
            cols: chain.v.rows(),
        });
    }
    if !chain.in_support(cfg) {
        return Err(Error::InvalidConfig("chain state lies outside the prior support".into()));
    }
    let rows = Adjacency::build(obs, true);
    let cols = Adjacency::build(obs, false);
    let mut next = chain.clone();
    let scale = 2.0 * lambda / obs.len() as f64;
    sweep_in_place(&mut next, &rows, &cols, scale, cfg, gibbs_cfg.inner_sweeps, rng);
    Ok(next)
}

/// Picks a chain with probability proportional to
/// `P(k) exp(-lambda r(U_k V_k^T))` at the chains' current states and
/// returns its rank index. Updates `ensemble.weights` and `ensemble.risks`.
pub fn select_chain<R: Rng + ?Sized>(
    ensemble: &mut ChainEnsemble,
    obs: &ObservationSet,
    cfg: &PriorConfig,
    rng: &mut R,
) -> Result<usize> {
    obs.require_nonempty()?;
    let pmf = rank_indicator_pmf(cfg)?;
    if pmf.len() != ensemble.chains.len() {
        return Err(Error::InvalidConfig(format!(
            "ensemble has {} chains but K = {}",
            ensemble.chains.len(),
            cfg.width
        )));
    }
    Ok(select_with_pmf(ensemble, obs, &pmf, rng))
}

fn select_with_pmf<R: Rng + ?Sized>(
    ensemble: &mut ChainEnsemble,
    obs: &ObservationSet,
    pmf: &[f64],
    rng: &mut R,
) -> usize {
    for (risk, chain) in ensemble.risks.iter_mut().zip(&ensemble.chains) {
        *risk = factor_risk(&chain.u, &chain.v, obs);
    }
    let log_w: Vec<f64> = pmf
        .iter()
        .zip(&ensemble.risks)
        .map(|(p, r)| p.ln() - ensemble.lambda * r)
        .collect();
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (w, lw) in ensemble.weights.iter_mut().zip(&log_w) {
        *w = (lw - top).exp();
        total += *w;
    }
    for w in &mut ensemble.weights {
        *w /= total;
    }
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (idx, w) in ensemble.weights.iter().enumerate() {
        cum += w;
        if u < cum {
            return idx + 1;
        }
    }
    // Rounding left u above the final cumulative sum.
    ensemble
        .weights
        .iter()
        .rposition(|w| *w > 0.0)
        .map_or(1, |idx| idx + 1)
}

/// Runs the full sampler and records the selected draw at each kept round.
pub fn run_uniform_prior(
    obs: &ObservationSet,
    cfg: &PriorConfig,
    lambda: f64,
    gibbs_cfg: &GibbsConfig,
    monitored: &[(usize, usize)],
) -> Result<FitOutput> {
    obs.require_nonempty()?;
    gibbs_cfg.validate()?;
    check_monitored(obs, monitored)?;
    let mut ensemble = ChainEnsemble::initialize(obs, cfg, lambda, gibbs_cfg.seed)?;
    let pmf = rank_indicator_pmf(cfg)?;
    let rows = Adjacency::build(obs, true);
    let cols = Adjacency::build(obs, false);
    let scale = 2.0 * lambda / obs.len() as f64;
    let mut select_rng = stream(gibbs_cfg.seed, "select", 0);

    let mut trace = Vec::with_capacity(gibbs_cfg.iterations / gibbs_cfg.thin + 1);
    let mut selection_counts = vec![0usize; cfg.width];
    let mut max_abs_draw = 0.0_f64;
    for round in 0..gibbs_cfg.total_rounds() {
        ensemble.advance(&rows, &cols, scale, cfg, gibbs_cfg.inner_sweeps);
        let k = select_with_pmf(&mut ensemble, obs, &pmf, &mut select_rng);
        if !gibbs_cfg.keeps(round) {
            continue;
        }
        max_abs_draw = max_abs_draw.max(ensemble.accumulate(k));
        selection_counts[k - 1] += 1;
        let chain = &ensemble.chains[k - 1];
        trace.push(RoundRecord {
            round,
            k_selected: k,
            r_selected: ensemble.risks[k - 1],
            entries: monitored
                .iter()
                .map(|&(i, j)| dot(chain.u.row(i), chain.v.row(j)))
                .collect(),
        });
    }
    let estimate = ensemble
        .posterior_mean()
        .expect("at least one round is kept when iterations >= 1");
    Ok(FitOutput {
        estimate,
        trace,
        monitored: monitored.to_vec(),
        max_abs_draw,
        selection_counts,
    })
}

/// Posterior-mean estimate under the uniform prior.
pub fn fit_uniform_prior(
    obs: &ObservationSet,
    cfg: &PriorConfig,
    lambda: f64,
    gibbs_cfg: &GibbsConfig,
) -> Result<DenseMatrix> {
    Ok(run_uniform_prior(obs, cfg, lambda, gibbs_cfg, &[])?.estimate)
}
