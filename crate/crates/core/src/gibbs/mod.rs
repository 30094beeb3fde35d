//! Posterior simulation for the two estimators.
//!
//! [`uniform`] holds the multi-chain sampler for the structured uniform
//! prior: one chain per rank index, each updating the rows of `U` and `V`
//! from box-truncated Gaussian conditionals, with one chain selected per
//! round by its Gibbs-posterior weight. [`conjugate`] holds the Gaussian /
//! inverse-Gamma baseline.
//!
//! Both samplers target `exp(-lambda r(UV^T)) x prior`, so `lambda` enters
//! the row conditionals through the factor `2 lambda / n`.

pub mod conjugate;
pub mod uniform;

pub use conjugate::{fit_conjugate_prior, run_conjugate_prior};
pub use uniform::{
    fit_uniform_prior, gibbs_sweep, row_conditional, run_uniform_prior, select_chain,
    ChainEnsemble,
};

use crate::error::{Error, Result};
use crate::model::{DenseMatrix, ObservationSet};

/// Chain-length and seeding controls shared by both samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GibbsConfig {
    /// Rounds discarded before averaging.
    pub burn_in: usize,
    /// Rounds after burn-in.
    pub iterations: usize,
    /// Keep every `thin`-th post-burn-in round.
    pub thin: usize,
    /// Coordinate sweeps per truncated-Gaussian row draw.
    pub inner_sweeps: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            burn_in: 500,
            iterations: 2000,
            thin: 1,
            inner_sweeps: crate::tmvn::DEFAULT_SWEEPS,
            seed: 0,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        if self.inner_sweeps == 0 {
            return Err(Error::InvalidConfig("inner_sweeps must be at least 1".into()));
        }
        Ok(())
    }

    fn total_rounds(&self) -> usize {
        self.burn_in + self.iterations
    }

    fn keeps(&self, round: usize) -> bool {
        round >= self.burn_in && (round - self.burn_in).is_multiple_of(self.thin)
    }
}

/// One kept round of a sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Rank index of the selected chain (the factor width for the
    /// conjugate sampler).
    pub k_selected: usize,
    /// Empirical risk of the selected draw.
    pub r_selected: f64,
    /// Values of the monitored entries in the selected draw.
    pub entries: Vec<f64>,
}

/// A posterior-mean estimate plus what was recorded along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutput {
    pub estimate: DenseMatrix,
    pub trace: Vec<RoundRecord>,
    pub monitored: Vec<(usize, usize)>,
    /// Largest `|M_ij|` over all averaged draws.
    pub max_abs_draw: f64,
    /// How often each rank index was selected over the kept rounds.
    pub selection_counts: Vec<usize>,
}

impl FitOutput {
    /// Trace of monitored entry `idx` over the kept rounds.
    pub fn entry_trace(&self, idx: usize) -> Vec<f64> {
        self.trace.iter().map(|r| r.entries[idx]).collect()
    }
}

/// Observations grouped by one index, compressed-row style.
#[derive(Debug, Clone)]
pub(crate) struct Adjacency {
    offsets: Vec<usize>,
    items: Vec<(usize, f64)>,
}

impl Adjacency {
    /// Groups observations by row (`by_row = true`) or by column; each item
    /// holds the other index and the observed value.
    pub(crate) fn build(obs: &ObservationSet, by_row: bool) -> Self {
        let groups = if by_row { obs.rows() } else { obs.cols() };
        let key = |e: &crate::model::Observation| if by_row { (e.i, e.j) } else { (e.j, e.i) };
        let mut counts = vec![0usize; groups + 1];
        for e in obs.entries() {
            counts[key(e).0 + 1] += 1;
        }
        for g in 0..groups {
            counts[g + 1] += counts[g];
        }
        let mut fill = counts.clone();
        let mut items = vec![(0usize, 0.0f64); obs.len()];
        for e in obs.entries() {
            let (g, other) = key(e);
            items[fill[g]] = (other, e.y);
            fill[g] += 1;
        }
        Self {
            offsets: counts,
            items,
        }
    }

    #[inline]
    pub(crate) fn neighbors(&self, g: usize) -> &[(usize, f64)] {
        &self.items[self.offsets[g]..self.offsets[g + 1]]
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

pub(crate) fn check_monitored(obs: &ObservationSet, monitored: &[(usize, usize)]) -> Result<()> {
    for &(i, j) in monitored {
        if i >= obs.rows() || j >= obs.cols() {
            return Err(Error::IndexOutOfRange {
                i,
                j,
                m: obs.rows(),
                p: obs.cols(),
            });
        }
    }
    Ok(())
}

/// Empirical risk of `U V^T` without forming the product.
pub(crate) fn factor_risk(u: &DenseMatrix, v: &DenseMatrix, obs: &ObservationSet) -> f64 {
    let n = obs.len();
    let total = crate::model::sum_values(
        obs.entries().iter().map(|e| {
            let r = e.y - crate::model::dot(u.row(e.i), v.row(e.j));
            r * r
        }),
        n,
    );
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Observation;

    #[test]
    fn adjacency_groups_both_ways() {
        let obs = ObservationSet::new(
            3,
            2,
            vec![
                Observation { i: 2, j: 1, y: 1.0 },
                Observation { i: 0, j: 1, y: 2.0 },
                Observation { i: 2, j: 0, y: 3.0 },
                Observation { i: 2, j: 1, y: 4.0 },
            ],
        )
        .unwrap();
        let rows = Adjacency::build(&obs, true);
        assert_eq!(rows.neighbors(0), &[(1, 2.0)]);
        assert!(rows.neighbors(1).is_empty());
        assert_eq!(rows.neighbors(2), &[(1, 1.0), (0, 3.0), (1, 4.0)]);
        let cols = Adjacency::build(&obs, false);
        assert_eq!(cols.neighbors(0), &[(2, 3.0)]);
        assert_eq!(cols.neighbors(1), &[(2, 1.0), (0, 2.0), (2, 4.0)]);
    }

    #[test]
    fn config_validation() {
        assert!(GibbsConfig::default().validate().is_ok());
        let bad = GibbsConfig {
            thin: 0,
            ..GibbsConfig::default()
        };
        assert!(bad.validate().is_err());
        let cfg = GibbsConfig {
            burn_in: 2,
            iterations: 5,
            thin: 2,
            ..GibbsConfig::default()
        };
        let kept: Vec<usize> = (0..cfg.total_rounds()).filter(|r| cfg.keeps(*r)).collect();
        assert_eq!(kept, vec![2, 4, 6]);
    }
}
