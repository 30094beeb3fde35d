//! The structured uniform prior over factor pairs and the conjugate
//! Gaussian/inverse-Gamma baseline prior.
//!
//! Under the uniform prior a rank index `k` is drawn from a truncated
//! geometric law with ratio `tau`; the first `k` factor columns of `U` and
//! `V` are uniform on `[-delta, delta]` with `delta = sqrt(2L/K)`, the
//! remaining ones uniform on `[-kappa, kappa]`. With `kappa = 0` the spike
//! columns are an exact point mass at zero and `rank(UV^T) <= k`.

use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::model::DenseMatrix;

/// Hyperparameters of the uniform prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorConfig {
    /// Known bound `L` on `sup |M0_ij|`.
    pub bound: f64,
    /// Factor width `K`.
    pub width: usize,
    /// Rank-decay ratio in `(0, 1)`.
    pub tau: f64,
    /// Spike half-width; `0` pins the spike columns at zero.
    pub kappa: f64,
}

impl PriorConfig {
    /// `kappa = 0`, `K = 5`, `L = 50`, `tau = 1/2`.
    pub const EXPERIMENT: PriorConfig = PriorConfig {
        bound: 50.0,
        width: 5,
        tau: 0.5,
        kappa: 0.0,
    };

    pub fn new(bound: f64, width: usize, tau: f64, kappa: f64) -> Result<Self> {
        let cfg = Self {
            bound,
            width,
            tau,
            kappa,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Slab half-width `sqrt(2L/K)`.
    #[inline]
    pub fn delta(&self) -> f64 {
        (2.0 * self.bound / self.width as f64).sqrt()
    }

    /// Largest admissible spike half-width for `n` observations.
    pub fn kappa_limit(&self, n: usize) -> f64 {
        (self.bound / (10.0 * self.width as f64)).sqrt() / n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(Error::InvalidConfig(format!("L must be positive, got {}", self.bound)));
        }
        if self.width == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidConfig(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidConfig(format!("kappa must be nonnegative, got {}", self.kappa)));
        }
        Ok(())
    }

    /// Checks done once the data are known: `K <= min(m, p)` and
    /// `kappa <= (1/n) sqrt(L/(10K))`.
    pub fn validate_for_fit(&self, m: usize, p: usize, n: usize) -> Result<()> {
        self.validate()?;
        if self.width > m.min(p) {
            return Err(Error::InvalidConfig(format!(
                "K = {} exceeds min(m, p) = {}",
                self.width,
                m.min(p)
            )));
        }
        let limit = self.kappa_limit(n);
        if self.kappa > limit {
            return Err(Error::InvalidConfig(format!(
                "kappa = {} exceeds (1/n) sqrt(L/(10K)) = {limit}",
                self.kappa
            )));
        }
        Ok(())
    }

    /// Half-width of the box for factor column `col` (0-based) at rank `k`.
    #[inline]
    pub fn half_width(&self, col: usize, k: usize) -> f64 {
        if col < k {
            self.delta()
        } else {
            self.kappa
        }
    }
}

/// Hyperparameters of the conjugate baseline: `U_{.l}, V_{.l} ~ N(0, gamma_l)`
/// with `gamma_l ~ InvGamma(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugatePriorConfig {
    pub a: f64,
    pub b: f64,
    pub width: usize,
}

impl ConjugatePriorConfig {
    /// `a = 1`, `b = 1/100`, `K = 5`.
    pub const EXPERIMENT: ConjugatePriorConfig = ConjugatePriorConfig {
        a: 1.0,
        b: 0.01,
        width: 5,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "inverse-Gamma parameters must be positive, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        if self.width == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        Ok(())
    }
}

/// Factor matrices `U` (m x K) and `V` (p x K) with active rank `k` (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    pub rank: usize,
}

impl FactorPair {
    /// `U V^T`.
    pub fn product(&self) -> DenseMatrix {
        self.u
            .mul_transpose(&self.v)
            .expect("factor widths agree by construction")
    }

    /// Whether every entry lies in its prior box.
    pub fn in_support(&self, cfg: &PriorConfig) -> bool {
        let k = self.rank;
        if k == 0 || k > cfg.width || self.u.cols() != cfg.width || self.v.cols() != cfg.width {
            return false;
        }
        [&self.u, &self.v].iter().all(|f| {
            (0..f.rows()).all(|i| {
                f.row(i)
                    .iter()
                    .enumerate()
                    .all(|(l, x)| x.abs() <= cfg.half_width(l, k))
            })
        })
    }
}

/// `P(k) = tau^{k-1} (1 - tau) / (1 - tau^K)` for `k = 1..=K`.
pub fn rank_indicator_pmf(cfg: &PriorConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let norm = (1.0 - cfg.tau) / (1.0 - cfg.tau.powi(cfg.width as i32));
    Ok((0..cfg.width).map(|k| cfg.tau.powi(k as i32) * norm).collect())
}

/// One draw of `(U, V, k)` from the uniform prior.
pub fn sample_prior<R: Rng + ?Sized>(
    cfg: &PriorConfig,
    m: usize,
    p: usize,
    rng: &mut R,
) -> Result<FactorPair> {
    let pmf = rank_indicator_pmf(cfg)?;
    if cfg.width > m.min(p) {
        return Err(Error::InvalidConfig(format!(
            "K = {} exceeds min(m, p) = {}",
            cfg.width,
            m.min(p)
        )));
    }
    let k = WeightedIndex::new(&pmf)
        .expect("pmf is a valid probability vector")
        .sample(rng)
        + 1;
    Ok(sample_prior_given_rank(cfg, m, p, k, rng))
}

/// A prior draw of `(U, V)` conditional on the rank index `k`.
pub fn sample_prior_given_rank<R: Rng + ?Sized>(
    cfg: &PriorConfig,
    m: usize,
    p: usize,
    k: usize,
    rng: &mut R,
) -> FactorPair {
    let mut fill = |rows: usize| {
        let mut f = DenseMatrix::zeros(rows, cfg.width);
        // Column-major fill; spike columns stay zero when kappa = 0.
        for l in 0..cfg.width {
            let h = cfg.half_width(l, k);
            if h == 0.0 {
                continue;
            }
            for i in 0..rows {
                f[(i, l)] = rng.random_range(-h..=h);
            }
        }
        f
    };
    let u = fill(m);
    let v = fill(p);
    FactorPair { u, v, rank: k }
}

/// Log-density of `fp` under the uniform prior, with respect to Lebesgue
/// measure on the free coordinates. With `kappa = 0` the spike columns are
/// a Dirac factor: exactly zero contributes nothing, anything else is
/// outside the support.
pub fn log_prior_density(fp: &FactorPair, cfg: &PriorConfig) -> Result<f64> {
    let pmf = rank_indicator_pmf(cfg)?;
    if !fp.in_support(cfg) {
        return Ok(f64::NEG_INFINITY);
    }
    let k = fp.rank;
    let entries = fp.u.rows() + fp.v.rows();
    let slab = (k * entries) as f64 * -(2.0 * cfg.delta()).ln();
    let spike = if cfg.kappa > 0.0 {
        ((cfg.width - k) * entries) as f64 * -(2.0 * cfg.kappa).ln()
    } else {
        0.0
    };
    Ok(pmf[k - 1].ln() + slab + spike)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn cfg(bound: f64, width: usize, tau: f64, kappa: f64) -> PriorConfig {
        PriorConfig::new(bound, width, tau, kappa).unwrap()
    }

    #[test]
    fn pmf_half_two() {
        let p = rank_indicator_pmf(&cfg(1.0, 2, 0.5, 0.0)).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pmf_matches_componentwise_formula() {
        let c = cfg(1.0, 5, 0.25, 0.0);
        let p = rank_indicator_pmf(&c).unwrap();
        // 0.75 / (1 - 0.25^5) = 0.75 / 0.9990234375
        let norm = 0.75 / 0.999_023_437_5;
        let expected = [norm, 0.25 * norm, 0.0625 * norm, 0.015625 * norm, 0.00390625 * norm];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn delta_is_derived() {
        let c = cfg(50.0, 5, 0.5, 0.0);
        assert_eq!(c.delta(), 20.0_f64.sqrt());
        assert!(PriorConfig::new(1.0, 2, 1.0, 0.0).is_err());
        assert!(PriorConfig::new(1.0, 2, 0.5, -1.0).is_err());
        assert!(PriorConfig::new(-1.0, 2, 0.5, 0.0).is_err());
    }

    #[test]
    fn kappa_limit_enforced_at_fit_time() {
        let c = cfg(10.0, 1, 0.5, 0.1);
        // (1/n) sqrt(10/10) = 1/n
        assert!(c.validate_for_fit(3, 3, 10).is_ok());
        assert!(c.validate_for_fit(3, 3, 11).is_err());
        assert!(cfg(10.0, 4, 0.5, 0.0).validate_for_fit(3, 5, 10).is_err());
    }

    #[test]
    fn kappa_zero_gives_low_rank() {
        let c = cfg(50.0, 5, 0.5, 0.0);
        let mut rng = stream(3, "test", 0);
        for _ in 0..200 {
            let fp = sample_prior(&c, 8, 7, &mut rng).unwrap();
            for l in fp.rank..5 {
                assert!((0..8).all(|i| fp.u[(i, l)] == 0.0));
                assert!((0..7).all(|j| fp.v[(j, l)] == 0.0));
            }
            let sv = fp.product().singular_values();
            assert!(sv[fp.rank..].iter().all(|s| *s < 1e-10 * sv[0].max(1.0)));
            assert!(fp.product().max_abs() <= 2.0 * c.bound);
        }
    }

    #[test]
    fn rank_frequencies_match_pmf() {
        let c = cfg(1.0, 3, 0.5, 0.0);
        let pmf = rank_indicator_pmf(&c).unwrap();
        let mut rng = stream(5, "test", 0);
        let draws = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            counts[sample_prior(&c, 3, 3, &mut rng).unwrap().rank - 1] += 1;
        }
        let tol = 4.0 / (draws as f64).sqrt();
        for (cnt, p) in counts.iter().zip(pmf) {
            assert!((*cnt as f64 / draws as f64 - p).abs() < tol);
        }
    }

    #[test]
    fn log_density_examples() {
        let c = cfg(0.5, 1, 0.5, 0.0);
        let fp = FactorPair {
            u: DenseMatrix::from_rows(&[vec![0.3]]).unwrap(),
            v: DenseMatrix::from_rows(&[vec![-0.9]]).unwrap(),
            rank: 1,
        };
        let ld = log_prior_density(&fp, &c).unwrap();
        assert!((ld - (1.0f64.ln() - 2.0 * 2.0f64.ln())).abs() < 1e-15);

        let mut out = fp.clone();
        out.u[(0, 0)] = 1.01;
        assert_eq!(log_prior_density(&out, &c).unwrap(), f64::NEG_INFINITY);

        // Nonzero spike coordinate with kappa = 0 leaves the support.
        let c2 = cfg(0.5, 2, 0.5, 0.0);
        let mut fp2 = FactorPair {
            u: DenseMatrix::from_rows(&[vec![0.3, 0.0], vec![0.1, 0.0]]).unwrap(),
            v: DenseMatrix::from_rows(&[vec![0.2, 0.0], vec![0.0, 0.0]]).unwrap(),
            rank: 1,
        };
        assert!(log_prior_density(&fp2, &c2).unwrap().is_finite());
        fp2.v[(1, 1)] = 1e-9;
        assert_eq!(log_prior_density(&fp2, &c2).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn density_integrates_to_one() {
        // 1x1, K = 1: integrate over a grid that overhangs the support, with
        // the support edges on cell boundaries.
        let c = cfg(0.7, 1, 0.5, 0.0);
        let half = 1.5 * c.delta();
        let pts = 1500;
        let h = 2.0 * half / pts as f64;
        let mut total = 0.0;
        for a in 0..pts {
            for b in 0..pts {
                let fp = FactorPair {
                    u: DenseMatrix::from_rows(&[vec![-half + (a as f64 + 0.5) * h]]).unwrap(),
                    v: DenseMatrix::from_rows(&[vec![-half + (b as f64 + 0.5) * h]]).unwrap(),
                    rank: 1,
                };
                total += log_prior_density(&fp, &c).unwrap().exp() * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-3, "integral {total}");
    }

    #[test]
    fn spike_density_with_positive_kappa() {
        let c = cfg(2.0, 2, 0.5, 0.01);
        let fp = FactorPair {
            u: DenseMatrix::from_rows(&[vec![0.5, 0.005]]).unwrap(),
            v: DenseMatrix::from_rows(&[vec![-0.5, -0.01]]).unwrap(),
            rank: 1,
        };
        let pmf = rank_indicator_pmf(&c).unwrap();
        let expected = pmf[0].ln() - 2.0 * (2.0 * c.delta()).ln() - 2.0 * 0.02f64.ln();
        assert!((log_prior_density(&fp, &c).unwrap() - expected).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn pmf_is_a_decreasing_probability_vector(tau in 0.01f64..0.99, width in 1usize..30) {
            let p = rank_indicator_pmf(&cfg(1.0, width, tau, 0.0)).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|x| *x > 0.0));
            prop_assert!(p.windows(2).all(|w| w[1] < w[0]));
        }

        #[test]
        fn prior_draws_respect_boxes(
            seed in 0u64..10_000,
            bound in 0.1f64..100.0,
            width in 1usize..5,
            tau in 0.05f64..0.95,
            kappa_frac in 0.0f64..1.0,
        ) {
            let m = width + 2;
            let p = width + 1;
            let c = cfg(bound, width, tau, kappa_frac * (bound / (10.0 * width as f64)).sqrt() / 20.0);
            let mut rng = stream(seed, "test", 0);
            let fp = sample_prior(&c, m, p, &mut rng).unwrap();
            prop_assert!(fp.in_support(&c));
            prop_assert!(fp.product().max_abs() <= 2.0 * bound);
        }
    }
}
