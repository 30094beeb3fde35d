//! Explicit constants and the oracle bound on `R(M_hat) - R(M0)` at
//! `lambda* = n / (2C)`.
//!
//! For sub-exponential noise with `E|E|^k <= sigma^2 k! xi^(k-2)`:
//!
//! * `w = 12 L (2 xi + 3 L)` and `C_{sigma,L} = 2 (4 sigma^2 + 9 L^2)`;
//! * `C = max(w, C_{sigma,L})`, so `lambda* = n / (2C) < n / w`;
//! * `alpha, beta = lambda -/+ lambda^2 C_{sigma,L} / (2 n (1 - w lambda / n))`.
//!
//! The bound evaluated by [`oracle_bound`] is
//!
//! ```text
//! 3 [ L^2 (m+p)/(18n) ((m+p)/(9n) + 3) + |M - M0|^2_{F,Pi} ]
//!   + (8C/n) [ (m+p) r log(36n/(m+p)) / 2 + log(2/eps)
//!              + 2 r log(1/tau) + 2 log(tau/(1-tau)) ]
//! ```
//!
//! where `r` is the rank of the comparison matrix. The prior has no rank-0
//! stratum, so `r = 0` (the zero matrix) is evaluated as `r = 1`.
//!
//! [`LogTerm::Loose`] replaces `log(36n/(m+p))` by `log(36 min(m,p))` and
//! the last term by `2 log(1/(1-tau))`.

use crate::error::{Error, Result};

/// Noise moment constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub xi: f64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, xi: f64) -> Result<Self> {
        let spec = Self { sigma, xi };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return Err(Error::InvalidConfig(format!("xi must be positive, got {}", self.xi)));
        }
        Ok(())
    }
}

/// Which logarithm the rank term uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogTerm {
    /// `log(36 n / (m + p))`.
    #[default]
    Sharp,
    /// `log(36 min(m, p))`, with `2 log(1/(1-tau))` for the last term.
    Loose,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub m: usize,
    pub p: usize,
    pub n: usize,
    pub rank: usize,
    /// `|M - M0|^2_{F,Pi}` for the comparison matrix `M`.
    pub approx_error: f64,
    pub epsilon: f64,
    pub bound: f64,
    pub tau: f64,
    pub noise: NoiseSpec,
}

/// `w`, `C_{sigma,L}`, `alpha`, `beta` at a given `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxiliaryConstants {
    pub w: f64,
    pub c_sigma_l: f64,
    pub alpha: f64,
    pub beta: f64,
}

fn check_bound(l: f64) -> Result<()> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidConfig(format!("L must be positive, got {l}")));
    }
    Ok(())
}

pub fn w_constant(l: f64, noise: &NoiseSpec) -> f64 {
    12.0 * l * (2.0 * noise.xi + 3.0 * l)
}

pub fn c_sigma_l(l: f64, noise: &NoiseSpec) -> f64 {
    2.0 * (4.0 * noise.sigma * noise.sigma + 9.0 * l * l)
}

/// `C = max(12 L (2 xi + 3 L), 8 sigma^2 + 18 L^2)`.
pub fn constant_c(l: f64, noise: &NoiseSpec) -> Result<f64> {
    check_bound(l)?;
    noise.validate()?;
    Ok(w_constant(l, noise).max(c_sigma_l(l, noise)))
}

/// `lambda* = n / (2C)`.
pub fn lambda_star(n: usize, l: f64, noise: &NoiseSpec) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptyObservations);
    }
    Ok(n as f64 / (2.0 * constant_c(l, noise)?))
}

/// `n / 4`: the experimental setting for unit-variance noise, written as
/// `n / (4 sigma^2)`.
pub fn lambda_experiment(n: usize, sigma: f64) -> f64 {
    n as f64 / (4.0 * sigma * sigma)
}

/// `n / (2 sigma^2)`: the tempered posterior equals the Bayes posterior
/// under `N(0, sigma^2)` noise.
pub fn lambda_gauss(n: usize, sigma: f64) -> f64 {
    n as f64 / (2.0 * sigma * sigma)
}

pub fn auxiliary_constants(lambda: f64, n: usize, l: f64, noise: &NoiseSpec) -> Result<AuxiliaryConstants> {
    check_bound(l)?;
    noise.validate()?;
    if n == 0 {
        return Err(Error::EmptyObservations);
    }
    let nf = n as f64;
    let w = w_constant(l, noise);
    let limit = nf / w;
    if !(lambda > 0.0 && lambda < limit) {
        return Err(Error::LambdaOutOfRange { lambda, limit });
    }
    let c = c_sigma_l(l, noise);
    let correction = lambda * lambda * c / (2.0 * nf * (1.0 - w * lambda / nf));
    Ok(AuxiliaryConstants {
        w,
        c_sigma_l: c,
        alpha: lambda - correction,
        beta: lambda + correction,
    })
}

/// The individual pieces of the bound, summed by [`BoundTerms::total`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    /// `3 L^2 (m+p)/(18n) ((m+p)/(9n) + 3)`.
    pub dimension: f64,
    /// `3 |M - M0|^2_{F,Pi}`.
    pub approximation: f64,
    /// `8C/n` times the rank logarithm term.
    pub rank: f64,
    /// `8C/n log(2/eps)`.
    pub confidence: f64,
    /// `8C/n` times the two `tau` terms.
    pub prior: f64,
}

impl BoundTerms {
    pub fn total(&self) -> f64 {
        self.dimension + self.approximation + self.rank + self.confidence + self.prior
    }
}

pub fn oracle_bound_terms(inp: &BoundInputs, variant: LogTerm) -> Result<BoundTerms> {
    let c = constant_c(inp.bound, &inp.noise)?;
    if inp.m == 0 || inp.p == 0 {
        return Err(Error::InvalidConfig("m and p must be positive".into()));
    }
    let required = inp.m.max(inp.p);
    if inp.n < required {
        return Err(Error::TooFewObservations { n: inp.n, required });
    }
    if !(inp.epsilon > 0.0 && inp.epsilon < 1.0) {
        return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1), got {}", inp.epsilon)));
    }
    if !(inp.tau > 0.0 && inp.tau < 1.0) {
        return Err(Error::InvalidConfig(format!("tau must lie in (0, 1), got {}", inp.tau)));
    }
    if !(inp.approx_error >= 0.0 && inp.approx_error.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "approximation error must be nonnegative, got {}",
            inp.approx_error
        )));
    }
    let n = inp.n as f64;
    let mp = (inp.m + inp.p) as f64;
    let l = inp.bound;
    let r = inp.rank.max(1) as f64;
    let scale = 8.0 * c / n;
    let log_rank = match variant {
        LogTerm::Sharp => (36.0 * n / mp).ln(),
        LogTerm::Loose => (36.0 * inp.m.min(inp.p) as f64).ln(),
    };
    let tau_tail = match variant {
        LogTerm::Sharp => 2.0 * (inp.tau / (1.0 - inp.tau)).ln(),
        LogTerm::Loose => 2.0 * (1.0 / (1.0 - inp.tau)).ln(),
    };
    Ok(BoundTerms {
        dimension: 3.0 * l * l * mp / (18.0 * n) * (mp / (9.0 * n) + 3.0),
        approximation: 3.0 * inp.approx_error,
        rank: scale * 0.5 * mp * r * log_rank,
        confidence: scale * (2.0 / inp.epsilon).ln(),
        prior: scale * (2.0 * r * (1.0 / inp.tau).ln() + tau_tail),
    })
}

/// Right-hand side of the oracle inequality at `lambda*`, sharp logarithm.
pub fn oracle_bound(inp: &BoundInputs) -> Result<f64> {
    oracle_bound_with(inp, LogTerm::Sharp)
}

pub fn oracle_bound_with(inp: &BoundInputs, variant: LogTerm) -> Result<f64> {
    Ok(oracle_bound_terms(inp, variant)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> NoiseSpec {
        NoiseSpec::new(1.0, 1.0).unwrap()
    }

    fn base() -> BoundInputs {
        BoundInputs {
            m: 100,
            p: 100,
            n: 2000,
            rank: 2,
            approx_error: 0.0,
            epsilon: 0.05,
            bound: 50.0,
            tau: 0.5,
            noise: unit(),
        }
    }

    #[test]
    fn constant_c_examples() {
        assert_eq!(constant_c(1.0, &unit()).unwrap(), 60.0);
        let c = constant_c(0.1, &NoiseSpec::new(1.0, 0.1).unwrap()).unwrap();
        assert!((c - 8.18).abs() < 1e-12);
        assert!(constant_c(0.0, &unit()).is_err());
        assert!(NoiseSpec::new(0.0, 1.0).is_err());
    }

    #[test]
    fn lambda_presets() {
        assert!((lambda_star(120, 1.0, &unit()).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(lambda_experiment(2000, 1.0), 500.0);
        assert_eq!(lambda_gauss(2000, 1.0), 1000.0);
    }

    #[test]
    fn auxiliary_by_hand() {
        // w = 12 * 5 = 60, C_sL = 2 * 13 = 26, correction = 26 / (240 * 0.5).
        let a = auxiliary_constants(1.0, 120, 1.0, &unit()).unwrap();
        assert_eq!(a.w, 60.0);
        assert_eq!(a.c_sigma_l, 26.0);
        let corr = 26.0 / 120.0;
        assert!((a.alpha - (1.0 - corr)).abs() < 1e-15);
        assert!((a.beta - (1.0 + corr)).abs() < 1e-15);
        assert!(matches!(
            auxiliary_constants(2.0, 120, 1.0, &unit()),
            Err(Error::LambdaOutOfRange { .. })
        ));
    }

    #[test]
    fn alpha_beta_at_lambda_star() {
        for (l, s, xi, n) in [(1.0, 1.0, 1.0, 120), (50.0, 1.0, 1.0, 2000), (0.1, 3.0, 0.1, 50), (2.0, 0.5, 5.0, 10_000)] {
            let noise = NoiseSpec::new(s, xi).unwrap();
            let lam = lambda_star(n, l, &noise).unwrap();
            let a = auxiliary_constants(lam, n, l, &noise).unwrap();
            assert!(a.alpha >= lam / 2.0 - 1e-12);
            assert!(a.beta <= 1.5 * lam + 1e-12);
        }
    }

    #[test]
    fn alpha_beta_vanish_as_lambda_shrinks() {
        let lam = 1e-8;
        let a = auxiliary_constants(lam, 120, 1.0, &unit()).unwrap();
        assert!(((a.alpha - lam) / lam).abs() < 1e-6);
        assert!(((a.beta - lam) / lam).abs() < 1e-6);
    }

    #[test]
    fn rank_zero_specialization() {
        let inp = BoundInputs { rank: 0, ..base() };
        let t = oracle_bound_terms(&inp, LogTerm::Sharp).unwrap();
        assert_eq!(t.approximation, 0.0);
        let c = 91_200.0;
        let scale = 8.0 * c / 2000.0;
        assert!((t.confidence - scale * (2.0f64 / 0.05).ln()).abs() < 1e-9);
        assert!((t.rank - scale * 100.0 * (360.0f64).ln()).abs() < 1e-6);
        // tau = 1/2: 2 log(1/tau) + 2 log(tau / (1 - tau)) = 2 log 2.
        assert!((t.prior - scale * 2.0 * 2.0f64.ln()).abs() < 1e-9);
        assert_eq!(oracle_bound(&inp).unwrap(), oracle_bound(&BoundInputs { rank: 1, ..base() }).unwrap());
    }

    #[test]
    fn term_by_term_oracle() {
        // Independent evaluation of each summand for the reference instance.
        let inp = base();
        let (m, p, n, r) = (100.0f64, 100.0f64, 2000.0f64, 2.0f64);
        let l = 50.0f64;
        let c = (12.0 * l * (2.0 + 3.0 * l)).max(8.0 + 18.0 * l * l);
        assert_eq!(c, 91_200.0);
        let first = 3.0 * (l * l * (m + p) / (18.0 * n) * ((m + p) / (9.0 * n) + 3.0));
        let second = 8.0 * c / n
            * (0.5 * (m + p) * r * (36.0 * n / (m + p)).ln()
                + (2.0f64 / 0.05).ln()
                + 2.0 * r * 2.0f64.ln()
                + 2.0 * 1.0f64.ln());
        let expected = first + second;
        let got = oracle_bound(&inp).unwrap();
        assert!((got - expected).abs() < 1e-9 * expected, "{got} vs {expected}");
        // Loose form only changes the logarithm and the tau tail.
        let loose = oracle_bound_with(&inp, LogTerm::Loose).unwrap();
        let expected_loose = first
            + 8.0 * c / n
                * (0.5 * (m + p) * r * 3600.0f64.ln() + (40.0f64).ln() + 2.0 * r * 2.0f64.ln() + 2.0 * 2.0f64.ln());
        assert!((loose - expected_loose).abs() < 1e-9 * expected_loose);
        assert!(loose > got);
    }

    #[test]
    fn bound_requires_enough_observations() {
        let inp = BoundInputs { n: 99, ..base() };
        assert!(matches!(oracle_bound(&inp), Err(Error::TooFewObservations { n: 99, required: 100 })));
        assert!(oracle_bound(&BoundInputs { epsilon: 1.0, ..base() }).is_err());
    }

    #[test]
    fn rank_term_shrinks_when_n_doubles() {
        for m in [5usize, 20, 100] {
            for p in [5usize, 30, 100] {
                let mut n = 10 * (m + p);
                for _ in 0..6 {
                    let a = oracle_bound_terms(&BoundInputs { m, p, n, ..base() }, LogTerm::Sharp).unwrap();
                    let b = oracle_bound_terms(&BoundInputs { m, p, n: 2 * n, ..base() }, LogTerm::Sharp).unwrap();
                    assert!(b.rank < a.rank);
                    n *= 2;
                }
            }
        }
    }

    proptest! {
        #[test]
        fn constant_c_is_monotone(l in 0.01f64..100.0, s in 0.01f64..10.0, xi in 0.01f64..10.0, bump in 1.0f64..2.0) {
            let c = constant_c(l, &NoiseSpec::new(s, xi).unwrap()).unwrap();
            prop_assert!(constant_c(l * bump, &NoiseSpec::new(s, xi).unwrap()).unwrap() >= c);
            prop_assert!(constant_c(l, &NoiseSpec::new(s * bump, xi).unwrap()).unwrap() >= c);
            prop_assert!(constant_c(l, &NoiseSpec::new(s, xi * bump).unwrap()).unwrap() >= c);
        }

        #[test]
        fn bound_dominates_three_times_error(err in 0.0f64..1e4, rank in 0usize..6, tau in 0.05f64..0.95) {
            let inp = BoundInputs { approx_error: err, rank, tau, ..base() };
            prop_assert!(oracle_bound(&inp).unwrap() >= 3.0 * err);
        }

        #[test]
        fn bound_monotone_in_inputs(rank in 0usize..5, eps in 0.001f64..0.5, l in 0.5f64..60.0) {
            let inp = BoundInputs { rank, epsilon: eps, bound: l, ..base() };
            let b = oracle_bound(&inp).unwrap();
            let more_rank = BoundInputs { rank: rank + 1, ..inp };
            let less_eps = BoundInputs { epsilon: eps / 2.0, ..inp };
            let more_l = BoundInputs { bound: l * 1.5, ..inp };
            prop_assert!(oracle_bound(&more_rank).unwrap() >= b);
            prop_assert!(oracle_bound(&less_eps).unwrap() >= b);
            prop_assert!(oracle_bound(&more_l).unwrap() >= b);
        }

        #[test]
        fn bound_nonincreasing_in_n(m in 2usize..60, p in 2usize..60, k in 10usize..200) {
            let n = k * (m + p);
            let a = oracle_bound(&BoundInputs { m, p, n, ..base() }).unwrap();
            let b = oracle_bound(&BoundInputs { m, p, n: n + (m + p), ..base() }).unwrap();
            prop_assert!(b <= a);
        }
    }
}
