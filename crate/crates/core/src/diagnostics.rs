//! Trace diagnostics and replication summaries.
//!
//! Mixing is compared through the biased (n-denominator) sample ACF, as
//! standard statistics packages report it. "Faster mixing" is taken to
//! mean a smaller summed absolute ACF over lags `1..=max_lag`; this is a
//! proxy metric, not a formal convergence criterion.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::sim::{Estimator, RmseRecord};

/// Default largest lag for mixing comparisons.
pub const DEFAULT_MAX_LAG: usize = 50;

/// One monitored scalar per MCMC round.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSeries {
    pub label: String,
    pub values: Vec<f64>,
}

impl TraceSeries {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            values,
        }
    }
}

/// Sample autocorrelations `r_0..=r_max_lag`, `r_0 = 1`.
pub fn acf(series: &TraceSeries, max_lag: usize) -> Result<Vec<f64>> {
    let x = &series.values;
    if x.len() < 2 || x.len() <= max_lag {
        return Err(Error::SeriesTooShort {
            len: x.len(),
            need: max_lag.max(1),
        });
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let denom: f64 = centered.iter().map(|c| c * c).sum();
    if !(denom > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for h in 1..=max_lag {
        let num: f64 = centered.iter().zip(&centered[h..]).map(|(a, b)| a * b).sum();
        out.push((num / denom).clamp(-1.0, 1.0));
    }
    Ok(out)
}

/// Monte-Carlo standard error of the mean of an autocorrelated trace by
/// non-overlapping batch means.
pub fn batch_means_se(values: &[f64], batches: usize) -> f64 {
    let batches = batches.max(2).min(values.len());
    let size = values.len() / batches;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = values
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let b = means.len() as f64;
    let grand = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1.0);
    (var / b).sqrt()
}

/// Mean and standard error of one `(series, m, estimator)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub series: u8,
    pub m: usize,
    pub estimator: Estimator,
    pub replications: usize,
    pub mean: f64,
    /// `None` with fewer than two replications.
    pub std_error: Option<f64>,
}

impl SummaryRow {
    /// `0.535 (±0.003)` style.
    pub fn formatted(&self) -> String {
        match self.std_error {
            Some(se) => format!("{:.3} (±{:.3})", self.mean, se),
            None => format!("{:.3}", self.mean),
        }
    }
}

/// Per-cell mean RMSE and standard error `sd / sqrt(R)`, cells ordered by
/// series, then `m`, then estimator.
pub fn summarize_replications(results: &[RmseRecord]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(u8, usize, Estimator), Vec<f64>> = BTreeMap::new();
    for r in results {
        cells.entry((r.series, r.m, r.estimator)).or_default().push(r.rmse);
    }
    cells
        .into_iter()
        .map(|((series, m, estimator), mut values)| {
            // Sorting makes the floating-point result independent of input order.
            values.sort_by(f64::total_cmp);
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let std_error = (values.len() >= 2).then(|| {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            });
            SummaryRow {
                series,
                m,
                estimator,
                replications: values.len(),
                mean,
                std_error,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Faster {
    First,
    Second,
    Tie,
}

/// Lag-by-lag comparison of two ACF vectors (lag 0 first).
#[derive(Debug, Clone, PartialEq)]
pub struct AcfComparison {
    /// For lags `1..`: which series has the smaller `|acf|`.
    pub per_lag: Vec<Faster>,
    pub summed_abs_first: f64,
    pub summed_abs_second: f64,
    pub verdict: Faster,
}

pub fn compare_acf_decay(first: &[f64], second: &[f64]) -> Result<AcfComparison> {
    if first.len() != second.len() {
        return Err(Error::LengthMismatch(first.len(), second.len()));
    }
    let order = |a: f64, b: f64| match a.abs().partial_cmp(&b.abs()) {
        Some(Ordering::Less) => Faster::First,
        Some(Ordering::Greater) => Faster::Second,
        _ => Faster::Tie,
    };
    let lags = 1..first.len();
    let per_lag = lags.clone().map(|h| order(first[h], second[h])).collect();
    let summed_abs_first: f64 = lags.clone().map(|h| first[h].abs()).sum();
    let summed_abs_second: f64 = lags.map(|h| second[h].abs()).sum();
    Ok(AcfComparison {
        per_lag,
        summed_abs_first,
        summed_abs_second,
        verdict: order(summed_abs_first, summed_abs_second),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn lag_zero_is_one() {
        let s = TraceSeries::new("x", vec![1.0, 3.0, 2.0, 5.0, 4.0]);
        assert_eq!(acf(&s, 3).unwrap()[0], 1.0);
    }

    #[test]
    fn white_noise_acf_is_small() {
        let mut rng = stream(1, "test", 0);
        let x: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let r = acf(&TraceSeries::new("wn", x), 20).unwrap();
        let small = r[1..].iter().filter(|v| v.abs() < 4.0 / 100.0).count();
        assert!(small >= 18);
    }

    #[test]
    fn ar1_acf_matches_closed_form() {
        let mut rng = stream(2, "test", 0);
        let phi = 0.8;
        let mut x = Vec::with_capacity(100_000);
        let mut cur: f64 = rng.sample::<f64, _>(StandardNormal) / (1.0f64 - phi * phi).sqrt();
        for _ in 0..100_000 {
            cur = phi * cur + rng.sample::<f64, _>(StandardNormal);
            x.push(cur);
        }
        let r = acf(&TraceSeries::new("ar1", x), 5).unwrap();
        for (h, v) in r.iter().enumerate() {
            assert!((v - phi.powi(h as i32)).abs() < 0.02, "lag {h}: {v}");
        }
    }

    #[test]
    fn acf_errors_and_monotone_series() {
        assert!(matches!(acf(&TraceSeries::new("c", vec![2.0; 10]), 3), Err(Error::ZeroVariance)));
        assert!(acf(&TraceSeries::new("s", vec![1.0, 2.0]), 2).is_err());
        let lin: Vec<f64> = (0..50).map(f64::from).collect();
        let r = acf(&TraceSeries::new("lin", lin), 10).unwrap();
        assert!(r[1] > 0.0);
    }

    fn rec(series: u8, m: usize, estimator: Estimator, rmse: f64) -> RmseRecord {
        RmseRecord {
            series,
            m,
            replication: 0,
            estimator,
            rmse,
            seconds: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn summary_examples() {
        let rows = summarize_replications(&[
            rec(1, 100, Estimator::Uniform, 0.5),
            rec(1, 100, Estimator::Uniform, 0.5),
            rec(1, 100, Estimator::Uniform, 0.5),
            rec(1, 100, Estimator::Conjugate, 0.4),
            rec(1, 100, Estimator::Conjugate, 0.6),
            rec(2, 200, Estimator::Uniform, 0.3),
        ]);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].estimator, Estimator::Uniform);
        assert_eq!(rows[0].mean, 0.5);
        assert_eq!(rows[0].std_error, Some(0.0));
        assert!((rows[1].mean - 0.5).abs() < 1e-15);
        assert!((rows[1].std_error.unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(rows[2].std_error, None);
        assert_eq!(rows[1].formatted(), "0.500 (±0.100)");
    }

    #[test]
    fn summary_matches_hand_computation() {
        // Five cells of three values each; means and ses worked out by hand.
        let cells: [(u8, [f64; 3], f64, f64); 5] = [
            (1, [0.52, 0.55, 0.53], 0.533_333_333_333_333_3, 0.008_819_171_036_881_97),
            (2, [0.61, 0.65, 0.66], 0.64, 0.015_275_252_316_519_48),
            (3, [0.33, 0.32, 0.34], 0.33, 0.005_773_502_691_896_26),
            (4, [0.70, 0.80, 0.75], 0.75, 0.028_867_513_459_481_29),
            (5, [0.10, 0.10, 0.40], 0.2, 0.1),
        ];
        let records: Vec<RmseRecord> = cells
            .iter()
            .flat_map(|(s, vals, _, _)| vals.iter().map(move |v| rec(*s, 100, Estimator::Uniform, *v)))
            .collect();
        let rows = summarize_replications(&records);
        for (row, (_, _, mean, se)) in rows.iter().zip(cells) {
            assert!((row.mean - mean).abs() < 1e-12);
            assert!((row.std_error.unwrap() - se).abs() < 1e-12);
        }
    }

    #[test]
    fn compare_geometric_decays() {
        let a: Vec<f64> = (0..=50).map(|h| 0.9f64.powi(h)).collect();
        let b: Vec<f64> = (0..=50).map(|h| 0.5f64.powi(h)).collect();
        let c = compare_acf_decay(&a, &b).unwrap();
        assert_eq!(c.verdict, Faster::Second);
        assert!(c.per_lag.iter().all(|f| *f == Faster::Second));
        assert_eq!(compare_acf_decay(&a, &a).unwrap().verdict, Faster::Tie);
        assert!(compare_acf_decay(&a, &b[..10]).is_err());
    }

    #[test]
    fn batch_means_of_iid_matches_classical_se() {
        let mut rng = stream(3, "test", 0);
        let x: Vec<f64> = (0..40_000).map(|_| rng.sample(StandardNormal)).collect();
        let se = batch_means_se(&x, 40);
        assert!((se - 1.0 / 200.0).abs() < 0.0015);
    }

    proptest! {
        #[test]
        fn acf_is_bounded(values in proptest::collection::vec(-100.0f64..100.0, 12..200)) {
            let s = TraceSeries::new("p", values);
            if let Ok(r) = acf(&s, 10) {
                prop_assert!(r.iter().all(|v| (-1.0..=1.0).contains(v)));
            }
        }

        #[test]
        fn summary_mean_is_permutation_invariant(values in proptest::collection::vec(0.0f64..2.0, 2..20), rot in 0usize..20) {
            let mut recs: Vec<RmseRecord> = values.iter().map(|v| rec(1, 100, Estimator::Uniform, *v)).collect();
            let a = summarize_replications(&recs);
            let len = recs.len();
            recs.rotate_left(rot % len);
            recs.reverse();
            let b = summarize_replications(&recs);
            prop_assert_eq!(a, b);
        }
    }
}
