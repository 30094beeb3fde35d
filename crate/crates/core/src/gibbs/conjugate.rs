//! Gibbs sampler for the conjugate baseline: `U_{.l}, V_{.l} ~ N(0, gamma_l I)`,
//! `gamma_l ~ InvGamma(a, b)`, with the same tempered likelihood
//! `exp(-lambda r(U V^T))` as the uniform-prior sampler.
//!
//! Row `i` of `U` is Gaussian with precision
//! `diag(1/gamma) + (2 lambda/n) sum V_j^T V_j` and linear term
//! `(2 lambda/n) sum y V_j`; `gamma_l` is inverse-Gamma with shape
//! `a + (m + p)/2` and scale `b + (|U_{.l}|^2 + |V_{.l}|^2)/2`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::{check_lambda, check_monitored, factor_risk, Adjacency, FitOutput, GibbsConfig, RoundRecord};
use crate::error::{Error, Result};
use crate::model::{dot, DenseMatrix, ObservationSet};
use crate::prior::ConjugatePriorConfig;
use crate::rng::stream;

/// Draws one factor row from its Gaussian conditional.
fn draw_row<R: Rng + ?Sized>(
    row: &mut [f64],
    neighbors: &[(usize, f64)],
    other: &DenseMatrix,
    gamma: &[f64],
    scale: f64,
    rng: &mut R,
) -> Result<()> {
    let width = row.len();
    let mut prec = DMatrix::<f64>::zeros(width, width);
    let mut shift = DVector::<f64>::zeros(width);
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
        for b in 0..a {
            let x = prec[(a, b)] * scale;
            prec[(a, b)] = x;
            prec[(b, a)] = x;
        }
        prec[(a, a)] = prec[(a, a)] * scale + 1.0 / gamma[a];
    }
    let chol = prec
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("conjugate row precision".into()))?;
    let mean = chol.solve(&shift);
    // x = mean + L^{-T} z has covariance (L L^T)^{-1}.
    let z = DVector::from_fn(width, |_, _| rng.sample::<f64, _>(StandardNormal));
    let noise = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .expect("Cholesky factor has a positive diagonal");
    for a in 0..width {
        row[a] = mean[a] + noise[a];
    }
    Ok(())
}

/// Runs the conjugate sampler and records each kept round.
///
/// Factors start i.i.d. `N(0, 1)` and every `gamma_l` starts at 1; the
/// whole run uses the `conjugate` substream of `gibbs_cfg.seed`.
pub fn run_conjugate_prior(
    obs: &ObservationSet,
    conj: &ConjugatePriorConfig,
    lambda: f64,
    gibbs_cfg: &GibbsConfig,
    monitored: &[(usize, usize)],
) -> Result<FitOutput> {
    obs.require_nonempty()?;
    conj.validate()?;
    check_lambda(lambda)?;
    gibbs_cfg.validate()?;
    check_monitored(obs, monitored)?;
    let (m, p, width) = (obs.rows(), obs.cols(), conj.width);
    let mut rng = stream(gibbs_cfg.seed, "conjugate", 0);
    let mut u = DenseMatrix::from_fn(m, width, |_, _| rng.sample(StandardNormal));
    let mut v = DenseMatrix::from_fn(p, width, |_, _| rng.sample(StandardNormal));
    let mut gamma = vec![1.0; width];
    let rows = Adjacency::build(obs, true);
    let cols = Adjacency::build(obs, false);
    let scale = 2.0 * lambda / obs.len() as f64;
    let shape = conj.a + (m + p) as f64 / 2.0;

    let mut acc = DenseMatrix::zeros(m, p);
    let mut kept = 0usize;
    let mut trace = Vec::with_capacity(gibbs_cfg.iterations / gibbs_cfg.thin + 1);
    let mut max_abs_draw = 0.0_f64;
    for round in 0..gibbs_cfg.total_rounds() {
        for i in 0..m {
            draw_row(u.row_mut(i), rows.neighbors(i), &v, &gamma, scale, &mut rng)?;
        }
        for j in 0..p {
            draw_row(v.row_mut(j), cols.neighbors(j), &u, &gamma, scale, &mut rng)?;
        }
        for (l, g) in gamma.iter_mut().enumerate() {
            let ss = (0..m).map(|i| u[(i, l)] * u[(i, l)]).sum::<f64>()
                + (0..p).map(|j| v[(j, l)] * v[(j, l)]).sum::<f64>();
            let rate = conj.b + 0.5 * ss;
            let draw: f64 = Gamma::new(shape, 1.0 / rate)
                .map_err(|e| Error::InvalidConfig(format!("inverse-Gamma update: {e}")))?
                .sample(&mut rng);
            *g = 1.0 / draw;
        }
        if !gibbs_cfg.keeps(round) {
            continue;
        }
        let dst = acc.as_mut_slice();
        for i in 0..m {
            let ui = u.row(i);
            for j in 0..p {
                let x = dot(ui, v.row(j));
                dst[i * p + j] += x;
                max_abs_draw = max_abs_draw.max(x.abs());
            }
        }
        kept += 1;
        trace.push(RoundRecord {
            round,
            k_selected: width,
            r_selected: factor_risk(&u, &v, obs),
            entries: monitored
                .iter()
                .map(|&(i, j)| dot(u.row(i), v.row(j)))
                .collect(),
        });
    }
    acc.scale(1.0 / kept as f64);
    let mut selection_counts = vec![0; width];
    selection_counts[width - 1] = kept;
    Ok(FitOutput {
        estimate: acc,
        trace,
        monitored: monitored.to_vec(),
        max_abs_draw,
        selection_counts,
    })
}

/// Posterior-mean estimate under the conjugate baseline prior.
pub fn fit_conjugate_prior(
    obs: &ObservationSet,
    conj: &ConjugatePriorConfig,
    lambda: f64,
    gibbs_cfg: &GibbsConfig,
) -> Result<DenseMatrix> {
    Ok(run_conjugate_prior(obs, conj, lambda, gibbs_cfg, &[])?.estimate)
}
