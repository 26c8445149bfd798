//! Closed-form and quadrature oracles for Gaussian moments of the level-2
//! and level-3 statistics.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceModel;
use crate::error::{invalid, Result};
use crate::grid::Partition;
use crate::integrators::{f_process, g_process};
use crate::lift::RoughLift;
use crate::simulate::{mc_run_multi, GaussianSampler, McEstimate, SamplerMethod};

/// Probabilists' Hermite polynomial `He_n(x)` for `n <= 6`.
pub fn hermite(n: usize, x: f64) -> Result<f64> {
    if n > 6 {
        return Err(invalid(format!(
            "hermite polynomials are provided up to degree 6, got {n}"
        )));
    }
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return Ok(prev);
    }
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `E[He_n(X) He_n(Y)] = n! ρⁿ` for standard normals with correlation `ρ`.
pub fn hermite_pairing(n: usize, rho: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(invalid(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    Ok(factorial(n) * rho.powi(n as i32))
}

/// Nodes and weights of the `n`-point Gauss–Hermite rule for the standard
/// normal density (weights sum to one), by Golub–Welsch.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Nodes per axis of the quadrature oracle.
pub const QUADRATURE_NODES: usize = 64;

/// `E[g(X, Y)]` for standard normals with correlation `ρ`, with
/// `Y = ρ X + sqrt(1 - ρ²) Z` and a tensor Gauss–Hermite rule in `(X, Z)`.
pub fn bivariate_normal_expectation(rho: f64, g: impl Fn(f64, f64) -> f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(invalid(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    let (x, w) = gauss_hermite(QUADRATURE_NODES);
    let c = (1.0 - rho * rho).sqrt();
    let mut total = 0.0;
    for (xa, wa) in x.iter().zip(&w) {
        for (xb, wb) in x.iter().zip(&w) {
            total += wa * wb * g(*xa, rho * xa + c * xb);
        }
    }
    Ok(total)
}

/// Quadrature value of `E[He_n(X) He_n(Y)]`.
pub fn hermite_pairing_quadrature(n: usize, rho: f64) -> Result<f64> {
    hermite(n, 0.0)?;
    bivariate_normal_expectation(rho, |a, b| hermite(n, a).unwrap() * hermite(n, b).unwrap())
}

/// Covariances of the cell increments of `coarse`.
fn cell_covariances(model: &CovarianceModel, coarse: &Partition) -> Vec<Vec<f64>> {
    let p = coarse.points();
    let n = coarse.n_intervals();
    (0..n)
        .map(|k| {
            (0..n)
                .map(|l| {
                    if k == l {
                        model.var(p[k], p[k + 1])
                    } else {
                        model.rect(p[k], p[k + 1], p[l], p[l + 1])
                    }
                })
                .collect()
        })
        .collect()
}

/// `E[(F^{ii}_T)²] = ½ Σ_{k,k'} (R^{t_k t_{k+1}}_{t_{k'} t_{k'+1}})²`.
pub fn isserlis_second_moment_f_diag(model: &CovarianceModel, coarse: &Partition) -> f64 {
    let c = cell_covariances(model, coarse);
    0.5 * c.iter().flatten().map(|v| v * v).sum::<f64>()
}

/// `E[(g^{iii}_{0T})²] = Σ_{k,k'} (6c³ + 9σ²_k σ²_{k'} c) / 36`.
pub fn isserlis_second_moment_g_diag(model: &CovarianceModel, coarse: &Partition) -> f64 {
    let c = cell_covariances(model, coarse);
    let n = c.len();
    let mut total = 0.0;
    for k in 0..n {
        for l in 0..n {
            let v = c[k][l];
            total += 6.0 * v.powi(3) + 9.0 * c[k][k] * c[l][l] * v;
        }
    }
    total / 36.0
}

/// Evaluation point of the integrand in the 2-d Young sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum YoungRule {
    /// Mean of the four corners of each fine rectangle. This is exactly the
    /// second moment of `F^{ij}` for the piecewise-linear lift on the fine
    /// grid.
    #[default]
    CornerAverage,
    /// Lower-left corner (Itô-type sum).
    LeftCorner,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoungMoment {
    /// Sum on the fine grid with `fine_n` intervals.
    pub value: f64,
    /// Sum on the grid with `2 fine_n` intervals.
    pub refined_value: f64,
    /// Whether the two resolutions agree to 1% relative.
    pub converged: bool,
}

/// `E[(F^{ij}_T)²]`, `i ≠ j`, as the double 2-d Young sum
/// `Σ_{k,k'} Σ_{a,b} C_{ab} R_{ab}` where `C_{ab}` is the covariance of
/// `X_{t_k r_a}` and `X_{t_{k'} r'_b}` and `R_{ab}` the covariance of the
/// fine increments `a` and `b` inside cells `k` and `k'`.
///
/// `fine_n` must be a multiple of the number of coarse intervals.
pub fn f_offdiag_second_moment_2dyoung(
    model: &CovarianceModel,
    coarse: &Partition,
    fine_n: usize,
    rule: YoungRule,
) -> Result<YoungMoment> {
    let value = young_sum(model, coarse, fine_n, rule)?;
    let refined_value = young_sum(model, coarse, 2 * fine_n, rule)?;
    let converged = (value - refined_value).abs() <= 0.01 * refined_value.abs();
    Ok(YoungMoment {
        value,
        refined_value,
        converged,
    })
}

fn young_sum(model: &CovarianceModel, coarse: &Partition, fine_n: usize, rule: YoungRule) -> Result<f64> {
    let n = coarse.n_intervals();
    if fine_n < n || !fine_n.is_multiple_of(n) {
        return Err(invalid(format!(
            "fine grid size {fine_n} must be a multiple of the {n} coarse intervals"
        )));
    }
    let per = fine_n / n;
    let p = coarse.points();
    let sub = |k: usize| -> Vec<f64> {
        (0..=per)
            .map(|a| {
                if a == per {
                    p[k + 1]
                } else {
                    p[k] + (p[k + 1] - p[k]) * a as f64 / per as f64
                }
            })
            .collect()
    };
    let cells: Vec<Vec<f64>> = (0..n).map(sub).collect();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let r = &cells[k];
            let mut row = 0.0;
            let mut c = vec![0.0; (per + 1) * (per + 1)];
            for (l, rp) in cells.iter().enumerate() {
                for a in 0..=per {
                    for b in 0..=per {
                        c[a * (per + 1) + b] = model.rect(p[k], r[a], p[l], rp[b]);
                    }
                }
                for a in 0..per {
                    for b in 0..per {
                        let integrand = match rule {
                            YoungRule::LeftCorner => c[a * (per + 1) + b],
                            YoungRule::CornerAverage => {
                                0.25 * (c[a * (per + 1) + b]
                                    + c[(a + 1) * (per + 1) + b]
                                    + c[a * (per + 1) + b + 1]
                                    + c[(a + 1) * (per + 1) + b + 1])
                            }
                        };
                        row += integrand * model.rect(r[a], r[a + 1], rp[b], rp[b + 1]);
                    }
                }
            }
            row
        })
        .collect();
    Ok(rows.iter().sum())
}

/// An analytic value checked against a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub analytic: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub n_samples: usize,
    /// `|analytic - mc_mean| <= 3 mc_stderr`.
    pub verdict: bool,
}

impl MomentReport {
    pub fn new(analytic: f64, est: McEstimate) -> Self {
        Self {
            analytic,
            mc_mean: est.mean,
            mc_stderr: est.stderr,
            n_samples: est.n,
            verdict: (analytic - est.mean).abs() <= 3.0 * est.stderr,
        }
    }
}

/// Second moments with an exact oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    /// `(F^{11}_T)²`
    FDiag,
    /// `(F^{12}_T)²`
    FOffdiag,
    /// `(g^{111}_{0T})²`
    GDiag,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::FDiag => "F11^2",
            Statistic::FOffdiag => "F12^2",
            Statistic::GDiag => "g111^2",
        }
    }

    /// Exact second moment on `coarse`. The off-diagonal value refers to
    /// the piecewise-linear lift on the grid with `fine_ratio` chords per
    /// cell.
    pub fn analytic(self, model: &CovarianceModel, coarse: &Partition, fine_ratio: usize) -> Result<f64> {
        Ok(match self {
            Statistic::FDiag => isserlis_second_moment_f_diag(model, coarse),
            Statistic::GDiag => isserlis_second_moment_g_diag(model, coarse),
            Statistic::FOffdiag => young_sum(
                model,
                coarse,
                coarse.n_intervals() * fine_ratio,
                YoungRule::CornerAverage,
            )?,
        })
    }
}

/// Compares each statistic's exact second moment on a uniform grid of `n`
/// cells over `[0, horizon]` with a Monte Carlo estimate from lifts built
/// on `n * fine_ratio` chords. All statistics share the same sample paths.
pub fn moment_reports(
    model: &CovarianceModel,
    stats: &[Statistic],
    horizon: f64,
    n: usize,
    fine_ratio: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<MomentReport>> {
    if fine_ratio == 0 {
        return Err(invalid("fine ratio must be positive"));
    }
    let coarse = Partition::uniform(horizon, n)?;
    let d = if stats.contains(&Statistic::FOffdiag) {
        2
    } else {
        1
    };
    let sampler = GaussianSampler::new(*model, coarse.refine(fine_ratio)?, SamplerMethod::Auto)?;
    let est = mc_run_multi(samples, seed, stats.len(), |s| {
        let lift = RoughLift::from_path(&sampler.sample(d, s)?)?;
        let f = f_process(&lift, model, &coarse)?;
        let f_t = f.at_index(n);
        let g = if stats.contains(&Statistic::GDiag) {
            g_process(&lift, &coarse, 0.0, coarse.horizon())?[0]
        } else {
            0.0
        };
        Ok(stats
            .iter()
            .map(|st| match st {
                Statistic::FDiag => f_t[0].powi(2),
                Statistic::FOffdiag => f_t[1].powi(2),
                Statistic::GDiag => g * g,
            })
            .collect())
    })?;
    stats
        .iter()
        .zip(est)
        .map(|(st, e)| Ok(MomentReport::new(st.analytic(model, &coarse, fine_ratio)?, e)))
        .collect()
}
