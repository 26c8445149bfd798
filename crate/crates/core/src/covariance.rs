//! Covariance models of the Gaussian drivers and their rectangular
//! increments.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::Partition;

/// Relative floor (times the trace) below which a Gram eigenvalue counts as
/// a genuine PSD violation.
pub const PSD_TOL: f64 = 1e-10;

/// Largest number of intervals on the enumerated axis for which
/// [`two_d_rho_variation`] is exact.
pub const RHO_VAR_EXACT_CAP: usize = 12;

/// Covariance function `R(s, t)` of a centered Gaussian process with
/// `X_0 = 0`.
///
/// Serialized as a tagged JSON object, e.g. `{"kind": "fbm", "H": 0.35}`,
/// `{"kind": "bifractional", "H": 0.6, "K": 0.8}` or
/// `{"kind": "fbm_sum", "H1": 0.3, "H2": 0.7}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceModel {
    /// Fractional Brownian motion.
    Fbm {
        #[serde(rename = "H")]
        hurst: f64,
    },
    /// Bifractional Brownian motion; `K = 1` is fBm.
    Bifractional {
        #[serde(rename = "H")]
        hurst: f64,
        #[serde(rename = "K")]
        k: f64,
    },
    /// Sum of two independent fBms.
    FbmSum {
        #[serde(rename = "H1")]
        h1: f64,
        #[serde(rename = "H2")]
        h2: f64,
    },
}

/// How strictly [`CovarianceModel::validate`] checks parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Guarantees {
    /// Regime where the process lifts to a rough path with `ρ < 2`
    /// (e.g. fBm with `H > 1/4`).
    #[default]
    Strict,
    /// Any parameter for which the covariance is well defined. Results
    /// outside the strict regime carry no convergence guarantee.
    Exploratory,
}

fn open_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

fn above_quarter(x: f64) -> bool {
    x > 0.25 && x < 1.0
}

impl CovarianceModel {
    pub fn fbm(hurst: f64) -> Result<Self> {
        let m = Self::Fbm { hurst };
        m.validate(Guarantees::Strict)?;
        Ok(m)
    }

    pub fn bifractional(hurst: f64, k: f64) -> Result<Self> {
        let m = Self::Bifractional { hurst, k };
        m.validate(Guarantees::Strict)?;
        Ok(m)
    }

    pub fn fbm_sum(h1: f64, h2: f64) -> Result<Self> {
        let m = Self::FbmSum { h1, h2 };
        m.validate(Guarantees::Strict)?;
        Ok(m)
    }

    pub fn validate(&self, level: Guarantees) -> Result<()> {
        let strict = level == Guarantees::Strict;
        match *self {
            Self::Fbm { hurst } => {
                if !open_unit(hurst) {
                    return Err(Error::ModelInvalid(format!("fbm needs 0 < H < 1, got {hurst}")));
                }
                if strict && !above_quarter(hurst) {
                    return Err(Error::ModelInvalid(format!(
                        "fbm with H = {hurst} is outside the rough-path regime H > 1/4"
                    )));
                }
            }
            Self::Bifractional { hurst, k } => {
                if !open_unit(hurst) || !(k > 0.0 && k <= 1.0) {
                    return Err(Error::ModelInvalid(format!(
                        "bifractional needs 0 < H < 1 and 0 < K <= 1, got H = {hurst}, K = {k}"
                    )));
                }
                if strict && !above_quarter(hurst * k) {
                    return Err(Error::ModelInvalid(format!(
                        "bifractional with HK = {} is outside 1/4 < HK < 1",
                        hurst * k
                    )));
                }
            }
            Self::FbmSum { h1, h2 } => {
                if !open_unit(h1) || !open_unit(h2) {
                    return Err(Error::ModelInvalid(format!(
                        "fbm_sum needs 0 < H1, H2 < 1, got {h1}, {h2}"
                    )));
                }
                if strict && !(above_quarter(h1) && above_quarter(h2)) {
                    return Err(Error::ModelInvalid(format!(
                        "fbm_sum with H1 = {h1}, H2 = {h2} is outside the regime H > 1/4"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The variation exponent `ρ` of the covariance: `1/(2H)` for rough
    /// fBm, `1` for `H >= 1/2`, and the worst of the two for sums.
    pub fn rho(&self) -> f64 {
        let from_index = |h: f64| if h <= 0.5 { 1.0 / (2.0 * h) } else { 1.0 };
        match *self {
            Self::Fbm { hurst } => from_index(hurst),
            Self::Bifractional { hurst, k } => from_index(hurst * k),
            Self::FbmSum { h1, h2 } => from_index(h1.min(h2)),
        }
    }

    /// True when `R^{s+h, t+h}_{u+h, v+h}` does not depend on `h`.
    pub fn has_stationary_increments(&self) -> bool {
        !matches!(self, Self::Bifractional { k, .. } if *k != 1.0)
    }

    /// `R(s, t)`, without parameter validation.
    pub fn cov(&self, s: f64, t: f64) -> f64 {
        match *self {
            Self::Fbm { hurst } => fbm_cov(hurst, s, t),
            Self::Bifractional { hurst, k } => {
                let a = s.powf(2.0 * hurst) + t.powf(2.0 * hurst);
                (a.powf(k) - (t - s).abs().powf(2.0 * hurst * k)) / 2f64.powf(k)
            }
            Self::FbmSum { h1, h2 } => fbm_cov(h1, s, t) + fbm_cov(h2, s, t),
        }
    }

    /// `R^{st}_{uv} = E[δX_{st} δX_{uv}]`, without validation.
    ///
    /// For stationary-increment models the four-corner sum is evaluated in
    /// its cancelled form `½(|t-u|^{2H} + |s-v|^{2H} - |t-v|^{2H} - |s-u|^{2H})`,
    /// which is the same quantity but loses far less precision on small
    /// rectangles.
    pub fn rect(&self, s: f64, t: f64, u: f64, v: f64) -> f64 {
        match *self {
            Self::Fbm { hurst } => fbm_rect(hurst, s, t, u, v),
            Self::FbmSum { h1, h2 } => fbm_rect(h1, s, t, u, v) + fbm_rect(h2, s, t, u, v),
            Self::Bifractional { .. } => self.cov(t, v) - self.cov(t, u) - self.cov(s, v) + self.cov(s, u),
        }
    }

    /// `σ²(s, t) = E[(X_t - X_s)²]`, without validation.
    pub fn var(&self, s: f64, t: f64) -> f64 {
        let h = (t - s).abs();
        match *self {
            Self::Fbm { hurst } => h.powf(2.0 * hurst),
            Self::FbmSum { h1, h2 } => h.powf(2.0 * h1) + h.powf(2.0 * h2),
            Self::Bifractional { .. } => self.rect(s, t, s, t),
        }
    }

    /// Short human-readable label, e.g. `fbm(H=0.35)`.
    pub fn label(&self) -> String {
        match *self {
            Self::Fbm { hurst } => format!("fbm(H={hurst})"),
            Self::Bifractional { hurst, k } => format!("bifractional(H={hurst};K={k})"),
            Self::FbmSum { h1, h2 } => format!("fbm_sum(H1={h1};H2={h2})"),
        }
    }
}

fn fbm_cov(h: f64, s: f64, t: f64) -> f64 {
    let e = 2.0 * h;
    0.5 * (t.powf(e) + s.powf(e) - (t - s).abs().powf(e))
}

fn fbm_rect(h: f64, s: f64, t: f64, u: f64, v: f64) -> f64 {
    let e = 2.0 * h;
    let p = |x: f64| x.abs().powf(e);
    0.5 * (p(t - u) + p(s - v) - p(t - v) - p(s - u))
}

/// A rectangle `[s,t] × [u,v]` in `[0,T]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    pub s: f64,
    pub t: f64,
    pub u: f64,
    pub v: f64,
}

impl Rectangle {
    pub fn new(s: f64, t: f64, u: f64, v: f64) -> Result<Self> {
        if !(s <= t && u <= v) {
            return Err(invalid(format!(
                "rectangle needs s <= t and u <= v, got [{s},{t}]x[{u},{v}]"
            )));
        }
        Ok(Self { s, t, u, v })
    }

    pub fn square(s: f64, t: f64) -> Result<Self> {
        Self::new(s, t, s, t)
    }

    pub fn is_degenerate(&self) -> bool {
        self.s == self.t || self.u == self.v
    }
}

/// `R(s, t)` for a model whose parameters are checked first.
pub fn cov_eval(model: &CovarianceModel, s: f64, t: f64) -> Result<f64> {
    model.validate(Guarantees::Exploratory)?;
    if s < 0.0 || t < 0.0 {
        return Err(invalid(format!("times must be non-negative, got ({s}, {t})")));
    }
    Ok(model.cov(s, t))
}

/// Rectangular increment `R^{st}_{uv}` of the covariance.
pub fn rect_increment(model: &CovarianceModel, rect: &Rectangle) -> f64 {
    if rect.is_degenerate() {
        return 0.0;
    }
    model.rect(rect.s, rect.t, rect.u, rect.v)
}

/// Variance of the increment `X_t - X_s`.
pub fn sigma_sq(model: &CovarianceModel, s: f64, t: f64) -> Result<f64> {
    if s > t {
        return Err(invalid(format!("sigma_sq needs s <= t, got ({s}, {t})")));
    }
    if s == t {
        return Ok(0.0);
    }
    let v = model.var(s, t);
    if v < -1e-12 {
        return Err(Error::ModelInvalid(format!(
            "negative increment variance {v} on [{s}, {t}]"
        )));
    }
    Ok(v.max(0.0))
}

/// Gram matrix `G_{kl} = R^{t_k t_{k+1}}_{t_l t_{l+1}}` of the increments.
pub fn increment_gram(model: &CovarianceModel, partition: &Partition) -> DMatrix<f64> {
    let p = partition.points();
    let n = partition.n_intervals();
    let mut g = DMatrix::zeros(n, n);
    for k in 0..n {
        for l in k..n {
            let v = if k == l {
                model.var(p[k], p[k + 1])
            } else {
                model.rect(p[k], p[k + 1], p[l], p[l + 1])
            };
            g[(k, l)] = v;
            g[(l, k)] = v;
        }
    }
    g
}

/// Smallest eigenvalue of the increment Gram matrix, after checking it
/// against the floor `-PSD_TOL * trace`.
pub fn check_gram_psd(model: &CovarianceModel, partition: &Partition) -> Result<f64> {
    let g = increment_gram(model, partition);
    let trace = g.trace();
    let min = SymmetricEigen::new(g)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min < -PSD_TOL * trace {
        return Err(Error::ModelInvalid(format!(
            "increment Gram matrix is not PSD: eigenvalue {min} with trace {trace}"
        )));
    }
    Ok(min)
}

/// Two-dimensional `ρ`-variation of `R` over `rect`, with the supremum taken
/// over grid-like partitions whose lines come from `rows` and `cols`.
///
/// Row sub-partitions are enumerated exhaustively when the smaller axis has
/// at most [`RHO_VAR_EXACT_CAP`] intervals, and the optimal column
/// sub-partition for each is found by dynamic programming, so the result is
/// exact. Larger grids fall back to alternating row/column dynamic
/// programming, which returns a lower bound of the grid supremum.
pub fn two_d_rho_variation(
    model: &CovarianceModel,
    rect: &Rectangle,
    rows: &Partition,
    cols: &Partition,
    rho: f64,
) -> Result<f64> {
    if !(rho >= 1.0) {
        return Err(invalid(format!("rho-variation needs rho >= 1, got {rho}")));
    }
    if rect.is_degenerate() {
        return Ok(0.0);
    }
    let a = span(rows, rect.s, rect.t)?;
    let b = span(cols, rect.u, rect.v)?;
    let table = RectTable::new(&a, &b, |s, t, u, v| model.rect(s, t, u, v).abs().powf(rho));
    let best = if table.na.min(table.nb) <= RHO_VAR_EXACT_CAP {
        if table.na <= table.nb {
            table.exact()
        } else {
            table.transposed().exact()
        }
    } else {
        table.alternating()
    };
    Ok(best.powf(1.0 / rho))
}

fn span(grid: &Partition, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let i = grid.index_of(lo)?;
    let j = grid.index_of(hi)?;
    Ok(grid.points()[i..=j].to_vec())
}

/// `|R|^ρ` over every pair of row intervals and column intervals.
struct RectTable {
    na: usize,
    nb: usize,
    // indexed [pair(i,j) of rows][pair(k,l) of cols]
    q: Vec<f64>,
}

impl RectTable {
    fn new(a: &[f64], b: &[f64], f: impl Fn(f64, f64, f64, f64) -> f64) -> Self {
        let na = a.len() - 1;
        let nb = b.len() - 1;
        let pa = (na + 1) * (na + 1);
        let pb = (nb + 1) * (nb + 1);
        let mut q = vec![0.0; pa * pb];
        for i in 0..=na {
            for j in i + 1..=na {
                for k in 0..=nb {
                    for l in k + 1..=nb {
                        q[(i * (na + 1) + j) * pb + k * (nb + 1) + l] = f(a[i], a[j], b[k], b[l]);
                    }
                }
            }
        }
        Self { na, nb, q }
    }

    fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let pb = (self.nb + 1) * (self.nb + 1);
        self.q[(i * (self.na + 1) + j) * pb + k * (self.nb + 1) + l]
    }

    fn transposed(&self) -> Self {
        let (na, nb) = (self.nb, self.na);
        let pb = (nb + 1) * (nb + 1);
        let mut q = vec![0.0; (na + 1) * (na + 1) * pb];
        for i in 0..=na {
            for j in i + 1..=na {
                for k in 0..=nb {
                    for l in k + 1..=nb {
                        q[(i * (na + 1) + j) * pb + k * (nb + 1) + l] = self.get(k, l, i, j);
                    }
                }
            }
        }
        Self { na, nb, q }
    }

    /// Best column sub-partition for fixed row cuts, and its value.
    fn best_cols(&self, row_cuts: &[usize]) -> (f64, Vec<usize>) {
        dp_1d(self.nb, |k, l| {
            row_cuts.windows(2).map(|w| self.get(w[0], w[1], k, l)).sum()
        })
    }

    fn best_rows(&self, col_cuts: &[usize]) -> (f64, Vec<usize>) {
        dp_1d(self.na, |i, j| {
            col_cuts.windows(2).map(|w| self.get(i, j, w[0], w[1])).sum()
        })
    }

    fn exact(&self) -> f64 {
        let inner = self.na.saturating_sub(1);
        let mut best = 0.0_f64;
        for mask in 0u64..(1u64 << inner) {
            let mut cuts = Vec::with_capacity(inner + 2);
            cuts.push(0);
            cuts.extend((1..self.na).filter(|i| mask >> (i - 1) & 1 == 1));
            cuts.push(self.na);
            best = best.max(self.best_cols(&cuts).0);
        }
        best
    }

    fn alternating(&self) -> f64 {
        let starts: [Vec<usize>; 2] = [(0..=self.na).collect(), vec![0, self.na]];
        let mut overall = 0.0_f64;
        for start in starts {
            let mut rows = start;
            let mut value = f64::NEG_INFINITY;
            for _ in 0..64 {
                let (_, cols) = self.best_cols(&rows);
                let (v, next_rows) = self.best_rows(&cols);
                if v <= value * (1.0 + 1e-15) {
                    break;
                }
                value = v;
                rows = next_rows;
            }
            overall = overall.max(value);
        }
        overall
    }
}

/// `max over 0 = c_0 < ... < c_r = n` of `Σ w(c_i, c_{i+1})`, with the argmax.
fn dp_1d(n: usize, w: impl Fn(usize, usize) -> f64) -> (f64, Vec<usize>) {
    let mut best = vec![f64::NEG_INFINITY; n + 1];
    let mut prev = vec![0usize; n + 1];
    best[0] = 0.0;
    for j in 1..=n {
        for i in 0..j {
            let v = best[i] + w(i, j);
            if v > best[j] {
                best[j] = v;
                prev[j] = i;
            }
        }
    }
    let mut cuts = vec![n];
    let mut j = n;
    while j > 0 {
        j = prev[j];
        cuts.push(j);
    }
    cuts.reverse();
    (best[n], cuts)
}
