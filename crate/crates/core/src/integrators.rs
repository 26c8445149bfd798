//! Quadrature rules against a rough path and the statistics that appear in
//! the analysis of the trapezoid rule.
//!
//! Integrals are of `y: [0,T] -> R^d` against `X: [0,T] -> R^d` and are
//! scalar: `∫ y · dX = Σ_i ∫ y^i dX^i`. The compensated sum on `[s,t]` is
//!
//! ```text
//! y_s^i X^{1,i} + y¹_s[i,j] X^{2,ji} + y²_s[i,j,l] X^{3,jli}
//! ```
//!
//! summed over repeated indices. The level-2 term pairs the derivative
//! direction `j` with the *first* slot of `X²`, since
//! `∫_s^t (y_u - y_s)^i dX^i_u ≈ y¹[i,j] ∫_s^t X^{1,j}_{su} dX^i_u`.

use serde::{Deserialize, Serialize};

use crate::controlled::{ControlledPath, SmoothFunction};
use crate::covariance::CovarianceModel;
use crate::error::{invalid, Result};
use crate::grid::{Increment1, Partition};
use crate::lift::{Levels, RoughLift};
use crate::simulate::SampledPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Rough,
    Trapezoid,
    Midpoint,
    Young,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Rough => "rough",
            Rule::Trapezoid => "trapezoid",
            Rule::Midpoint => "midpoint",
            Rule::Young => "young",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralResult {
    pub value: f64,
    pub rule: Rule,
    pub mesh: f64,
    /// Per-level contributions for [`Rule::Rough`].
    pub breakdown: Option<Vec<f64>>,
}

fn check_shapes(cp: &ControlledPath, path_partition: &Partition, d: usize) -> Result<()> {
    if cp.partition != *path_partition {
        return Err(invalid("controlled path and driver must share a partition"));
    }
    if cp.d != d || cp.m != d {
        return Err(invalid(format!(
            "integrand must map into R^{d} to pair with the driver, got m = {}, d = {}",
            cp.m, cp.d
        )));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Level contributions of the compensated sum on one cell.
fn rough_cell(cp: &ControlledPath, k: usize, x: &Levels) -> [f64; 3] {
    let d = cp.d;
    let y1 = cp.y1_at(k);
    let l1 = dot(cp.y_at(k), &x.x1);
    let mut l2 = 0.0;
    for i in 0..d {
        for j in 0..d {
            l2 += y1[i * d + j] * x.x2[j * d + i];
        }
    }
    let mut l3 = 0.0;
    if let Some(y2) = cp.y2_at(k) {
        for i in 0..d {
            for j in 0..d {
                for l in 0..d {
                    l3 += y2[(i * d + j) * d + l] * x.x3[(j * d + l) * d + i];
                }
            }
        }
    }
    [l1, l2, l3]
}

/// Compensated Riemann sum over the cells of `coarse`.
pub fn rough_integral(cp: &ControlledPath, lift: &RoughLift, coarse: &Partition) -> Result<IntegralResult> {
    check_shapes(cp, lift.partition(), lift.d())?;
    let idx = lift.partition().subgrid_indices(coarse)?;
    let mut levels = [0.0; 3];
    for w in idx.windows(2) {
        let x = lift.signature_idx(w[0], w[1]);
        for (acc, v) in levels.iter_mut().zip(rough_cell(cp, w[0], &x)) {
            *acc += v;
        }
    }
    Ok(IntegralResult {
        value: levels.iter().sum(),
        rule: Rule::Rough,
        mesh: coarse.mesh(),
        breakdown: Some(levels.to_vec()),
    })
}

/// `Σ ½(y_{t_k} + y_{t_{k+1}}) · δX_{t_k t_{k+1}}`.
pub fn trapezoid(cp: &ControlledPath, path: &impl SampledPath, coarse: &Partition) -> Result<IntegralResult> {
    check_shapes(cp, path.partition(), path.dim())?;
    let idx = path.partition().subgrid_indices(coarse)?;
    let mut value = 0.0;
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ya, yb) = (cp.y_at(a), cp.y_at(b));
        let (xa, xb) = (path.point(a), path.point(b));
        for i in 0..cp.d {
            value += 0.5 * (ya[i] + yb[i]) * (xb[i] - xa[i]);
        }
    }
    Ok(IntegralResult {
        value,
        rule: Rule::Trapezoid,
        mesh: coarse.mesh(),
        breakdown: None,
    })
}

/// `Σ f((X_{t_k} + X_{t_{k+1}})/2) · δX_{t_k t_{k+1}}`.
pub fn midpoint(
    f: &dyn SmoothFunction,
    path: &impl SampledPath,
    coarse: &Partition,
) -> Result<IntegralResult> {
    let d = path.dim();
    if f.dim_in() != d || f.dim_out() != d {
        return Err(invalid(format!("midpoint rule needs f: R^{d} -> R^{d}")));
    }
    let idx = path.partition().subgrid_indices(coarse)?;
    let mut value = 0.0;
    let mut mid = vec![0.0; d];
    for w in idx.windows(2) {
        let (xa, xb) = (path.point(w[0]), path.point(w[1]));
        for i in 0..d {
            mid[i] = 0.5 * (xa[i] + xb[i]);
        }
        let y = f.eval(&mid);
        for i in 0..d {
            value += y[i] * (xb[i] - xa[i]);
        }
    }
    Ok(IntegralResult {
        value,
        rule: Rule::Midpoint,
        mesh: coarse.mesh(),
        breakdown: None,
    })
}

/// Left-point Riemann–Stieltjes sum `Σ f_{t_k} · δg_{t_k t_{k+1}}`.
pub fn young_integral(f: &Increment1, g: &Increment1, coarse: &Partition) -> Result<IntegralResult> {
    if f.partition() != g.partition() || f.dim() != g.dim() {
        return Err(invalid(
            "integrand and integrator must share partition and dimension",
        ));
    }
    let idx = f.partition().subgrid_indices(coarse)?;
    let value = idx
        .windows(2)
        .map(|w| {
            let (ga, gb) = (g.at(w[0]), g.at(w[1]));
            f.at(w[0])
                .iter()
                .zip(ga.iter().zip(gb))
                .map(|(fv, (a, b))| fv * (b - a))
                .sum::<f64>()
        })
        .sum();
    Ok(IntegralResult {
        value,
        rule: Rule::Young,
        mesh: coarse.mesh(),
        breakdown: None,
    })
}

/// Trapezoid sum split as `I₁ + I₂ + I₃ + I₄`:
///
/// - `I₁`: the compensated sum
/// - `I₂ = Σ ½(y¹X¹)·X¹ - y¹⋆X²`
/// - `I₃ = Σ ½(y²X²)·X¹ - y²⋆X³`
/// - `I₄ = Σ ½ r⁰·X¹`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.i1 + self.i2 + self.i3 + self.i4
    }
}

pub fn decompose_i(cp: &ControlledPath, lift: &RoughLift, coarse: &Partition) -> Result<Decomposition> {
    check_shapes(cp, lift.partition(), lift.d())?;
    if cp.order() != 2 {
        return Err(invalid("the decomposition needs an order-2 controlled path"));
    }
    let d = cp.d;
    let idx = lift.partition().subgrid_indices(coarse)?;
    let mut out = Decomposition {
        i1: 0.0,
        i2: 0.0,
        i3: 0.0,
        i4: 0.0,
    };
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        let x = lift.signature_idx(a, b);
        let [l1, l2, l3] = rough_cell(cp, a, &x);
        out.i1 += l1 + l2 + l3;
        let y1 = cp.y1_at(a);
        let y2 = cp.y2_at(a).expect("order 2");
        let mut y1x1 = vec![0.0; d];
        let mut y2x2 = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                y1x1[i] += y1[i * d + j] * x.x1[j];
                for l in 0..d {
                    y2x2[i] += y2[(i * d + j) * d + l] * x.x2[j * d + l];
                }
            }
        }
        out.i2 += 0.5 * dot(&y1x1, &x.x1) - l2;
        out.i3 += 0.5 * dot(&y2x2, &x.x1) - l3;
        let (r0, _) = cp.remainders(a, b, &x);
        out.i4 += 0.5 * dot(&r0, &x.x1);
    }
    Ok(out)
}

/// `I₂` written as `-Σ y¹[i,j] Antisym(X²)^{ji}`.
pub fn i2_antisymmetric(cp: &ControlledPath, lift: &RoughLift, coarse: &Partition) -> Result<f64> {
    check_shapes(cp, lift.partition(), lift.d())?;
    let d = cp.d;
    let idx = lift.partition().subgrid_indices(coarse)?;
    let mut total = 0.0;
    for w in idx.windows(2) {
        let x = lift.signature_idx(w[0], w[1]);
        let y1 = cp.y1_at(w[0]);
        for i in 0..d {
            for j in 0..d {
                total -= y1[i * d + j] * x.area(j, i);
            }
        }
    }
    Ok(total)
}

/// Increments `δF_k` over the cells of `coarse`: `X^{2,ij}` off the
/// diagonal and `X^{2,ii} - ½σ²_k` on it, row-major `d × d` per cell.
fn f_increments(
    lift: &RoughLift,
    model: &CovarianceModel,
    coarse: &Partition,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let d = lift.d();
    let idx = lift.partition().subgrid_indices(coarse)?;
    let pts = coarse.points();
    let mut out = Vec::with_capacity((idx.len() - 1) * d * d);
    for (k, w) in idx.windows(2).enumerate() {
        let x = lift.signature_idx(w[0], w[1]);
        let half_var = 0.5 * model.var(pts[k], pts[k + 1]);
        for i in 0..d {
            for j in 0..d {
                let v = x.x2[i * d + j];
                out.push(if i == j { v - half_var } else { v });
            }
        }
    }
    Ok((idx, out))
}

/// The compensated level-2 process `F_t = Σ_{t_k < t} δF_k` at every point
/// of a coarse partition.
#[derive(Debug, Clone, PartialEq)]
pub struct FProcess {
    pub partition: Partition,
    pub d: usize,
    /// Row-major `d × d` per point; `F_0 = 0`.
    pub values: Vec<f64>,
}

impl FProcess {
    pub fn at_index(&self, k: usize) -> &[f64] {
        let w = self.d * self.d;
        &self.values[k * w..(k + 1) * w]
    }

    pub fn at(&self, t: f64) -> Result<&[f64]> {
        Ok(self.at_index(self.partition.index_of(t)?))
    }
}

pub fn f_process(lift: &RoughLift, model: &CovarianceModel, coarse: &Partition) -> Result<FProcess> {
    let d = lift.d();
    let w = d * d;
    let (_, incr) = f_increments(lift, model, coarse)?;
    let mut values = vec![0.0; coarse.len() * w];
    for k in 0..coarse.n_intervals() {
        for e in 0..w {
            values[(k + 1) * w + e] = values[k * w + e] + incr[k * w + e];
        }
    }
    Ok(FProcess {
        partition: coarse.clone(),
        d,
        values,
    })
}

fn coarse_range(coarse: &Partition, s: f64, t: f64) -> Result<(usize, usize)> {
    if s > t {
        return Err(invalid(format!("need s <= t, got ({s}, {t})")));
    }
    Ok((coarse.index_of(s)?, coarse.index_of(t)?))
}

/// `g_{st} = Σ_{s ≤ t_k < t} X³_{t_k t_{k+1}}`, row-major `d³`.
pub fn g_process(lift: &RoughLift, coarse: &Partition, s: f64, t: f64) -> Result<Vec<f64>> {
    let idx = lift.partition().subgrid_indices(coarse)?;
    let (a, b) = coarse_range(coarse, s, t)?;
    let mut out = vec![0.0; lift.d().pow(3)];
    for k in a..b {
        let x = lift.signature_idx(idx[k], idx[k + 1]);
        for (o, v) in out.iter_mut().zip(&x.x3) {
            *o += v;
        }
    }
    Ok(out)
}

/// `h^{ijℓ}_{st} = Σ_{s ≤ t_k < t} X^{1,ℓ}_{s t_k} δF^{ij}_k`, stored at
/// `(i*d + j)*d + ℓ`.
pub fn h_process(
    lift: &RoughLift,
    model: &CovarianceModel,
    coarse: &Partition,
    s: f64,
    t: f64,
) -> Result<Vec<f64>> {
    let d = lift.d();
    let (idx, incr) = f_increments(lift, model, coarse)?;
    let (a, b) = coarse_range(coarse, s, t)?;
    let base = lift.point(idx[a]).to_vec();
    let mut out = vec![0.0; d * d * d];
    for k in a..b {
        let xk = lift.point(idx[k]);
        for ij in 0..d * d {
            let f = incr[k * d * d + ij];
            for l in 0..d {
                out[ij * d + l] += (xk[l] - base[l]) * f;
            }
        }
    }
    Ok(out)
}

/// `Σ_k y_{t_k} δF_k` over `[0, T]` for scalar weights on the points of
/// `coarse`; row-major `d × d`.
pub fn weighted_f_sum(
    weights: &[f64],
    lift: &RoughLift,
    model: &CovarianceModel,
    coarse: &Partition,
) -> Result<Vec<f64>> {
    if weights.len() != coarse.len() {
        return Err(invalid("one weight per coarse point is required"));
    }
    let d = lift.d();
    let (_, incr) = f_increments(lift, model, coarse)?;
    let mut out = vec![0.0; d * d];
    for k in 0..coarse.n_intervals() {
        for (o, f) in out.iter_mut().zip(&incr[k * d * d..(k + 1) * d * d]) {
            *o += weights[k] * f;
        }
    }
    Ok(out)
}

/// Third-order weighted sums over `[0, T]`, both row-major `d³`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedX3 {
    /// `Σ_k δy_{0 t_k} X^{3,ijℓ}_k`
    pub x3: Vec<f64>,
    /// `Σ_k δy_{0 t_k} X^{2,ij}_k X^{1,ℓ}_k`
    pub mixed: Vec<f64>,
}

pub fn weighted_x3_sum(weights: &[f64], lift: &RoughLift, coarse: &Partition) -> Result<WeightedX3> {
    if weights.len() != coarse.len() {
        return Err(invalid("one weight per coarse point is required"));
    }
    let d = lift.d();
    let idx = lift.partition().subgrid_indices(coarse)?;
    let mut x3 = vec![0.0; d * d * d];
    let mut mixed = vec![0.0; d * d * d];
    for (k, w) in idx.windows(2).enumerate() {
        let dy = weights[k] - weights[0];
        if dy == 0.0 {
            continue;
        }
        let x = lift.signature_idx(w[0], w[1]);
        for ij in 0..d * d {
            for l in 0..d {
                x3[ij * d + l] += dy * x.x3[ij * d + l];
                mixed[ij * d + l] += dy * x.x2[ij] * x.x1[l];
            }
        }
    }
    Ok(WeightedX3 { x3, mixed })
}
