//! Order-2 controlled paths `(y, y¹, y²)` and their remainders.
//!
//! Tensor index conventions: a multilinear map `u ∈ L((R^d)^{⊗k}, R^m)` is
//! stored as `data[i * d^k + (j_1 ... j_k)]` with the input multi-index in
//! row-major order, and `u v` contracts the leading input slots of `u`
//! against `v`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::Partition;
use crate::lift::{Levels, RoughLift};
use crate::simulate::PathSample;
use crate::stats::loglog_fit;

/// An element of `L((R^d)^{⊗rank}, R^m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multilinear {
    pub m: usize,
    pub d: usize,
    pub rank: usize,
    pub data: Vec<f64>,
}

impl Multilinear {
    pub fn new(m: usize, d: usize, rank: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != m * d.pow(rank as u32) {
            return Err(invalid(format!(
                "expected {} entries for a rank-{rank} map R^{d} -> R^{m}, got {}",
                m * d.pow(rank as u32),
                data.len()
            )));
        }
        Ok(Self { m, d, rank, data })
    }
}

/// An element of `(R^d)^{⊗rank}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub d: usize,
    pub rank: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(d: usize, rank: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != d.pow(rank as u32) {
            return Err(invalid(format!(
                "expected {} entries for a rank-{rank} tensor over R^{d}, got {}",
                d.pow(rank as u32),
                data.len()
            )));
        }
        Ok(Self { d, rank, data })
    }
}

/// `u v`: contracts the first `v.rank` input slots of `u` with `v`.
pub fn tensor_contract(u: &Multilinear, v: &Tensor) -> Result<Multilinear> {
    if v.rank > u.rank {
        return Err(invalid(format!(
            "cannot contract a rank-{} map with a rank-{} tensor",
            u.rank, v.rank
        )));
    }
    if u.d != v.d {
        return Err(invalid(format!("dimension mismatch: {} vs {}", u.d, v.d)));
    }
    let rest = u.d.pow((u.rank - v.rank) as u32);
    let lead = v.data.len();
    let mut out = vec![0.0; u.m * rest];
    for i in 0..u.m {
        let block = &u.data[i * lead * rest..(i + 1) * lead * rest];
        for (a, va) in v.data.iter().enumerate() {
            if *va == 0.0 {
                continue;
            }
            for (o, b) in out[i * rest..(i + 1) * rest].iter_mut().zip(&block[a * rest..]) {
                *o += b * va;
            }
        }
    }
    Multilinear::new(u.m, u.d, u.rank - v.rank, out)
}

/// A `C³` map `f: R^d -> R^m` with its first three derivatives, laid out
/// as [`Multilinear`] data: `d1[i*d + j] = ∂_j f^i` and so on.
pub trait SmoothFunction: Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Vec<f64>;
    fn d1(&self, x: &[f64]) -> Vec<f64>;
    fn d2(&self, x: &[f64]) -> Vec<f64>;
    fn d3(&self, x: &[f64]) -> Vec<f64>;
}

/// Scalar profile of one ridge term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Identity,
    Square,
    Sin,
    Cos,
}

impl Profile {
    /// `φ^{(k)}(z)` for `k <= 3`.
    fn derivative(self, k: usize, z: f64) -> f64 {
        match (self, k) {
            (Profile::Identity, 0) => z,
            (Profile::Identity, 1) => 1.0,
            (Profile::Identity, _) => 0.0,
            (Profile::Square, 0) => z * z,
            (Profile::Square, 1) => 2.0 * z,
            (Profile::Square, 2) => 2.0,
            (Profile::Square, _) => 0.0,
            (Profile::Sin, 0) => z.sin(),
            (Profile::Sin, 1) => z.cos(),
            (Profile::Sin, 2) => -z.sin(),
            (Profile::Sin, _) => -z.cos(),
            (Profile::Cos, 0) => z.cos(),
            (Profile::Cos, 1) => -z.sin(),
            (Profile::Cos, 2) => -z.cos(),
            (Profile::Cos, _) => z.sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Ridge {
    output: usize,
    coef: f64,
    direction: Vec<f64>,
    profile: Profile,
}

/// `f^i(x) = b_i + Σ c φ(a·x)` over the ridge terms feeding output `i`.
/// Derivatives are exact, so the class is closed under the checks the
/// integrators need.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeSum {
    d: usize,
    offset: Vec<f64>,
    terms: Vec<Ridge>,
}

impl RidgeSum {
    pub fn new(d: usize, offset: Vec<f64>) -> Self {
        Self {
            d,
            offset,
            terms: Vec::new(),
        }
    }

    pub fn term(mut self, output: usize, coef: f64, direction: Vec<f64>, profile: Profile) -> Self {
        assert!(output < self.offset.len() && direction.len() == self.d);
        self.terms.push(Ridge {
            output,
            coef,
            direction,
            profile,
        });
        self
    }

    fn derivative(&self, order: usize, x: &[f64]) -> Vec<f64> {
        let d = self.d;
        let width = d.pow(order as u32);
        let mut out = vec![0.0; self.offset.len() * width];
        if order == 0 {
            out.copy_from_slice(&self.offset);
        }
        for r in &self.terms {
            let z: f64 = r.direction.iter().zip(x).map(|(a, x)| a * x).sum();
            let g = r.coef * r.profile.derivative(order, z);
            if g == 0.0 {
                continue;
            }
            let block = &mut out[r.output * width..(r.output + 1) * width];
            for (idx, o) in block.iter_mut().enumerate() {
                let mut w = g;
                let mut rem = idx;
                for _ in 0..order {
                    w *= r.direction[rem % d];
                    rem /= d;
                }
                *o += w;
            }
        }
        out
    }
}

impl SmoothFunction for RidgeSum {
    fn dim_in(&self) -> usize {
        self.d
    }
    fn dim_out(&self) -> usize {
        self.offset.len()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.derivative(0, x)
    }
    fn d1(&self, x: &[f64]) -> Vec<f64> {
        self.derivative(1, x)
    }
    fn d2(&self, x: &[f64]) -> Vec<f64> {
        self.derivative(2, x)
    }
    fn d3(&self, x: &[f64]) -> Vec<f64> {
        self.derivative(3, x)
    }
}

/// Registered integrands `f: R^d -> R^d`. With `σ(i) = (i + 1) mod d`:
///
/// - `constant`: `f^i = 1 - i/2`
/// - `linear`: `f = S x + 1/4` with `S_ii = 1`, `S_ij = 1/2`
/// - `quadratic`: `f^i = x_i x_σ(i)` (so `x²` when `d = 1`)
/// - `sin-mix`: `f^i = sin(x_i + x_σ(i)/2) + cos(x_σ(i))/2`
/// - `sin`: `f^i = sin(x_i)`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionId {
    Constant,
    Linear,
    Quadratic,
    SinMix,
    Sin,
}

impl FunctionId {
    pub fn name(self) -> &'static str {
        match self {
            FunctionId::Constant => "constant",
            FunctionId::Linear => "linear",
            FunctionId::Quadratic => "quadratic",
            FunctionId::SinMix => "sin-mix",
            FunctionId::Sin => "sin",
        }
    }

    /// Degree of `f` when it is a polynomial.
    pub fn polynomial_degree(self) -> Option<usize> {
        match self {
            FunctionId::Constant => Some(0),
            FunctionId::Linear => Some(1),
            FunctionId::Quadratic => Some(2),
            FunctionId::SinMix | FunctionId::Sin => None,
        }
    }

    pub fn build(self, d: usize) -> RidgeSum {
        let e = |i: usize| {
            let mut v = vec![0.0; d];
            v[i] = 1.0;
            v
        };
        let sigma = |i: usize| (i + 1) % d;
        match self {
            FunctionId::Constant => RidgeSum::new(d, (0..d).map(|i| 1.0 - 0.5 * i as f64).collect()),
            FunctionId::Linear => (0..d).fold(RidgeSum::new(d, vec![0.25; d]), |f, i| {
                let row = (0..d).map(|j| if i == j { 1.0 } else { 0.5 }).collect();
                f.term(i, 1.0, row, Profile::Identity)
            }),
            FunctionId::Quadratic if d == 1 => {
                RidgeSum::new(1, vec![0.0]).term(0, 1.0, vec![1.0], Profile::Square)
            }
            FunctionId::Quadratic => (0..d).fold(RidgeSum::new(d, vec![0.0; d]), |f, i| {
                let (a, b) = (e(i), e(sigma(i)));
                let plus = a.iter().zip(&b).map(|(x, y)| x + y).collect();
                let minus = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                f.term(i, 0.25, plus, Profile::Square)
                    .term(i, -0.25, minus, Profile::Square)
            }),
            FunctionId::SinMix => (0..d).fold(RidgeSum::new(d, vec![0.0; d]), |f, i| {
                let mut a = e(i);
                a[sigma(i)] += 0.5;
                f.term(i, 1.0, a, Profile::Sin)
                    .term(i, 0.5, e(sigma(i)), Profile::Cos)
            }),
            FunctionId::Sin => (0..d).fold(RidgeSum::new(d, vec![0.0; d]), |f, i| {
                f.term(i, 1.0, e(i), Profile::Sin)
            }),
        }
    }
}

/// Values of `(y, y¹, y²)` at every point of a partition. `y2` is absent
/// for order-1 paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledPath {
    pub partition: Partition,
    pub d: usize,
    pub m: usize,
    pub y: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Option<Vec<f64>>,
}

impl ControlledPath {
    /// `y = f(x)`, `y¹ = ∂f(x)`, `y² = ∂²f(x)` along the path through
    /// `values` (row-major, `d` per point).
    pub fn from_values(f: &dyn SmoothFunction, partition: &Partition, values: &[f64]) -> Result<Self> {
        let d = f.dim_in();
        if values.len() != partition.len() * d {
            return Err(invalid(format!(
                "function expects {d}-dimensional input, path has {} values on {} points",
                values.len(),
                partition.len()
            )));
        }
        let m = f.dim_out();
        let mut y = Vec::with_capacity(partition.len() * m);
        let mut y1 = Vec::with_capacity(partition.len() * m * d);
        let mut y2 = Vec::with_capacity(partition.len() * m * d * d);
        for x in values.chunks(d) {
            y.extend(f.eval(x));
            y1.extend(f.d1(x));
            y2.extend(f.d2(x));
        }
        Ok(Self {
            partition: partition.clone(),
            d,
            m,
            y,
            y1,
            y2: Some(y2),
        })
    }

    pub fn from_function(f: &dyn SmoothFunction, path: &PathSample) -> Result<Self> {
        if path.d != f.dim_in() {
            return Err(invalid(format!(
                "function expects dimension {}, path has {}",
                f.dim_in(),
                path.d
            )));
        }
        Self::from_values(f, &path.partition, &path.values)
    }

    /// Builds a controlled path from raw tables.
    pub fn from_parts(
        partition: Partition,
        d: usize,
        m: usize,
        y: Vec<f64>,
        y1: Vec<f64>,
        y2: Option<Vec<f64>>,
    ) -> Result<Self> {
        let p = partition.len();
        if y.len() != p * m || y1.len() != p * m * d || y2.as_ref().is_some_and(|v| v.len() != p * m * d * d)
        {
            return Err(invalid("controlled path tables do not match the partition"));
        }
        Ok(Self {
            partition,
            d,
            m,
            y,
            y1,
            y2,
        })
    }

    pub fn order(&self) -> usize {
        if self.y2.is_some() {
            2
        } else {
            1
        }
    }

    pub fn y_at(&self, k: usize) -> &[f64] {
        &self.y[k * self.m..(k + 1) * self.m]
    }

    pub fn y1_at(&self, k: usize) -> &[f64] {
        let w = self.m * self.d;
        &self.y1[k * w..(k + 1) * w]
    }

    pub fn y2_at(&self, k: usize) -> Option<&[f64]> {
        let w = self.m * self.d * self.d;
        self.y2.as_ref().map(|v| &v[k * w..(k + 1) * w])
    }

    /// Remainders `r⁰_{st}` and `r¹_{st}` between partition indices `i < j`,
    /// given the lift's signature over `[t_i, t_j]`.
    pub fn remainders(&self, i: usize, j: usize, x: &Levels) -> (Vec<f64>, Vec<f64>) {
        let (d, m) = (self.d, self.m);
        let y1 = self.y1_at(i);
        let y2 = self.y2_at(i);
        let mut r0: Vec<f64> = self
            .y_at(j)
            .iter()
            .zip(self.y_at(i))
            .map(|(b, a)| b - a)
            .collect();
        let mut r1: Vec<f64> = self.y1_at(j).iter().zip(y1).map(|(b, a)| b - a).collect();
        for a in 0..m {
            for b in 0..d {
                r0[a] -= y1[a * d + b] * x.x1[b];
                if let Some(y2) = y2 {
                    for c in 0..d {
                        let v = y2[(a * d + b) * d + c];
                        r0[a] -= v * x.x2[b * d + c];
                        r1[a * d + c] -= v * x.x1[b];
                    }
                }
            }
        }
        (r0, r1)
    }
}

/// Empirical decay exponent of a family of maxima, or exact vanishing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExponentFit {
    ExactZero,
    Slope { slope: f64, r_squared: f64 },
}

impl ExponentFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            ExponentFit::ExactZero => None,
            ExponentFit::Slope { slope, .. } => Some(*slope),
        }
    }
}

/// Maxima over the adjacent pairs of one coarse partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainderLevel {
    pub n: usize,
    pub mesh: f64,
    pub max_r0: f64,
    pub max_r1: f64,
    pub max_dy: f64,
    pub max_dy1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemainderReport {
    pub levels: Vec<RemainderLevel>,
    pub r0: ExponentFit,
    pub r1: ExponentFit,
    pub dy: ExponentFit,
    pub dy1: ExponentFit,
}

/// Relative size below which a remainder counts as identically zero.
pub const EXACT_TOL: f64 = 1e-12;

/// Measures `max |r⁰|`, `max |r¹|`, `max |δy|` and `max |δy¹|` over
/// adjacent pairs of uniform partitions with `n` intervals for each `n` in
/// `levels`, and fits each against the mesh on log–log axes.
pub fn remainder_report(cp: &ControlledPath, lift: &RoughLift, levels: &[usize]) -> Result<RemainderReport> {
    if cp.partition != *lift.partition() {
        return Err(invalid("controlled path and lift must share a partition"));
    }
    if levels.len() < 2 {
        return Err(invalid("remainder fits need at least two levels"));
    }
    let horizon = cp.partition.horizon();
    let y_scale = cp.y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let y1_scale = cp.y1.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let max_abs = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut rows = Vec::with_capacity(levels.len());
    for &n in levels {
        let coarse = Partition::uniform(horizon, n)?;
        let idx = cp.partition.subgrid_indices(&coarse)?;
        let mut row = RemainderLevel {
            n,
            mesh: coarse.mesh(),
            max_r0: 0.0,
            max_r1: 0.0,
            max_dy: 0.0,
            max_dy1: 0.0,
        };
        for w in idx.windows(2) {
            let (i, j) = (w[0], w[1]);
            let (r0, r1) = cp.remainders(i, j, &lift.signature_idx(i, j));
            row.max_r0 = row.max_r0.max(max_abs(&r0));
            row.max_r1 = row.max_r1.max(max_abs(&r1));
            let dy: Vec<f64> = cp.y_at(j).iter().zip(cp.y_at(i)).map(|(b, a)| b - a).collect();
            let dy1: Vec<f64> = cp.y1_at(j).iter().zip(cp.y1_at(i)).map(|(b, a)| b - a).collect();
            row.max_dy = row.max_dy.max(max_abs(&dy));
            row.max_dy1 = row.max_dy1.max(max_abs(&dy1));
        }
        rows.push(row);
    }
    let fit = |get: fn(&RemainderLevel) -> f64, scale: f64| -> Result<ExponentFit> {
        if rows.iter().all(|r| get(r) <= EXACT_TOL * scale) {
            return Ok(ExponentFit::ExactZero);
        }
        let mesh: Vec<f64> = rows.iter().map(|r| r.mesh).collect();
        let vals: Vec<f64> = rows.iter().map(|r| get(r).max(f64::MIN_POSITIVE)).collect();
        let f = loglog_fit(&mesh, &vals)?;
        Ok(ExponentFit::Slope {
            slope: f.slope,
            r_squared: f.r_squared,
        })
    };
    Ok(RemainderReport {
        r0: fit(|r| r.max_r0, y_scale)?,
        r1: fit(|r| r.max_r1, y1_scale)?,
        dy: fit(|r| r.max_dy, y_scale)?,
        dy1: fit(|r| r.max_dy1, y1_scale)?,
        levels: rows,
    })
}
