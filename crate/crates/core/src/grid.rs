//! Time grids, increments and the δ calculus on a discrete simplex.
//!
//! Everything here is defined relative to a [`Partition`]: one-parameter
//! paths live on its points, two-parameter increments on ordered pairs of
//! its points. Variation and Hölder seminorms are computed exactly over the
//! sub-partitions of the given grid, which makes them lower bounds of the
//! corresponding continuum quantities.

use crate::error::{invalid, Error, Result};

/// Absolute tolerance used when matching a time against grid points.
pub const TIME_TOL: f64 = 1e-12;

/// Default relative tolerance of [`check_superadditive`].
pub const CONTROL_TOL: f64 = 1e-10;

/// A strictly increasing grid `0 = t_0 < t_1 < ... < t_n = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    points: Vec<f64>,
}

impl Partition {
    /// Builds a partition from explicit points.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("a partition needs at least two points"));
        }
        if points[0] != 0.0 {
            return Err(invalid(format!("a partition must start at 0, got {}", points[0])));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(invalid("partition points must be finite"));
        }
        if let Some(w) = points.windows(2).find(|w| w[1] <= w[0]) {
            return Err(invalid(format!(
                "partition points must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { points })
    }

    /// `n + 1` equally spaced points on `[0, horizon]`.
    ///
    /// Point `k` is computed as `k * horizon / n`, so dyadic refinements of
    /// a dyadic grid reproduce the coarse points bit for bit.
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        if n == 0 {
            return Err(invalid("a uniform partition needs n >= 1"));
        }
        let points = (0..=n)
            .map(|k| {
                if k == n {
                    horizon
                } else {
                    k as f64 * horizon / n as f64
                }
            })
            .collect();
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of grid points (`n + 1`).
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of intervals (`n`).
    pub fn n_intervals(&self) -> usize {
        self.points.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().expect("non-empty partition")
    }

    /// Largest step `max_k (t_{k+1} - t_k)`.
    pub fn mesh(&self) -> f64 {
        self.points.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn is_uniform(&self) -> bool {
        let h = self.horizon() / self.n_intervals() as f64;
        self.points
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h)
    }

    /// Index of the grid point equal to `t` (within [`TIME_TOL`]).
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = self.points.partition_point(|&p| p < t - TIME_TOL);
        if k < self.points.len() && (self.points[k] - t).abs() <= TIME_TOL {
            Ok(k)
        } else {
            Err(Error::Lookup { time: t })
        }
    }

    /// Indices of `coarse`'s points inside `self`; fails unless `coarse` is a
    /// sub-grid with the same horizon.
    pub fn subgrid_indices(&self, coarse: &Partition) -> Result<Vec<usize>> {
        if (coarse.horizon() - self.horizon()).abs() > TIME_TOL {
            return Err(invalid(format!(
                "horizon mismatch: {} vs {}",
                coarse.horizon(),
                self.horizon()
            )));
        }
        coarse
            .points
            .iter()
            .map(|&t| self.index_of(t))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| match e {
                Error::Lookup { time } => invalid(format!(
                    "partition is not a sub-grid: time {time} missing from the fine grid"
                )),
                other => other,
            })
    }

    /// Splits every interval into `factor` equal pieces.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(invalid("refinement factor must be positive"));
        }
        let mut points = Vec::with_capacity(self.n_intervals() * factor + 1);
        for w in self.points.windows(2) {
            for j in 0..factor {
                points.push(w[0] + (w[1] - w[0]) * j as f64 / factor as f64);
            }
        }
        points.push(self.horizon());
        Partition::new(points)
    }
}

/// A path on a partition with values in `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Increment1 {
    partition: Partition,
    dim: usize,
    values: Vec<f64>,
}

impl Increment1 {
    /// `values` is row-major: point `k` occupies `values[k*dim..(k+1)*dim]`.
    pub fn new(partition: Partition, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if values.len() != partition.len() * dim {
            return Err(invalid(format!(
                "expected {} values, got {}",
                partition.len() * dim,
                values.len()
            )));
        }
        Ok(Self {
            partition,
            dim,
            values,
        })
    }

    pub fn from_fn(partition: Partition, f: impl Fn(f64) -> f64) -> Self {
        let values = partition.points().iter().map(|&t| f(t)).collect();
        Self {
            partition,
            dim: 1,
            values,
        }
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `δg_{st} = g_t - g_s`.
pub fn delta1(g: &Increment1, s: f64, t: f64) -> Result<Vec<f64>> {
    let i = g.partition.index_of(s)?;
    let j = g.partition.index_of(t)?;
    Ok(g.at(j).iter().zip(g.at(i)).map(|(b, a)| b - a).collect())
}

/// A two-parameter increment on the discrete simplex `{(s,t): s <= t}` of a
/// partition, with values in `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Increment2 {
    partition: Partition,
    dim: usize,
    // dense (n+1) x (n+1) x dim table; only entries with i <= j are meaningful
    table: Vec<f64>,
}

impl Increment2 {
    pub fn from_fn(partition: Partition, dim: usize, mut f: impl FnMut(usize, usize, &mut [f64])) -> Self {
        let n = partition.len();
        let mut table = vec![0.0; n * n * dim];
        for i in 0..n {
            for j in i..n {
                let off = (i * n + j) * dim;
                f(i, j, &mut table[off..off + dim]);
            }
        }
        Self {
            partition,
            dim,
            table,
        }
    }

    /// Scalar increment `h(s, t)` evaluated at grid times.
    pub fn from_times(partition: Partition, h: impl Fn(f64, f64) -> f64) -> Self {
        let pts = partition.points().to_vec();
        Self::from_fn(partition, 1, |i, j, out| out[0] = h(pts[i], pts[j]))
    }

    /// The increment `δg` of a path.
    pub fn from_path(g: &Increment1) -> Self {
        Self::from_fn(g.partition.clone(), g.dim, |i, j, out| {
            for ((o, b), a) in out.iter_mut().zip(g.at(j)).zip(g.at(i)) {
                *o = b - a;
            }
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value on the grid pair `(i, j)`, `i <= j`.
    pub fn at(&self, i: usize, j: usize) -> &[f64] {
        debug_assert!(i <= j);
        let n = self.partition.len();
        let off = (i * n + j) * self.dim;
        &self.table[off..off + self.dim]
    }

    pub fn value(&self, s: f64, t: f64) -> Result<&[f64]> {
        let i = self.partition.index_of(s)?;
        let j = self.partition.index_of(t)?;
        if i > j {
            return Err(invalid(format!("expected s <= t, got ({s}, {t})")));
        }
        Ok(self.at(i, j))
    }

    /// Scales every value by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            partition: self.partition.clone(),
            dim: self.dim,
            table: self.table.iter().map(|v| v * c).collect(),
        }
    }

    /// Restriction to a sub-grid.
    pub fn restrict(&self, coarse: &Partition) -> Result<Self> {
        let idx = self.partition.subgrid_indices(coarse)?;
        Ok(Self::from_fn(coarse.clone(), self.dim, |i, j, out| {
            out.copy_from_slice(self.at(idx[i], idx[j]))
        }))
    }

    fn norm_at(&self, i: usize, j: usize) -> f64 {
        self.at(i, j).iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `δh_{sut} = h_{st} - h_{su} - h_{ut}` for `s < u < t`.
pub fn delta2(h: &Increment2, s: f64, u: f64, t: f64) -> Result<Vec<f64>> {
    if !(s < u && u < t) {
        return Err(invalid(format!("delta2 needs s < u < t, got ({s}, {u}, {t})")));
    }
    let i = h.partition.index_of(s)?;
    let k = h.partition.index_of(u)?;
    let j = h.partition.index_of(t)?;
    Ok(h.at(i, j)
        .iter()
        .zip(h.at(i, k))
        .zip(h.at(k, j))
        .map(|((st, su), ut)| st - su - ut)
        .collect())
}

/// `(sup_π Σ |h_{t_i t_{i+1}}|^p)^{1/p}` over all sub-partitions `π` of the
/// grid, computed exactly by dynamic programming in `O(n²)`.
pub fn p_variation(h: &Increment2, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(invalid(format!("p-variation needs p >= 1, got {p}")));
    }
    let n = h.partition.len();
    let mut best = vec![0.0_f64; n];
    for j in 1..n {
        best[j] = (0..j)
            .map(|i| best[i] + h.norm_at(i, j).powf(p))
            .fold(f64::NEG_INFINITY, f64::max);
    }
    Ok(best[n - 1].powf(1.0 / p))
}

/// `max_{s<t} |h_{st}| / (t - s)^γ` over grid pairs.
pub fn holder_norm(h: &Increment2, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(invalid(format!("Hölder exponent must be positive, got {gamma}")));
    }
    let pts = h.partition.points();
    let n = pts.len();
    let mut best = 0.0_f64;
    for i in 0..n {
        for j in i + 1..n {
            best = best.max(h.norm_at(i, j) / (pts[j] - pts[i]).powf(gamma));
        }
    }
    Ok(best)
}

/// Outcome of a super-additivity check.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperadditivityReport {
    pub holds: bool,
    /// Largest excess `w(s,u) + w(u,t) - w(s,t)` (or its 2-d analogue);
    /// zero or negative when the check passes everywhere.
    pub worst_violation: f64,
    /// Where the worst excess occurred.
    pub worst_at: Option<Vec<f64>>,
}

/// Checks `w(s,u) + w(u,t) <= w(s,t)·(1 + tol)` on every grid triple.
pub fn check_superadditive(
    w: impl Fn(f64, f64) -> f64,
    partition: &Partition,
    tol: f64,
) -> SuperadditivityReport {
    let pts = partition.points();
    let n = pts.len();
    let mut report = SuperadditivityReport {
        holds: true,
        worst_violation: f64::NEG_INFINITY,
        worst_at: None,
    };
    for i in 0..n {
        for j in i + 2..n {
            let whole = w(pts[i], pts[j]);
            for k in i + 1..j {
                let parts = w(pts[i], pts[k]) + w(pts[k], pts[j]);
                let excess = parts - whole;
                if parts > whole + tol * whole.abs() {
                    report.holds = false;
                }
                if excess > report.worst_violation {
                    report.worst_violation = excess;
                    report.worst_at = Some(vec![pts[i], pts[k], pts[j]]);
                }
            }
        }
    }
    if report.worst_at.is_none() {
        report.worst_violation = 0.0;
    }
    report
}

/// Two-dimensional analogue for rectangle functions `w([s,t]×[u,v])`:
/// every grid rectangle must dominate the sum over any single split along
/// either axis. Guillotine splits generate all grid-like partitions, so this
/// is equivalent to super-additivity on the product grid.
pub fn check_superadditive_2d(
    w: impl Fn(f64, f64, f64, f64) -> f64,
    rows: &Partition,
    cols: &Partition,
    tol: f64,
) -> SuperadditivityReport {
    let a = rows.points();
    let b = cols.points();
    let mut report = SuperadditivityReport {
        holds: true,
        worst_violation: f64::NEG_INFINITY,
        worst_at: None,
    };
    let mut consider = |parts: f64, whole: f64, at: [f64; 5]| {
        let excess = parts - whole;
        if parts > whole + tol * whole.abs() {
            report.holds = false;
        }
        if excess > report.worst_violation {
            report.worst_violation = excess;
            report.worst_at = Some(at.to_vec());
        }
    };
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            for k in 0..b.len() {
                for l in k + 1..b.len() {
                    let whole = w(a[i], a[j], b[k], b[l]);
                    for m in i + 1..j {
                        let parts = w(a[i], a[m], b[k], b[l]) + w(a[m], a[j], b[k], b[l]);
                        consider(parts, whole, [a[i], a[m], a[j], b[k], b[l]]);
                    }
                    for m in k + 1..l {
                        let parts = w(a[i], a[j], b[k], b[m]) + w(a[i], a[j], b[m], b[l]);
                        consider(parts, whole, [a[i], a[j], b[k], b[m], b[l]]);
                    }
                }
            }
        }
    }
    if report.worst_at.is_none() {
        report.worst_violation = 0.0;
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(values: &[f64]) -> Increment1 {
        let p = Partition::uniform(1.0, values.len() - 1).unwrap();
        Increment1::new(p, 1, values.to_vec()).unwrap()
    }

    #[test]
    fn uniform_partitions() {
        let p = Partition::uniform(1.0, 2).unwrap();
        assert_eq!(p.points(), &[0.0, 0.5, 1.0]);
        assert_eq!(Partition::uniform(1.0, 1).unwrap().points(), &[0.0, 1.0]);
        assert_eq!(Partition::uniform(2.0, 4).unwrap().mesh(), 0.5);
        assert!(Partition::uniform(0.0, 4).is_err());
        assert!(Partition::uniform(-1.0, 4).is_err());
        assert!(Partition::uniform(1.0, 0).is_err());
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![0.0]).is_err());
        assert!(Partition::new(vec![0.1, 1.0]).is_err());
        assert!(Partition::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Partition::new(vec![0.0, 0.25, 1.0]).is_ok());
    }

    #[test]
    fn dyadic_subgrids_match_exactly() {
        let fine = Partition::uniform(1.0, 1 << 14).unwrap();
        let coarse = Partition::uniform(1.0, 1 << 10).unwrap();
        let idx = fine.subgrid_indices(&coarse).unwrap();
        for (k, &i) in idx.iter().enumerate() {
            assert_eq!(i, 16 * k);
            assert_eq!(fine.points()[i], coarse.points()[k]);
        }
        let off = Partition::new(vec![0.0, 0.3, 1.0]).unwrap();
        assert!(fine.subgrid_indices(&off).is_err());
    }

    #[test]
    fn delta1_examples() {
        let p = Partition::uniform(1.0, 2).unwrap();
        let c = Increment1::from_fn(p.clone(), |_| 3.0);
        assert_eq!(delta1(&c, 0.0, 1.0).unwrap(), vec![0.0]);
        let id = Increment1::from_fn(p.clone(), |t| t);
        assert_eq!(delta1(&id, 0.0, 1.0).unwrap(), vec![1.0]);
        let sq = Increment1::from_fn(p, |t| t * t);
        assert_eq!(delta1(&sq, 0.5, 1.0).unwrap(), vec![0.75]);
        assert!(matches!(delta1(&sq, 0.3, 1.0), Err(Error::Lookup { .. })));
    }

    #[test]
    fn delta2_examples() {
        let p = Partition::uniform(1.0, 2).unwrap();
        let h = Increment2::from_times(p.clone(), |s, t| (t - s) * (t - s));
        assert_eq!(delta2(&h, 0.0, 0.5, 1.0).unwrap(), vec![0.5]);
        assert!(delta2(&h, 0.5, 0.0, 1.0).is_err());
        assert!(delta2(&h, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn p_variation_examples() {
        let mono = Increment2::from_path(&path(&[0.0, 0.5, 0.75, 2.0]));
        assert!((p_variation(&mono, 1.0).unwrap() - 2.0).abs() < 1e-15);

        let tent = Increment2::from_path(&path(&[0.0, 1.0, 0.0]));
        assert!((p_variation(&tent, 1.0).unwrap() - 2.0).abs() < 1e-15);
        // sub-partitions of a 3-point grid: {0,2} -> 0, {0,1,2} -> 1 + 1
        let brute = [0.0_f64, 2.0].into_iter().fold(0.0, f64::max).sqrt();
        assert!((p_variation(&tent, 2.0).unwrap() - brute).abs() < 1e-15);
        assert!((brute - 2f64.sqrt()).abs() < 1e-15);

        assert!(p_variation(&tent, 0.5).is_err());
    }

    #[test]
    fn holder_examples() {
        let p = Partition::uniform(1.0, 8).unwrap();
        let lin = Increment2::from_times(p.clone(), |s, t| t - s);
        assert!((holder_norm(&lin, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let sq = Increment2::from_times(p.clone(), |s, t| (t - s) * (t - s));
        assert!((holder_norm(&sq, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let zero = Increment2::from_times(p, |_, _| 0.0);
        assert_eq!(holder_norm(&zero, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn superadditivity_examples() {
        let p = Partition::uniform(1.0, 6).unwrap();
        assert!(check_superadditive(|s, t| t - s, &p, CONTROL_TOL).holds);
        assert!(check_superadditive(|s, t| (t - s).powi(2), &p, CONTROL_TOL).holds);
        let three = Partition::uniform(1.0, 2).unwrap();
        let r = check_superadditive(|s, t| (t - s).sqrt(), &three, CONTROL_TOL);
        assert!(!r.holds);
        let expected = 2.0 * 0.5f64.sqrt() - 1.0;
        assert!((r.worst_violation - expected).abs() < 1e-15);
        assert_eq!(r.worst_at, Some(vec![0.0, 0.5, 1.0]));
    }

    #[test]
    fn superadditivity_2d() {
        let p = Partition::uniform(1.0, 4).unwrap();
        let area = |s: f64, t: f64, u: f64, v: f64| (t - s) * (v - u);
        assert!(check_superadditive_2d(area, &p, &p, CONTROL_TOL).holds);
        let root = |s: f64, t: f64, u: f64, v: f64| ((t - s) * (v - u)).sqrt();
        assert!(!check_superadditive_2d(root, &p, &p, CONTROL_TOL).holds);
    }

    fn arb_path() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, 3..24)
    }

    proptest! {
        #[test]
        fn delta_of_delta_vanishes(vals in arb_path()) {
            let g = path(&vals);
            let h = Increment2::from_path(&g);
            let pts = g.partition().points().to_vec();
            for i in 0..pts.len() {
                for k in i + 1..pts.len() {
                    for j in k + 1..pts.len() {
                        let d = delta2(&h, pts[i], pts[k], pts[j]).unwrap();
                        // (c - a) - (b - a) - (c - b) rounds only at the ulp level
                        prop_assert!(d[0].abs() <= 16.0 * f64::EPSILON * 3.0);
                    }
                }
            }
        }

        #[test]
        fn p_variation_monotone_in_p(vals in arb_path(), p in 1.0f64..3.0, dp in 0.0f64..2.0) {
            let h = Increment2::from_path(&path(&vals));
            let a = p_variation(&h, p).unwrap();
            let b = p_variation(&h, p + dp).unwrap();
            prop_assert!(b <= a * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn p_variation_monotone_in_grid(vals in prop::collection::vec(-3.0f64..3.0, 2..12), p in 1.0f64..3.0) {
            // doubling the grid with arbitrary mid values contains the original grid
            let mut fine_vals = Vec::new();
            for w in vals.windows(2) {
                fine_vals.push(w[0]);
                fine_vals.push(w[0] * 0.3 - w[1] * 0.9);
            }
            fine_vals.push(*vals.last().unwrap());
            let fine = Increment2::from_path(&path(&fine_vals));
            let coarse = fine.restrict(&Partition::uniform(1.0, vals.len() - 1).unwrap()).unwrap();
            prop_assert!(p_variation(&coarse, p).unwrap() <= p_variation(&fine, p).unwrap() * (1.0 + 1e-12));
        }

        #[test]
        fn holder_scales_linearly(vals in arb_path(), c in 0.0f64..10.0, gamma in 0.1f64..1.0) {
            let h = Increment2::from_path(&path(&vals));
            let a = holder_norm(&h, gamma).unwrap();
            let b = holder_norm(&h.scaled(c), gamma).unwrap();
            prop_assert!((b - c * a).abs() <= 1e-12 * (1.0 + c * a));
        }
    }
}
