//! Step-3 geometric lift of a sampled path.
//!
//! The path is interpolated linearly between its samples, each chord is
//! lifted exactly, and chords are glued by Chen's relation. Interval
//! signatures are served from a segment tree of block signatures, so every
//! query folds at most `2 log n` blocks, each already accurate to a few ulps
//! of its own size.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::grid::Partition;
use crate::simulate::{PathSample, SampledPath};

/// Truncated signature `(X¹, X², X³)` over one interval, stored densely and
/// row-major: `x2[i*d + j]`, `x3[(i*d + j)*d + l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Levels {
    pub d: usize,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub x3: Vec<f64>,
}

impl Levels {
    pub fn zero(d: usize) -> Self {
        Self {
            d,
            x1: vec![0.0; d],
            x2: vec![0.0; d * d],
            x3: vec![0.0; d * d * d],
        }
    }

    pub fn x2_at(&self, i: usize, j: usize) -> f64 {
        self.x2[i * self.d + j]
    }

    pub fn x3_at(&self, i: usize, j: usize, l: usize) -> f64 {
        self.x3[(i * self.d + j) * self.d + l]
    }

    /// Lévy area `½(X^{2,ij} - X^{2,ji})`.
    pub fn area(&self, i: usize, j: usize) -> f64 {
        0.5 * (self.x2_at(i, j) - self.x2_at(j, i))
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Signature of the straight chord with displacement `v`.
pub fn lift_segment(v: &[f64]) -> Levels {
    let d = v.len();
    let mut out = Levels::zero(d);
    out.x1.copy_from_slice(v);
    for i in 0..d {
        for j in 0..d {
            let vij = v[i] * v[j];
            out.x2[i * d + j] = 0.5 * vij;
            for l in 0..d {
                out.x3[(i * d + j) * d + l] = vij * v[l] / 6.0;
            }
        }
    }
    out
}

/// Chen product: signature over `[s,t]` from those over `[s,u]` and `[u,t]`.
pub fn chen_combine(a: &Levels, b: &Levels) -> Levels {
    let d = a.d;
    debug_assert_eq!(d, b.d);
    let mut out = Levels::zero(d);
    for i in 0..d {
        out.x1[i] = a.x1[i] + b.x1[i];
        for j in 0..d {
            let ij = i * d + j;
            out.x2[ij] = a.x2[ij] + b.x2[ij] + a.x1[i] * b.x1[j];
            for l in 0..d {
                let ijl = ij * d + l;
                out.x3[ijl] = a.x3[ijl] + b.x3[ijl] + a.x2[ij] * b.x1[l] + a.x1[i] * b.x2[j * d + l];
            }
        }
    }
    out
}

/// Geometric lift of a piecewise-linear path on a fine grid.
#[derive(Debug, Clone)]
pub struct RoughLift {
    partition: Partition,
    d: usize,
    values: Vec<f64>,
    size: usize,
    tree: Vec<Levels>,
}

impl RoughLift {
    /// Lifts the polyline through `values` (row-major, `d` per grid point).
    pub fn from_polyline(partition: Partition, d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if values.len() != partition.len() * d {
            return Err(invalid(format!(
                "expected {} path values, got {}",
                partition.len() * d,
                values.len()
            )));
        }
        let n = partition.n_intervals();
        let size = n.next_power_of_two();
        let mut tree = vec![Levels::zero(d); 2 * size];
        for k in 0..n {
            let v: Vec<f64> = (0..d)
                .map(|i| values[(k + 1) * d + i] - values[k * d + i])
                .collect();
            tree[size + k] = lift_segment(&v);
        }
        for node in (1..size).rev() {
            tree[node] = chen_combine(&tree[2 * node], &tree[2 * node + 1]);
        }
        Ok(Self {
            partition,
            d,
            values,
            size,
            tree,
        })
    }

    pub fn from_path(path: &PathSample) -> Result<Self> {
        Self::from_polyline(path.partition.clone(), path.d, path.values.clone())
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Path value at fine grid point `k`.
    pub fn point(&self, k: usize) -> &[f64] {
        &self.values[k * self.d..(k + 1) * self.d]
    }

    /// Signature of fine interval `k`.
    pub fn step(&self, k: usize) -> &Levels {
        &self.tree[self.size + k]
    }

    /// Signature between fine grid indices `i <= j`.
    pub fn signature_idx(&self, i: usize, j: usize) -> Levels {
        assert!(
            i <= j && j <= self.partition.n_intervals(),
            "bad index pair ({i}, {j})"
        );
        if j == i + 1 {
            return self.step(i).clone();
        }
        let mut left = Levels::zero(self.d);
        let mut right = Levels::zero(self.d);
        let (mut l, mut r) = (i + self.size, j + self.size);
        while l < r {
            if l & 1 == 1 {
                left = chen_combine(&left, &self.tree[l]);
                l += 1;
            }
            if r & 1 == 1 {
                r -= 1;
                right = chen_combine(&self.tree[r], &right);
            }
            l >>= 1;
            r >>= 1;
        }
        let mut out = chen_combine(&left, &right);
        for (c, x) in out.x1.iter_mut().enumerate() {
            *x = self.values[j * self.d + c] - self.values[i * self.d + c];
        }
        out
    }

    /// Signature over `[s, t]`, both fine grid points.
    pub fn signature(&self, s: f64, t: f64) -> Result<Levels> {
        if s > t {
            return Err(invalid(format!("signature needs s <= t, got ({s}, {t})")));
        }
        let i = self.partition.index_of(s)?;
        let j = self.partition.index_of(t)?;
        Ok(self.signature_idx(i, j))
    }

    /// Writes one row per interval of `coarse`: `s,t` followed by the
    /// flattened levels. Only for `d <= 3`.
    pub fn write_csv<W: Write>(&self, coarse: &Partition, mut w: W) -> io::Result<()> {
        let to_io = |e: crate::error::Error| io::Error::new(io::ErrorKind::InvalidInput, e.to_string());
        if self.d > 3 {
            return Err(to_io(invalid("lift export supports d <= 3")));
        }
        let idx = self.partition.subgrid_indices(coarse).map_err(to_io)?;
        let d = self.d;
        write!(w, "s,t")?;
        for i in 1..=d {
            write!(w, ",x1_{i}")?;
        }
        for i in 1..=d {
            for j in 1..=d {
                write!(w, ",x2_{i}{j}")?;
            }
        }
        for i in 1..=d {
            for j in 1..=d {
                for l in 1..=d {
                    write!(w, ",x3_{i}{j}{l}")?;
                }
            }
        }
        writeln!(w)?;
        let pts = coarse.points();
        for (k, win) in idx.windows(2).enumerate() {
            let sig = self.signature_idx(win[0], win[1]);
            write!(w, "{},{}", pts[k], pts[k + 1])?;
            for x in sig.x1.iter().chain(&sig.x2).chain(&sig.x3) {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

impl SampledPath for RoughLift {
    fn partition(&self) -> &Partition {
        &self.partition
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn point(&self, k: usize) -> &[f64] {
        RoughLift::point(self, k)
    }
}

/// Absolute and relative size of the worst violation of one identity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Violation {
    pub absolute: f64,
    pub relative: f64,
}

impl Violation {
    fn record(&mut self, abs: f64, scale: f64) {
        self.absolute = self.absolute.max(abs);
        let rel = if scale > 0.0 { abs / scale } else { abs };
        self.relative = self.relative.max(rel);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftReport {
    pub chen_level2: Violation,
    pub chen_level3: Violation,
    /// `Sym(X²) - ½ X¹⊗X¹`.
    pub symmetric_part: Violation,
    /// `X^{3,iii} - (X^{1,i})³ / 6`.
    pub diagonal_level3: Violation,
    pub triples_checked: usize,
    pub tol: f64,
}

impl LiftReport {
    pub fn max_relative(&self) -> f64 {
        [
            self.chen_level2,
            self.chen_level3,
            self.symmetric_part,
            self.diagonal_level3,
        ]
        .iter()
        .fold(0.0, |m, v| m.max(v.relative))
    }

    pub fn passed(&self) -> bool {
        self.max_relative() <= self.tol
    }
}

/// Number of random triples examined by [`verify_lift`].
pub const VERIFY_TRIPLES: usize = 128;

/// Checks Chen's relation at both levels and the geometric identities on
/// random grid triples (and the pairs they contain).
///
/// Violations are measured relative to the natural size of the level-`n`
/// objects on `[s, t]`: the largest tensor involved, or the `n`-th power of
/// the path's oscillation over `[s, t]`, whichever is bigger.
pub fn verify_lift(lift: &RoughLift, tol: f64) -> LiftReport {
    verify_with(lift, tol, |i, j| lift.signature_idx(i, j))
}

pub(crate) fn verify_with(lift: &RoughLift, tol: f64, sig: impl Fn(usize, usize) -> Levels) -> LiftReport {
    let n = lift.partition.n_intervals();
    let d = lift.d;
    let mut report = LiftReport {
        chen_level2: Violation::default(),
        chen_level3: Violation::default(),
        symmetric_part: Violation::default(),
        diagonal_level3: Violation::default(),
        triples_checked: 0,
        tol,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x11F7);
    let oscillation = |i: usize, j: usize| {
        let base = lift.point(i);
        (i..=j)
            .flat_map(|k| lift.point(k).iter().zip(base).map(|(x, b)| (x - b).abs()))
            .fold(0.0, f64::max)
    };
    let check_pair = |report: &mut LiftReport, x: &Levels, osc: f64| {
        for a in 0..d {
            for b in 0..d {
                let sym = 0.5 * (x.x2_at(a, b) + x.x2_at(b, a)) - 0.5 * x.x1[a] * x.x1[b];
                let scale = osc * osc + Levels::max_abs(&x.x2);
                report.symmetric_part.record(sym.abs(), scale);
            }
            let diag = x.x3_at(a, a, a) - x.x1[a].powi(3) / 6.0;
            report
                .diagonal_level3
                .record(diag.abs(), osc.powi(3) + Levels::max_abs(&x.x3));
        }
    };
    if n < 2 {
        let x = sig(0, n);
        check_pair(&mut report, &x, oscillation(0, n));
        return report;
    }
    for _ in 0..VERIFY_TRIPLES {
        let mut idx = [0, 0, 0];
        while !(idx[0] < idx[1] && idx[1] < idx[2]) {
            idx = [
                rng.random_range(0..=n),
                rng.random_range(0..=n),
                rng.random_range(0..=n),
            ];
            idx.sort_unstable();
        }
        let [s, u, t] = idx;
        let (st, su, ut) = (sig(s, t), sig(s, u), sig(u, t));
        let osc = oscillation(s, t);
        let mut scale2 = osc * osc;
        let mut scale3 = osc.powi(3);
        for x in [&st, &su, &ut] {
            scale2 = scale2.max(Levels::max_abs(&x.x2));
            scale3 = scale3.max(Levels::max_abs(&x.x3));
        }
        for a in 0..d {
            for b in 0..d {
                let ab = a * d + b;
                let cross = su.x1[a] * ut.x1[b];
                let v2 = st.x2[ab] - su.x2[ab] - ut.x2[ab] - cross;
                report.chen_level2.record(v2.abs(), scale2.max(cross.abs()));
                for c in 0..d {
                    let abc = ab * d + c;
                    let cross3 = su.x2[ab] * ut.x1[c] + su.x1[a] * ut.x2[b * d + c];
                    let v3 = st.x3[abc] - su.x3[abc] - ut.x3[abc] - cross3;
                    report.chen_level3.record(v3.abs(), scale3.max(cross3.abs()));
                }
            }
        }
        check_pair(&mut report, &st, osc);
        check_pair(&mut report, &su, oscillation(s, u));
        check_pair(&mut report, &ut, oscillation(u, t));
        report.triples_checked += 1;
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_polyline(n: usize, d: usize, seed: u64) -> RoughLift {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; (n + 1) * d];
        for k in 1..=n {
            for i in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                values[k * d + i] = values[(k - 1) * d + i] + z;
            }
        }
        RoughLift::from_polyline(Partition::uniform(1.0, n).unwrap(), d, values).unwrap()
    }

    #[test]
    fn segment_examples() {
        let z = lift_segment(&[0.0, 0.0]);
        assert_eq!(z, Levels::zero(2));
        let one = lift_segment(&[2.0]);
        assert_eq!(one.x1, vec![2.0]);
        assert_eq!(one.x2, vec![2.0]);
        assert!((one.x3[0] - 4.0 / 3.0).abs() < 1e-15);
        let e1 = lift_segment(&[1.0, 0.0]);
        assert_eq!(e1.x2_at(0, 1), 0.0);
        assert_eq!(e1.x2_at(0, 0), 0.5);
    }

    #[test]
    fn chen_examples() {
        let a = lift_segment(&[0.3, -1.2]);
        assert_eq!(chen_combine(&a, &Levels::zero(2)), a);
        assert_eq!(chen_combine(&Levels::zero(2), &a), a);
        let (v, w) = (0.7, -1.9);
        let c = chen_combine(&lift_segment(&[v]), &lift_segment(&[w]));
        let direct = lift_segment(&[v + w]);
        assert!((c.x2[0] - direct.x2[0]).abs() < 1e-15);
        assert!((c.x3[0] - direct.x3[0]).abs() < 1e-15);
    }

    #[test]
    fn chen_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut chord = || -> Levels {
            let v: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
            lift_segment(&v)
        };
        let (a, b, c) = (chord(), chord(), chord());
        let left = chen_combine(&chen_combine(&a, &b), &c);
        let right = chen_combine(&a, &chen_combine(&b, &c));
        for (x, y) in left.x3.iter().zip(&right.x3) {
            assert!((x - y).abs() < 1e-13);
        }
        for (x, y) in left.x2.iter().zip(&right.x2) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn signature_examples() {
        let lift = random_polyline(37, 2, 1);
        let p = lift.partition().points().to_vec();
        assert_eq!(lift.signature(p[5], p[6]).unwrap(), *lift.step(5));
        assert_eq!(lift.signature(p[9], p[9]).unwrap(), Levels::zero(2));
        assert!(lift.signature(0.123456, 1.0).is_err());
        assert!(lift.signature(p[6], p[5]).is_err());

        let one_d = random_polyline(64, 1, 2);
        let x = one_d.signature(0.0, 1.0).unwrap();
        let inc = one_d.point(64)[0] - one_d.point(0)[0];
        assert!((x.x3[0] - inc.powi(3) / 6.0).abs() <= 1e-12 * inc.abs().powi(3).max(1.0));
    }

    #[test]
    fn query_matches_sequential_fold() {
        let lift = random_polyline(50, 3, 4);
        for (i, j) in [(0, 50), (3, 41), (17, 18), (7, 33)] {
            let mut acc = Levels::zero(3);
            for k in i..j {
                acc = chen_combine(&acc, lift.step(k));
            }
            let q = lift.signature_idx(i, j);
            for (x, y) in q.x3.iter().zip(&acc.x3) {
                assert!((x - y).abs() < 1e-11 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn verify_passes_on_built_lifts() {
        for d in 1..=3 {
            for n in [1, 2, 13, 256] {
                let r = verify_lift(&random_polyline(n, d, 10 + n as u64), 1e-12);
                assert!(r.passed(), "d={d} n={n}: {r:?}");
            }
        }
        let r = verify_lift(&random_polyline(64, 2, 5), f64::INFINITY);
        assert!(r.passed());
        assert!(r.triples_checked >= 100);
    }

    #[test]
    fn verify_detects_zeroed_level2() {
        let lift = random_polyline(64, 2, 6);
        let r = verify_with(&lift, 1e-12, |i, j| {
            let mut x = lift.signature_idx(i, j);
            x.x2.iter_mut().for_each(|v| *v = 0.0);
            x
        });
        assert!(!r.passed());
        // the Chen defect is exactly the cross term at the worst triple
        let mut max_cross = 0.0_f64;
        let mut rng = ChaCha8Rng::seed_from_u64(0x11F7);
        for _ in 0..VERIFY_TRIPLES {
            let mut idx = [0, 0, 0];
            while !(idx[0] < idx[1] && idx[1] < idx[2]) {
                idx = [
                    rng.random_range(0..=64),
                    rng.random_range(0..=64),
                    rng.random_range(0..=64),
                ];
                idx.sort_unstable();
            }
            let (su, ut) = (
                lift.signature_idx(idx[0], idx[1]),
                lift.signature_idx(idx[1], idx[2]),
            );
            for a in 0..2 {
                for b in 0..2 {
                    max_cross = max_cross.max((su.x1[a] * ut.x1[b]).abs());
                }
            }
        }
        assert_eq!(r.chen_level2.absolute, max_cross);
    }

    #[test]
    fn refinement_keeps_signatures() {
        let coarse = random_polyline(32, 2, 8);
        let fine_p = coarse.partition().refine(4).unwrap();
        let mut values = Vec::new();
        for k in 0..32 {
            for r in 0..4 {
                let w = r as f64 / 4.0;
                for i in 0..2 {
                    values.push((1.0 - w) * coarse.point(k)[i] + w * coarse.point(k + 1)[i]);
                }
            }
        }
        values.extend_from_slice(coarse.point(32));
        let fine = RoughLift::from_polyline(fine_p, 2, values).unwrap();
        for (i, j) in [(0, 32), (5, 9), (11, 12)] {
            let a = coarse.signature_idx(i, j);
            let b = fine.signature_idx(4 * i, 4 * j);
            let scale = 1.0 + Levels::max_abs(&a.x3);
            for (x, y) in a.x2.iter().chain(&a.x3).zip(b.x2.iter().chain(&b.x3)) {
                assert!((x - y).abs() < 1e-12 * scale, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn antisymmetric_part_is_shoelace_area() {
        let lift = random_polyline(100, 2, 9);
        let (s, t) = (10, 90);
        let base = lift.point(s).to_vec();
        let mut area = 0.0;
        for k in s..t {
            let (a, b) = (lift.point(k), lift.point(k + 1));
            area += 0.5 * ((a[0] - base[0]) * (b[1] - a[1]) - (a[1] - base[1]) * (b[0] - a[0]));
        }
        let sig = lift.signature_idx(s, t);
        assert!((sig.area(0, 1) - area).abs() < 1e-12 * (1.0 + area.abs()));

        let swapped: Vec<f64> = (0..=100)
            .flat_map(|k| [lift.point(k)[1], lift.point(k)[0]])
            .collect();
        let sw = RoughLift::from_polyline(lift.partition().clone(), 2, swapped).unwrap();
        assert!((sw.signature_idx(s, t).area(0, 1) + area).abs() < 1e-12 * (1.0 + area.abs()));
    }

    #[test]
    fn csv_export() {
        let lift = random_polyline(8, 2, 1);
        let mut buf = Vec::new();
        lift.write_csv(&Partition::uniform(1.0, 2).unwrap(), &mut buf)
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 2 + 2 + 4 + 8);
        assert_eq!(text.lines().count(), 3);
        assert!(random_polyline(4, 4, 1)
            .write_csv(&Partition::uniform(1.0, 2).unwrap(), &mut Vec::new())
            .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn chen_and_geometricity_hold(seed in any::<u64>(), n in 2usize..200, d in 1usize..4) {
            let r = verify_lift(&random_polyline(n, d, seed), 1e-12);
            prop_assert!(r.passed(), "{:?}", r);
        }
    }
}
