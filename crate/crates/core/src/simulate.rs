//! Exact sampling of Gaussian paths and a seeded Monte Carlo driver.

use std::io::{self, Write};
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::covariance::{increment_gram, CovarianceModel, Guarantees, PSD_TOL};
use crate::error::{invalid, Error, Result};
use crate::grid::Partition;

/// Diagonal jitter (times the trace) added once to a marginally indefinite
/// Gram matrix.
pub const JITTER: f64 = 1e-12;

/// A `d`-component sample path; `values` is row-major by grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub partition: Partition,
    pub d: usize,
    pub values: Vec<f64>,
    pub model: CovarianceModel,
    pub seed: u64,
}

impl PathSample {
    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.d..(k + 1) * self.d]
    }

    /// Value of component `i` at every grid point.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.values.iter().skip(i).step_by(self.d).copied().collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "time")?;
        for i in 1..=self.d {
            write!(w, ",x{i}")?;
        }
        writeln!(w)?;
        for (k, t) in self.partition.points().iter().enumerate() {
            write!(w, "{t}")?;
            for x in self.at(k) {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// A `d`-dimensional path known at the points of a partition.
pub trait SampledPath {
    fn partition(&self) -> &Partition;
    fn dim(&self) -> usize;
    fn point(&self, k: usize) -> &[f64];
}

impl SampledPath for PathSample {
    fn partition(&self) -> &Partition {
        &self.partition
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn point(&self, k: usize) -> &[f64] {
        self.at(k)
    }
}

/// How [`GaussianSampler`] factorizes the increment covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerMethod {
    /// Circulant embedding when eligible, Cholesky otherwise.
    #[default]
    Auto,
    Cholesky,
    /// Requires a uniform grid and a model with stationary increments.
    Circulant,
}

enum Kernel {
    Cholesky(DMatrix<f64>),
    Circulant {
        // sqrt(λ_k / M) for the embedding of size M = 2n
        scale: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
}

/// Draws exact samples of a model on a fixed partition. The factorization is
/// computed once and reused for every sample.
pub struct GaussianSampler {
    model: CovarianceModel,
    partition: Partition,
    kernel: Kernel,
}

impl std::fmt::Debug for GaussianSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let method = match self.kernel {
            Kernel::Cholesky(_) => "cholesky",
            Kernel::Circulant { .. } => "circulant",
        };
        f.debug_struct("GaussianSampler")
            .field("model", &self.model)
            .field("n_intervals", &self.partition.n_intervals())
            .field("method", &method)
            .finish()
    }
}

impl GaussianSampler {
    pub fn new(model: CovarianceModel, partition: Partition, method: SamplerMethod) -> Result<Self> {
        model.validate(Guarantees::Exploratory)?;
        let eligible = partition.is_uniform() && model.has_stationary_increments();
        let kernel = match method {
            SamplerMethod::Cholesky => cholesky_kernel(&model, &partition)?,
            SamplerMethod::Circulant if !eligible => {
                return Err(invalid(
                    "circulant embedding needs a uniform grid and stationary increments",
                ))
            }
            SamplerMethod::Circulant => circulant_kernel(&model, &partition)?,
            SamplerMethod::Auto if eligible => match circulant_kernel(&model, &partition) {
                Ok(k) => k,
                Err(_) => cholesky_kernel(&model, &partition)?,
            },
            SamplerMethod::Auto => cholesky_kernel(&model, &partition)?,
        };
        Ok(Self {
            model,
            partition,
            kernel,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn model(&self) -> &CovarianceModel {
        &self.model
    }

    pub fn is_circulant(&self) -> bool {
        matches!(self.kernel, Kernel::Circulant { .. })
    }

    /// Path with `d` i.i.d. components; component `c` draws its normals from
    /// a stream seeded by `derive_seed(seed, c)`.
    pub fn sample(&self, d: usize, seed: u64) -> Result<PathSample> {
        if d == 0 {
            return Err(invalid("dimension must be positive"));
        }
        let n = self.partition.n_intervals();
        let mut values = vec![0.0; (n + 1) * d];
        for c in 0..d {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c as u64));
            let incr = self.increments(&mut rng);
            let mut x = 0.0;
            for (k, dx) in incr.iter().enumerate() {
                x += dx;
                values[(k + 1) * d + c] = x;
            }
        }
        Ok(PathSample {
            partition: self.partition.clone(),
            d,
            values,
            model: self.model,
            seed,
        })
    }

    fn increments(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = self.partition.n_intervals();
        match &self.kernel {
            Kernel::Cholesky(l) => {
                let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)));
                (l * z).iter().copied().collect()
            }
            Kernel::Circulant { scale, fft } => {
                let mut buf: Vec<Complex<f64>> = scale
                    .iter()
                    .map(|s| {
                        let re: f64 = StandardNormal.sample(rng);
                        let im: f64 = StandardNormal.sample(rng);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf[..n].iter().map(|c| c.re).collect()
            }
        }
    }
}

fn cholesky_kernel(model: &CovarianceModel, partition: &Partition) -> Result<Kernel> {
    let g = increment_gram(model, partition);
    if let Some(ch) = Cholesky::new(g.clone()) {
        return Ok(Kernel::Cholesky(ch.l()));
    }
    let trace = g.trace();
    let min = SymmetricEigen::new(g.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min < -PSD_TOL * trace {
        return Err(Error::Simulation(format!(
            "increment covariance is not PSD: eigenvalue {min} with trace {trace}"
        )));
    }
    let n = g.nrows();
    let jittered = g + DMatrix::identity(n, n) * (JITTER * trace);
    Cholesky::new(jittered)
        .map(|ch| Kernel::Cholesky(ch.l()))
        .ok_or_else(|| Error::Simulation("Cholesky failed after jitter".into()))
}

fn circulant_kernel(model: &CovarianceModel, partition: &Partition) -> Result<Kernel> {
    let n = partition.n_intervals();
    let h = partition.mesh();
    let gamma: Vec<f64> = (0..=n)
        .map(|k| {
            let s = k as f64 * h;
            model.rect(0.0, h, s, s + h)
        })
        .collect();
    let m = 2 * n;
    let mut c: Vec<Complex<f64>> = Vec::with_capacity(m);
    c.extend(gamma.iter().map(|&g| Complex::new(g, 0.0)));
    c.extend(gamma[1..n].iter().rev().map(|&g| Complex::new(g, 0.0)));
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut c);
    let max = c.iter().map(|z| z.re).fold(0.0, f64::max);
    let mut scale = Vec::with_capacity(m);
    for z in &c {
        if z.re < -PSD_TOL * max {
            return Err(Error::Simulation(format!(
                "circulant embedding has negative eigenvalue {}",
                z.re
            )));
        }
        scale.push((z.re.max(0.0) / m as f64).sqrt());
    }
    Ok(Kernel::Circulant { scale, fft })
}

/// Convenience wrapper: builds a sampler and draws one path.
pub fn sample_path(
    model: &CovarianceModel,
    partition: &Partition,
    d: usize,
    seed: u64,
) -> Result<PathSample> {
    GaussianSampler::new(*model, partition.clone(), SamplerMethod::Auto)?.sample(d, seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based child seed of `base` for stream `index`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Sample mean and standard error of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            n,
        }
    }

    /// `|mean - target| <= k * stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Runs `stat` on seeds `derive_seed(base_seed, i)`, `i < n_samples`, in
/// parallel, and reduces each of its `k` outputs in sample order.
pub fn mc_run_multi<F>(n_samples: usize, base_seed: u64, k: usize, stat: F) -> Result<Vec<McEstimate>>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    if n_samples < 2 {
        return Err(invalid("a Monte Carlo run needs at least two samples"));
    }
    let rows: Vec<Vec<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|i| stat(derive_seed(base_seed, i as u64)))
        .collect::<Result<_>>()?;
    let mut cols = vec![Vec::with_capacity(n_samples); k];
    for (i, row) in rows.iter().enumerate() {
        if row.len() != k {
            return Err(invalid(format!(
                "statistic returned {} values, expected {k}",
                row.len()
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i, value: v });
            }
            cols[j].push(v);
        }
    }
    Ok(cols.iter().map(|c| McEstimate::from_values(c)).collect())
}

/// Scalar version of [`mc_run_multi`].
pub fn mc_run<F>(n_samples: usize, base_seed: u64, stat: F) -> Result<McEstimate>
where
    F: Fn(u64) -> f64 + Sync,
{
    Ok(mc_run_multi(n_samples, base_seed, 1, |seed| Ok(vec![stat(seed)]))?[0])
}

/// Monte Carlo over sampled paths: sample `i` is drawn with seed
/// `derive_seed(base_seed, i)`.
pub fn mc_run_paths<F>(
    sampler: &GaussianSampler,
    d: usize,
    n_samples: usize,
    base_seed: u64,
    stat: F,
) -> Result<McEstimate>
where
    F: Fn(&PathSample) -> f64 + Sync,
{
    let est = mc_run_multi(n_samples, base_seed, 1, |seed| {
        Ok(vec![stat(&sampler.sample(d, seed)?)])
    })?;
    Ok(est[0])
}
