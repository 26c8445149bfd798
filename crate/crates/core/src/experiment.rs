//! Batch experiments driven by a JSON configuration, with CSV output.
//!
//! Every CSV starts with a `# config_sha256=<hex>` line identifying the
//! configuration that produced it, and all runs are deterministic given
//! that configuration.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::controlled::{ControlledPath, ExponentFit, FunctionId};
use crate::covariance::{two_d_rho_variation, CovarianceModel, Guarantees, Rectangle};
use crate::error::Error;
use crate::grid::{Increment1, Partition};
use crate::integrators::{midpoint, rough_integral, trapezoid, young_integral, IntegralResult, Rule};
use crate::lift::{verify_lift, LiftReport, RoughLift};
use crate::moments::{moment_reports, MomentReport, Statistic};
use crate::simulate::{GaussianSampler, SamplerMethod};
use crate::stats::{loglog_fit, median};

/// Absolute-plus-relative size below which convergence errors count as
/// exactly zero.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(#[from] Error),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl ExperimentError {
    /// Process exit code: 2 for configuration and file problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Io { .. } => 2,
            ExperimentError::Numerical(_) => 3,
        }
    }
}

pub type ExperimentResult<T> = std::result::Result<T, ExperimentError>;

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: CovarianceModel,
    /// Dimension of the driver.
    pub d: usize,
    /// Dimension of the integrand; must equal `d`.
    pub m: Option<usize>,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub function: FunctionId,
    /// Coarse grid sizes, strictly increasing.
    pub levels: Vec<usize>,
    /// Fine grid size over the largest level.
    pub fine_ratio: usize,
    pub seeds: Vec<u64>,
    pub rules: Vec<Rule>,
    /// Output directory used when none is given on the command line.
    pub output: Option<PathBuf>,
    /// Monte Carlo samples for `moments`.
    pub samples: usize,
    pub statistics: Vec<Statistic>,
    /// Variation exponent for `rhovar`; defaults to the model's `ρ`.
    pub rho: Option<f64>,
    /// Accept models outside the range with convergence guarantees.
    pub exploratory: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: CovarianceModel::Fbm { hurst: 0.5 },
            d: 2,
            m: None,
            horizon: 1.0,
            function: FunctionId::SinMix,
            levels: vec![16, 32, 64, 128, 256],
            fine_ratio: 16,
            seeds: vec![0],
            rules: vec![Rule::Trapezoid, Rule::Midpoint],
            output: None,
            samples: 10_000,
            statistics: vec![Statistic::FDiag, Statistic::FOffdiag, Statistic::GDiag],
            rho: None,
            exploratory: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> ExperimentResult<Self> {
        serde_json::from_str(text).map_err(|e| config_err(format!("invalid config JSON: {e}")))
    }

    pub fn from_path(path: &Path) -> ExperimentResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> ExperimentResult<()> {
        let level = if self.exploratory {
            Guarantees::Exploratory
        } else {
            Guarantees::Strict
        };
        self.model
            .validate(level)
            .map_err(|e| config_err(e.to_string()))?;
        if self.d == 0 {
            return Err(config_err("d must be positive"));
        }
        if self.m.is_some_and(|m| m != self.d) {
            return Err(config_err("the integrand must take values in R^d (m = d)"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(config_err(format!("T must be positive, got {}", self.horizon)));
        }
        if self.levels.is_empty() {
            return Err(config_err("at least one mesh level is required"));
        }
        if self.levels.contains(&0) || self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err("mesh levels must be positive and strictly increasing"));
        }
        if self.fine_ratio < 2 {
            return Err(config_err("fine_ratio must be at least 2"));
        }
        let fine = self.fine_n();
        if let Some(n) = self.levels.iter().find(|&&n| !fine.is_multiple_of(n)) {
            return Err(config_err(format!(
                "level {n} does not divide the fine grid size {fine}"
            )));
        }
        if self.seeds.is_empty() {
            return Err(config_err("at least one seed is required"));
        }
        if self.rules.is_empty() {
            return Err(config_err("at least one rule is required"));
        }
        if self.samples < 2 {
            return Err(config_err("samples must be at least 2"));
        }
        if self.rho.is_some_and(|r| !(r >= 1.0)) {
            return Err(config_err("rho must be at least 1"));
        }
        Ok(())
    }

    /// Size of the fine simulation grid.
    pub fn fine_n(&self) -> usize {
        self.levels.last().copied().unwrap_or(1) * self.fine_ratio
    }

    /// SHA-256 of the canonical JSON form, ignoring the output location.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub seed: u64,
    pub n: usize,
    pub mesh: f64,
    pub rule: Rule,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleSummary {
    pub rule: Rule,
    /// `(n, median error over seeds)` per level.
    pub medians: Vec<(usize, f64)>,
    pub fit: Option<ExponentFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub config_hash: String,
    pub model: CovarianceModel,
    /// `(seed, rough integral on the fine grid)`.
    pub references: Vec<(u64, f64)>,
    pub rows: Vec<ConvergenceRow>,
    pub summaries: Vec<RuleSummary>,
}

impl ConvergenceReport {
    pub fn summary(&self, rule: Rule) -> Option<&RuleSummary> {
        self.summaries.iter().find(|s| s.rule == rule)
    }

    /// Values of `rule` for one seed, in level order.
    pub fn values(&self, seed: u64, rule: Rule) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.seed == seed && r.rule == rule)
            .map(|r| r.value)
            .collect()
    }
}

struct SeedRun {
    reference: f64,
    rows: Vec<ConvergenceRow>,
}

fn apply_rule(
    rule: Rule,
    cfg: &ExperimentConfig,
    cp: &ControlledPath,
    lift: &RoughLift,
    coarse: &Partition,
) -> crate::error::Result<IntegralResult> {
    match rule {
        Rule::Rough => rough_integral(cp, lift, coarse),
        Rule::Trapezoid => trapezoid(cp, lift, coarse),
        Rule::Midpoint => midpoint(&cfg.function.build(cfg.d), lift, coarse),
        Rule::Young => {
            let y = Increment1::new(cp.partition.clone(), cp.d, cp.y.clone())?;
            let x = Increment1::new(
                lift.partition().clone(),
                lift.d(),
                (0..lift.partition().len())
                    .flat_map(|k| lift.point(k).to_vec())
                    .collect(),
            )?;
            young_integral(&y, &x, coarse)
        }
    }
}

fn run_seed(
    cfg: &ExperimentConfig,
    sampler: &GaussianSampler,
    seed: u64,
    with_reference: bool,
) -> crate::error::Result<SeedRun> {
    let path = sampler.sample(cfg.d, seed)?;
    let lift = RoughLift::from_path(&path)?;
    let f = cfg.function.build(cfg.d);
    let cp = ControlledPath::from_function(&f, &path)?;
    let reference = if with_reference {
        rough_integral(&cp, &lift, lift.partition())?.value
    } else {
        f64::NAN
    };
    let mut rows = Vec::with_capacity(cfg.levels.len() * cfg.rules.len());
    for &n in &cfg.levels {
        let coarse = Partition::uniform(cfg.horizon, n)?;
        for &rule in &cfg.rules {
            let r = apply_rule(rule, cfg, &cp, &lift, &coarse)?;
            if !r.value.is_finite() {
                return Err(Error::NonFinite {
                    index: seed as usize,
                    value: r.value,
                });
            }
            rows.push(ConvergenceRow {
                seed,
                n,
                mesh: r.mesh,
                rule,
                value: r.value,
                error: (r.value - reference).abs(),
            });
        }
    }
    Ok(SeedRun { reference, rows })
}

fn fine_sampler(cfg: &ExperimentConfig) -> crate::error::Result<GaussianSampler> {
    let fine = Partition::uniform(cfg.horizon, cfg.fine_n())?;
    GaussianSampler::new(cfg.model, fine, SamplerMethod::Auto)
}

/// For each seed: one fine path and its lift, the rough integral on the
/// fine grid as reference, and every rule on every coarse level.
pub fn run_converge(cfg: &ExperimentConfig) -> ExperimentResult<ConvergenceReport> {
    cfg.validate()?;
    let sampler = fine_sampler(cfg)?;
    let runs: Vec<SeedRun> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, &sampler, seed, true))
        .collect::<crate::error::Result<_>>()?;
    let references: Vec<(u64, f64)> = cfg
        .seeds
        .iter()
        .copied()
        .zip(runs.iter().map(|r| r.reference))
        .collect();
    let ref_scale = references.iter().fold(0.0_f64, |m, (_, v)| m.max(v.abs()));
    let rows: Vec<ConvergenceRow> = runs.into_iter().flat_map(|r| r.rows).collect();
    let mut summaries = Vec::new();
    for &rule in &cfg.rules {
        let mut medians = Vec::new();
        for &n in &cfg.levels {
            let errs: Vec<f64> = rows
                .iter()
                .filter(|r| r.rule == rule && r.n == n)
                .map(|r| r.error)
                .collect();
            medians.push((n, median(&errs)));
        }
        let exact = rows
            .iter()
            .filter(|r| r.rule == rule)
            .all(|r| r.error <= EXACT_TOL * (1.0 + ref_scale));
        let fit = if exact {
            Some(ExponentFit::ExactZero)
        } else if medians.len() >= 3 && medians.iter().all(|(_, m)| *m > 0.0) {
            let mesh: Vec<f64> = medians.iter().map(|(n, _)| cfg.horizon / *n as f64).collect();
            let med: Vec<f64> = medians.iter().map(|(_, m)| *m).collect();
            let f = loglog_fit(&mesh, &med)?;
            Some(ExponentFit::Slope {
                slope: f.slope,
                r_squared: f.r_squared,
            })
        } else {
            None
        };
        summaries.push(RuleSummary { rule, medians, fit });
    }
    Ok(ConvergenceReport {
        config_hash: cfg.hash(),
        model: cfg.model,
        references,
        rows,
        summaries,
    })
}

fn hash_line<W: Write>(w: &mut W, hash: &str) -> io::Result<()> {
    writeln!(w, "# config_sha256={hash}")
}

pub fn write_convergence_csv<W: Write>(report: &ConvergenceReport, mut w: W) -> io::Result<()> {
    hash_line(&mut w, &report.config_hash)?;
    writeln!(w, "seed,model,n,mesh,rule,value_1,err_vs_reference")?;
    let label = report.model.label();
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.seed,
            label,
            r.n,
            r.mesh,
            r.rule.name(),
            r.value,
            r.error
        )?;
    }
    Ok(())
}

/// Rule values for every seed and level, plus the rough integral on the
/// fine grid (`n` = fine size).
pub fn run_integrate(cfg: &ExperimentConfig) -> ExperimentResult<Vec<ConvergenceRow>> {
    cfg.validate()?;
    let sampler = fine_sampler(cfg)?;
    let fine_mesh = cfg.horizon / cfg.fine_n() as f64;
    let runs: Vec<SeedRun> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, &sampler, seed, true))
        .collect::<crate::error::Result<_>>()?;
    let mut out = Vec::new();
    for (seed, run) in cfg.seeds.iter().zip(runs) {
        out.extend(run.rows);
        out.push(ConvergenceRow {
            seed: *seed,
            n: cfg.fine_n(),
            mesh: fine_mesh,
            rule: Rule::Rough,
            value: run.reference,
            error: 0.0,
        });
    }
    Ok(out)
}

pub fn write_integrate_csv<W: Write>(
    cfg: &ExperimentConfig,
    rows: &[ConvergenceRow],
    mut w: W,
) -> io::Result<()> {
    hash_line(&mut w, &cfg.hash())?;
    writeln!(w, "seed,model,n,mesh,rule,value_1")?;
    let label = cfg.model.label();
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.seed,
            label,
            r.n,
            r.mesh,
            r.rule.name(),
            r.value
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub n: usize,
    pub statistic: Statistic,
    pub report: MomentReport,
}

/// Oracle-versus-Monte-Carlo second moments at every level, using the
/// first seed.
pub fn run_moments(cfg: &ExperimentConfig) -> ExperimentResult<Vec<MomentRow>> {
    cfg.validate()?;
    if cfg.statistics.is_empty() {
        return Err(config_err("at least one statistic is required"));
    }
    let mut rows = Vec::new();
    for &n in &cfg.levels {
        let reports = moment_reports(
            &cfg.model,
            &cfg.statistics,
            cfg.horizon,
            n,
            cfg.fine_ratio,
            cfg.samples,
            cfg.seeds[0],
        )?;
        rows.extend(
            cfg.statistics
                .iter()
                .zip(reports)
                .map(|(&statistic, report)| MomentRow { n, statistic, report }),
        );
    }
    Ok(rows)
}

pub fn write_moments_csv<W: Write>(cfg: &ExperimentConfig, rows: &[MomentRow], mut w: W) -> io::Result<()> {
    hash_line(&mut w, &cfg.hash())?;
    writeln!(w, "model,statistic,n,analytic,mc_mean,mc_stderr,verdict")?;
    let label = cfg.model.label();
    for r in rows {
        let verdict = if r.report.verdict { "pass" } else { "fail" };
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            label,
            r.statistic.name(),
            r.n,
            r.report.analytic,
            r.report.mc_mean,
            r.report.mc_stderr,
            verdict
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoVarRow {
    pub n: usize,
    pub rho: f64,
    pub value: f64,
}

/// 2-d `ρ`-variation of the covariance over `[0,T]²` on each uniform level.
pub fn run_rhovar(cfg: &ExperimentConfig) -> ExperimentResult<Vec<RhoVarRow>> {
    cfg.validate()?;
    let rho = cfg.rho.unwrap_or_else(|| cfg.model.rho());
    let rect = Rectangle::square(0.0, cfg.horizon)?;
    cfg.levels
        .iter()
        .map(|&n| {
            let p = Partition::uniform(cfg.horizon, n)?;
            let value = two_d_rho_variation(&cfg.model, &rect, &p, &p, rho)?;
            Ok(RhoVarRow { n, rho, value })
        })
        .collect()
}

pub fn write_rhovar_csv<W: Write>(cfg: &ExperimentConfig, rows: &[RhoVarRow], mut w: W) -> io::Result<()> {
    hash_line(&mut w, &cfg.hash())?;
    writeln!(w, "model,n,rho,value")?;
    let label = cfg.model.label();
    for r in rows {
        writeln!(w, "{},{},{},{}", label, r.n, r.rho, r.value)?;
    }
    Ok(())
}

fn create(path: &Path) -> ExperimentResult<io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(io::BufWriter::new)
        .map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes one path CSV per seed on the grid of the largest level.
pub fn run_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> ExperimentResult<Vec<PathBuf>> {
    cfg.validate()?;
    let n = *cfg.levels.last().expect("validated");
    let sampler = GaussianSampler::new(
        cfg.model,
        Partition::uniform(cfg.horizon, n)?,
        SamplerMethod::Auto,
    )?;
    let hash = cfg.hash();
    let mut files = Vec::new();
    for &seed in &cfg.seeds {
        let path = sampler.sample(cfg.d, seed)?;
        let file = out_dir.join(format!("path_seed{seed}.csv"));
        let mut w = create(&file)?;
        hash_line(&mut w, &hash).map_err(io_err(&file))?;
        path.write_csv(&mut w).map_err(io_err(&file))?;
        w.flush().map_err(io_err(&file))?;
        files.push(file);
    }
    Ok(files)
}

/// Lifts one fine path per seed, checks it, and exports its signatures over
/// the cells of the largest level. Requires `d <= 3`.
pub fn run_lift(cfg: &ExperimentConfig, out_dir: &Path) -> ExperimentResult<Vec<(PathBuf, LiftReport)>> {
    cfg.validate()?;
    if cfg.d > 3 {
        return Err(config_err("lift export supports d <= 3"));
    }
    let sampler = fine_sampler(cfg)?;
    let coarse = Partition::uniform(cfg.horizon, *cfg.levels.last().expect("validated"))?;
    let hash = cfg.hash();
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        let lift = RoughLift::from_path(&sampler.sample(cfg.d, seed)?)?;
        let report = verify_lift(&lift, 1e-12);
        let file = out_dir.join(format!("lift_seed{seed}.csv"));
        let mut w = create(&file)?;
        hash_line(&mut w, &hash).map_err(io_err(&file))?;
        lift.write_csv(&coarse, &mut w).map_err(io_err(&file))?;
        w.flush().map_err(io_err(&file))?;
        out.push((file, report));
    }
    Ok(out)
}

/// Runs `f` and writes its CSV to `out_dir/name`.
pub fn write_to<F>(out_dir: &Path, name: &str, f: F) -> ExperimentResult<PathBuf>
where
    F: FnOnce(&mut io::BufWriter<fs::File>) -> io::Result<()>,
{
    let file = out_dir.join(name);
    let mut w = create(&file)?;
    f(&mut w).map_err(io_err(&file))?;
    w.flush().map_err(io_err(&file))?;
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            levels: vec![4, 8, 16, 32],
            fine_ratio: 16,
            seeds: vec![1, 2, 3],
            ..Default::default()
        }
    }

    #[test]
    fn config_defaults_and_parsing() {
        let cfg = ExperimentConfig::from_json(
            r#"{"model": {"kind": "fbm", "H": 0.35}, "d": 2, "T": 1.0, "function": "sin-mix",
                "levels": [16, 32], "fine_ratio": 16, "seeds": [1, 2], "rules": ["trapezoid", "rough"]}"#,
        )
        .unwrap();
        assert_eq!(cfg.model, CovarianceModel::Fbm { hurst: 0.35 });
        assert_eq!(cfg.rules, vec![Rule::Trapezoid, Rule::Rough]);
        assert_eq!(cfg.samples, 10_000);
        cfg.validate().unwrap();
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn validation_errors_are_config_errors() {
        let bad = [
            ExperimentConfig {
                seeds: vec![],
                ..small()
            },
            ExperimentConfig {
                levels: vec![8, 4],
                ..small()
            },
            ExperimentConfig {
                levels: vec![],
                ..small()
            },
            ExperimentConfig {
                fine_ratio: 1,
                ..small()
            },
            ExperimentConfig {
                levels: vec![3, 8],
                ..small()
            },
            ExperimentConfig {
                m: Some(3),
                ..small()
            },
            ExperimentConfig {
                model: CovarianceModel::Fbm { hurst: 0.2 },
                ..small()
            },
            ExperimentConfig {
                rules: vec![],
                ..small()
            },
        ];
        for cfg in bad {
            let e = run_converge(&cfg).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{cfg:?}");
        }
        let ok = ExperimentConfig {
            model: CovarianceModel::Fbm { hurst: 0.2 },
            exploratory: true,
            ..small()
        };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn hash_ignores_output_and_tracks_content() {
        let a = small();
        let b = ExperimentConfig {
            output: Some("elsewhere".into()),
            ..small()
        };
        let c = ExperimentConfig {
            seeds: vec![1, 2],
            ..small()
        };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn linear_function_is_exact() {
        for model in [
            CovarianceModel::fbm(0.35).unwrap(),
            CovarianceModel::bifractional(0.6, 0.8).unwrap(),
        ] {
            let cfg = ExperimentConfig {
                model,
                function: FunctionId::Linear,
                rules: vec![Rule::Trapezoid, Rule::Midpoint, Rule::Rough],
                ..small()
            };
            let rep = run_converge(&cfg).unwrap();
            for s in &rep.summaries {
                assert_eq!(s.fit, Some(ExponentFit::ExactZero), "{model:?} {:?}", s.rule);
            }
        }
    }

    #[test]
    fn convergence_csv_is_deterministic() {
        let cfg = ExperimentConfig {
            rules: vec![Rule::Trapezoid, Rule::Young],
            ..small()
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_convergence_csv(&run_converge(&cfg).unwrap(), &mut a).unwrap();
        write_convergence_csv(&run_converge(&cfg).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), format!("# config_sha256={}", cfg.hash()));
        assert_eq!(
            lines.next().unwrap(),
            "seed,model,n,mesh,rule,value_1,err_vs_reference"
        );
        assert_eq!(lines.count(), 3 * 4 * 2);
    }

    #[test]
    fn rhovar_brownian_is_horizon() {
        let cfg = ExperimentConfig {
            rho: Some(1.0),
            levels: vec![4, 8, 16],
            ..small()
        };
        for r in run_rhovar(&cfg).unwrap() {
            assert!((r.value - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn moments_brownian_f_diag_passes() {
        let cfg = ExperimentConfig {
            levels: vec![64],
            statistics: vec![Statistic::FDiag],
            fine_ratio: 2,
            ..small()
        };
        let rows = run_moments(&cfg).unwrap();
        assert!(rows[0].report.verdict, "{:?}", rows[0]);
        assert!((rows[0].report.analytic - 1.0 / 128.0).abs() < 1e-15);
    }

    #[test]
    fn file_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            levels: vec![4, 8],
            ..small()
        };
        let files = run_simulate(&cfg, dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        let text = fs::read_to_string(&files[0]).unwrap();
        assert!(text.starts_with("# config_sha256="));
        assert_eq!(text.lines().nth(1).unwrap(), "time,x1,x2");
        let lifts = run_lift(&cfg, dir.path()).unwrap();
        assert!(lifts.iter().all(|(_, r)| r.passed()));
        let missing = dir.path().join("no/such/dir");
        assert_eq!(run_simulate(&cfg, &missing).unwrap_err().exit_code(), 2);
    }
}
