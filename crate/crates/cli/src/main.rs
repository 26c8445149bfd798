use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use roughtrap::controlled::ExponentFit;
use roughtrap::covariance::CovarianceModel;
use roughtrap::experiment::{
    run_converge, run_integrate, run_lift, run_moments, run_rhovar, run_simulate, write_convergence_csv,
    write_integrate_csv, write_moments_csv, write_rhovar_csv, write_to, ExperimentConfig, ExperimentError,
    ExperimentResult,
};

/// Rough-path lifts of Gaussian processes and trapezoid-rule experiments.
#[derive(Debug, Parser)]
#[command(name = "roughtrap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seeds as a list `1,2,3` or a half-open range `0..20`.
    #[arg(long, global = true)]
    seeds: Option<String>,
    /// Coarse grid sizes, e.g. `16,32,64`.
    #[arg(long, global = true)]
    levels: Option<String>,
    /// Model kind (`fbm`, `bifractional`, `fbm_sum`) or a JSON descriptor.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Hurst parameter for `fbm` or `bifractional`.
    #[arg(long = "H", global = true)]
    hurst: Option<f64>,
    #[arg(long, global = true)]
    fine_ratio: Option<usize>,
    #[arg(long, global = true)]
    samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Sample paths and write one CSV per seed.
    Simulate,
    /// Lift fine paths and export their signatures over the coarse cells.
    Lift,
    /// Evaluate each rule on each level.
    Integrate,
    /// Errors of each rule against the fine-grid rough integral.
    Converge,
    /// Exact second moments against Monte Carlo.
    Moments,
    /// 2-d variation of the covariance on each level.
    Rhovar,
}

fn config_error(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> ExperimentResult<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| config_error(format!("invalid {what} entry {s:?}")))
        })
        .collect()
}

fn parse_seeds(text: &str) -> ExperimentResult<Vec<u64>> {
    match text.split_once("..") {
        Some((a, b)) => {
            let parse = |s: &str| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| config_error(format!("invalid seed range {text:?}")))
            };
            Ok((parse(a)?..parse(b)?).collect())
        }
        None => parse_list(text, "seed"),
    }
}

fn parse_model(text: &str, hurst: Option<f64>) -> ExperimentResult<CovarianceModel> {
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(text)
            .map_err(|e| config_error(format!("invalid model descriptor: {e}")));
    }
    match text {
        "fbm" => Ok(CovarianceModel::Fbm {
            hurst: hurst.unwrap_or(0.5),
        }),
        "bifractional" | "fbm_sum" => Err(config_error(format!(
            "model {text} needs a JSON descriptor with all of its parameters"
        ))),
        other => Err(config_error(format!("unknown model {other:?}"))),
    }
}

fn build_config(cli: &Cli) -> ExperimentResult<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &cli.model {
        cfg.model = parse_model(m, cli.hurst)?;
    } else if let Some(h) = cli.hurst {
        match &mut cfg.model {
            CovarianceModel::Fbm { hurst } | CovarianceModel::Bifractional { hurst, .. } => *hurst = h,
            CovarianceModel::FbmSum { .. } => {
                return Err(config_error("--H does not apply to fbm_sum"));
            }
        }
    }
    if let Some(s) = &cli.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if let Some(l) = &cli.levels {
        cfg.levels = parse_list(l, "level")?;
    }
    if let Some(r) = cli.fine_ratio {
        cfg.fine_ratio = r;
    }
    if let Some(n) = cli.samples {
        cfg.samples = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn describe_fit(fit: Option<ExponentFit>) -> String {
    match fit {
        Some(ExponentFit::ExactZero) => "exact".to_string(),
        Some(ExponentFit::Slope { slope, r_squared }) => format!("slope {slope:.3} (R² {r_squared:.3})"),
        None => "no fit (fewer than 3 levels)".to_string(),
    }
}

fn run(cli: &Cli) -> ExperimentResult<()> {
    let cfg = build_config(cli)?;
    let out: PathBuf = cli
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).map_err(|source| ExperimentError::Io {
        path: out.clone(),
        source,
    })?;
    let out: &Path = &out;
    match cli.command {
        Command::Simulate => {
            for f in run_simulate(&cfg, out)? {
                println!("{}", f.display());
            }
        }
        Command::Lift => {
            for (f, report) in run_lift(&cfg, out)? {
                let status = if report.passed() { "ok" } else { "FAILED" };
                println!(
                    "{} identities {status} (max relative violation {:.2e})",
                    f.display(),
                    report.max_relative()
                );
            }
        }
        Command::Integrate => {
            let rows = run_integrate(&cfg)?;
            let f = write_to(out, "integrate.csv", |w| write_integrate_csv(&cfg, &rows, w))?;
            println!("{}", f.display());
        }
        Command::Converge => {
            let report = run_converge(&cfg)?;
            let f = write_to(out, "converge.csv", |w| write_convergence_csv(&report, w))?;
            for s in &report.summaries {
                println!("{:<10} {}", s.rule.name(), describe_fit(s.fit));
            }
            println!("{}", f.display());
        }
        Command::Moments => {
            let rows = run_moments(&cfg)?;
            let f = write_to(out, "moments.csv", |w| write_moments_csv(&cfg, &rows, w))?;
            for r in &rows {
                let verdict = if r.report.verdict { "pass" } else { "fail" };
                println!(
                    "n={:<5} {:<7} analytic {:.6e}  mc {:.6e} ± {:.1e}  {verdict}",
                    r.n,
                    r.statistic.name(),
                    r.report.analytic,
                    r.report.mc_mean,
                    r.report.mc_stderr
                );
            }
            println!("{}", f.display());
        }
        Command::Rhovar => {
            let rows = run_rhovar(&cfg)?;
            let f = write_to(out, "rhovar.csv", |w| write_rhovar_csv(&cfg, &rows, w))?;
            println!("{}", f.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists_and_ranges() {
        assert_eq!(parse_seeds("3,1, 2").unwrap(), vec![3, 1, 2]);
        assert_eq!(parse_seeds("0..4").unwrap(), vec![0, 1, 2, 3]);
        assert!(parse_seeds("").unwrap().is_empty());
        assert!(parse_seeds("a").is_err());
    }

    #[test]
    fn models() {
        assert_eq!(
            parse_model("fbm", Some(0.35)).unwrap(),
            CovarianceModel::Fbm { hurst: 0.35 }
        );
        assert_eq!(
            parse_model(r#"{"kind": "bifractional", "H": 0.6, "K": 0.8}"#, None).unwrap(),
            CovarianceModel::Bifractional { hurst: 0.6, k: 0.8 }
        );
        assert!(parse_model("fbm_sum", None).is_err());
        assert!(parse_model("ou", None).is_err());
    }
}
