use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use geoequiv_cli::commands::{self, AnalyzeOptions, GeodesicOptions, InitialVelocity, MobilityOptions, ProbeOptions};
use geoequiv_cli::report::Report;

#[derive(Parser)]
#[command(name = "geoequiv", version, about = "Numerical checks for geodesically equivalent metric pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a metric file and scan it for degeneracy and signature changes.
    Validate {
        metric: PathBuf,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pointwise equivalence criteria and curvature identities of a pair.
    AnalyzePair {
        g: PathBuf,
        gbar: PathBuf,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = commands::EQUIVALENCE_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate one geodesic of `g`, with pair monitors when `--gbar` is given.
    Geodesics {
        g: PathBuf,
        #[arg(long)]
        gbar: Option<PathBuf>,
        /// Comma-separated start point; defaults to the domain centre.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        /// Comma-separated initial velocity.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "null")]
        v0: Option<String>,
        /// Start along a seeded lightlike direction.
        #[arg(long)]
        null: bool,
        /// Max-norm of the lightlike initial velocity.
        #[arg(long, default_value_t = 0.1)]
        speed: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "0:10", allow_hyphen_values = true)]
        tspan: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the degree of mobility of a metric.
    Mobility {
        g: PathBuf,
        #[arg(long, default_value_t = 2)]
        degree: usize,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = geoequiv::mobility::DEFAULT_SVD_TOL)]
        svd_tol: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Weight expression multiplying the monomials; repeatable.
        #[arg(long = "weight")]
        weights: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reparametrization models and completeness verdicts along a geodesic batch.
    Probe {
        g: PathBuf,
        gbar: PathBuf,
        #[arg(long, default_value_t = 20)]
        batch: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "0:10", allow_hyphen_values = true)]
        tspan: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0.1)]
        speed: f64,
        /// Treat the chart as standing in for a closed manifold.
        #[arg(long)]
        bounded_emulation: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Builtin metrics with known ground truth.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
}

#[derive(Subcommand)]
enum CorpusAction {
    /// Print names, files and truth flags.
    List,
    /// Write every entry as metric files plus an index.
    Export {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn emit(report: &Report, out: Option<&PathBuf>) -> Result<ExitCode> {
    let text = report.to_json();
    match out {
        Some(p) => std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(ExitCode::from(report.status.exit_code()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { metric, points, seed, out } => emit(&commands::cmd_validate(&metric, points, seed)?, out.as_ref()),
        Command::AnalyzePair { g, gbar, points, seed, tol, out } => {
            let r = commands::cmd_analyze_pair(&g, &gbar, &AnalyzeOptions { points, seed, tol })?;
            emit(&r, out.as_ref())
        }
        Command::Geodesics {
            g,
            gbar,
            x0,
            v0,
            null,
            speed,
            seed,
            tspan,
            tol,
            samples,
            csv,
            out,
        } => {
            let velocity = match (v0, null) {
                (Some(v), _) => InitialVelocity::Given(commands::parse_vector(&v).context("--v0")?),
                (None, true) => InitialVelocity::Null {
                    seed: commands::require_seed(seed)?,
                    speed,
                },
                (None, false) => anyhow::bail!("one of --v0 or --null is required"),
            };
            let opts = GeodesicOptions {
                x0: x0.map(|s| commands::parse_vector(&s)).transpose().context("--x0")?,
                velocity,
                t_span: commands::parse_tspan(&tspan).context("--tspan")?,
                tol,
                samples,
            };
            let run = commands::cmd_geodesics(&g, gbar.as_deref(), &opts)?;
            if let Some(p) = &csv {
                std::fs::write(p, &run.csv).with_context(|| format!("writing {}", p.display()))?;
            }
            emit(&run.report, out.as_ref())
        }
        Command::Mobility {
            g,
            degree,
            points,
            svd_tol,
            seed,
            weights,
            out,
        } => {
            let opts = MobilityOptions {
                degree,
                points,
                svd_tol,
                seed,
                weights: if weights.is_empty() { vec!["1".into()] } else { weights },
            };
            emit(&commands::cmd_mobility(&g, &opts)?, out.as_ref())
        }
        Command::Probe {
            g,
            gbar,
            batch,
            seed,
            tspan,
            tol,
            samples,
            speed,
            bounded_emulation,
            out,
        } => {
            let opts = ProbeOptions {
                batch,
                seed,
                t_span: commands::parse_tspan(&tspan).context("--tspan")?,
                tol,
                samples,
                speed,
                bounded_emulation,
            };
            emit(&commands::cmd_probe(&g, &gbar, &opts)?, out.as_ref())
        }
        Command::Corpus { action } => {
            match action {
                CorpusAction::List => print!("{}", commands::corpus_index()?),
                CorpusAction::Export { dir } => {
                    for p in commands::cmd_corpus_export(&dir)? {
                        println!("{}", p.display());
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
