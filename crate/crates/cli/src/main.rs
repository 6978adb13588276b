//! `gkp-repeater`: run link simulations, rate curves, resource counts and
//! planner sweeps from a JSON config.
//!
//! Exit status: 0 on success (also when a simulation stops at its trial cap,
//! which is flagged in the output), 1 for configuration errors, 2 for runtime
//! errors.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use commands::{Failure, Report};
use config::{ConfigError, Format, Resolved, Strategy, Workers};

#[derive(Debug, Parser)]
#[command(name = "gkp-repeater", version, about = "Multiplexed GKP repeater chain simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads, or "auto".
    #[arg(long, global = true, env = "GKP_REPEATER_WORKERS")]
    workers: Option<String>,

    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Flip and syndrome statistics of one segment.
    LinkStats,
    /// Secret-key rate and the repeaterless bound over distance.
    RateCurve,
    /// Minimum qubits per repeater and chain totals.
    Resources,
    /// Cost-optimal spacing per distance.
    Optimize,
    /// Achievable distance per spacing.
    Distance,
    /// Reference strategies.
    Baseline {
        #[arg(long, value_enum)]
        strategy: Option<Strategy>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::LinkStats => "link-stats",
            Command::RateCurve => "rate-curve",
            Command::Resources => "resources",
            Command::Optimize => "optimize",
            Command::Distance => "distance",
            Command::Baseline { .. } => "baseline",
        }
    }
}

fn parse_workers(s: &str) -> Result<Workers, ConfigError> {
    if s == "auto" {
        return Ok(Workers::Auto(config::AutoTag::Auto));
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(Workers::Count(n)),
        _ => Err(ConfigError::new("--workers", format!("`{s}` is neither a positive integer nor \"auto\""))),
    }
}

fn config_hash(config: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(config).expect("serializable")))
}

fn render(command: &str, resolved: &Resolved, report: &Report, format: Format) -> anyhow::Result<Vec<u8>> {
    let config = serde_json::to_value(&resolved.config)?;
    let warning = (!report.converged).then_some("trial cap reached before the accuracy target");
    let meta = json!({
        "tool": "gkp-repeater",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_hash": config_hash(&config),
        "seed": resolved.seed,
        "sigma_gkp": resolved.sigma_gkp,
        "converged": report.converged,
        "warning": warning,
        "config": config,
    });
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(&json!({ "meta": meta, "result": report.result }))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut out = vec![];
            for key in ["tool", "version", "command", "config_hash", "seed", "sigma_gkp", "converged"] {
                let v = &meta[key];
                let v = v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string());
                writeln!(out, "# {key}={v}")?;
            }
            if let Some(w) = warning {
                writeln!(out, "# warning={w}")?;
            }
            writeln!(out, "# config={}", meta["config"])?;
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&report.columns)?;
            for row in &report.rows {
                w.write_record(row)?;
            }
            Ok(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let path = cli.config.ok_or_else(|| ConfigError::new("--config", "a config file is required"))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
    let parsed = config::parse(&text)?;
    let workers = match cli.workers.as_deref() {
        Some(s) => Some(parse_workers(s)?),
        None => parsed.workers,
    };
    let output = parsed.output.clone();
    let format = cli.format.or(output.as_ref().and_then(|o| o.format)).unwrap_or(Format::Csv);
    let out_path = cli.out.or(output.and_then(|o| o.path));
    let strategy = match &cli.command {
        Command::Baseline { strategy } => *strategy,
        _ => None,
    };
    let resolved = Resolved::new(parsed, cli.seed, strategy)?;

    let threads = match workers {
        Some(Workers::Count(n)) => n,
        _ => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Runtime(e.into()))?;
    let report = pool.install(|| match cli.command {
        Command::LinkStats => commands::link_stats(&resolved),
        Command::RateCurve => commands::rate_curve(&resolved),
        Command::Resources => commands::resources(&resolved),
        Command::Optimize => commands::optimize(&resolved),
        Command::Distance => commands::distance(&resolved),
        Command::Baseline { .. } => commands::baseline(&resolved),
    })?;
    if !report.converged {
        eprintln!("warning: trial cap reached before the accuracy target; results are flagged");
    }

    let bytes = render(cli.command.name(), &resolved, &report, format).map_err(Failure::Runtime)?;
    match out_path {
        Some(p) => std::fs::write(&p, bytes).with_context(|| format!("writing {}", p.display())),
        None => std::io::stdout().write_all(&bytes).context("writing standard output"),
    }
    .map_err(Failure::Runtime)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
