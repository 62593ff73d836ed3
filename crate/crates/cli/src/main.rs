//! `residue-lab`: experiment runner and verification-suite driver for the
//! reduced-residue tuple statistics library.
//!
//! Exit codes: 0 on success, 1 when an assertion fails (an identity
//! tolerance or a pinned ratio is exceeded), 2 on configuration errors.

mod config;
mod experiments;
mod output;

use clap::{Args, Parser, Subcommand};
use config::RawConfig;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "residue-lab",
    version,
    about = "Statistics of s-tuples of reduced residues modulo squarefree q"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Single squarefree modulus.
    #[arg(long)]
    q: Option<u64>,
    /// Modulus family: `primorial:N` or `list:a,b,c`.
    #[arg(long = "q-family")]
    q_family: Option<String>,
    /// All squarefree q in `a..b` (inclusive).
    #[arg(long = "q-range")]
    q_range: Option<String>,
    /// Offset set as a comma-separated list; repeatable.
    #[arg(long)]
    offsets: Vec<String>,
    /// Single window length.
    #[arg(long)]
    h: Option<u64>,
    /// Window grid: `a,b,c`, `pow2`, `pow2:MAX`, or `auto`.
    #[arg(long = "h-grid")]
    h_grid: Option<String>,
    /// Moment orders, comma-separated.
    #[arg(long)]
    k: Option<String>,
    /// Gap-power exponents, comma-separated.
    #[arg(long)]
    lambda: Option<String>,
    /// Square-count centering: `exact` or `paper`.
    #[arg(long)]
    centering: Option<String>,
    /// Corollary-1 scales, comma-separated.
    #[arg(long)]
    x: Option<String>,
    /// Residue-class system JSON for omega-sets.
    #[arg(long)]
    classes: Option<PathBuf>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: `csv` or `json`.
    #[arg(long)]
    format: Option<String>,
    /// Oracle-pin manifest to assert against.
    #[arg(long)]
    pins: Option<PathBuf>,
    /// JSON config file (flags take precedence).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sieve memory cap in bits.
    #[arg(long = "mem-budget")]
    mem_budget: Option<u64>,
    /// Worker threads (env RESIDUE_LAB_THREADS as fallback; 0 = automatic).
    #[arg(long)]
    threads: Option<usize>,
}

impl CommonArgs {
    fn to_raw(&self) -> RawConfig {
        RawConfig {
            q: self.q,
            q_family: self.q_family.clone(),
            q_range: self.q_range.clone(),
            offsets: if self.offsets.is_empty() {
                None
            } else if self.offsets.len() == 1 {
                Some(serde_json::Value::String(self.offsets[0].clone()))
            } else {
                Some(serde_json::Value::Array(
                    self.offsets
                        .iter()
                        .map(|s| {
                            serde_json::Value::Array(
                                s.split(',')
                                    .filter_map(|t| t.trim().parse::<i64>().ok())
                                    .map(|v| serde_json::json!(v))
                                    .collect(),
                            )
                        })
                        .collect(),
                ))
            },
            h: self.h,
            h_grid: self.h_grid.clone(),
            k: self.k.clone(),
            lambda: self.lambda.clone(),
            centering: self.centering.clone(),
            x: self.x.clone(),
            classes: self.classes.clone(),
            out: self.out.clone(),
            format: self.format.clone(),
            pins: self.pins.clone(),
            mem_budget: self.mem_budget,
            threads: self.threads,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check the indicator expansions against direct gcd evaluation.
    VerifyIdentities(CommonArgs),
    /// Exact window moments, expsum cross-checks, and bound ratios.
    Moments(CommonArgs),
    /// Cyclic gap power sums V_λ with Erdős-style ratios.
    Gaps(CommonArgs),
    /// Squares modulo q: window variance under both centerings.
    Squares(CommonArgs),
    /// General per-prime class systems with Weyl constants.
    OmegaSets(CommonArgs),
    /// The badly-distributed D* construction at scale X.
    Corollary1(CommonArgs),
    /// Primorial moment-ratio suite for the bound shapes.
    BoundsSweep(CommonArgs),
    /// Re-measure every pinned sweep and write the manifest.
    PinOracle(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VerifyIdentities(_) => "verify-identities",
            Command::Moments(_) => "moments",
            Command::Gaps(_) => "gaps",
            Command::Squares(_) => "squares",
            Command::OmegaSets(_) => "omega-sets",
            Command::Corollary1(_) => "corollary1",
            Command::BoundsSweep(_) => "bounds-sweep",
            Command::PinOracle(_) => "pin-oracle",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::VerifyIdentities(a)
            | Command::Moments(a)
            | Command::Gaps(a)
            | Command::Squares(a)
            | Command::OmegaSets(a)
            | Command::Corollary1(a)
            | Command::BoundsSweep(a)
            | Command::PinOracle(a) => a,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let args = cli.command.args();
    let file_cfg = match &args.config {
        Some(path) => match config::load_config_file(path) {
            Ok(f) => Some(f),
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
        },
        None => None,
    };
    let cfg = match config::resolve(name, args.to_raw(), file_cfg) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error: thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    let started = Instant::now();
    if name == "pin-oracle" {
        return match pool.install(|| experiments::pin_oracle(&cfg)) {
            Ok(manifest) => {
                let doc = serde_json::to_value(&manifest).expect("manifest serializes");
                if let Err(e) = output::write_json_document(cfg.out.as_deref(), &doc) {
                    eprintln!("io error: {e}");
                    return ExitCode::from(2);
                }
                eprintln!(
                    "pinned {} sweep extremes in {} ms",
                    manifest.pins.len(),
                    started.elapsed().as_millis()
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(2)
            }
        };
    }
    match pool.install(|| experiments::run(&cfg)) {
        Ok(outcome) => {
            let runtime_ms = started.elapsed().as_millis();
            if let Err(e) = output::write_to_destination(&cfg, &outcome.rows, runtime_ms) {
                eprintln!("io error: {e}");
                return ExitCode::from(2);
            }
            if outcome.violations.is_empty() {
                ExitCode::SUCCESS
            } else {
                for v in &outcome.violations {
                    eprintln!("assertion failed: {v}");
                }
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
