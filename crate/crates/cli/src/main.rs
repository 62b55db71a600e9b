use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tdgl::config::{RunConfig, SchemeKind};
use tdgl::study::run_study;

/// Time-dependent Ginzburg-Landau runs and convergence studies.
#[derive(Debug, Parser)]
#[command(name = "tdgl", version)]
struct Args {
    /// Configuration file (TOML); built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overrides `output.dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Omit wall-clock timings so output files depend on the config only.
    #[arg(long)]
    deterministic: bool,
    /// Use this many levels, halving h from the coarsest configured one.
    #[arg(long, value_name = "N")]
    levels: Option<usize>,
    /// Override `discretization.scheme` (mixed | galerkin).
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<SchemeKind>,
}

fn parse_scheme(s: &str) -> Result<SchemeKind, String> {
    SchemeKind::parse(s).ok_or_else(|| format!("unknown scheme `{s}` (expected mixed or galerkin)"))
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn load(args: &Args) -> Result<RunConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            RunConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(dir) = &args.out {
        cfg.output.dir = dir.clone();
    }
    if args.deterministic {
        cfg.output.deterministic = true;
    }
    if let Some(s) = args.scheme {
        cfg.discretization.scheme = s;
    }
    if let Some(n) = args.levels {
        cfg = cfg.with_level_count(n).map_err(|e| e.to_string())?;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match load(&args) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run_study(&cfg) {
        Ok(report) => {
            if let Some(t) = &report.table {
                print!("{}", t.to_csv());
            }
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            ExitCode::from(EXIT_SOLVER)
        }
    }
}
