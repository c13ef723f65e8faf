use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fnm::config::{load_config, RunConfig};
use fnm::experiment::run_experiment;

/// Shallow ReLU^k network solver for elliptic Dirichlet problems.
#[derive(Parser)]
#[command(name = "fnm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an n-sweep and write results.csv, table.txt and manifest.toml.
    Solve {
        /// Config file (or the manifest of an earlier run).
        #[arg(long)]
        config: PathBuf,
        /// Named parameter set; keys in the config file still override it.
        #[arg(long)]
        preset: Option<String>,
        /// Output directory, overriding `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; falls back to FNM_THREADS, then all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config file and print the resolved parameters.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        preset: Option<String>,
    },
}

fn read_config(path: &PathBuf, preset: Option<&str>) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    load_config(&text, preset).map_err(|e| format!("{}: {e}", path.display()))
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, String> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("FNM_THREADS") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| format!("FNM_THREADS must be a positive integer, got `{v}`")),
        Err(_) => Ok(None),
    }
}

fn solve(config: PathBuf, preset: Option<String>, out: Option<PathBuf>, threads: Option<usize>) -> Result<(), String> {
    let mut cfg = read_config(&config, preset.as_deref())?;
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(threads)? {
        if n == 0 {
            return Err("thread count must be positive".into());
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| e.to_string())?;
    eprintln!("{}: delta = {:e}, writing to {}", cfg.name, cfg.delta(), cfg.output.dir.display());
    let (_, art) = pool
        .install(|| {
            run_experiment(&cfg, &mut |r| {
                let h1 = r.errors.map(|e| format!("{:.4e}", e.h1_full)).unwrap_or_else(|| "-".into());
                eprintln!("  step {} n = {:4}  H1 error {h1}  ({:.1} s)", r.step, r.n, r.wall_ms / 1e3);
            })
        })
        .map_err(|e| e.to_string())?;
    print!("{}", std::fs::read_to_string(&art.table).map_err(|e| e.to_string())?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve {
            config,
            preset,
            out,
            threads,
        } => solve(config, preset, out, threads),
        Command::Validate { config, preset } => {
            read_config(&config, preset.as_deref()).map(|cfg| print!("{}", cfg.pinned().to_toml()))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
