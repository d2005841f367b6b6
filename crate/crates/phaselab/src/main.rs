use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use phaselab::config::ExperimentConfig;
use phaselab::runner;

#[derive(Parser)]
#[command(name = "phaselab", about = "Covariant phase-space measurement laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config file.
    Run {
        /// Path to the config file.
        config: PathBuf,
        /// Override config keys via dotted paths, e.g. --set state.family=number
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory (overrides out_dir in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_overrides(set: &[String]) -> Result<Vec<(String, String)>, String> {
    set.iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| format!("--set '{s}' is not KEY=VALUE"))
        })
        .collect()
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("PHASELAB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, set, out } => {
            let overrides = match parse_overrides(&set) {
                Ok(o) => o,
                Err(msg) => return fail("config-error", &msg),
            };
            let mut cfg = match ExperimentConfig::from_file(&config, &overrides) {
                Ok(c) => c,
                Err(e) => return fail(e.kind(), &e.to_string()),
            };
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            match runner::run(&cfg) {
                Ok(report) => {
                    println!(
                        "ok: wrote {} ({} files)",
                        cfg.out_dir.display(),
                        std::fs::read_dir(&cfg.out_dir).map(|d| d.count()).unwrap_or(0)
                    );
                    let _ = report;
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e.kind(), &e.to_string()),
            }
        }
    }
}

fn fail(kind: &str, message: &str) -> ExitCode {
    let err = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{err}");
    ExitCode::FAILURE
}
