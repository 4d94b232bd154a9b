//! `wgctl`: run, validate and collate waveguide-control experiments.
//!
//! Exit codes: 0 success, 1 an asserted invariant failed or the run failed,
//! 2 the configuration (or the run directory given to `report`) is invalid.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use waveguide_control::harness::{self, ExperimentConfig};

#[derive(Parser)]
#[command(name = "wgctl", version, about = "Controllability experiments on R^m x T^n waveguides")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "WGCTL_THREADS")]
    threads: Option<usize>,

    /// Log level (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output` in the config.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Collate one run directory, or a directory of runs, into a CSV bundle.
    Report {
        dir: PathBuf,
        /// Bundle directory, `<dir>/report` by default.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match cli.command {
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(cfg) => {
                println!("{}: ok ({})", config.display(), cfg.kind.label());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(2)
            }
        },
        Command::Run { config, output } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            let dir = output
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| PathBuf::from("runs").join(cfg.kind.label()));
            match harness::run(&cfg, &dir) {
                Ok(m) => {
                    for c in &m.invariants {
                        let tag = match (c.passed, c.asserted) {
                            (true, _) => "ok  ",
                            (false, true) => "FAIL",
                            (false, false) => "note",
                        };
                        println!("{tag} {}: {:e} (limit {:e})", c.name, c.value, c.limit);
                    }
                    if let Some(f) = &m.failure {
                        eprintln!("run failed: {f}");
                    }
                    println!("artifacts in {}", dir.display());
                    if m.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e @ waveguide_control::Error::Config { .. }) => {
                    eprintln!("{e}");
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Report { dir, output } => {
            let bundle = output.unwrap_or_else(|| dir.join("report"));
            match harness::report(&dir, &bundle) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
