use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sedqm_cli::{default_output_dir, exit, exit_code, Experiment, RunConfig, Status, OUT_DIR_ENV};

/// Run a named sedqm experiment from a TOML configuration.
#[derive(Debug, Parser)]
#[command(name = "sedqm", version, about)]
struct Args {
    /// Configuration file; defaults apply to every missing field.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long, value_name = "DIR", env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
    /// Global seed (overrides the configuration).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Experiment to run (overrides the configuration).
    #[arg(long, value_enum, value_name = "NAME")]
    experiment: Option<Experiment>,
    /// Print the available experiments and exit.
    #[arg(long)]
    list_experiments: bool,
    /// Cap on worker threads.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list_experiments {
        for e in Experiment::ALL {
            println!("{:<16} {}", e.name(), e.summary());
        }
        return ExitCode::SUCCESS;
    }
    let code = run(args);
    ExitCode::from(code as u8)
}

fn run(args: Args) -> i32 {
    let mut config = match &args.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return exit::CONFIG_ERROR;
            }
        },
        None => RunConfig::default(),
    };
    if let Some(e) = args.experiment {
        config.experiment = e;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return exit::CONFIG_ERROR;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return exit::RUNTIME_ERROR;
        }
    }
    let out = args.out.or_else(|| config.output_dir.clone()).unwrap_or_else(|| default_output_dir(config.experiment));
    match sedqm_cli::run(&config, &out) {
        Ok(m) => {
            for c in &m.checks {
                println!("{:<5} {:<36} {:>14.6e}  ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.condition);
            }
            match m.status {
                Status::Error => eprintln!(
                    "error: stage `{}` failed: {}",
                    m.failed_stage.as_deref().unwrap_or("?"),
                    m.error.as_deref().unwrap_or("")
                ),
                _ => println!("{}: {:?}, outputs in {}", m.experiment, m.status, out.display()),
            }
            exit_code(&m)
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
