use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "entroq", version, about = "Run and validate entroq verification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment and write its artifacts and manifest.
    Run { config: PathBuf },
    /// List the available experiments.
    List,
    /// Check a config without running anything.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match entroq_cli::thread_limit(std::env::var("ENTROQ_THREADS").ok().as_deref()) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code());
        }
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("global pool is configured once");
    }
    match cli.command {
        Command::List => {
            print!("{}", entroq_cli::listing());
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match entroq_cli::load(&config) {
            Ok(_) => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(e.exit_code())
            }
        },
        Command::Run { config } => match entroq_cli::run(&config) {
            Ok(summary) => {
                for c in summary.manifest["checks"].as_array().into_iter().flatten() {
                    let verdict = if c["pass"].as_bool() == Some(true) { "PASS" } else { "FAIL" };
                    println!("{verdict} {} = {}", c["name"].as_str().unwrap_or("?"), c["measured"]);
                }
                println!("manifest: {}", summary.manifest_path.display());
                if summary.passed {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(e.exit_code())
            }
        },
    }
}
