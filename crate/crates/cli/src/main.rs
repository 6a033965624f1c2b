use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mflab::bounds_cmd::{evaluate, Calculator};
use mflab::{exit, report, run_file, CliError, Overrides};

#[derive(Debug, Parser)]
#[command(name = "mflab", version, about = "Mean-field Langevin laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Rebuild the summary and plot data of a result directory.
    Report {
        dir: PathBuf,
    },
    /// Evaluate a closed-form bound and print JSON.
    Bounds {
        #[command(subcommand)]
        calculator: Calculator,
    },
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG as u8 } else { 0 });
        }
    };
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            workers,
        } => match run_file(&config, &Overrides { out, seed, workers }) {
            Ok(r) => {
                for i in &r.manifest.invariants {
                    println!("{} {}  {}", if i.passed { "pass" } else { "FAIL" }, i.name, i.detail);
                }
                println!("results in {}", r.dir.display());
                ExitCode::from(r.exit_code() as u8)
            }
            Err(e) => fail(e),
        },
        Command::Report { dir } => match report::render(&dir) {
            Ok(s) => {
                print!("{s}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Bounds { calculator } => match evaluate(&calculator) {
            Ok(v) => {
                println!("{}", serde_json::to_string_pretty(&v).expect("json values serialize"));
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
