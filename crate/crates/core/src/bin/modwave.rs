use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use modwave::experiment::{exit_code_for, run, write_report, ExperimentConfig, Stage};
use modwave::Error;

#[derive(Parser)]
#[command(name = "modwave", version, about = "Modified wave operators on the lattice: experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one stage (or all) of an experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// extend, classical, hj, evolve, cook, waveop or all.
        #[arg(long, default_value = "all")]
        stage: String,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Summarize a finished run directory.
    Report { run_dir: PathBuf },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    code(exit_code_for(e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, stage, out, seed, jobs } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            if let Some(o) = out {
                cfg.output.dir = o;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let stage: Stage = match stage.parse() {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            if let Some(n) = jobs {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("warning: {e}");
                }
            }
            match run(&cfg, stage) {
                Ok(outcome) => {
                    print!("{}", modwave::experiment::render_summary(&outcome.manifest));
                    println!("\nartifacts in {}", outcome.dir.display());
                    code(outcome.exit_code())
                }
                Err(e) => fail(&e),
            }
        }
        Command::Report { run_dir } => match write_report(&run_dir) {
            Ok((r, path)) => {
                print!("{}", r.summary);
                println!("\nreport written to {}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
    }
}
