use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cocycle_lab::{describe, run, write, CliError, JobConfig, Suite};

#[derive(Parser)]
#[command(name = "cocycle-lab", version, about = "Batch checks for matrix cocycles over subshifts of finite type")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured suites and write report.json and traces.csv.
    Run {
        config: PathBuf,
        /// Run a single suite instead of the configured ones.
        #[arg(long)]
        suite: Option<Suite>,
        /// Output directory, overriding `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for trial sampling, overriding `seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a summary of the configuration.
    Describe { config: PathBuf },
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Run { config, suite, out, seed } => {
            let mut cfg = JobConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            let job = cfg.build()?;
            let outcome = run(&job, suite)?;
            write(&outcome, &job.config.out_dir)?;
            let report = &outcome.report;
            for s in &report.stages {
                println!("{:<16} {:<15} {}", s.suite.name(), serde_json::to_value(s.status).expect("statuses serialize").as_str().unwrap_or_default(), s.note);
            }
            if let Some(v) = report.verdict {
                let kind = serde_json::to_value(v).expect("verdicts serialize");
                println!("verdict: {}", kind.as_str().unwrap_or_default());
            }
            println!("wrote {}", job.config.out_dir.join("report.json").display());
            Ok(report.passed)
        }
        Command::Describe { config } => {
            let job = JobConfig::load(&config)?.build()?;
            print!("{}", describe(&job));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("cocycle-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
