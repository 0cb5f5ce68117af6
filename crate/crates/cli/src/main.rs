use clap::{Parser, Subcommand};
use hma_cli::error::{CliError, Result};
use hma_cli::output::{to_json, write_report_dir};
use hma_cli::run::run_file;
use hma_cli::suites::{run_suite, SuiteName, SuiteOptions};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "hma", version, about = "Hermitian Monge-Ampère grid solvers and verification suites")]
struct Cli {
    /// Worker threads for independent corpus problems (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem described by a TOML configuration.
    Run {
        config: PathBuf,
        /// Report directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in verification battery.
    Suite {
        /// comparison, stability, energy, capacity, holder or all.
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out/suite")]
        out: PathBuf,
        /// Restrict the corpus to one complex dimension.
        #[arg(long)]
        dim: Option<usize>,
    },
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, out } => {
            let (output, dir) = run_file(&config, out.as_deref())?;
            summarize(output.report.verdicts.iter().map(|v| (v.name.as_str(), v.passed)));
            eprintln!("report written to {}", dir.display());
            Ok(output.passed())
        }
        Command::Suite { name, seed, out, dim } => {
            let suite = SuiteName::parse(&name)?;
            let start = Instant::now();
            let result = run_suite(suite, &SuiteOptions { seed, dim })?;
            let mut timings = serde_json::Map::new();
            timings.insert("total_seconds".into(), start.elapsed().as_secs_f64().into());
            for (k, t) in &result.timings {
                timings.insert(k.clone(), (*t).into());
            }
            write_report_dir(&out, &to_json(&result.report)?, &to_json(&timings)?, &result.tables)?;
            summarize(result.report.all_verdicts().map(|v| (v.name.as_str(), v.passed)));
            eprintln!("report written to {}", out.display());
            Ok(result.report.passed)
        }
    }
}

fn summarize<'a>(verdicts: impl Iterator<Item = (&'a str, bool)>) {
    let (mut pass, mut fail) = (0usize, 0usize);
    for (name, ok) in verdicts {
        if ok {
            pass += 1;
        } else {
            fail += 1;
            eprintln!("FAIL {name}");
        }
    }
    eprintln!("{pass} passed, {fail} failed");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let threads = cli.threads;
    let body = move || execute(cli);
    let result = match threads {
        Some(0) => Err(CliError::Config("--threads must be positive".into())),
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(body),
            Err(e) => Err(CliError::Config(format!("cannot build thread pool: {e}"))),
        },
        None => body(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
