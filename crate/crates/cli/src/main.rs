use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::{SecondsFormat, Utc};
use clap::Parser;
use occtime_cli::{render_summary, run, write_report, CliError, Experiment, RunConfig};

/// Time-of-occurrence experiments on finite-dimensional quantum models.
#[derive(Debug, Parser)]
#[command(name = "occtime", version)]
struct Args {
    /// Experiment to run.
    experiment: Experiment,

    /// Configuration file of `key = value` lines.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Main CSV output; defaults to `<experiment>.csv`.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Override a configuration key. Repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,

    /// Leave the timestamp out of the summary.
    #[arg(long)]
    no_timestamp: bool,

    /// Worker threads; defaults to the available parallelism.
    #[arg(long, value_name = "N")]
    threads: Option<NonZeroUsize>,
}

fn execute(args: &Args) -> Result<(), CliError> {
    let config = RunConfig::load(args.experiment, args.config.as_deref(), &args.params)?;
    let threads = args
        .threads
        .or_else(|| std::thread::available_parallelism().ok())
        .map_or(1, NonZeroUsize::get);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start {threads} threads: {e}")))?;
    let report = pool.install(|| run(&config))?;

    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", args.experiment)));
    let timestamp = (!args.no_timestamp).then(|| Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true));
    let written = write_report(&config, &report, &out, timestamp.as_deref())?;
    print!("{}", render_summary(&config, &report, timestamp.as_deref()));
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("occtime: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
