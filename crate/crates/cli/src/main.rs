mod args;
mod commands;

use std::fmt;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use args::{Cli, Command};
use commands::Ctx;

/// Bad invocation detected after argument parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

fn seed_of(cmd: &Command) -> Option<u64> {
    match cmd {
        Command::Sweep(a) => Some(a.seed),
        Command::Train(a) => Some(a.seed),
        Command::Eval(a) => Some(a.seed),
        Command::Synth(a) => Some(a.seed),
        Command::Ingest(_) | Command::Rank(_) | Command::Monitor(_) => None,
    }
}

fn configure_threads(jobs: usize) -> anyhow::Result<()> {
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    #[cfg(not(feature = "parallel"))]
    if jobs > 1 {
        eprintln!("built without the parallel feature; --jobs {jobs} runs on one thread");
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    configure_threads(cli.jobs)?;
    let ctx = Ctx {
        format: cli.format,
        data_dir: cli.data_dir.as_deref(),
        run: json!({
            "tool": "labmine",
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed_of(&cli.command),
            "config": serde_json::to_value(cli)?,
        }),
    };
    match &cli.command {
        Command::Ingest(a) => commands::ingest(&ctx, a),
        Command::Rank(a) => commands::rank(&ctx, a),
        Command::Sweep(a) => commands::sweep(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Eval(a) => commands::evaluate(&ctx, a),
        Command::Monitor(a) => commands::monitor(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}\n\nFor more information, try '--help'.");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
    }
}
