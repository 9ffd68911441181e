mod args;
mod run;

use args::{Cli, Command, UsageError};
use clap::Parser;
use std::process::ExitCode;

/// Exit code for invalid invocations, matching clap's own parse errors.
const USAGE: u8 = 2;
/// Exit code for failures while running.
const RUNTIME: u8 = 1;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VHT_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => match a.into_spec() {
            Ok(spec) => run::execute(&spec),
            Err(e) => Err(e.into()),
        },
        Command::Gen(a) => run::generate(&a),
        Command::Plot(a) => run::plot(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}\n\nFor more information, try '--help'.");
            ExitCode::from(USAGE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(RUNTIME)
        }
    }
}
