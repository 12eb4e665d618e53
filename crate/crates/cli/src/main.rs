//! Command-line front end for the noiseforge pipeline.
//!
//! Every data-producing subcommand writes a JSON manifest next to its primary
//! output (`<out>.manifest.json`) recording parameters, seed, and SHA-256
//! digests of inputs and outputs. Reruns with identical flags and seeds
//! produce byte-identical data files.
//!
//! Exit codes: 0 success, 2 argument errors, 1 runtime errors. Log verbosity
//! comes from the NOISEFORGE_LOG environment variable (error|warn|info|debug).

mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use commands::Cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("NOISEFORGE_LOG")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    return ExitCode::SUCCESS;
                }
                _ => 2,
            };
            eprint!("{err}");
            return ExitCode::from(code);
        }
    };

    if let Some(threads) = cli.threads {
        if let Err(err) = noiseforge::set_worker_threads(threads.max(1)) {
            eprintln!("error: {err}");
            return ExitCode::from(2);
        }
    }

    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let argumentish = err
                .downcast_ref::<noiseforge::Error>()
                .is_some_and(|e| matches!(e, noiseforge::Error::Argument(_)));
            ExitCode::from(if argumentish { 2 } else { 1 })
        }
    }
}
