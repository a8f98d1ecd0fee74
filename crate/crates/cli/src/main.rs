mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match commands::run(cli.command) {
        Ok(commands::Status::Complete) => ExitCode::SUCCESS,
        Ok(commands::Status::Partial(failed)) => {
            eprintln!("netcausal: {failed} run(s) failed; see the written artifacts");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("netcausal: {err}");
            ExitCode::from(1)
        }
    }
}
