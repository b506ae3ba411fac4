use std::io;
use std::process::ExitCode;

use boasf::cli::{dispatch, Cli};
use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BOASF_LOG", "warn")).init();
    let cli = Cli::parse();
    let stdout = io::stdout();
    match dispatch(&cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("boasf: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
