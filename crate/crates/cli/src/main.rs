mod commands;
mod config;
mod error;

use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = config::build_cli().get_matches();
    let (name, sub) = matches.subcommand().expect("a subcommand is required");
    let result = config::Resolved::from_matches(name, sub, &matches).and_then(|r| commands::run(name, &r));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
