use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;

use boxsearch_cli::{execute, is_usage_error, Cli, Outcome};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut out = BufWriter::new(io::stdout());
    let result = execute(cli, &mut out);
    let flushed = out.flush();
    match result {
        Ok(Outcome::Pass) if flushed.is_ok() => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Ok(Outcome::Pass) => {
            eprintln!("error: writing output failed");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_usage_error(&err) { 2 } else { 1 })
        }
    }
}
