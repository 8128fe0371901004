mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use critmorse_core::Verdict;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| commands::run(&cli)) {
        Ok(Verdict::Fail) if cli.strict => ExitCode::from(1),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
