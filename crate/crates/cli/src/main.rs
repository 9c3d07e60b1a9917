use std::process::ExitCode;

use clap::Parser;
use nskrig_cli::{run, Args, CliError};

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("NSKRIG_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("NSKRIG_THREADS must be a positive integer, got \"{v}\"")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let args = Args::parse();
    let result = configure_threads()
        .and_then(|_| args.resolve())
        .and_then(|(mode, cfg)| run::run(mode, &cfg));
    match result {
        Ok(written) => {
            for p in written {
                log::info!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.report_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
