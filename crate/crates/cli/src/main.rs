mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let argv = match config::expand_argv(std::env::args_os().collect()) {
        Ok(argv) => argv,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| commands::run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({
                "error": { "kind": e.kind(), "message": e.to_string() }
            });
            eprintln!("{line}");
            ExitCode::from(1)
        }
    }
}
