use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use silkforge_cli::cli::Cli;
use silkforge_cli::{commands, error_json, exit_code};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let text: Vec<&str> = msg
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:"))
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("{}", error_json("UsageError", text.join(" ").trim_start_matches("error: ")));
            return ExitCode::from(1);
        }
    };
    match commands::run(cli.command) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(e.tag(), &e.to_string()));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
