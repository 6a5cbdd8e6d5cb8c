//! Command-line front end: run configuration, stage drivers and subcommands.

pub mod cli;
pub mod commands;
pub mod config;
pub mod pipeline;

use silkforge::{Error, ErrorKind};

/// Exit code for a failed command: 1 usage, 2 data or validation, 3 numeric.
pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numeric => 3,
    }
}

/// Single-line JSON error record for standard error.
pub fn error_json(tag: &str, message: &str) -> String {
    serde_json::json!({ "error": tag, "message": message }).to_string()
}
