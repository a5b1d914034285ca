//! Batch pipelines over trade, GDP and recession tables.
//!
//! Exit codes: 0 success, 2 input or parse error, 3 empty or degenerate
//! result, 4 non-convergence.

use std::fmt;

pub mod args;
pub mod commands;
pub mod output;

pub use args::{Cli, Command, Options};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "TRADE_TOPOLOGY_THREADS";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub const INPUT: i32 = 2;
    pub const EMPTY: i32 = 3;
    pub const CONVERGENCE: i32 = 4;

    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            code: Self::INPUT,
            message: message.into(),
        }
    }

    pub fn empty(message: impl Into<String>) -> Self {
        Failure {
            code: Self::EMPTY,
            message: message.into(),
        }
    }

    pub fn convergence(message: impl Into<String>) -> Self {
        Failure {
            code: Self::CONVERGENCE,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match commands::dispatch(cli.command, &cli.opts) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}
