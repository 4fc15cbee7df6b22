//! Command implementations behind the `cohdisc` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod selftest;
pub mod table;

pub use commands::Report;
pub use config::{Cli, Command, Flags, RunConfig};
pub use error::CliError;

/// Run one table-producing command; `None` for `selftest`, which prints its own report.
pub fn run_command(command: Command, cfg: &RunConfig) -> Option<Result<Report, CliError>> {
    Some(match command {
        Command::RiskCurve => commands::risk_curve(cfg),
        Command::Squeezing => commands::squeezing(cfg),
        Command::FiniteN => commands::finite_n(cfg),
        Command::EandFiniteN => commands::eand_finite_n(cfg),
        Command::Montecarlo => commands::montecarlo(cfg),
        Command::Twopoint => commands::twopoint(cfg),
        Command::Selftest => return None,
    })
}
