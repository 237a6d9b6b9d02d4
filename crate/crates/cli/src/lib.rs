//! Library surface of the experiment runner, exposed for integration tests.

pub mod commands;
pub mod config;
pub mod table;

use commands::CommandError;
use config::ExperimentConfig;
use table::Table;

pub fn run_command(name: &str, cfg: &ExperimentConfig) -> Result<Table, CommandError> {
    match name {
        "existence" => commands::cmd_existence(cfg),
        "asymptotic" => commands::cmd_asymptotic(cfg),
        "simulate" => commands::cmd_simulate(cfg),
        "tune" => commands::cmd_tune(cfg),
        "compare" => commands::cmd_compare(cfg),
        other => Err(CommandError(format!(
            "unknown subcommand '{other}' (expected existence | asymptotic | simulate | tune | compare)"
        ))),
    }
}
