//! Run configuration schema and bounds validation.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Documented parameter caps; exceeding them is a configuration error.
pub const MAX_RADIUS: i64 = 64;
pub const MAX_WINDOW: i64 = 64;
pub const MAX_DEPTH: usize = 32;
pub const MAX_EDIM: usize = 32;

#[derive(Debug, Error)]
pub enum CliError {
    /// Schema violations and out-of-bounds parameters (exit code 2).
    #[error("config error: {0}")]
    Config(String),
    /// A computation failed or a check did not pass (exit code 1).
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

impl std::str::FromStr for OutputFormat {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "text" => Ok(OutputFormat::Text),
            other => Err(CliError::Config(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Halfplane,
    Psi,
    Diagram,
    Operator,
    Field,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: Option<OutputFormat>,
    #[serde(default)]
    pub path: Option<String>,
}

/// A parsed run configuration: a command, its parameter object, and an
/// optional output spec (command-line flags take precedence).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub parameters: Value,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("bad config: {e}")))
    }
}

pub fn require_bound(name: &str, value: i64, min: i64, max: i64) -> Result<(), CliError> {
    if value < min || value > max {
        return Err(CliError::Config(format!(
            "parameter {name:?} = {value} outside the documented bounds [{min}, {max}]"
        )));
    }
    Ok(())
}
