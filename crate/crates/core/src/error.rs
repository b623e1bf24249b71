use std::path::PathBuf;

use thiserror::Error;

use crate::shs::Diagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The model failed structural validation.
    #[error("invalid model: {}", join_diagnostics(.0))]
    InvalidModel(Vec<Diagnostic>),

    /// A linear system had no unique admissible solution.
    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("invalid parameter `{param}` = {value}: {reason}")]
    InvalidParams {
        param: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("event budget exceeded: {needed:.3e} expected events > cap {cap:.3e}")]
    EventBudget { needed: f64, cap: f64 },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    /// An evaluation failed for a specific parameter tuple.
    #[error("at {point}: {source}")]
    AtPoint {
        point: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", .path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("malformed csv row {row}: {reason}")]
    CsvFormat { row: usize, reason: String },
}

impl Error {
    /// True for errors caused by bad user input (parameters, config, sweep
    /// specification), as opposed to runtime or numerical failures.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::InvalidParams { .. } | Error::InvalidConfig(_) | Error::InvalidSweep(_) => true,
            Error::AtPoint { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

fn join_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
