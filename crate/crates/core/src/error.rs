//! Error type shared across the crate.
//!
//! Contract violations (bad shapes, out-of-range arguments) panic;
//! recoverable runtime failures are reported through [`Error`]. The CLI
//! maps variants to exit codes: config/validation errors exit 1, I/O and
//! checkpoint errors exit 2, numeric faults exit 3.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or unknown key.
    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed or incomplete data file.
    #[error("data: {0}")]
    Data(String),

    /// Missing, corrupt, or version-mismatched checkpoint. Names the
    /// failing section when one is known.
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    /// NaN or infinity encountered where a finite value is required.
    #[error("numeric fault: {0}")]
    Numeric(String),

    /// Data cleaning removed every trajectory; the caller may retry with
    /// a lower threshold.
    #[error("no trajectories left after cleaning (threshold {threshold})")]
    EmptyAfterCleaning { threshold: i32 },
}
