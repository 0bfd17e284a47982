//! Command-line companion to `hydrovibe-core`: file formats, the run
//! configuration, and the pipeline commands.
//!
//! The core crate computes; this crate owns everything that touches the
//! operating system: TOML configs, VWT1 artifact files, WAV output, CSV
//! reports, and the thread pool. Every command is a deterministic function
//! of its config, so rerunning one overwrites its outputs with identical
//! bytes.

pub mod commands;
pub mod config;
pub mod vwt1;
pub mod wav;

use std::path::PathBuf;

/// Top-level command errors; `category` keys the machine-parsable line the
/// binary prints on failure.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Configuration load or validation failure.
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    /// Filesystem failure, with the path that caused it.
    #[error("{}: {source}", path.display())]
    Io {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },
    /// Artifact container failure.
    #[error(transparent)]
    Container(#[from] vwt1::Vwt1Error),
    /// A command's input artifacts are missing.
    #[error("no {what} under `{}`; run `{producer}` first", dir.display())]
    MissingArtifacts {
        /// What was looked for.
        what: &'static str,
        /// Directory searched.
        dir: PathBuf,
        /// Command that would create it.
        producer: &'static str,
    },
    /// An artifact disagrees with the active config.
    #[error("artifact mismatch: {0}")]
    ArtifactMismatch(String),
    /// Numerical pipeline failure.
    #[error(transparent)]
    Compute(#[from] hydrovibe_core::eval::EvalError),
}

impl CliError {
    /// Stable failure category for scripts.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Container(vwt1::Vwt1Error::Io { .. }) => "io",
            CliError::Container(_) => "data",
            CliError::MissingArtifacts { .. } => "data",
            CliError::ArtifactMismatch(_) => "data",
            CliError::Compute(_) => "compute",
        }
    }
}

/// Shorthand for wrapping an io::Error with its path.
pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
