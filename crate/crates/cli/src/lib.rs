//! Batch front end for `gensamplet`: atom files, example generators, the
//! binary basis container and the report pipeline behind the `gensamplet`
//! binary.

pub mod config;
pub mod container;
pub mod generate;
pub mod ingest;
pub mod pipeline;

pub use config::{GramChoice, RunConfig};
pub use container::{
    checksum_hex, load_basis, read_container, save_basis, write_container, Container,
};
pub use generate::{generate_example, Example, EXAMPLE_NAMES};
pub use ingest::{read_functionals, read_values, write_functionals, write_values};
pub use pipeline::{build, compression, run, CompressionStats, Verb};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{module}: {source}")]
    Core {
        module: &'static str,
        #[source]
        source: gensamplet::Error,
    },
}

impl CliError {
    /// 2 for bad input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core { source, .. } if source.is_numerical() => 3,
            _ => 2,
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn tag(module: &'static str) -> impl Fn(gensamplet::Error) -> CliError {
    move |source| CliError::Core { module, source }
}

pub type Result<T> = std::result::Result<T, CliError>;
