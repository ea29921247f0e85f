// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad or inconsistent input data.
    Input,
    /// Training diverged or produced non-finite values.
    Numerical,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: JSON error at line {line}, column {column}: {message}")]
    Json {
        context: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("tech library: {0}")]
    Library(String),
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: reference to undeclared net `{net}`")]
    UndeclaredNet {
        line: usize,
        column: usize,
        net: String,
    },
    #[error("net `{net}` has multiple drivers: {first} and {second}")]
    MultipleDrivers {
        net: String,
        first: String,
        second: String,
    },
    #[error("instance `{instance}` uses library cell `{cell}` which is not in the tech library")]
    UnmappedCell { instance: String, cell: String },
    #[error("instance `{instance}` ({cell}): {message}")]
    PinMismatch {
        instance: String,
        cell: String,
        message: String,
    },
    #[error("unknown node id {0}")]
    UnknownNode(usize),
    #[error("node {0} is not a register")]
    NotARegister(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite gradient: {0}")]
    NonFiniteGradient(String),
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint checksum mismatch")]
    Checksum,
    #[error("schema mismatch: expected `{expected}`, found `{found}`")]
    Schema { expected: String, found: String },
    #[error("register names differ between prediction and ground truth: {0:?}")]
    NameMismatch(Vec<String>),
    #[error("leave-one-out needs at least 2 designs, got {0}")]
    TooFewDesigns(usize),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NonFiniteGradient(_) | Error::Divergence { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Input,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, err: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
