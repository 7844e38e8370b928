// Copyright 2026 The Fragility Developers
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

/// One point of a root-finding trajectory: (evaluated k, estimated reversal probability).
pub type TrajectoryPoint = (usize, f64);

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid 2x2 table: {0}")]
    InvalidTable(String),

    #[error("design matrix is rank deficient")]
    SingularDesign,

    #[error("logistic fit did not converge (separation or iteration limit)")]
    UnconvergedFit,

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("exact enumeration exceeds the budget of {limit} compositions")]
    CompositionBlowUp { limit: u64 },

    #[error("root finding failed: {message}")]
    Diagnostic {
        message: String,
        trajectory: Vec<TrajectoryPoint>,
    },
}

impl Error {
    /// True for failures caused by bad input rather than by the computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::InvalidTable(_)
                | Error::Io { .. }
                | Error::Parse { .. }
                | Error::SchemaMismatch(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
