use thiserror::Error;

use crate::study::{ConfigError, RateError};
use crate::upscale::UpscaleError;

/// Top-level error of jobs, studies and the command line.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("config error at {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Upscale(#[from] UpscaleError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Io,
    Config,
    Solver,
    Hypothesis,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Io => 1,
            ErrorClass::Config => 2,
            ErrorClass::Solver => 3,
            ErrorClass::Hypothesis => 4,
        }
    }
}

impl Error {
    pub fn io(path: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Io { .. } => ErrorClass::Io,
            Error::Rate(RateError::TooFewRows { .. }) => ErrorClass::Solver,
            Error::Rate(_) => ErrorClass::Config,
            Error::Upscale(e) => match e {
                UpscaleError::Hypothesis { .. } => ErrorClass::Hypothesis,
                UpscaleError::Cell(_) | UpscaleError::Krylov(_) => ErrorClass::Solver,
                UpscaleError::Grid(crate::grid::GridError::PowerIterationStalled { .. }) => ErrorClass::Solver,
                UpscaleError::Grid(_)
                | UpscaleError::Filter(_)
                | UpscaleError::Field(_)
                | UpscaleError::KoOutOfRange(_)
                | UpscaleError::BadConstants { .. }
                | UpscaleError::EmptyAveragingBox { .. }
                | UpscaleError::DimensionMismatch(..) => ErrorClass::Config,
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class().exit_code()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::CellError;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::Config(ConfigError::new("k_o", "bad")).exit_code(), 2);
        assert_eq!(Error::Upscale(UpscaleError::Hypothesis { t: 1.0, limit: 0.5 }).exit_code(), 4);
        assert_eq!(Error::Upscale(UpscaleError::Cell(CellError::InvalidTime(-1.0))).exit_code(), 3);
        assert_eq!(Error::io("x", "missing").exit_code(), 1);
    }
}
