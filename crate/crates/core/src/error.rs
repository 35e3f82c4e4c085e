use thiserror::Error;

use crate::geometry::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExploreError {
    #[error("world file line {line}: {message}")]
    WorldParse { line: usize, message: String },

    #[error("ray origin ({}, {}) is not in free space", .0.x, .0.y)]
    InvalidOrigin(Vec2),

    #[error("lattice mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },

    #[error("position ({}, {}) left the safe control space", .0.x, .0.y)]
    SafetyViolation(Vec2),

    #[error("start position ({}, {}) is not in the safe planning space", .0.x, .0.y)]
    InvalidStart(Vec2),

    #[error("configuration error for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl ExploreError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        ExploreError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, err: std::io::Error) -> Self {
        ExploreError::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T, E = ExploreError> = std::result::Result<T, E>;
