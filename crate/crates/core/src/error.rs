// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors produced by the boxhash library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid hash parameters: {0}")]
    InvalidParams(String),

    #[error("hash index `{dimension}` out of range: {value}")]
    IndexOverflow { dimension: char, value: f64 },

    #[error("hash code field `{dimension}` = {value} outside [{min}, {max}]")]
    CodeOutOfRange {
        dimension: char,
        value: i64,
        min: i64,
        max: i64,
    },

    #[error("invalid detections: {0}")]
    InvalidDetections(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("serialization failed: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
