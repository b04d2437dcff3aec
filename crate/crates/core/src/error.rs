use std::io;

use thiserror::Error;

use crate::autodiff::Dtype;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    Shape { op: &'static str, left: Vec<usize>, right: Vec<usize> },
    #[error("{op}: expected {expected:?} operand")]
    Dtype { op: &'static str, expected: Dtype },
    #[error("{0}: non-finite value")]
    NonFinite(&'static str),
    #[error("backward needs a real scalar root, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("backward root does not depend on any learnable leaf")]
    Detached,
    #[error("variable belongs to a different graph")]
    ForeignVar,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scene: {0}")]
    Scene(String),
    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },
    #[error("non-finite loss; first produced by op `{op}`")]
    NanLoss { op: &'static str },
    #[error("non-finite gradient for the {0} parameters")]
    NanGradient(&'static str),
    #[error("metric: {0}")]
    Metric(String),
    #[error("{0} already exists (use --force to overwrite)")]
    Exists(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
