use thiserror::Error;

use crate::ObjectId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("degenerate shape: surface area is zero")]
    DegenerateShape,

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("unknown object `{0}`")]
    UnknownObject(ObjectId),

    #[error("duplicate object id `{0}`")]
    DuplicateObject(ObjectId),

    #[error("non-finite state in body `{0}`")]
    NonFinite(ObjectId),

    #[error("body sets differ between worlds")]
    MismatchedBodies,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("probability component `{component}` of `{object}` is not in (0, 1]")]
    InvalidProbability { object: ObjectId, component: &'static str },

    #[error("object `{0}` has no hypotheses and no previous pose")]
    NoHypotheses(ObjectId),

    #[error("exhaustive search over {0} combinations exceeds the guard of {1}")]
    SearchTooLarge(u128, u128),

    #[error("frame {frame}: {source}")]
    Frame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
