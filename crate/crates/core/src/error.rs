use std::fmt;

use crate::annotation::{Concept, ObjLevel};

/// Which side of a binary concept partition came up empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Positive,
    Negative,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Positive => f.write_str("positive"),
            Side::Negative => f.write_str("negative"),
        }
    }
}

/// Broad failure category, used by drivers to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Input could not be read or decoded.
    Parse,
    /// Input decoded but breaks a data-model invariant.
    Invariant,
    /// A call precondition does not hold (too few samples, missing class, ...).
    Precondition,
    /// An optimizer diverged.
    Numeric,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: {reason}")]
    InvariantViolation { line: usize, reason: String },
    #[error("film {film}: clips {first} and {second} overlap")]
    OverlappingClips {
        film: String,
        first: String,
        second: String,
    },
    #[error("film {film}: duplicate clip id {clip}")]
    DuplicateClip { film: String, clip: String },
    #[error("embedding file does not start with the OBYEMB01 magic")]
    BadMagic,
    #[error("clip {clip}: expected {expected} components, found {found}")]
    DimensionMismatch {
        clip: String,
        expected: usize,
        found: usize,
    },
    #[error("clip {clip}: component {index} is not finite")]
    NonFiniteValue { clip: String, index: usize },
    #[error("duplicate embedding row for clip {0}")]
    DuplicateEmbedding(String),
    #[error("no embedding for clip {0}")]
    MissingEmbedding(String),
    #[error("frame token matrix is empty")]
    EmptyMatrix,
    #[error("span of film {span_film} projected onto clips of film {clip_film}")]
    FilmMismatch {
        span_film: String,
        clip_film: String,
    },
    #[error("annotators were projected onto different clip sets")]
    ClipSetMismatch,
    #[error("overlap threshold {0} is outside (0, 1]")]
    BadThreshold(f64),
    #[error("sequences have different lengths ({expected} vs {found})")]
    LengthMismatch { expected: usize, found: usize },
    #[error("agreement needs at least two annotators, got {0}")]
    FewerThanTwoAnnotators(usize),
    #[error("expected disorder is zero while observed disorder is {observed}")]
    DegenerateNull { observed: f64 },
    #[error("empty input")]
    EmptyInput,
    #[error("every clip was dropped")]
    AllDropped,
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("input matrix contains a non-finite value at row {row}")]
    NonFiniteInput { row: usize },
    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("both fractions are zero")]
    BothZero,
    #[error("fraction {0} is outside [0, 1]")]
    BadFraction(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("concept {concept}: {side} set is empty")]
    EmptyClass { concept: Concept, side: Side },
    #[error("class {class} has {count} samples, fewer than the {folds} folds")]
    ClassTooSmall {
        class: String,
        count: usize,
        folds: usize,
    },
    #[error("class {0} is absent from the labels")]
    MissingClass(ObjLevel),
    #[error("no training data for the requested task")]
    NoTrainData,
    #[error("film {0} is assigned to more than one split")]
    FilmOverlap(String),
    #[error("film {0} has no clips")]
    EmptyFilm(String),
    #[error("success labels are degenerate ({0})")]
    DegenerateTarget(&'static str),
    #[error("model document: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            MalformedRecord { .. } | BadMagic | ModelFormat(_) | Io(_) => ErrorKind::Parse,
            InvariantViolation { .. }
            | OverlappingClips { .. }
            | DuplicateClip { .. }
            | DimensionMismatch { .. }
            | NonFiniteValue { .. }
            | DuplicateEmbedding(_)
            | FilmMismatch { .. }
            | ClipSetMismatch
            | LengthMismatch { .. }
            | Shape(_) => ErrorKind::Invariant,
            NonFiniteLoss { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Precondition,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
