use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where in an input a parser gave up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    /// 1-based line number in a text input.
    Line(usize),
    /// Byte offset into a binary input.
    Offset(usize),
    /// Data block inside a sensor packet, with the byte offset of the block.
    Block { index: usize, offset: usize },
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Line(line) => write!(f, "line {line}"),
            Position::Offset(offset) => write!(f, "byte offset {offset}"),
            Position::Block { index, offset } => write!(f, "block {index} (byte offset {offset})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{position}: {message}")]
pub struct FormatError {
    pub position: Position,
    pub message: String,
}

impl FormatError {
    pub fn new(position: Position, message: impl Into<String>) -> Self {
        Self {
            position,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("direction is undefined for a zero-length or non-finite vector")]
    UndefinedDirection,

    #[error("origin lies inside the box footprint, angular extent is ambiguous")]
    AmbiguousExtent,

    #[error("range {range_m} m on channel {channel} outside ({min_m}, {max_m}]")]
    RangeOutOfBounds {
        channel: usize,
        range_m: f64,
        min_m: f64,
        max_m: f64,
    },

    #[error("target has no points in the scan")]
    NoTargetPoints,

    #[error("removal ratio undefined: target has no points before the attack")]
    UndefinedRatio,

    #[error("box is behind the camera plane")]
    BehindCamera,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{0} set is empty")]
    EmptySet(&'static str),

    #[error("wavelength {0} nm outside the 700..=1050 nm band")]
    WavelengthOutOfBand(f64),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn unknown(kind: &'static str, name: impl Into<String>) -> Self {
        Error::Unknown {
            kind,
            name: name.into(),
        }
    }

    pub fn file(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::File {
            path: path.display().to_string(),
            source,
        }
    }
}
