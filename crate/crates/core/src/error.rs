use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate polygon: {0}")]
    Degenerate(String),

    #[error("xml parse error at line {line}: {message}")]
    Xml { line: u32, message: String },

    #[error("json parse error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid document: {0}")]
    Invalid(String),

    #[error("dangling references: {}", .0.join(", "))]
    Dangling(Vec<String>),

    #[error("ontology error: {0}")]
    Ontology(String),

    #[error("unmapped tags: {}", .0.iter().map(|(c, t)| format!("({c}, {t:?})")).collect::<Vec<_>>().join(", "))]
    Unmapped(Vec<(String, String)>),

    #[error("unknown split {0:?}")]
    UnknownSplit(String),

    #[error("empty dataset: {0}")]
    Empty(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("dataset is not label-expanded")]
    NotExpanded,

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
