use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    #[error("model format error at layer {layer}: {message}")]
    ModelLayer { layer: usize, message: String },

    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error("shape mismatch between layer {from} and layer {to}: {message}")]
    LayerMismatch { from: usize, to: usize, message: String },

    #[error("unexpected end of stream")]
    UnexpectedEof,

    #[error("original image embedding is zero; cosine channel score is undefined")]
    ZeroEmbedding,

    #[error("cohort {label:?} has {count} maps; at least 2 are required")]
    CohortTooSmall { label: String, count: usize },

    #[error("cohort {label:?}: {message}")]
    InvalidCohort { label: String, message: String },

    #[error("group {group:?} has no {kind} scores")]
    EmptyGroup { group: String, kind: &'static str },

    #[error("at least two groups are required for fairness analysis, got {0}")]
    TooFewGroups(usize),

    #[error(
        "unresolvable target FMR {target}: needs at least {required} imposter scores, have {available}"
    )]
    UnresolvableTarget { target: f64, required: u64, available: usize },

    #[error("unresolvable target FMR {target}: {ties} imposter scores tie at the maximum {score}")]
    TiedMaximum { target: f64, ties: usize, score: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("amap archive: bad magic")]
    BadMagic,

    #[error("amap archive: unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("amap archive record {record}: {message}")]
    Record { record: usize, message: String },

    #[error("scores csv line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("render: {0}")]
    Render(String),
}

impl From<std::io::Error> for Error {
    fn from(source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::UnexpectedEof {
            return Error::UnexpectedEof;
        }
        Error::Io { context: "i/o".into(), source }
    }
}

pub(crate) trait IoContext<T> {
    fn io_context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> IoContext<T> for std::result::Result<T, std::io::Error> {
    fn io_context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| Error::Io { context: context(), source })
    }
}
