use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid spec: {0}")]
    Spec(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("invalid config: {0}")]
    Graph(String),

    #[error("missing weight `{0}`")]
    MissingWeight(String),

    #[error("weight `{name}` has dims {found:?}, expected {expected:?}")]
    WeightShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("bad magic bytes {0:?}, expected \"GAAW\"")]
    BadMagic([u8; 4]),

    #[error("unsupported archive version {0}")]
    UnsupportedVersion(u16),

    #[error("archive truncated: {0}")]
    Truncated(String),

    #[error("duplicate weight name `{0}`")]
    DuplicateName(String),

    #[error("malformed archive: {0}")]
    Archive(String),

    #[error("image: {0}")]
    Image(String),

    #[error("labels: {0}")]
    Labels(String),

    #[error("label directory not found under {0}")]
    MissingLabelDir(PathBuf),

    #[error("need at least {k} boxes for k-means, found {found}; try a smaller k")]
    TooFewBoxes { k: usize, found: usize },

    #[error("empty label set")]
    EmptyLabels,

    #[error("non-finite gradient at index {0}")]
    NonFiniteGradient(usize),

    #[error("class id {id} outside the {count} known classes")]
    UnknownClass { id: usize, count: usize },

    #[error("predictions line {line}: {msg}")]
    Predictions { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
