use thiserror::Error;

/// Errors produced by the library.
///
/// Variants are grouped by the exit-code class the CLI maps them to; see
/// [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("node id {id} out of range (num_nodes = {num_nodes})")]
    NodeOutOfRange { id: usize, num_nodes: usize },

    #[error("self-loop ({0}, {0}) is not allowed")]
    SelfLoop(usize),

    #[error("class {class} out of range for node {node} (num_classes = {num_classes})")]
    ClassOutOfRange {
        node: usize,
        class: usize,
        num_classes: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid distribution for {item}: {reason}")]
    InvalidDistribution { item: String, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0} is undefined: no items")]
    EmptySet(&'static str),

    #[error("edge ({0}, {1}) has no marginal")]
    MissingEdge(usize, usize),

    #[error("exact enumeration needs {states} states, cap is {cap}")]
    TooLarge { states: f64, cap: f64 },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable process exit code for the CLI.
    ///
    /// | code | class |
    /// |------|-------|
    /// | 1 | I/O |
    /// | 2 | usage (emitted by the argument parser) |
    /// | 3 | parse error in an input file |
    /// | 4 | validation error (ranges, dimensions, distributions, parameters) |
    /// | 5 | undefined metric requested (empty node or edge set) |
    /// | 6 | inference error (enumeration cap exceeded) |
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 1,
            Error::Parse { .. } | Error::Json(_) => 3,
            Error::NodeOutOfRange { .. }
            | Error::SelfLoop(_)
            | Error::ClassOutOfRange { .. }
            | Error::DimensionMismatch(_)
            | Error::InvalidDistribution { .. }
            | Error::InvalidParameter(_)
            | Error::MissingEdge(..) => 4,
            Error::EmptySet(_) => 5,
            Error::TooLarge { .. } => 6,
        }
    }
}
