use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed edge line {text:?}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        text: String,
    },

    #[error("{0}: edge list contains no edges")]
    EmptyGraph(PathBuf),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("node {0} is outside the graph")]
    UnknownNode(u64),

    #[error("trigger count {trigger} exceeds node count {n}")]
    UnreachableTrigger { trigger: usize, n: usize },

    #[error("infeasible requirement: {0}")]
    Infeasible(String),

    #[error(
        "sample cap exceeded for threshold {threshold}: {samples} samples requested (cap {cap}); \
         coverage {coverage} < {gamma:.1} with budget {budget}"
    )]
    SampleCapExceeded {
        threshold: usize,
        samples: usize,
        cap: usize,
        coverage: usize,
        gamma: f64,
        budget: usize,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
