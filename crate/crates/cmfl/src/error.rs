//! Error taxonomy shared by the whole crate.
//!
//! Three broad families matter operationally: configuration problems (caught
//! before a run starts), run aborts (a simulation stopped mid-flight), and
//! artifact I/O problems. The CLI maps them to stable exit codes.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Squared-distance floor below which two gradients count as identical and
/// reciprocal-distance scores are undefined.
pub const DEGENERATE_SQ_DIST: f64 = 1e-24;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, rejected before any round executes.
    #[error("config: {0}")]
    Config(String),

    /// Invalid arguments to a library call (empty batch, dimension mismatch, ...).
    #[error("domain: {0}")]
    Domain(String),

    /// Two gradients in a scoring round are numerically identical, so the
    /// reciprocal-distance score is undefined. `k` and `c` are positions in
    /// the scoring call's training/committee lists; `score_round` fills them
    /// in, a direct `score_pairwise` call reports (0, 0).
    #[error("degenerate score at training position {k}, committee position {c}: squared distance {dist_sq:e} < {DEGENERATE_SQ_DIST:e}")]
    DegenerateScore { k: usize, c: usize, dist_sq: f64 },

    /// A simulation stopped mid-flight (scoring collapse, non-finite update).
    #[error("run aborted at round {round}: {reason}")]
    RunAbort { round: usize, reason: String },

    /// A theory diagnostic could not produce a well-defined value.
    #[error("diagnostics: {0}")]
    Diagnostics(String),

    /// Malformed artifact file.
    #[error("parse: {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable process exit code: 2 config error, 3 run abort, 4 I/O.
    ///
    /// Parse failures count as config errors: the file was readable, its
    /// content is what's wrong. Exit 4 is reserved for filesystem failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Parse { .. } => 2,
            Error::DegenerateScore { .. } | Error::RunAbort { .. } | Error::Diagnostics(_) => 3,
            Error::Io(_) => 4,
        }
    }
}
