use std::path::PathBuf;

/// Errors produced anywhere in the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("{op} requires a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("matrix has a non-negligible imaginary part ({max_imag:e})")]
    NotReal { max_imag: f64 },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// A measure-zero channel event (vanishing block, aligned interference).
    #[error("degenerate channel draw: {0}")]
    Degenerate(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("exhaustive search over {size} hypotheses exceeds the cap of {cap}; use fewer users, symbols, or a smaller constellation")]
    SearchTooLarge { size: u128, cap: u128 },

    #[error("need at least {needed} receive antennas for {users} users, got {antennas}")]
    InsufficientAntennas {
        users: usize,
        antennas: usize,
        needed: usize,
    },

    #[error("insufficient event count at x = {x}: {count} < {required}")]
    InsufficientCounts { x: f64, count: u64, required: u64 },

    #[error("invalid config field `{field}`: {msg}")]
    Config { field: &'static str, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
