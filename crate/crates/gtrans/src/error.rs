//! Error type shared by every module.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown graphon id {0}; valid ids are 1..=10")]
    UnknownGraphon(u32),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("density shift must satisfy |lambda| <= 1, got {0}")]
    InvalidShift(f64),

    #[error("invalid perturbation bounds: lo ({lo}) > hi ({hi})")]
    InvalidBounds { lo: f64, hi: f64 },

    #[error("{context}: need at least {min} nodes, got {n}")]
    TooFewNodes {
        context: &'static str,
        n: usize,
        min: usize,
    },

    #[error("dimension mismatch in {context}: {left} vs {right}")]
    DimensionMismatch {
        context: &'static str,
        left: String,
        right: String,
    },

    #[error("matrix not symmetric (max |a_ij - a_ji| = {max_dev:e}, tolerance {tol:e})")]
    NotSymmetric { max_dev: f64, tol: f64 },

    #[error("matrix entry out of range: {value} at ({row}, {col}), expected {expected}")]
    EntryOutOfRange {
        value: f64,
        row: usize,
        col: usize,
        expected: &'static str,
    },

    #[error("infeasible marginals: total source mass {mu_sum} != total target mass {nu_sum}")]
    InfeasibleMarginals { mu_sum: f64, nu_sum: f64 },

    #[error("invalid marginals: {0}")]
    InvalidMarginals(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("coupling column {0} has zero mass (no source node matched this target node)")]
    DegenerateColumn(usize),

    #[error("completion rank {rank} must lie in 1..{n}")]
    InvalidRank { rank: usize, n: usize },

    #[error("AUC undefined: the masked set contains no {0}")]
    UndefinedAuc(&'static str),

    #[error("test ratio must lie in (0, 1), got {0}")]
    InvalidTestRatio(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed edge list at line {line}: {reason}")]
    MalformedEdgeList { line: usize, reason: String },

    #[error("malformed matrix csv at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, unwrapping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
