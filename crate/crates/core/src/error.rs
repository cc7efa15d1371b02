use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("zonotope is not full-dimensional (generator rank {rank} < dimension {dim})")]
    Degenerate { rank: usize, dim: usize },
    #[error("too few generators: {got} generators cannot describe a {dim}-dimensional zonotope")]
    TooFewGenerators { got: usize, dim: usize },
    #[error("matrix zonotope has {got} generators, above the vertex enumeration cap {cap}; reduce its order first")]
    VertexCapExceeded { got: usize, cap: usize },
    #[error("matrix is not full row rank (rank {rank} < {rows}); data is not persistently exciting: [X-; U-] must have full row rank")]
    RankDeficient { rank: usize, rows: usize },
    #[error("{0} problem is infeasible")]
    Infeasible(&'static str),
    #[error("{0} problem is unbounded")]
    Unbounded(&'static str),
    #[error("numerical failure in {0}")]
    Numerical(String),
    #[error("level {level} of the ROSC recursion is empty")]
    LevelInfeasible { level: usize },
    #[error("state lies outside every set of the controllable family")]
    OutsideFamily,
    #[error("Fourier-Motzkin elimination exceeded {cap} rows")]
    EliminationBlowUp { cap: usize },
    #[error("input {0} violates the input constraints")]
    InputViolation(String),
    #[error("trajectory data: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(op: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { op, expected, got })
    }
}
