use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("label {label} out of range for dimension {d}")]
    IndexOutOfRange { label: usize, d: usize },

    #[error("labels ({0}, {1}, {2}) are not pairwise distinct")]
    NotDistinct(usize, usize, usize),

    #[error("dimension {d} has no pairwise-distinct triples (need d >= 3)")]
    EmptyOmega { d: usize },

    #[error("dimension must be at least {min}, got {d}")]
    DimensionTooSmall { d: usize, min: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("invalid flattening view: {0}")]
    InvalidView(String),

    #[error("rank {r} is too large for dimension {d}: need 1 <= r <= d/2 - 1 (max {max})")]
    RankTooLarge { r: usize, d: usize, max: usize },

    #[error("label {label} outside the admissible range {lo}..={hi}")]
    LabelRange { label: usize, lo: usize, hi: usize },

    #[error("N(xi) has repeated eigenvalues after {attempts} draws of xi")]
    RepeatedEigenvalues { attempts: usize },

    #[error("degenerate component {index}: {reason}")]
    DegenerateComponent { index: usize, reason: String },

    #[error("eigenvectors of N(xi) are numerically dependent (rank {rank} < {r})")]
    DependentEigenvectors { rank: usize, r: usize },

    #[error("non-finite value in input: {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

/// `r_max = floor(d/2) - 1`, the largest rank the generating-matrix systems support.
pub fn max_rank(d: usize) -> usize {
    (d / 2).saturating_sub(1)
}

pub fn check_rank(d: usize, r: usize) -> Result<()> {
    let max = max_rank(d);
    if r == 0 || r > max {
        return Err(Error::RankTooLarge { r, d, max });
    }
    Ok(())
}
