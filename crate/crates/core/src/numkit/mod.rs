//! Dense numerical primitives used by the decomposition and learning code.
//!
//! Every routine here is a pure function of its inputs: no shared state, no
//! randomness, and bitwise-identical output for identical input.

mod eig;
mod lm;
mod lstsq;
mod nnls;
mod rank;
mod simplex;

pub use eig::{eig_general, EigenDecomposition, EigenPair};
pub use lm::{lm_minimize, LeastSquaresProblem, LmOptions, LmReport, LmTermination};
pub use lstsq::{lstsq, LsqSolution, LsqSystem};
pub use nnls::{nnls, NnlsSolution};
pub use rank::{numeric_rank, RankEstimate, DEFAULT_RANK_TOL};
pub use simplex::{project_to_simplex, simplex_minimize, SimplexObjective, SimplexOptions, SimplexReport};
