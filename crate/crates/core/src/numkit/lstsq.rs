use nalgebra::{DMatrix, DVector};
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// Overdetermined (or square) linear system `A x ≈ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LsqSystem<S: Scalar> {
    pub a: DMatrix<S>,
    pub b: DVector<S>,
}

impl<S: Scalar> LsqSystem<S> {
    pub fn new(a: DMatrix<S>, b: DVector<S>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::InvalidInput(format!("empty system matrix {}x{}", a.nrows(), a.ncols())));
        }
        if a.nrows() != b.len() {
            return Err(Error::LengthMismatch(format!("A has {} rows, b has {}", a.nrows(), b.len())));
        }
        Ok(Self { a, b })
    }

    /// Real 2×2-or-larger system from row-major data.
    pub fn from_rows(rows: usize, cols: usize, a: &[S], b: &[S]) -> Result<Self> {
        if a.len() != rows * cols {
            return Err(Error::LengthMismatch(format!("{} entries for a {rows}x{cols} matrix", a.len())));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, a), DVector::from_column_slice(b))
    }

    pub fn residual(&self, x: &DVector<S>) -> DVector<S> {
        &self.a * x - &self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqSolution<S: Scalar> {
    pub x: DVector<S>,
    /// Number of singular values above the cutoff.
    pub rank: usize,
    pub rank_deficient: bool,
}

/// Relative singular-value cutoff for the pseudo-inverse.
const RCOND: f64 = 1e-12;

/// Minimum-norm least-squares solution via the SVD.
///
/// Singular values at or below `1e-12 · σ_max` are treated as zero, so a
/// rank-deficient `A` yields the minimum-norm minimizer together with
/// `rank_deficient = true`.
pub fn lstsq<S: Scalar>(sys: &LsqSystem<S>) -> LsqSolution<S> {
    let k = sys.a.ncols();
    let svd = sys.a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd computed with u");
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let sigma = &svd.singular_values;
    let smax = sigma.iter().fold(S::Real::zero(), |m, &s| if s > m { s } else { m });
    let cutoff = smax * S::Real::of(RCOND);

    let utb = u.adjoint() * &sys.b;
    let mut x = DVector::<S>::zeros(k);
    let mut rank = 0;
    for (idx, &s) in sigma.iter().enumerate() {
        if s > cutoff && s > S::Real::zero() {
            rank += 1;
            let coef = utb[idx].unscale(s);
            x.axpy(coef, &v_t.row(idx).adjoint(), S::one());
        }
    }
    LsqSolution { x, rank, rank_deficient: rank < k }
}
