use nalgebra::{DMatrix, RealField};
use num_traits::Zero;

use crate::scalar::{Real, Scalar};

pub const DEFAULT_RANK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RankEstimate<T: Real> {
    /// Singular values strictly above `tol · σ_max`.
    pub rank: usize,
    /// Position of the largest ratio `σ_i / σ_{i+1}`, as a rank.
    pub gap_rank: usize,
    /// Descending.
    pub singular_values: Vec<T>,
}

/// Numeric rank by relative singular-value threshold, plus a gap diagnostic.
pub fn numeric_rank<S: Scalar>(m: &DMatrix<S>, tol: S::Real) -> RankEstimate<S::Real> {
    if m.is_empty() {
        return RankEstimate { rank: 0, gap_rank: 0, singular_values: Vec::new() };
    }
    let mut sv: Vec<S::Real> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let smax = sv[0];
    if smax <= S::Real::zero() {
        return RankEstimate { rank: 0, gap_rank: 0, singular_values: sv };
    }
    let cutoff = tol * smax;
    let rank = sv.iter().filter(|&&s| s > cutoff).count();

    // ratios against a floor so exact zeros do not produce infinities
    let floor = smax * <S::Real as Real>::eps() * <S::Real as Real>::of(1e-3);
    let mut gap_rank = sv.len();
    let mut best = <S::Real as Real>::of(1.0);
    for i in 0..sv.len().saturating_sub(1) {
        let ratio = sv[i] / sv[i + 1].max(floor);
        if ratio > best {
            best = ratio;
            gap_rank = i + 1;
        }
    }
    RankEstimate { rank, gap_rank, singular_values: sv }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn zero_matrix_has_rank_zero() {
        let est = numeric_rank(&DMatrix::<f64>::zeros(3, 4), 1e-6);
        assert_eq!(est.rank, 0);
    }

    #[test]
    fn outer_product_has_rank_one() {
        let u = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let v = DVector::from_vec(vec![0.5, 4.0, -1.0, 2.0]);
        let est = numeric_rank(&(&u * v.transpose()), 1e-6);
        assert_eq!(est.rank, 1);
        assert_eq!(est.gap_rank, 1);
    }

    #[test]
    fn example_flat_view_has_rank_two() {
        // F_{0ab} for a in {1,2}, b in {3,4,5} of 0.4·1⊗³ + 0.6·(1,-1,2,-1,2,3)⊗³
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -0.8, -1.4, -0.8, 2.8, 4.0]);
        // oracle: a 2x3 matrix has rank 2 iff some 2x2 minor is nonzero
        let minor = 1.0 * 2.8 - (-0.8) * (-0.8);
        assert!(f64::abs(minor) > 1e-3);
        assert_eq!(numeric_rank(&m, 1e-6).rank, 2);
    }

    #[test]
    fn gap_detects_noisy_rank() {
        let u = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, -1.0]);
        let v = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.0, 1.0, -1.0, 0.0, 3.0, 1.0]);
        let mut m = u * v;
        m[(0, 0)] += 1e-7;
        m[(2, 3)] -= 1e-7;
        let est = numeric_rank(&m, 1e-10);
        assert_eq!(est.rank, 4);
        assert_eq!(est.gap_rank, 2);
        assert_eq!(numeric_rank(&m, 1e-6).rank, 2);
    }
}
