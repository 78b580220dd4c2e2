//! Matching estimated components to reference components.

use nalgebra::{DMatrix, DVector, RealField};

use crate::scalar::{Complex, Real, Scalar};

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method).
///
/// Returns `assign` with `assign[row] = col`. Ties resolve toward the lowest
/// column index, so the result is deterministic.
pub fn hungarian<T: Real>(cost: &DMatrix<T>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "hungarian needs a square cost matrix");
    if n == 0 {
        return Vec::new();
    }
    let inf = T::of(f64::INFINITY);
    // 1-based potentials over rows (u) and columns (v); p[col] = row matched to col
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    assign
}

/// The three cube roots of unity, starting with 1.
pub fn cube_roots_of_unity<T: Real>() -> [Complex<T>; 3] {
    let h = T::of(0.5);
    let s = T::of(3f64.sqrt() / 2.0);
    [Complex::new(T::one(), T::zero()), Complex::new(-h, s), Complex::new(-h, -s)]
}

/// `min_τ ‖τ·a − b‖` over cube roots of unity `τ`.
pub fn cube_root_distance<S: Scalar>(a: &DVector<S>, b: &DVector<S>) -> S::Real {
    let a = to_complex(a);
    let b = to_complex(b);
    cube_roots_of_unity::<S::Real>()
        .iter()
        .map(|&t| (&a * t - &b).norm())
        .fold(<S::Real as Real>::of(f64::INFINITY), |m, e| m.min(e))
}

fn to_complex<S: Scalar>(v: &DVector<S>) -> DVector<Complex<S::Real>> {
    v.map(|z| Complex::new(z.re_part(), z.im_part()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorAlignment<T: Real> {
    /// `perm[k]` is the estimated component matched to reference component `k`.
    pub perm: Vec<usize>,
    /// `min_τ ‖τ p̂_perm[k] − p_k‖ / ‖p_k‖` per reference component.
    pub errors: Vec<T>,
}

impl<T: Real> FactorAlignment<T> {
    pub fn max_error(&self) -> T {
        self.errors.iter().fold(T::zero(), |m, &e| m.max(e))
    }
}

/// Aligns estimated factors to reference factors up to permutation and `τ³ = 1`.
pub fn align_factors<S: Scalar>(estimated: &[DVector<S>], reference: &[DVector<S>]) -> FactorAlignment<S::Real> {
    let r = reference.len();
    assert_eq!(estimated.len(), r, "factor counts differ");
    let rel = |a: &DVector<S>, b: &DVector<S>| {
        let scale = b.norm().max(<S::Real as Real>::eps());
        cube_root_distance(a, b) / scale
    };
    // cost[(ref, est)]
    let cost = DMatrix::from_fn(r, r, |k, e| rel(&estimated[e], &reference[k]));
    let perm = hungarian(&cost);
    let errors = (0..r).map(|k| cost[(k, perm[k])]).collect();
    FactorAlignment { perm, errors }
}

/// Matches estimated means to reference means minimizing `Σ ‖μ̂_π(i) − μ_i‖`.
///
/// Returns `perm` with `perm[i]` the estimated component matched to reference `i`.
pub fn align_means<T: Real>(estimated: &[DVector<T>], reference: &[DVector<T>]) -> Vec<usize> {
    let r = reference.len();
    assert_eq!(estimated.len(), r, "component counts differ");
    hungarian(&DMatrix::from_fn(r, r, |i, e| (&estimated[e] - &reference[i]).norm()))
}
