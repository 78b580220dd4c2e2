use std::cmp::Ordering;

use nalgebra::linalg::Schur;
use nalgebra::{ComplexField, DMatrix, DVector};
use num_traits::Zero;

use crate::scalar::{Complex, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair<T: Real> {
    pub value: Complex<T>,
    /// Unit 2-norm, phase fixed so the largest-modulus entry is real positive.
    pub vector: DVector<Complex<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition<T: Real> {
    /// Sorted by real part, then imaginary part.
    pub pairs: Vec<EigenPair<T>>,
    /// Smallest pairwise eigenvalue distance.
    pub min_gap: T,
    /// Some pair of eigenvectors is numerically parallel.
    pub defective: bool,
}

impl<T: Real> EigenDecomposition<T> {
    pub fn values(&self) -> Vec<Complex<T>> {
        self.pairs.iter().map(|p| p.value).collect()
    }
}

/// Eigen-decomposition of a general complex square matrix.
///
/// Complex Schur form `M = Q T Qᴴ` followed by back substitution on the
/// triangular factor for each eigenvector.
pub fn eig_general<T: Real>(m: &DMatrix<Complex<T>>) -> EigenDecomposition<T> {
    let k = m.nrows();
    assert_eq!(k, m.ncols(), "eig_general needs a square matrix");
    if k == 0 {
        return EigenDecomposition { pairs: Vec::new(), min_gap: T::zero(), defective: false };
    }
    let (q, t) = Schur::new(m.clone()).unpack();
    let scale = t.norm();
    let small = T::eps() * scale.max(T::one());

    let mut pairs = Vec::with_capacity(k);
    for col in 0..k {
        let lambda = t[(col, col)];
        let mut y = DVector::<Complex<T>>::zeros(k);
        y[col] = Complex::new(T::one(), T::zero());
        for i in (0..col).rev() {
            let mut acc = Complex::<T>::zero();
            for j in (i + 1)..=col {
                acc += t[(i, j)] * y[j];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.modulus() < small {
                denom = Complex::new(small, T::zero());
            }
            y[i] = -acc / denom;
        }
        let mut v = &q * y;
        normalize_phase(&mut v);
        pairs.push(EigenPair { value: lambda, vector: v });
    }
    pairs.sort_by(|a, b| {
        a.value
            .re
            .partial_cmp(&b.value.re)
            .unwrap_or(Ordering::Equal)
            .then(a.value.im.partial_cmp(&b.value.im).unwrap_or(Ordering::Equal))
    });

    let mut min_gap = T::of(f64::MAX);
    let mut defective = false;
    for a in 0..k {
        for b in (a + 1)..k {
            min_gap = min_gap.min((pairs[a].value - pairs[b].value).modulus());
            let overlap = pairs[a].vector.dotc(&pairs[b].vector).modulus();
            if overlap > T::one() - T::of(1e-6) {
                defective = true;
            }
        }
    }
    if k == 1 {
        min_gap = T::zero();
    }
    EigenDecomposition { pairs, min_gap, defective }
}

/// Scales to unit norm and rotates the largest-modulus entry onto the positive real axis.
pub(crate) fn normalize_phase<T: Real>(v: &mut DVector<Complex<T>>) {
    let nrm = v.norm();
    if nrm == T::zero() {
        return;
    }
    let mut best = 0;
    let mut best_mod = T::zero();
    for (i, z) in v.iter().enumerate() {
        let m = z.modulus();
        // strict comparison with a relative margin keeps ties on the first index
        if m > best_mod * (T::one() + T::of(1e-12)) {
            best = i;
            best_mod = m;
        }
    }
    let pivot = v[best];
    let phase = Complex::new(pivot.re / best_mod, -pivot.im / best_mod);
    for z in v.iter_mut() {
        *z = *z * phase / Complex::new(nrm, T::zero());
    }
    v[best] = Complex::new(v[best].re, T::zero());
}
