//! Dense third-order symmetric tensors and their distinct-index (Ω) parts.
//!
//! A [`SymTensor3`] stores one value per unordered multiset `{i, j, k}` in a
//! packed lexicographic layout. An [`OmegaTensor`] stores only the entries
//! whose three labels are pairwise distinct; those are the entries a
//! third-order moment of a diagonal Gaussian mixture shares with its
//! mean-only part. Labels are 0-based.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::{Complex, Real, Scalar};

fn choose2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn choose3(n: usize) -> usize {
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

/// Number of unordered multisets of size 3 drawn from `d` labels, `C(d+2, 3)`.
pub fn multiset_count(d: usize) -> usize {
    choose3(d + 2)
}

/// Number of pairwise-distinct unordered triples, `C(d, 3)`.
pub fn omega_count(d: usize) -> usize {
    choose3(d)
}

/// Sorts a label triple into non-decreasing order after range checking.
pub fn canonical_triple(i1: usize, i2: usize, i3: usize, d: usize) -> Result<[usize; 3]> {
    for label in [i1, i2, i3] {
        if label >= d {
            return Err(Error::IndexOutOfRange { label, d });
        }
    }
    let mut t = [i1, i2, i3];
    t.sort_unstable();
    Ok(t)
}

/// Ordered-tuple multiplicity of a sorted triple: 6, 3 or 1.
pub fn multiplicity(t: [usize; 3]) -> usize {
    match (t[0] == t[1], t[1] == t[2]) {
        (true, true) => 1,
        (false, false) => 6,
        _ => 3,
    }
}

// Offset of sorted (i <= j <= k) in the packed multiset layout.
fn packed_offset(d: usize, i: usize, j: usize, k: usize) -> usize {
    let before_i = choose3(d + 2) - choose3(d - i + 2);
    let before_j = choose2(d - i + 1) - choose2(d - j + 1);
    before_i + before_j + (k - j)
}

// Offset of sorted (i < j < k) in the packed distinct layout.
pub(crate) fn omega_offset(d: usize, i: usize, j: usize, k: usize) -> usize {
    let before_i = choose3(d) - choose3(d - i);
    let before_j = choose2(d - i - 1) - choose2(d - j);
    before_i + before_j + (k - j - 1)
}

/// All sorted multisets `i <= j <= k < d` in storage order.
pub fn multisets(d: usize) -> impl Iterator<Item = [usize; 3]> {
    (0..d).flat_map(move |i| (i..d).flat_map(move |j| (j..d).map(move |k| [i, j, k])))
}

/// All strictly increasing triples `i < j < k < d` in storage order.
pub fn omega_triples(d: usize) -> impl Iterator<Item = [usize; 3]> {
    (0..d).flat_map(move |i| ((i + 1)..d).flat_map(move |j| ((j + 1)..d).map(move |k| [i, j, k])))
}

/// Dense symmetric order-3 tensor of dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor3<S> {
    d: usize,
    data: Vec<S>,
}

impl<S: Scalar> SymTensor3<S> {
    pub fn zeros(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::DimensionTooSmall { d, min: 1 });
        }
        Ok(Self { d, data: vec![S::zero(); multiset_count(d)] })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Packed values, one per multiset in [`multisets`] order.
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Result<S> {
        let [a, b, c] = canonical_triple(i, j, k, self.d)?;
        Ok(self.data[packed_offset(self.d, a, b, c)])
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: S) -> Result<()> {
        let [a, b, c] = canonical_triple(i, j, k, self.d)?;
        let off = packed_offset(self.d, a, b, c);
        self.data[off] = value;
        Ok(())
    }

    pub fn add_to(&mut self, i: usize, j: usize, k: usize, value: S) -> Result<()> {
        let [a, b, c] = canonical_triple(i, j, k, self.d)?;
        let off = packed_offset(self.d, a, b, c);
        self.data[off] += value;
        Ok(())
    }

    /// `(sorted triple, value)` pairs in storage order.
    pub fn iter(&self) -> impl Iterator<Item = ([usize; 3], S)> + '_ {
        multisets(self.d).zip(self.data.iter().copied())
    }

    /// `T = Σ_k λ_k v_k ⊗ v_k ⊗ v_k`.
    pub fn from_rank_one_sum(weights: &[S], vectors: &[DVector<S>]) -> Result<Self> {
        let d = rank_one_dim(weights.len(), vectors)?;
        let mut t = Self::zeros(d)?;
        for (slot, [i, j, k]) in t.data.iter_mut().zip(multisets(d)) {
            *slot = weights
                .iter()
                .zip(vectors)
                .fold(S::zero(), |acc, (&w, v)| acc + w * v[i] * v[j] * v[k]);
        }
        Ok(t)
    }

    /// Hilbert–Schmidt norm over all `d³` ordered index tuples.
    pub fn hs_norm(&self) -> S::Real {
        let mut acc = S::Real::zero();
        for (t, v) in self.iter() {
            acc += S::Real::of(multiplicity(t) as f64) * v.modulus_squared();
        }
        acc.sqrt()
    }

    /// Copies the pairwise-distinct entries.
    pub fn omega_extract(&self) -> Result<OmegaTensor<S>> {
        let mut out = OmegaTensor::zeros(self.d)?;
        for (slot, [i, j, k]) in out.data.iter_mut().zip(omega_triples(self.d)) {
            *slot = self.data[packed_offset(self.d, i, j, k)];
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::LengthMismatch(format!("dimensions {} and {}", self.d, other.d)));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Ok(Self { d: self.d, data })
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }
}

fn rank_one_dim<S>(n_weights: usize, vectors: &[DVector<S>]) -> Result<usize> {
    if n_weights != vectors.len() {
        return Err(Error::LengthMismatch(format!(
            "{} weights for {} vectors",
            n_weights,
            vectors.len()
        )));
    }
    let d = vectors.first().map(|v| v.len()).ok_or_else(|| Error::InvalidInput("no vectors".into()))?;
    if vectors.iter().any(|v| v.len() != d) {
        return Err(Error::LengthMismatch("vectors differ in length".into()));
    }
    Ok(d)
}

/// The distinct-index subtensor `F_Ω`: one value per triple `i < j < k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaTensor<S> {
    d: usize,
    data: Vec<S>,
}

impl<S: Scalar> OmegaTensor<S> {
    pub fn zeros(d: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::EmptyOmega { d });
        }
        Ok(Self { d, data: vec![S::zero(); omega_count(d)] })
    }

    /// Builds from packed values in [`omega_triples`] order.
    pub fn from_vec(d: usize, data: Vec<S>) -> Result<Self> {
        if d < 3 {
            return Err(Error::EmptyOmega { d });
        }
        if data.len() != omega_count(d) {
            return Err(Error::LengthMismatch(format!(
                "expected {} distinct-triple values, got {}",
                omega_count(d),
                data.len()
            )));
        }
        Ok(Self { d, data })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    fn offset(&self, i: usize, j: usize, k: usize) -> Result<usize> {
        let [a, b, c] = canonical_triple(i, j, k, self.d)?;
        if a == b || b == c {
            return Err(Error::NotDistinct(i, j, k));
        }
        Ok(omega_offset(self.d, a, b, c))
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Result<S> {
        Ok(self.data[self.offset(i, j, k)?])
    }

    /// Unchecked read for labels already known to be distinct and in range.
    #[inline]
    pub(crate) fn at(&self, i: usize, j: usize, k: usize) -> S {
        let mut t = [i, j, k];
        t.sort_unstable();
        debug_assert!(t[0] < t[1] && t[1] < t[2] && t[2] < self.d);
        self.data[omega_offset(self.d, t[0], t[1], t[2])]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: S) -> Result<()> {
        let off = self.offset(i, j, k)?;
        self.data[off] = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = ([usize; 3], S)> + '_ {
        omega_triples(self.d).zip(self.data.iter().copied())
    }

    /// `(Σ_k λ_k v_k^{⊗3})_Ω`, accumulated on distinct triples only.
    pub fn from_rank_one_sum(weights: &[S], vectors: &[DVector<S>]) -> Result<Self> {
        let d = rank_one_dim(weights.len(), vectors)?;
        let mut t = Self::zeros(d)?;
        for (slot, [i, j, k]) in t.data.iter_mut().zip(omega_triples(d)) {
            *slot = weights
                .iter()
                .zip(vectors)
                .fold(S::zero(), |acc, (&w, v)| acc + w * v[i] * v[j] * v[k]);
        }
        Ok(t)
    }

    /// `(Σ_k p_k^{⊗3})_Ω` for unweighted factors.
    pub fn from_cubes(vectors: &[DVector<S>]) -> Result<Self> {
        let ones = vec![S::one(); vectors.len()];
        Self::from_rank_one_sum(&ones, vectors)
    }

    /// Norm of the subtensor with each distinct triple counted for its 6 orderings.
    pub fn omega_norm(&self) -> S::Real {
        let sum = self.data.iter().fold(S::Real::zero(), |acc, v| acc + v.modulus_squared());
        (S::Real::of(6.0) * sum).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::LengthMismatch(format!("dimensions {} and {}", self.d, other.d)));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Ok(Self { d: self.d, data })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::LengthMismatch(format!("dimensions {} and {}", self.d, other.d)));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Ok(Self { d: self.d, data })
    }

    pub fn scale(&self, factor: S) -> Self {
        Self { d: self.d, data: self.data.iter().map(|&v| v * factor).collect() }
    }

    /// Matrix with entry `(a, b) = F_{0,a,b}` over disjoint nonzero label sets.
    pub fn flat_submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<FlatView<S>> {
        for &l in rows.iter().chain(cols) {
            if l == 0 {
                return Err(Error::InvalidView("label 0 cannot index a row or column".into()));
            }
            if l >= self.d {
                return Err(Error::IndexOutOfRange { label: l, d: self.d });
            }
        }
        if let Some(l) = rows.iter().find(|l| cols.contains(l)) {
            return Err(Error::InvalidView(format!("label {l} appears in both rows and columns")));
        }
        let has_dup = |s: &[usize]| s.iter().enumerate().any(|(n, l)| s[..n].contains(l));
        if has_dup(rows) || has_dup(cols) {
            return Err(Error::InvalidView("repeated label".into()));
        }
        let matrix = DMatrix::from_fn(rows.len(), cols.len(), |a, b| self.at(0, rows[a], cols[b]));
        Ok(FlatView { row_labels: rows.to_vec(), col_labels: cols.to_vec(), matrix })
    }
}

impl<T: Real> OmegaTensor<T> {
    pub fn to_complex(&self) -> OmegaTensor<Complex<T>> {
        OmegaTensor {
            d: self.d,
            data: self.data.iter().map(|&v| Complex::new(v, T::zero())).collect(),
        }
    }
}

impl<T: Real> OmegaTensor<Complex<T>> {
    /// True when every imaginary part is exactly zero.
    pub fn is_real(&self) -> bool {
        self.data.iter().all(|v| v.im == T::zero())
    }

    pub fn real_part(&self) -> OmegaTensor<T> {
        OmegaTensor { d: self.d, data: self.data.iter().map(|v| v.re).collect() }
    }
}

/// A fully known submatrix of the first-mode flattening, `F_{0,a,b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatView<S: Scalar> {
    pub row_labels: Vec<usize>,
    pub col_labels: Vec<usize>,
    pub matrix: DMatrix<S>,
}
