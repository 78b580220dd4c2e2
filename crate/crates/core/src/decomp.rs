//! Incomplete symmetric tensor decomposition and approximation from `F_Ω`.
//!
//! Labels run `0..=n` with `n = d − 1`. The rank `r` must satisfy
//! `1 ≤ r ≤ d/2 − 1`; label `0` is the homogenizing coordinate, labels
//! `1..=r` index `ṽ`, and labels `r+1..=n` index `w̃`.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{ComplexField, DMatrix, DVector};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_rank, Error, Result};
use crate::numkit::{
    eig_general, lm_minimize, lstsq, numeric_rank, LeastSquaresProblem, LmOptions, LsqSystem, RankEstimate,
};
use crate::scalar::{principal_cbrt, Complex, Real, Scalar};
use crate::symtensor::{omega_triples, OmegaTensor};

/// Extra draws of `ξ` allowed after the first one hits repeated eigenvalues.
pub const XI_REDRAWS: usize = 3;

/// Relative eigenvalue gap of `N(ξ)` below which `ξ` is redrawn.
const EIGEN_GAP_TOL: f64 = 1e-8;

/// The generating matrix `G`, one `r`-vector per pair `(i, j)`, `i ∈ [1, r]`, `j ∈ [r+1, n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingMatrix<T: Real> {
    pub r: usize,
    pub n: usize,
    /// `r × r(n−r)`; column `(i, j)` sits at `(i−1)(n−r) + (j−r−1)`.
    pub g: DMatrix<Complex<T>>,
    /// Per column, in the same order: its least-squares system was rank deficient.
    pub rank_deficient: Vec<bool>,
}

impl<T: Real> GeneratingMatrix<T> {
    pub fn column_index(&self, i: usize, j: usize) -> Result<usize> {
        check_labels(self.r, self.n, i, j)?;
        Ok((i - 1) * (self.n - self.r) + (j - self.r - 1))
    }

    pub fn column(&self, i: usize, j: usize) -> Result<DVector<Complex<T>>> {
        Ok(self.g.column(self.column_index(i, j)?).into_owned())
    }

    /// Pairs `(i, j)` in column order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        pairs(self.r, self.n)
    }
}

fn pairs(r: usize, n: usize) -> Vec<(usize, usize)> {
    (1..=r).flat_map(|i| (r + 1..=n).map(move |j| (i, j))).collect()
}

fn check_labels(r: usize, n: usize, i: usize, j: usize) -> Result<()> {
    if !(1..=r).contains(&i) {
        return Err(Error::LabelRange { label: i, lo: 1, hi: r });
    }
    if !(r + 1..=n).contains(&j) {
        return Err(Error::LabelRange { label: j, lo: r + 1, hi: n });
    }
    Ok(())
}

/// How the generic combination `N(ξ) = Σ ξ_l N_l` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionConfig<T: Real> {
    /// Fixed coefficients `ξ_{r+1..n}`; drawn uniformly on `[−1, 1]` when `None`.
    pub xi: Option<Vec<T>>,
    pub seed: u64,
}

impl<T: Real> Default for ProjectionConfig<T> {
    fn default() -> Self {
        Self { xi: None, seed: 0 }
    }
}

impl<T: Real> ProjectionConfig<T> {
    pub fn seeded(seed: u64) -> Self {
        Self { xi: None, seed }
    }

    pub fn fixed(xi: Vec<T>) -> Self {
        Self { xi: Some(xi), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenBundle<T: Real> {
    /// The `ξ` actually used.
    pub xi: Vec<T>,
    /// Eigenvalues of `N(ξ)`, ascending by real part.
    pub eigenvalues: Vec<Complex<T>>,
    /// Unit eigenvectors `ṽ_k` of `N(ξ)`.
    pub vtilde: Vec<DVector<Complex<T>>>,
    /// `(w̃_k)_{l−r} = ṽ_kᴴ N_l ṽ_k`.
    pub wtilde: Vec<DVector<Complex<T>>>,
    pub min_gap: T,
    /// Number of `ξ` draws used.
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFit<T: Real> {
    /// `β_k = λ_k γ_k`.
    pub beta: Vec<Complex<T>>,
    /// `θ_k = λ_k γ_k²`.
    pub theta: Vec<Complex<T>>,
    pub lambda: Vec<Complex<T>>,
    pub gamma: Vec<Complex<T>>,
}

/// A numerical condition met along the way that did not stop the computation.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// `A_ij` was rank deficient; the minimum-norm column was used.
    RankDeficientSystem { i: usize, j: usize },
    /// `N(ξ)` had (nearly) repeated eigenvalues for the first draws of `ξ`.
    XiRedrawn { attempts: usize },
    /// Refinement did not lower the Ω-residual; the unrefined factors are returned.
    RefinementRejected { unrefined: f64, refined: f64 },
}

impl Warning {
    /// Conditions under which the recovery guarantees no longer hold.
    pub fn is_degenerate(&self) -> bool {
        !matches!(self, Warning::XiRedrawn { .. })
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::RankDeficientSystem { i, j } => write!(f, "system A_{{{i},{j}}} is rank deficient"),
            Warning::XiRedrawn { attempts } => write!(f, "xi redrawn, {attempts} draws used"),
            Warning::RefinementRejected { unrefined, refined } => {
                write!(f, "refinement rejected (residual {refined:e} > {unrefined:e})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<T: Real> {
    pub r: usize,
    pub d: usize,
    /// `p_k` with `F ≈ Σ p_k^⊗3`.
    pub vectors: Vec<DVector<Complex<T>>>,
    /// Fitted `λ_k` and `γ_k`, paired with `vectors` (from the unrefined fit).
    pub lambda: Vec<Complex<T>>,
    pub gamma: Vec<Complex<T>>,
    /// `‖(Σ p_k^⊗3 − F)_Ω‖`.
    pub omega_residual: T,
    /// Ω-residual of the factors before refinement.
    pub unrefined_residual: T,
    pub refined: bool,
    pub xi: Vec<T>,
    pub warnings: Vec<Warning>,
}

impl<T: Real> Decomposition<T> {
    pub fn reconstruct_omega(&self) -> Result<OmegaTensor<Complex<T>>> {
        OmegaTensor::from_cubes(&self.vectors)
    }

    pub fn has_degeneracy(&self) -> bool {
        self.warnings.iter().any(Warning::is_degenerate)
    }

    /// Reorders components by (Re first entry, Im first entry, remaining entries).
    fn sort_components(&mut self) {
        let mut idx: Vec<usize> = (0..self.vectors.len()).collect();
        idx.sort_by(|&a, &b| compare_vectors(&self.vectors[a], &self.vectors[b]));
        self.vectors = idx.iter().map(|&k| self.vectors[k].clone()).collect();
        self.lambda = idx.iter().map(|&k| self.lambda[k]).collect();
        self.gamma = idx.iter().map(|&k| self.gamma[k]).collect();
    }
}

fn compare_vectors<T: Real>(a: &DVector<Complex<T>>, b: &DVector<Complex<T>>) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let o = x
            .re
            .partial_cmp(&y.re)
            .unwrap_or(Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(Ordering::Equal));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

fn complexify<S: Scalar>(f: &OmegaTensor<S>) -> OmegaTensor<Complex<S::Real>> {
    let data = f.as_slice().iter().map(|z| Complex::new(z.re_part(), z.im_part())).collect();
    OmegaTensor::from_vec(f.dim(), data).expect("same dimension")
}

/// `A_ij[F]` and `b_ij[F]`: rows `l ∈ [r+1, n] \ {j}` ascending, `A[l, k] = F_{0kl}`, `b[l] = F_{ijl}`.
pub fn build_system<S: Scalar>(f: &OmegaTensor<S>, r: usize, i: usize, j: usize) -> Result<LsqSystem<S>> {
    let d = f.dim();
    check_rank(d, r)?;
    let n = d - 1;
    check_labels(r, n, i, j)?;
    let rows: Vec<usize> = (r + 1..=n).filter(|&l| l != j).collect();
    let a = DMatrix::from_fn(rows.len(), r, |row, k| f.at(0, k + 1, rows[row]));
    let b = DVector::from_fn(rows.len(), |row, _| f.at(i, j, rows[row]));
    LsqSystem::new(a, b)
}

/// Solves every `A_ij g = b_ij` in the least-squares sense.
pub fn solve_generating_matrix<S: Scalar>(f: &OmegaTensor<S>, r: usize) -> Result<GeneratingMatrix<S::Real>> {
    check_rank(f.dim(), r)?;
    let n = f.dim() - 1;
    let systems = pairs(r, n).into_iter().map(|(i, j)| build_system(f, r, i, j)).collect::<Result<Vec<_>>>()?;
    from_systems(r, n, &systems)
}

/// Builds `G` from already-assembled systems, given in column order (`i`-major).
pub fn from_systems<S: Scalar>(r: usize, n: usize, systems: &[LsqSystem<S>]) -> Result<GeneratingMatrix<S::Real>> {
    check_rank(n + 1, r)?;
    let cols = r * (n - r);
    if systems.len() != cols {
        return Err(Error::LengthMismatch(format!("expected {cols} systems, got {}", systems.len())));
    }
    let mut g = DMatrix::zeros(r, cols);
    let mut rank_deficient = Vec::with_capacity(cols);
    for (c, sys) in systems.iter().enumerate() {
        if sys.a.ncols() != r {
            return Err(Error::LengthMismatch(format!("system {c} has {} unknowns, expected {r}", sys.a.ncols())));
        }
        let sol = lstsq(sys);
        for k in 0..r {
            g[(k, c)] = Complex::new(sol.x[k].re_part(), sol.x[k].im_part());
        }
        rank_deficient.push(sol.rank_deficient);
    }
    Ok(GeneratingMatrix { r, n, g, rank_deficient })
}

/// `N_l(G)` with `N_l[a, b] = G(b, e_a + e_l)`.
pub fn assemble_n<T: Real>(g: &GeneratingMatrix<T>, l: usize) -> Result<DMatrix<Complex<T>>> {
    let r = g.r;
    let cols = (1..=r).map(|a| g.column_index(a, l)).collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(r, r, |a, b| g.g[(b, cols[a])]))
}

/// Eigenvectors of `N(ξ)` and the matching `w̃_k`.
pub fn joint_eigen<T: Real>(g: &GeneratingMatrix<T>, cfg: &ProjectionConfig<T>) -> Result<EigenBundle<T>> {
    let (r, n) = (g.r, g.n);
    let m = n - r;
    let ns = (r + 1..=n).map(|l| assemble_n(g, l)).collect::<Result<Vec<_>>>()?;
    if let Some(xi) = &cfg.xi {
        if xi.len() != m {
            return Err(Error::LengthMismatch(format!("xi has length {}, expected n - r = {m}", xi.len())));
        }
    }
    let max_attempts = if cfg.xi.is_some() { 1 } else { 1 + XI_REDRAWS };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    for attempt in 1..=max_attempts {
        let xi: Vec<T> = match &cfg.xi {
            Some(xi) => xi.clone(),
            None => (0..m).map(|_| T::of(rng.random_range(-1.0..=1.0))).collect(),
        };
        let mut nx = DMatrix::<Complex<T>>::zeros(r, r);
        for (x, nl) in xi.iter().zip(&ns) {
            nx += nl * Complex::new(*x, T::zero());
        }
        let eig = eig_general(&nx);
        let tol = T::of(EIGEN_GAP_TOL) * nx.norm();
        if eig.defective || (r > 1 && eig.min_gap <= tol) {
            continue;
        }
        let vtilde: Vec<_> = eig.pairs.iter().map(|p| p.vector.clone()).collect();
        // rows of V⁻¹ are left eigenvectors; fall back to ṽᴴ when V is singular
        let left = DMatrix::from_columns(&vtilde).try_inverse();
        let wtilde = vtilde
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let row = match &left {
                    Some(inv) => inv.row(k).into_owned(),
                    None => v.adjoint(),
                };
                DVector::from_iterator(m, ns.iter().map(|nl| (&row * (nl * v))[(0, 0)]))
            })
            .collect();
        return Ok(EigenBundle {
            xi,
            eigenvalues: eig.values(),
            vtilde,
            wtilde,
            min_gap: eig.min_gap,
            attempts: attempt,
        });
    }
    Err(Error::RepeatedEigenvalues { attempts: max_attempts })
}

/// Fits `β` over `J₁` and `θ` over `J₂`, then `λ = β²/θ`, `γ = θ/β`.
///
/// For `r = 1`, `J₂` is empty; `λ` is fitted directly from the entries
/// `F_{0jl}` with `r < j < l`, and `θ = β²/λ`.
pub fn fit_scalars<S: Scalar>(f: &OmegaTensor<S>, eb: &EigenBundle<S::Real>) -> Result<ScalarFit<S::Real>> {
    type C<T> = Complex<T>;
    let r = eb.vtilde.len();
    let d = f.dim();
    check_rank(d, r)?;
    let n = d - 1;
    let m = n - r;
    if eb.wtilde.len() != r || eb.vtilde.iter().any(|v| v.len() != r) || eb.wtilde.iter().any(|w| w.len() != m) {
        return Err(Error::LengthMismatch("eigen bundle does not match the tensor dimension".into()));
    }
    let vmat = DMatrix::from_columns(&eb.vtilde);
    let est = numeric_rank(&vmat, <S::Real as Real>::of(1e-10));
    if est.rank < r {
        return Err(Error::DependentEigenvectors { rank: est.rank, r });
    }
    let fz = complexify(f);
    let (v, w) = (&eb.vtilde, &eb.wtilde);

    let solve = |rows: Vec<(Vec<C<S::Real>>, C<S::Real>)>| -> Result<DVector<C<S::Real>>> {
        let a = DMatrix::from_fn(rows.len(), r, |i, k| rows[i].0[k]);
        let b = DVector::from_fn(rows.len(), |i, _| rows[i].1);
        Ok(lstsq(&LsqSystem::new(a, b)?).x)
    };

    let mut j1 = Vec::with_capacity(r * m);
    for i1 in 1..=r {
        for i2 in r + 1..=n {
            let row = (0..r).map(|k| v[k][i1 - 1] * w[k][i2 - r - 1]).collect();
            j1.push((row, fz.at(0, i1, i2)));
        }
    }
    let beta = solve(j1)?;

    let threshold = <S::Real as Real>::of(1e-12) * f.omega_norm();
    let degenerate = |index: usize, what: &str, z: C<S::Real>| -> Result<()> {
        if z.modulus() < threshold || !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::DegenerateComponent { index, reason: format!("{what} vanishes") });
        }
        Ok(())
    };
    for k in 0..r {
        degenerate(k, "beta", beta[k])?;
    }

    let theta: Vec<C<S::Real>> = if r >= 2 {
        let mut j2 = Vec::new();
        for i1 in 1..=r {
            for i2 in i1 + 1..=r {
                for i3 in r + 1..=n {
                    let row = (0..r).map(|k| v[k][i1 - 1] * v[k][i2 - 1] * w[k][i3 - r - 1]).collect();
                    j2.push((row, fz.at(i1, i2, i3)));
                }
            }
        }
        solve(j2)?.iter().copied().collect()
    } else {
        let mut j0 = Vec::new();
        for j in r + 1..=n {
            for l in j + 1..=n {
                j0.push((vec![w[0][j - r - 1] * w[0][l - r - 1]], fz.at(0, j, l)));
            }
        }
        let lam = solve(j0)?[0];
        degenerate(0, "lambda", lam)?;
        vec![beta[0] * beta[0] / lam]
    };
    for (k, &t) in theta.iter().enumerate() {
        degenerate(k, "theta", t)?;
    }

    let lambda = (0..r).map(|k| beta[k] * beta[k] / theta[k]).collect();
    let gamma = (0..r).map(|k| theta[k] / beta[k]).collect();
    Ok(ScalarFit { beta: beta.iter().copied().collect(), theta, lambda, gamma })
}

/// `‖(Σ p_k^⊗3 − F)_Ω‖` for complex factors.
pub fn omega_residual<S: Scalar>(f: &OmegaTensor<S>, vectors: &[DVector<Complex<S::Real>>]) -> Result<S::Real> {
    let recon = OmegaTensor::from_cubes(vectors)?;
    Ok(recon.sub(&complexify(f))?.omega_norm())
}

/// Exact incomplete decomposition of `F_Ω` with rank `r`.
pub fn decompose<S: Scalar>(
    f: &OmegaTensor<S>,
    r: usize,
    cfg: &ProjectionConfig<S::Real>,
) -> Result<Decomposition<S::Real>> {
    let d = f.dim();
    check_rank(d, r)?;
    if f.as_slice().iter().any(|z| !z.re_part().is_finite() || !z.im_part().is_finite()) {
        return Err(Error::NonFinite("tensor entry".into()));
    }
    let g = solve_generating_matrix(f, r)?;
    let mut warnings: Vec<Warning> = g
        .pairs()
        .into_iter()
        .zip(&g.rank_deficient)
        .filter(|(_, &bad)| bad)
        .map(|((i, j), _)| Warning::RankDeficientSystem { i, j })
        .collect();
    let eb = joint_eigen(&g, cfg)?;
    if eb.attempts > 1 {
        warnings.push(Warning::XiRedrawn { attempts: eb.attempts });
    }
    let fit = fit_scalars(f, &eb)?;

    let one = Complex::new(S::Real::one(), S::Real::zero());
    let vectors: Vec<_> = (0..r)
        .map(|k| {
            let c = principal_cbrt(fit.lambda[k]);
            let gv = &eb.vtilde[k] * fit.gamma[k];
            let entries = std::iter::once(one).chain(gv.iter().copied()).chain(eb.wtilde[k].iter().copied());
            DVector::<Complex<S::Real>>::from_iterator(d, entries) * c
        })
        .collect();
    let residual = omega_residual(f, &vectors)?;
    let mut dec = Decomposition {
        r,
        d,
        vectors,
        lambda: fit.lambda,
        gamma: fit.gamma,
        omega_residual: residual,
        unrefined_residual: residual,
        refined: false,
        xi: eb.xi,
        warnings,
    };
    dec.sort_components();
    Ok(dec)
}

/// Decomposition of noisy `F̂_Ω`, optionally refined by Levenberg–Marquardt on the Ω-residual.
///
/// Real input is refined over real factors (started from the realified
/// factors); complex input over split real and imaginary parts. The result
/// never has a larger Ω-residual than the unrefined factors.
pub fn approximate<S: Scalar>(
    f: &OmegaTensor<S>,
    r: usize,
    cfg: &ProjectionConfig<S::Real>,
    refine: bool,
) -> Result<Decomposition<S::Real>> {
    let mut dec = decompose(f, r, cfg)?;
    if !refine {
        return Ok(dec);
    }
    let problem = OmegaFit::new(f, r);
    let start: Vec<_> = if problem.real {
        dec.vectors.iter().map(|p| crate::gmm::realify(p).map(|x| Complex::new(x, S::Real::zero()))).collect()
    } else {
        dec.vectors.clone()
    };
    let report = lm_minimize(&problem, problem.pack(&start), &LmOptions::default())?;
    if report.trace.len() == 1 {
        return Ok(dec);
    }
    let vectors = problem.unpack(&report.x);
    let residual = omega_residual(f, &vectors)?;
    if residual <= dec.unrefined_residual {
        dec.vectors = vectors;
        dec.omega_residual = residual;
        dec.refined = true;
        dec.sort_components();
    } else {
        dec.warnings.push(Warning::RefinementRejected {
            unrefined: dec.unrefined_residual.as_f64(),
            refined: residual.as_f64(),
        });
    }
    Ok(dec)
}

/// Least-squares view of `min ‖(Σ q_k^⊗3 − F̂)_Ω‖²` over the factors.
///
/// One residual per distinct triple (two when complex), weighted by `√6` so
/// the sum of squares equals the squared Ω-norm.
pub struct OmegaFit<T: Real> {
    d: usize,
    r: usize,
    real: bool,
    triples: Vec<[usize; 3]>,
    target: Vec<Complex<T>>,
}

impl<T: Real> OmegaFit<T> {
    pub fn new<S: Scalar<Real = T>>(f: &OmegaTensor<S>, r: usize) -> Self {
        Self {
            d: f.dim(),
            r,
            real: !S::IS_COMPLEX,
            triples: omega_triples(f.dim()).collect(),
            target: complexify(f).as_slice().to_vec(),
        }
    }

    fn width(&self) -> usize {
        if self.real {
            1
        } else {
            2
        }
    }

    pub fn pack(&self, vectors: &[DVector<Complex<T>>]) -> DVector<T> {
        let mut x = DVector::zeros(self.r * self.d * self.width());
        for (k, p) in vectors.iter().enumerate() {
            for a in 0..self.d {
                let idx = k * self.d + a;
                if self.real {
                    x[idx] = p[a].re;
                } else {
                    x[2 * idx] = p[a].re;
                    x[2 * idx + 1] = p[a].im;
                }
            }
        }
        x
    }

    pub fn unpack(&self, x: &DVector<T>) -> Vec<DVector<Complex<T>>> {
        (0..self.r)
            .map(|k| {
                DVector::from_fn(self.d, |a, _| {
                    let idx = k * self.d + a;
                    if self.real {
                        Complex::new(x[idx], T::zero())
                    } else {
                        Complex::new(x[2 * idx], x[2 * idx + 1])
                    }
                })
            })
            .collect()
    }

    /// Calls `visit(row, residual, nonzeros)` for every residual row.
    fn rows(&self, x: &DVector<T>, mut visit: impl FnMut(usize, T, &[(usize, T)])) {
        let p = self.unpack(x);
        let s6 = T::of(6f64.sqrt());
        let mut re_row = Vec::with_capacity(6 * self.r);
        let mut im_row = Vec::with_capacity(6 * self.r);
        for (t, &[a, b, c]) in self.triples.iter().enumerate() {
            re_row.clear();
            im_row.clear();
            let mut sum = Complex::<T>::zero();
            for (k, pk) in p.iter().enumerate() {
                let (pa, pb, pc) = (pk[a], pk[b], pk[c]);
                sum += pa * pb * pc;
                for (label, deriv) in [(a, pb * pc), (b, pa * pc), (c, pa * pb)] {
                    let deriv = deriv * s6;
                    let idx = k * self.d + label;
                    if self.real {
                        re_row.push((idx, deriv.re));
                    } else {
                        re_row.push((2 * idx, deriv.re));
                        re_row.push((2 * idx + 1, -deriv.im));
                        im_row.push((2 * idx, deriv.im));
                        im_row.push((2 * idx + 1, deriv.re));
                    }
                }
            }
            let res = (sum - self.target[t]) * s6;
            if self.real {
                visit(t, res.re, &re_row);
            } else {
                visit(2 * t, res.re, &re_row);
                visit(2 * t + 1, res.im, &im_row);
            }
        }
    }
}

impl<T: Real> LeastSquaresProblem<T> for OmegaFit<T> {
    fn residuals(&self, x: &DVector<T>) -> DVector<T> {
        let mut out = DVector::zeros(self.triples.len() * self.width());
        self.rows(x, |row, res, _| out[row] = res);
        out
    }

    fn jacobian(&self, x: &DVector<T>) -> DMatrix<T> {
        let mut j = DMatrix::zeros(self.triples.len() * self.width(), x.len());
        self.rows(x, |row, _, nz| {
            for &(c, v) in nz {
                j[(row, c)] = v;
            }
        });
        j
    }

    fn normal_equations(&self, x: &DVector<T>, _r: &DVector<T>) -> (DMatrix<T>, DVector<T>) {
        let np = x.len();
        let mut jtj = DMatrix::zeros(np, np);
        let mut jtr = DVector::zeros(np);
        self.rows(x, |_, res, nz| {
            for &(c1, v1) in nz {
                jtr[c1] += v1 * res;
                for &(c2, v2) in nz {
                    jtj[(c1, c2)] += v1 * v2;
                }
            }
        });
        (jtj, jtr)
    }
}

/// Ranks of the two largest fully known flattening submatrices.
#[derive(Debug, Clone, PartialEq)]
pub struct RankProfile<T: Real> {
    /// Maximum threshold rank over the splits.
    pub rank: usize,
    /// Maximum singular-gap rank over the splits.
    pub gap_rank: usize,
    pub splits: Vec<RankEstimate<T>>,
}

/// Flattening-based rank estimate with both split diagnostics.
///
/// Label set `1..=n` is cut after `⌊n/2⌋` and after `⌈n/2⌉`; each cut gives
/// a block `F_{0,rows,cols}` whose entries all lie in Ω.
pub fn rank_profile<S: Scalar>(f: &OmegaTensor<S>, tol: S::Real) -> Result<RankProfile<S::Real>> {
    let d = f.dim();
    if d < 4 {
        return Err(Error::DimensionTooSmall { d, min: 4 });
    }
    let n = d - 1;
    let mut cuts = vec![n / 2, n.div_ceil(2)];
    cuts.dedup();
    let mut splits = Vec::new();
    for cut in cuts {
        let rows: Vec<usize> = (1..=cut).collect();
        let cols: Vec<usize> = (cut + 1..=n).collect();
        splits.push(numeric_rank(&f.flat_submatrix(&rows, &cols)?.matrix, tol));
    }
    let rank = splits.iter().map(|s| s.rank).max().unwrap_or(0);
    let gap_rank = splits.iter().map(|s| if s.rank == 0 { 0 } else { s.gap_rank }).max().unwrap_or(0);
    Ok(RankProfile { rank, gap_rank, splits })
}

/// Estimated rank of `F` from its flattening submatrices (`tol` relative to `σ_max`).
pub fn estimate_rank<S: Scalar>(f: &OmegaTensor<S>, tol: S::Real) -> Result<usize> {
    Ok(rank_profile(f, tol)?.rank)
}
