//! Method-of-moments learning of diagonal Gaussian mixtures.
//!
//! The third moment `M₃` agrees with `F = Σ ω_i μ_i^⊗3` on every
//! pairwise-distinct triple, so `F_Ω` is read off the sample moment and
//! decomposed; weights, means and then diagonal covariances follow by
//! (nonnegative) least squares.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::align::cube_roots_of_unity;
use crate::decomp::{approximate, ProjectionConfig, Warning};
use crate::error::{check_rank, Error, Result};
use crate::numkit::{
    nnls, numeric_rank, simplex_minimize, LsqSystem, SimplexObjective, SimplexOptions,
};
use crate::scalar::{Complex, Real};
use crate::symtensor::{multiset_count, omega_triples, OmegaTensor, SymTensor3};

/// Samples per partial sum when accumulating moments; fixed so the
/// summation order does not depend on the thread count.
const MOMENT_CHUNK: usize = 512;

/// Variances below this are raised to it inside [`log_density`].
pub const VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentPair<T: Real> {
    /// Sample mean `M̂₁`.
    pub m1: DVector<T>,
    /// Sample third moment `M̂₃`.
    pub m3: SymTensor3<T>,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams<T: Real> {
    pub weights: DVector<T>,
    pub means: Vec<DVector<T>>,
    /// Diagonals `σ_i²` of the component covariances.
    pub diag_covs: Vec<DVector<T>>,
}

impl<T: Real> GmmParams<T> {
    pub fn new(weights: DVector<T>, means: Vec<DVector<T>>, diag_covs: Vec<DVector<T>>) -> Result<Self> {
        let r = weights.len();
        if r == 0 || means.len() != r || diag_covs.len() != r {
            return Err(Error::LengthMismatch(format!(
                "{r} weights, {} means, {} covariances",
                means.len(),
                diag_covs.len()
            )));
        }
        let d = means[0].len();
        if means.iter().chain(&diag_covs).any(|v| v.len() != d) {
            return Err(Error::LengthMismatch("component vectors differ in length".into()));
        }
        if weights.iter().any(|&w| w < T::zero()) || (weights.sum() - T::one()).abs() > T::of(1e-10) {
            return Err(Error::InvalidInput("weights must be nonnegative and sum to 1".into()));
        }
        if diag_covs.iter().flat_map(|v| v.iter()).any(|&s| s < T::zero()) {
            return Err(Error::InvalidInput("variances must be nonnegative".into()));
        }
        Ok(Self { weights, means, diag_covs })
    }

    pub fn r(&self) -> usize {
        self.weights.len()
    }

    pub fn d(&self) -> usize {
        self.means[0].len()
    }

    /// Same mixture with components listed in the order `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            weights: DVector::from_iterator(perm.len(), perm.iter().map(|&k| self.weights[k])),
            means: perm.iter().map(|&k| self.means[k].clone()).collect(),
            diag_covs: perm.iter().map(|&k| self.diag_covs[k].clone()).collect(),
        }
    }
}

/// `M̂₁` and `M̂₃` of the rows of `samples` (one sample per row).
pub fn sample_moments<T: Real>(samples: &DMatrix<T>) -> Result<MomentPair<T>> {
    let (n, d) = samples.shape();
    if n == 0 {
        return Err(Error::InvalidInput("no samples".into()));
    }
    if d < 4 {
        return Err(Error::DimensionTooSmall { d, min: 4 });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sample value".into()));
    }
    let len = multiset_count(d);
    let chunks: Vec<(DVector<T>, Vec<T>)> = (0..n.div_ceil(MOMENT_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut s1 = DVector::zeros(d);
            let mut s3 = vec![T::zero(); len];
            let mut y = vec![T::zero(); d];
            for t in c * MOMENT_CHUNK..((c + 1) * MOMENT_CHUNK).min(n) {
                for (a, slot) in y.iter_mut().enumerate() {
                    *slot = samples[(t, a)];
                }
                let mut idx = 0;
                for i in 0..d {
                    s1[i] += y[i];
                    for j in i..d {
                        let yij = y[i] * y[j];
                        for &yk in &y[j..] {
                            s3[idx] += yij * yk;
                            idx += 1;
                        }
                    }
                }
            }
            (s1, s3)
        })
        .collect();

    let mut m1 = DVector::zeros(d);
    let mut m3 = SymTensor3::zeros(d)?;
    for (s1, s3) in &chunks {
        m1 += s1;
        for (acc, &v) in m3.data_mut().iter_mut().zip(s3) {
            *acc += v;
        }
    }
    let inv = T::one() / T::of(n as f64);
    m1 *= inv;
    for v in m3.data_mut() {
        *v *= inv;
    }
    Ok(MomentPair { m1, m3, n_samples: n })
}

/// Population moments of a diagonal mixture.
///
/// `M₃ = Σ ω_i μ_i^⊗3 + Σ_j (a_j⊗e_j⊗e_j + e_j⊗a_j⊗e_j + e_j⊗e_j⊗a_j)` with
/// `a_j = Σ_i ω_i σ_ij² μ_i`. `n_samples` is reported as 0.
pub fn exact_moments<T: Real>(params: &GmmParams<T>) -> Result<MomentPair<T>> {
    let d = params.d();
    let mut m1 = DVector::zeros(d);
    for (w, mu) in params.weights.iter().zip(&params.means) {
        m1 += mu * *w;
    }
    let mut m3 = SymTensor3::from_rank_one_sum(params.weights.as_slice(), &params.means)?;
    for j in 0..d {
        let mut aj = DVector::<T>::zeros(d);
        for i in 0..params.r() {
            aj += &params.means[i] * (params.weights[i] * params.diag_covs[i][j]);
        }
        for i in 0..d {
            let v = if i == j { T::of(3.0) * aj[j] } else { aj[i] };
            m3.add_to(i, j, j, v)?;
        }
    }
    Ok(MomentPair { m1, m3, n_samples: 0 })
}

/// `Re(τ p)` for the cube root of unity `τ` minimizing `‖Im(τ p)‖`; ties go to `τ = 1`.
pub fn realify<T: Real>(p: &DVector<Complex<T>>) -> DVector<T> {
    let mut best = p.map(|z| z.re);
    let mut best_im = p.iter().map(|z| z.im * z.im).fold(T::zero(), |a, b| a + b);
    for tau in &cube_roots_of_unity::<T>()[1..] {
        let q = p.map(|z| z * *tau);
        let im = q.iter().map(|z| z.im * z.im).fold(T::zero(), |a, b| a + b);
        if im < best_im {
            best_im = im;
            best = q.map(|z| z.re);
        }
    }
    best
}

/// Solves `min ‖M̂₁ − Σ β_i q_i‖` over `β ≥ 0`; returns `ω̂_i = β_i^{3/2}` (unnormalized) and `μ̂_i = q_i / √β_i`.
pub fn recover_weights<T: Real>(m1: &DVector<T>, q: &[DVector<T>]) -> Result<(DVector<T>, Vec<DVector<T>>)> {
    let r = q.len();
    if r == 0 || q.iter().any(|v| v.len() != m1.len()) {
        return Err(Error::LengthMismatch("realified vectors do not match the mean".into()));
    }
    let design = DMatrix::from_columns(q);
    let rank = numeric_rank(&design, T::of(1e-10)).rank;
    if rank < r {
        return Err(Error::DependentEigenvectors { rank, r });
    }
    let sol = nnls(&LsqSystem::new(design, m1.clone())?);
    let mut weights = DVector::zeros(r);
    let mut means = Vec::with_capacity(r);
    for (i, qi) in q.iter().enumerate() {
        let beta = sol.x[i];
        if beta <= T::zero() {
            return Err(Error::DegenerateComponent { index: i, reason: "zero weight from the mean equation".into() });
        }
        weights[i] = beta * beta.sqrt();
        means.push(qi / beta.sqrt());
    }
    Ok((weights, means))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome<T: Real> {
    pub weights: DVector<T>,
    pub means: Vec<DVector<T>>,
    /// Moment-fit objective at the returned point.
    pub objective: T,
    /// Objective at the normalized start.
    pub initial_objective: T,
    pub iterations: usize,
    pub converged: bool,
    /// The solver produced non-finite values; the start was returned.
    pub failed: bool,
}

/// `‖Σ ω_i μ_i − M̂₁‖² + ‖Σ ω_i (μ_i^⊗3)_Ω − F̂_Ω‖²` (Ω-norm with multiplicity 6).
struct MomentFit<'a, T: Real> {
    m1: &'a DVector<T>,
    target: &'a [T],
    triples: Vec<[usize; 3]>,
    r: usize,
    d: usize,
}

impl<T: Real> MomentFit<'_, T> {
    fn split<'x>(&self, x: &'x DVector<T>) -> (&'x [T], Vec<&'x [T]>) {
        let s = x.as_slice();
        let means = (0..self.r).map(|i| &s[self.r + i * self.d..self.r + (i + 1) * self.d]).collect();
        (&s[..self.r], means)
    }

    fn eval(&self, x: &DVector<T>, grad: Option<&mut DVector<T>>) -> T {
        let (w, mu) = self.split(x);
        let mut r1 = -self.m1.clone();
        for i in 0..self.r {
            for a in 0..self.d {
                r1[a] += w[i] * mu[i][a];
            }
        }
        let mut f = r1.norm_squared();
        let six = T::of(6.0);
        let mut residuals = Vec::with_capacity(self.triples.len());
        for (t, &[a, b, c]) in self.triples.iter().enumerate() {
            let mut s = -self.target[t];
            for i in 0..self.r {
                s += w[i] * mu[i][a] * mu[i][b] * mu[i][c];
            }
            f += six * s * s;
            residuals.push(s);
        }
        if let Some(g) = grad {
            g.fill(T::zero());
            let two = T::of(2.0);
            let twelve = T::of(12.0);
            for i in 0..self.r {
                let base = self.r + i * self.d;
                for a in 0..self.d {
                    g[i] += two * r1[a] * mu[i][a];
                    g[base + a] += two * r1[a] * w[i];
                }
                for (&[a, b, c], &s) in self.triples.iter().zip(&residuals) {
                    let (ma, mb, mc) = (mu[i][a], mu[i][b], mu[i][c]);
                    let e = twelve * s;
                    g[i] += e * ma * mb * mc;
                    let ew = e * w[i];
                    g[base + a] += ew * mb * mc;
                    g[base + b] += ew * ma * mc;
                    g[base + c] += ew * ma * mb;
                }
            }
        }
        f
    }
}

impl<T: Real> SimplexObjective<T> for MomentFit<'_, T> {
    fn value(&self, x: &DVector<T>) -> T {
        self.eval(x, None)
    }

    fn value_and_gradient(&self, x: &DVector<T>) -> (T, DVector<T>) {
        let mut g = DVector::zeros(x.len());
        let f = self.eval(x, Some(&mut g));
        (f, g)
    }
}

/// Improves `(ω, μ)` against both moments with `ω` kept on the simplex.
///
/// The start weights are normalized to sum to one first.
pub fn joint_refine<T: Real>(
    m1: &DVector<T>,
    f_omega: &OmegaTensor<T>,
    weights: &DVector<T>,
    means: &[DVector<T>],
) -> Result<RefineOutcome<T>> {
    let r = weights.len();
    let d = m1.len();
    if means.len() != r || means.iter().any(|m| m.len() != d) || f_omega.dim() != d {
        return Err(Error::LengthMismatch("refinement start does not match the moments".into()));
    }
    let total = weights.sum();
    if !(total > T::zero()) {
        return Err(Error::InvalidInput("start weights sum to zero".into()));
    }
    let w0 = weights / total;
    let mut x0 = DVector::zeros(r + r * d);
    x0.rows_mut(0, r).copy_from(&w0);
    for (i, m) in means.iter().enumerate() {
        x0.rows_mut(r + i * d, d).copy_from(m);
    }
    let obj = MomentFit { m1, target: f_omega.as_slice(), triples: omega_triples(d).collect(), r, d };
    let rep = simplex_minimize(&obj, x0.clone(), r, &SimplexOptions::default());
    let failed = !rep.objective.is_finite() || rep.x.iter().any(|v| !v.is_finite());
    let x = if failed { &x0 } else { &rep.x };
    let (w, mu) = obj.split(x);
    Ok(RefineOutcome {
        weights: DVector::from_column_slice(w),
        means: mu.into_iter().map(DVector::from_column_slice).collect(),
        objective: if failed { rep.initial_objective } else { rep.objective },
        initial_objective: rep.initial_objective,
        iterations: rep.iterations,
        converged: rep.converged,
        failed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceFit<T: Real> {
    pub diag_covs: Vec<DVector<T>>,
    /// The design `[ω_i μ_i]` was numerically rank deficient.
    pub rank_deficient: bool,
}

/// Diagonal covariances from `Â = M̂₃ − Σ q_i^⊗3` by one NNLS per coordinate.
pub fn recover_covariances<T: Real>(
    m3: &SymTensor3<T>,
    weights: &DVector<T>,
    means: &[DVector<T>],
    q: &[DVector<T>],
) -> Result<CovarianceFit<T>> {
    let d = m3.dim();
    let r = weights.len();
    if means.len() != r || q.len() != r || means.iter().chain(q).any(|v| v.len() != d) {
        return Err(Error::LengthMismatch("covariance inputs do not match".into()));
    }
    let ones = vec![T::one(); r];
    let a_hat = m3.sub(&SymTensor3::from_rank_one_sum(&ones, q)?)?;
    let design = DMatrix::from_fn(d, r, |a, i| weights[i] * means[i][a]);
    let mut rank_deficient = numeric_rank(&design, T::of(1e-10)).rank < r;
    let mut diag_covs = vec![DVector::zeros(d); r];
    for j in 0..d {
        let aj = DVector::from_fn(d, |i, _| {
            let v = a_hat.get(j, i, j).expect("labels in range");
            if i == j {
                v / T::of(3.0)
            } else {
                v
            }
        });
        let sol = nnls(&LsqSystem::new(design.clone(), aj)?);
        rank_deficient |= sol.rank_deficient;
        for i in 0..r {
            diag_covs[i][j] = sol.x[i];
        }
    }
    Ok(CovarianceFit { diag_covs, rank_deficient })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Run the LM refinement of the decomposition and the joint moment refinement.
    pub refine: bool,
    /// Seed for the projection vector `ξ`.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { refine: true, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics<T: Real> {
    /// Ω-residual of the tensor approximation of `F̂_Ω`.
    pub omega_residual: T,
    /// Moment-fit objective at the returned weights and means.
    pub objective: T,
    /// Moment-fit objective before joint refinement.
    pub initial_objective: T,
    pub decomposition_warnings: Vec<Warning>,
    pub refine_failed: bool,
    pub covariance_rank_deficient: bool,
}

impl<T: Real> FitDiagnostics<T> {
    pub fn has_degeneracy(&self) -> bool {
        self.refine_failed || self.covariance_rank_deficient || self.decomposition_warnings.iter().any(Warning::is_degenerate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit<T: Real> {
    pub params: GmmParams<T>,
    pub diagnostics: FitDiagnostics<T>,
}

/// Learns an `r`-component diagonal mixture from samples (one per row).
pub fn fit<T: Real>(samples: &DMatrix<T>, r: usize, opts: &FitOptions) -> Result<GmmFit<T>> {
    check_rank(samples.ncols(), r)?;
    fit_moments(&sample_moments(samples)?, r, opts)
}

/// Learns from given moments (sample or exact).
pub fn fit_moments<T: Real>(moments: &MomentPair<T>, r: usize, opts: &FitOptions) -> Result<GmmFit<T>> {
    let d = moments.m1.len();
    check_rank(d, r)?;
    let f_omega = moments.m3.omega_extract()?;
    let dec = approximate(&f_omega, r, &ProjectionConfig::seeded(opts.seed), opts.refine)?;
    let q: Vec<DVector<T>> = dec.vectors.iter().map(realify).collect();
    let (w_hat, mu_hat) = recover_weights(&moments.m1, &q)?;

    let refined = if opts.refine {
        joint_refine(&moments.m1, &f_omega, &w_hat, &mu_hat)?
    } else {
        let w = &w_hat / w_hat.sum();
        let x = pack_params(&w, &mu_hat);
        let obj = MomentFit { m1: &moments.m1, target: f_omega.as_slice(), triples: omega_triples(d).collect(), r, d };
        let f = obj.value(&x);
        RefineOutcome {
            weights: w,
            means: mu_hat,
            objective: f,
            initial_objective: f,
            iterations: 0,
            converged: false,
            failed: false,
        }
    };
    let cov = recover_covariances(&moments.m3, &refined.weights, &refined.means, &q)?;
    let params = GmmParams { weights: refined.weights, means: refined.means, diag_covs: cov.diag_covs };
    Ok(GmmFit {
        params,
        diagnostics: FitDiagnostics {
            omega_residual: dec.omega_residual,
            objective: refined.objective,
            initial_objective: refined.initial_objective,
            decomposition_warnings: dec.warnings,
            refine_failed: refined.failed,
            covariance_rank_deficient: cov.rank_deficient,
        },
    })
}

fn pack_params<T: Real>(w: &DVector<T>, means: &[DVector<T>]) -> DVector<T> {
    let r = w.len();
    let d = means[0].len();
    let mut x = DVector::zeros(r + r * d);
    x.rows_mut(0, r).copy_from(w);
    for (i, m) in means.iter().enumerate() {
        x.rows_mut(r + i * d, d).copy_from(m);
    }
    x
}

/// How a sample is assigned to a component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreMode {
    /// Largest component likelihood `N(y; μ_i, Σ_i)`.
    #[default]
    Likelihood,
    /// Largest posterior, `ω_i N(y; μ_i, Σ_i)`.
    Posterior,
}

/// `log ω_i + log N(y; μ_i, diag σ_i²)` per component, variances floored at [`VARIANCE_FLOOR`].
pub fn log_density<T: Real>(params: &GmmParams<T>, y: &DVector<T>) -> DVector<T> {
    DVector::from_fn(params.r(), |i, _| params.weights[i].ln() + component_log_likelihood(params, i, y))
}

fn component_log_likelihood<T: Real>(params: &GmmParams<T>, i: usize, y: &DVector<T>) -> T {
    let floor = T::of(VARIANCE_FLOOR);
    let half = T::of(0.5);
    let mut acc = -half * T::of(y.len() as f64) * T::two_pi().ln();
    for a in 0..y.len() {
        let var = params.diag_covs[i][a].max(floor);
        let diff = y[a] - params.means[i][a];
        acc -= half * (var.ln() + diff * diff / var);
    }
    acc
}

/// Index of the best-scoring component; ties go to the lowest index.
pub fn classify<T: Real>(params: &GmmParams<T>, y: &DVector<T>, mode: ScoreMode) -> usize {
    let mut best = 0;
    let mut best_score = T::of(f64::NEG_INFINITY);
    for i in 0..params.r() {
        let mut s = component_log_likelihood(params, i, y);
        if mode == ScoreMode::Posterior {
            s += params.weights[i].ln();
        }
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}
