use nalgebra::DVector;

use crate::scalar::Real;

/// Smooth objective over `(w, z)` with `w` on the probability simplex and `z` free.
///
/// The point is passed as one vector: the first `n_weights` entries are `w`.
pub trait SimplexObjective<T: Real> {
    fn value(&self, x: &DVector<T>) -> T;

    fn value_and_gradient(&self, x: &DVector<T>) -> (T, DVector<T>);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions<T: Real> {
    pub max_iter: usize,
    /// Stop once `‖x − P(x − ∇f)‖ ≤ pg_tol`.
    pub pg_tol: T,
    /// Armijo sufficient-decrease constant.
    pub armijo: T,
    pub max_backtrack: usize,
}

impl<T: Real> Default for SimplexOptions<T> {
    fn default() -> Self {
        Self { max_iter: 1000, pg_tol: T::of(1e-6), armijo: T::of(1e-4), max_backtrack: 60 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexReport<T: Real> {
    pub x: DVector<T>,
    pub objective: T,
    /// Objective at the (projected) starting point.
    pub initial_objective: T,
    pub iterations: usize,
    pub projected_gradient_norm: T,
    pub converged: bool,
    /// `x0` was not feasible and was projected first.
    pub start_projected: bool,
    pub trace: Vec<T>,
}

/// Euclidean projection onto `{w : w ≥ 0, Σ w = 1}` (sort-and-threshold).
pub fn project_to_simplex<T: Real>(w: &[T]) -> Vec<T> {
    if w.is_empty() {
        return Vec::new();
    }
    let mut sorted = w.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - T::one()) / T::of((i + 1) as f64);
        if u - t > T::zero() {
            theta = t;
        }
    }
    w.iter().map(|&v| (v - theta).max(T::zero())).collect()
}

fn project<T: Real>(x: &DVector<T>, k: usize) -> DVector<T> {
    let mut out = x.clone();
    let w = project_to_simplex(&x.as_slice()[..k]);
    out.as_mut_slice()[..k].copy_from_slice(&w);
    out
}

/// Projected gradient descent with Armijo backtracking over the simplex × free block.
///
/// Trial steps use the Barzilai–Borwein length; each accepted step satisfies
/// the Armijo condition along the projection arc, so the objective never
/// increases.
pub fn simplex_minimize<T: Real, O: SimplexObjective<T> + ?Sized>(
    objective: &O,
    x0: DVector<T>,
    n_weights: usize,
    opts: &SimplexOptions<T>,
) -> SimplexReport<T> {
    let mut x = project(&x0, n_weights);
    let start_projected = (&x - &x0).amax() > T::of(1e-12);
    let (mut f, mut g) = objective.value_and_gradient(&x);
    let initial_objective = f;
    let mut trace = vec![f];

    let pg_norm = |x: &DVector<T>, g: &DVector<T>| (x - project(&(x - g), n_weights)).norm();
    let mut pg = pg_norm(&x, &g);
    let mut step = T::one() / g.amax().max(T::one());
    let mut iterations = 0;
    let mut converged = pg <= opts.pg_tol;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut alpha = step;
        let mut accepted = None;
        for _ in 0..opts.max_backtrack {
            let x_new = project(&(&x - &g * alpha), n_weights);
            let f_new = objective.value(&x_new);
            let decrease = g.dot(&(&x_new - &x));
            if f_new.is_finite() && f_new <= f + opts.armijo * decrease {
                accepted = Some((x_new, f_new));
                break;
            }
            alpha *= T::of(0.5);
        }
        let Some((x_new, f_new)) = accepted else { break };
        let (_, g_new) = objective.value_and_gradient(&x_new);

        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        step = if sy > T::zero() { (s.norm_squared() / sy).clamp(T::of(1e-12), T::of(1e12)) } else { alpha * T::of(2.0) };

        x = x_new;
        f = f_new;
        g = g_new;
        trace.push(f);
        pg = pg_norm(&x, &g);
        converged = pg <= opts.pg_tol;
        if s.norm() <= T::eps() * (T::one() + x.norm()) {
            break;
        }
    }
    SimplexReport {
        x,
        objective: f,
        initial_objective,
        iterations,
        projected_gradient_norm: pg,
        converged,
        start_projected,
        trace,
    }
}
