use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A nonlinear least-squares problem `min_x ‖r(x)‖²`.
pub trait LeastSquaresProblem<T: Real> {
    fn residuals(&self, x: &DVector<T>) -> DVector<T>;

    fn jacobian(&self, x: &DVector<T>) -> DMatrix<T>;

    /// `(JᵀJ, Jᵀr)` at `x`, where `r` is `residuals(x)`.
    ///
    /// The default forms the dense Jacobian; problems with sparse Jacobians
    /// should override this.
    fn normal_equations(&self, x: &DVector<T>, r: &DVector<T>) -> (DMatrix<T>, DVector<T>) {
        let j = self.jacobian(x);
        (j.tr_mul(&j), j.tr_mul(r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions<T: Real> {
    pub max_iter: usize,
    /// Stop once `‖Jᵀr‖ ≤ grad_tol`.
    pub grad_tol: T,
    /// Stop once `‖h‖ ≤ step_tol · (‖x‖ + step_tol)`.
    pub step_tol: T,
    /// Initial damping relative to the largest diagonal entry of `JᵀJ`.
    pub initial_damping: T,
}

impl<T: Real> Default for LmOptions<T> {
    fn default() -> Self {
        Self { max_iter: 200, grad_tol: T::of(1e-8), step_tol: T::of(1e-15), initial_damping: T::of(1e-3) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmTermination {
    Gradient,
    StepSize,
    MaxIterations,
    /// Damping grew without producing an acceptable step.
    NoProgress,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport<T: Real> {
    pub x: DVector<T>,
    /// `‖r(x)‖²` at the returned point.
    pub objective: T,
    pub initial_objective: T,
    pub iterations: usize,
    pub termination: LmTermination,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<T>,
}

/// Levenberg–Marquardt with Nielsen's damping update (ν-doubling on rejection).
pub fn lm_minimize<T: Real, P: LeastSquaresProblem<T> + ?Sized>(
    problem: &P,
    x0: DVector<T>,
    opts: &LmOptions<T>,
) -> Result<LmReport<T>> {
    let mut x = x0;
    let mut r = problem.residuals(&x);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("residual at the starting point".into()));
    }
    let mut f = r.norm_squared();
    let initial_objective = f;
    let mut trace = vec![f];
    let (mut a, mut g) = problem.normal_equations(&x, &r);

    let diag_max = a.diagonal().iter().fold(T::zero(), |m, &v| m.max(v));
    let mut mu = opts.initial_damping * diag_max.max(T::eps());
    let mut nu = T::of(2.0);
    let mut termination = LmTermination::MaxIterations;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if g.norm() <= opts.grad_tol {
            termination = LmTermination::Gradient;
            break;
        }
        iterations += 1;

        let mut damped = a.clone();
        for i in 0..damped.nrows() {
            damped[(i, i)] += mu;
        }
        let Some(chol) = damped.cholesky() else {
            mu *= nu;
            nu *= T::of(2.0);
            continue;
        };
        let h = chol.solve(&(-&g));
        if h.norm() <= opts.step_tol * (x.norm() + opts.step_tol) {
            termination = LmTermination::StepSize;
            break;
        }

        let x_new = &x + &h;
        let r_new = problem.residuals(&x_new);
        let f_new = r_new.norm_squared();
        // predicted decrease of ‖r‖² under the linear model
        let predicted = h.dot(&(&h * mu - &g));
        let rho = (f - f_new) / predicted;

        if f_new.is_finite() && predicted > T::zero() && rho > T::zero() {
            x = x_new;
            r = r_new;
            f = f_new;
            trace.push(f);
            (a, g) = problem.normal_equations(&x, &r);
            let t = T::of(2.0) * rho - T::one();
            mu *= T::of(1.0 / 3.0).max(T::one() - t * t * t);
            nu = T::of(2.0);
        } else {
            mu *= nu;
            nu *= T::of(2.0);
            if !mu.is_finite() || mu > T::of(1e300) {
                termination = LmTermination::NoProgress;
                break;
            }
        }
    }
    if iterations >= opts.max_iter && termination == LmTermination::MaxIterations && g.norm() <= opts.grad_tol {
        termination = LmTermination::Gradient;
    }
    Ok(LmReport { x, objective: f, initial_objective, iterations, termination, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Linear {
        a: DMatrix<f64>,
        b: DVector<f64>,
    }

    impl LeastSquaresProblem<f64> for Linear {
        fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
            &self.a * x - &self.b
        }
        fn jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
            self.a.clone()
        }
    }

    struct Square;

    impl LeastSquaresProblem<f64> for Square {
        fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_element(1, x[0] * x[0] - 4.0)
        }
        fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_element(1, 1, 2.0 * x[0])
        }
    }

    struct Rosenbrock;

    impl LeastSquaresProblem<f64> for Rosenbrock {
        fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]])
        }
        fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(2, 2, &[-20.0 * x[0], 10.0, -1.0, 0.0])
        }
    }

    #[test]
    fn linear_residual_matches_lstsq() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DMatrix::from_fn(7, 3, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(7, |_, _| rng.random_range(-1.0..1.0));
        let expect = crate::numkit::lstsq(&crate::numkit::LsqSystem::new(a.clone(), b.clone()).unwrap()).x;
        let rep = lm_minimize(&Linear { a, b }, DVector::zeros(3), &LmOptions::default()).unwrap();
        assert!((rep.x - expect).amax() < 1e-8);
    }

    #[test]
    fn scalar_root() {
        let rep = lm_minimize(&Square, DVector::from_element(1, 3.0), &LmOptions::default()).unwrap();
        assert!((rep.x[0] - 2.0).abs() < 1e-8);
        assert_eq!(rep.termination, LmTermination::Gradient);
    }

    #[test]
    fn rosenbrock_converges_monotonically() {
        let rep = lm_minimize(&Rosenbrock, DVector::from_vec(vec![-1.2, 1.0]), &LmOptions::default()).unwrap();
        assert!((rep.x[0] - 1.0).abs() < 1e-8 && (rep.x[1] - 1.0).abs() < 1e-8);
        assert!(rep.trace.windows(2).all(|w| w[1] < w[0]));
        assert!(rep.objective <= rep.initial_objective);
    }

    #[test]
    fn non_finite_start_is_rejected() {
        let err = lm_minimize(&Square, DVector::from_element(1, f64::NAN), &LmOptions::default());
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn deterministic_given_start() {
        let x0 = DVector::from_vec(vec![0.3, -0.7]);
        let a = lm_minimize(&Rosenbrock, x0.clone(), &LmOptions::default()).unwrap();
        let b = lm_minimize(&Rosenbrock, x0, &LmOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
