use nalgebra::{DMatrix, DVector};

use super::lstsq::{lstsq, LsqSystem};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution<T: Real> {
    pub x: DVector<T>,
    /// Gradient of `½‖Ax − b‖²` at `x`, i.e. `Aᵀ(Ax − b)`.
    pub gradient: DVector<T>,
    pub iterations: usize,
    /// The passive-set subproblem was rank deficient at some point.
    pub rank_deficient: bool,
}

impl<T: Real> NnlsSolution<T> {
    /// Largest violation of the KKT conditions for `x ≥ 0`.
    pub fn kkt_residual(&self) -> T {
        self.x.iter().zip(self.gradient.iter()).fold(T::zero(), |m, (&x, &g)| {
            let v = if x > T::zero() { g.abs() } else { (-g).max(T::zero()) };
            m.max(v)
        })
    }
}

/// `min ‖Ax − b‖` subject to `x ≥ 0`, Lawson–Hanson active-set method.
///
/// Complex systems are rejected at compile time: only [`Real`] element types
/// are accepted.
pub fn nnls<T: Real>(sys: &LsqSystem<T>) -> NnlsSolution<T> {
    let a = &sys.a;
    let b = &sys.b;
    let n = a.ncols();
    let scale = a.norm() * b.norm();
    let tol = T::eps() * T::of(10.0 * (a.nrows().max(n)) as f64) * scale;

    let mut x = DVector::<T>::zeros(n);
    let mut passive = vec![false; n];
    let mut rank_deficient = false;
    let max_outer = 30 * n + 50;
    let mut iterations = 0;

    // w = Aᵀ(b − Ax) is the negative gradient
    let mut w = a.transpose() * (b - a * &x);
    while iterations < max_outer {
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap_or(std::cmp::Ordering::Equal).then(j.cmp(&i)));
        let Some(j) = candidate else { break };
        if w[j] <= tol {
            break;
        }
        iterations += 1;
        passive[j] = true;

        loop {
            let (z, deficient) = passive_solve(a, b, &passive);
            rank_deficient |= deficient;
            let feasible = (0..n).filter(|&i| passive[i]).all(|i| z[i] > T::zero());
            if feasible {
                x = z;
                break;
            }
            // step toward z until the first passive variable hits zero
            let mut alpha = T::one();
            let mut blocking = None;
            for i in (0..n).filter(|&i| passive[i] && z[i] <= T::zero()) {
                let denom = x[i] - z[i];
                if denom > T::zero() && x[i] / denom < alpha {
                    alpha = x[i] / denom;
                    blocking = Some(i);
                }
            }
            for i in 0..n {
                let xi = x[i];
                x[i] = xi + alpha * (z[i] - xi);
            }
            if let Some(i) = blocking {
                x[i] = T::zero();
            }
            for i in 0..n {
                if passive[i] && x[i] <= T::zero() {
                    passive[i] = false;
                    x[i] = T::zero();
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
        w = a.transpose() * (b - a * &x);
    }

    let gradient = -(a.transpose() * (b - a * &x));
    NnlsSolution { x, gradient, iterations, rank_deficient }
}

fn passive_solve<T: Real>(a: &DMatrix<T>, b: &DVector<T>, passive: &[bool]) -> (DVector<T>, bool) {
    let cols: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let sub = a.select_columns(&cols);
    let sol = lstsq(&LsqSystem { a: sub, b: b.clone() });
    let mut z = DVector::zeros(passive.len());
    for (k, &c) in cols.iter().enumerate() {
        z[c] = sol.x[k];
    }
    (z, sol.rank_deficient)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn clamps_negative_component() {
        let sys = LsqSystem::new(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, -1.0])).unwrap();
        let sol = nnls(&sys);
        assert_eq!(sol.x, DVector::from_vec(vec![1.0, 0.0]));
    }

    #[test]
    fn interior_solution() {
        let sys = LsqSystem::new(DMatrix::identity(2, 2), DVector::from_vec(vec![2.0, 3.0])).unwrap();
        let sol = nnls(&sys);
        assert!((sol.x - DVector::from_vec(vec![2.0, 3.0])).amax() < 1e-14);
    }

    #[test]
    fn recovers_nonnegative_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = DMatrix::from_fn(8, 3, |_, _| rng.random_range(-1.0..1.0));
            let xs = DVector::from_fn(3, |_, _| rng.random_range(0.1..2.0));
            let sys = LsqSystem::new(a.clone(), &a * &xs).unwrap();
            let sol = nnls(&sys);
            assert!((sol.x - xs).amax() < 1e-8);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let sys = LsqSystem::new(DMatrix::from_element(4, 2, 1.0), DVector::zeros(4)).unwrap();
        assert_eq!(nnls(&sys).x, DVector::zeros(2));
    }

    proptest! {
        #[test]
        fn kkt_conditions_hold(seed in 0u64..500, m in 2usize..10, n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0f64));
            let b = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0f64));
            let sol = nnls(&LsqSystem::new(a, b).unwrap());
            prop_assert!(sol.x.iter().all(|&v| v >= 0.0));
            for (x, g) in sol.x.iter().zip(sol.gradient.iter()) {
                if *x > 0.0 { prop_assert!(g.abs() <= 1e-8, "active gradient {}", g); }
                else { prop_assert!(*g >= -1e-8, "inactive gradient {}", g); }
            }
            prop_assert!(sol.kkt_residual() <= 1e-10);
        }
    }
}
