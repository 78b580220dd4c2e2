//! Synthetic experiments: random tensors and mixtures, error metrics and
//! the two benchmark tables.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::align::align_means;
use crate::decomp::{approximate, ProjectionConfig};
use crate::error::{check_rank, Error, Result};
use crate::gmm::{classify, fit, FitOptions, GmmParams, ScoreMode};
use crate::io::fmt_g17;
use crate::symtensor::{omega_count, OmegaTensor};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorTrial {
    pub exact: OmegaTensor<f64>,
    pub perturbed: OmegaTensor<f64>,
    pub factors: Vec<DVector<f64>>,
}

/// `F = Σ p_i^⊗3` with standard normal `p_i`, plus Gaussian noise on Ω of Ω-norm exactly `eps`.
///
/// Factors are drawn before the noise, so one seed gives the same factors
/// and noise direction for every `eps`.
pub fn gen_tensor_trial(d: usize, r: usize, eps: f64, seed: u64) -> Result<TensorTrial> {
    check_rank(d, r)?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("eps must be finite and >= 0, got {eps}")));
    }
    let mut rng = rng_from_seed(seed);
    let factors: Vec<DVector<f64>> = (0..r).map(|_| DVector::from_fn(d, |_, _| rng.sample(StandardNormal))).collect();
    let exact = OmegaTensor::from_cubes(&factors)?;
    let noise = OmegaTensor::from_vec(d, (0..omega_count(d)).map(|_| rng.sample(StandardNormal)).collect())?;
    let perturbed = if eps == 0.0 {
        exact.clone()
    } else {
        exact.add(&noise.scale(eps / noise.omega_norm()))?
    };
    Ok(TensorTrial { exact, perturbed, factors })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthInstance {
    pub params: GmmParams<f64>,
    pub labels: Vec<usize>,
    /// One sample per row.
    pub samples: DMatrix<f64>,
    pub seed: u64,
}

/// Draws a random diagonal mixture and `n` samples from it.
///
/// Labels are uniform on `[r]` and the weights are their frequencies;
/// `σ_i²` is the square of a standard normal vector and `μ_i` is
/// `mean_scale` times a standard normal vector.
pub fn gen_gmm_instance(d: usize, r: usize, n: usize, mean_scale: f64, seed: u64) -> Result<SynthInstance> {
    check_rank(d, r)?;
    if n == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    if !mean_scale.is_finite() {
        return Err(Error::InvalidInput("mean scale must be finite".into()));
    }
    let mut rng = rng_from_seed(seed);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..r)).collect();
    let mut counts = vec![0usize; r];
    for &l in &labels {
        counts[l] += 1;
    }
    let weights = DVector::from_iterator(r, counts.iter().map(|&c| c as f64 / n as f64));
    let diag_covs: Vec<DVector<f64>> =
        (0..r).map(|_| DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal).powi(2))).collect();
    let means: Vec<DVector<f64>> =
        (0..r).map(|_| DVector::from_fn(d, |_, _| mean_scale * rng.sample::<f64, _>(StandardNormal))).collect();
    let mut samples = DMatrix::zeros(n, d);
    for (t, &l) in labels.iter().enumerate() {
        for a in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            samples[(t, a)] = means[l][a] + diag_covs[l][a].sqrt() * z;
        }
    }
    Ok(SynthInstance { params: GmmParams { weights, means, diag_covs }, labels, samples, seed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub trial: usize,
    pub rel_error: Option<f64>,
    pub abs_error: Option<f64>,
    pub accuracy: Option<f64>,
    /// Wall time of the fitting stage.
    pub seconds: f64,
    pub error: Option<String>,
    pub warnings: Vec<String>,
}

impl TrialReport {
    fn empty(trial: usize) -> Self {
        Self { trial, rel_error: None, abs_error: None, accuracy: None, seconds: 0.0, error: None, warnings: Vec::new() }
    }
}

/// Fraction of samples whose aligned predicted component equals the true label.
pub fn evaluate_fit(instance: &SynthInstance, fitted: &GmmParams<f64>, mode: ScoreMode) -> Result<f64> {
    if fitted.r() != instance.params.r() || fitted.d() != instance.params.d() {
        return Err(Error::LengthMismatch("fitted model does not match the instance".into()));
    }
    let perm = align_means(&fitted.means, &instance.params.means);
    let aligned = fitted.permuted(&perm);
    let n = instance.samples.nrows();
    let correct = (0..n)
        .into_par_iter()
        .filter(|&t| {
            let y = instance.samples.row(t).transpose();
            classify(&aligned, &y, mode) == instance.labels[t]
        })
        .count();
    Ok(correct as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub count: usize,
}

impl Stats {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        Some(Self {
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            count: v.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Config {
    pub d: usize,
    pub r: usize,
    pub eps: f64,
    pub trials: usize,
    pub seed: u64,
    pub refine: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Summary {
    pub config: Table1Config,
    pub rel_error: Option<Stats>,
    pub abs_error: Option<Stats>,
    pub mean_seconds: Option<f64>,
    pub failures: usize,
    pub trials: Vec<TrialReport>,
}

/// One tensor trial: `rel = ‖(F* − F̂)_Ω‖ / ‖(F − F̂)_Ω‖`, `abs = ‖(F* − F)_Ω‖`.
pub fn tensor_trial(cfg: &Table1Config, trial: usize) -> TrialReport {
    let mut rep = TrialReport::empty(trial);
    let seed = cfg.seed.wrapping_add(trial as u64);
    let mut run = || -> Result<()> {
        let t = gen_tensor_trial(cfg.d, cfg.r, cfg.eps, seed)?;
        let start = Instant::now();
        let dec = approximate(&t.perturbed, cfg.r, &ProjectionConfig::seeded(seed), cfg.refine)?;
        rep.seconds = start.elapsed().as_secs_f64();
        rep.warnings = dec.warnings.iter().map(ToString::to_string).collect();
        let approx = dec.reconstruct_omega()?;
        let exact = t.exact.to_complex();
        let perturbed = t.perturbed.to_complex();
        let denom = exact.sub(&perturbed)?.omega_norm();
        let num = approx.sub(&perturbed)?.omega_norm();
        rep.rel_error = Some(if denom == 0.0 { 0.0 } else { num / denom });
        rep.abs_error = Some(approx.sub(&exact)?.omega_norm());
        Ok(())
    };
    if let Err(e) = run() {
        rep.error = Some(e.to_string());
    }
    rep
}

pub fn run_table1(cfg: &Table1Config) -> Result<Table1Summary> {
    check_rank(cfg.d, cfg.r)?;
    let trials: Vec<TrialReport> = (0..cfg.trials).into_par_iter().map(|t| tensor_trial(cfg, t)).collect();
    let ok = || trials.iter().filter(|t| t.error.is_none());
    Ok(Table1Summary {
        config: cfg.clone(),
        rel_error: Stats::of(ok().filter_map(|t| t.rel_error)),
        abs_error: Stats::of(ok().filter_map(|t| t.abs_error)),
        mean_seconds: Stats::of(ok().map(|t| t.seconds)).map(|s| s.mean),
        failures: trials.iter().filter(|t| t.error.is_some()).count(),
        trials,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Config {
    pub d: usize,
    pub r: usize,
    pub samples: usize,
    pub trials: usize,
    pub seed: u64,
    pub mean_scale: f64,
    pub refine: bool,
    pub score: ScoreMode,
}

impl Table2Config {
    pub fn new(d: usize, r: usize, samples: usize, trials: usize, seed: u64) -> Self {
        Self { d, r, samples, trials, seed, mean_scale: 1.0, refine: true, score: ScoreMode::Likelihood }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table2Summary {
    pub config: Table2Config,
    pub accuracy: Option<Stats>,
    pub mean_seconds: Option<f64>,
    pub failures: usize,
    pub trials: Vec<TrialReport>,
}

pub fn gmm_trial(cfg: &Table2Config, trial: usize) -> TrialReport {
    let mut rep = TrialReport::empty(trial);
    let seed = cfg.seed.wrapping_add(trial as u64);
    let mut run = || -> Result<()> {
        let inst = gen_gmm_instance(cfg.d, cfg.r, cfg.samples, cfg.mean_scale, seed)?;
        let start = Instant::now();
        let fitted = fit(&inst.samples, cfg.r, &FitOptions { refine: cfg.refine, seed })?;
        rep.seconds = start.elapsed().as_secs_f64();
        rep.warnings = fitted.diagnostics.decomposition_warnings.iter().map(ToString::to_string).collect();
        rep.accuracy = Some(evaluate_fit(&inst, &fitted.params, cfg.score)?);
        Ok(())
    };
    if let Err(e) = run() {
        rep.error = Some(e.to_string());
    }
    rep
}

pub fn run_table2(cfg: &Table2Config) -> Result<Table2Summary> {
    check_rank(cfg.d, cfg.r)?;
    let trials: Vec<TrialReport> = (0..cfg.trials).into_par_iter().map(|t| gmm_trial(cfg, t)).collect();
    let ok = || trials.iter().filter(|t| t.error.is_none());
    Ok(Table2Summary {
        config: cfg.clone(),
        accuracy: Stats::of(ok().filter_map(|t| t.accuracy)),
        mean_seconds: Stats::of(ok().map(|t| t.seconds)).map(|s| s.mean),
        failures: trials.iter().filter(|t| t.error.is_some()).count(),
        trials,
    })
}

/// `trial,rel_error,abs_error,accuracy,seconds`; missing values are empty cells.
pub fn reports_csv(trials: &[TrialReport]) -> String {
    let cell = |v: Option<f64>| v.map(fmt_g17).unwrap_or_default();
    let mut out = String::from("trial,rel_error,abs_error,accuracy,seconds\n");
    for t in trials {
        writeln!(
            out,
            "{},{},{},{},{}",
            t.trial,
            cell(t.rel_error),
            cell(t.abs_error),
            cell(t.accuracy),
            fmt_g17(t.seconds)
        )
        .expect("write to string");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_has_exact_norm() {
        for seed in 0..5 {
            let t = gen_tensor_trial(10, 3, 0.1, seed).unwrap();
            let e = t.perturbed.sub(&t.exact).unwrap().omega_norm();
            assert!((e - 0.1).abs() < 1e-12);
        }
        let t = gen_tensor_trial(10, 3, 0.0, 1).unwrap();
        assert_eq!(t.perturbed, t.exact);
    }

    #[test]
    fn trials_replay() {
        assert_eq!(gen_tensor_trial(8, 2, 0.01, 9).unwrap(), gen_tensor_trial(8, 2, 0.01, 9).unwrap());
        assert_eq!(gen_gmm_instance(8, 3, 50, 1.0, 9).unwrap(), gen_gmm_instance(8, 3, 50, 1.0, 9).unwrap());
        assert!(gen_tensor_trial(6, 3, 0.1, 0).is_err());
    }

    #[test]
    fn gmm_instance_shape_and_weights() {
        let inst = gen_gmm_instance(8, 3, 1000, 1.0, 2).unwrap();
        assert_eq!(inst.samples.shape(), (1000, 8));
        assert!(inst.labels.iter().all(|&l| l < 3));
        assert!((inst.params.weights.sum() - 1.0).abs() < 1e-15);
        for i in 0..3 {
            let count = inst.labels.iter().filter(|&&l| l == i).count();
            assert_eq!(inst.params.weights[i], count as f64 / 1000.0);
        }
        let one = gen_gmm_instance(6, 1, 30, 1.0, 3).unwrap();
        assert_eq!(one.params.weights[0], 1.0);
    }

    #[test]
    fn sample_mean_within_standard_error() {
        let inst = gen_gmm_instance(6, 2, 100_000, 1.0, 4).unwrap();
        let p = &inst.params;
        let n = inst.samples.nrows() as f64;
        for a in 0..6 {
            let col = inst.samples.column(a);
            let mean = col.mean();
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let expect: f64 = (0..2).map(|i| p.weights[i] * p.means[i][a]).sum();
            assert!((mean - expect).abs() <= 5.0 * (var / n).sqrt(), "coordinate {a}");
        }
    }

    #[test]
    fn truth_classifies_separated_mixture() {
        let mut inst = gen_gmm_instance(8, 3, 3000, 1.0, 5).unwrap();
        for (i, mu) in inst.params.means.iter_mut().enumerate() {
            mu.fill(0.0);
            mu[i] = 100.0;
        }
        let mut rng = rng_from_seed(6);
        for (t, &l) in inst.labels.iter().enumerate() {
            for a in 0..8 {
                let z: f64 = rng.sample(StandardNormal);
                inst.samples[(t, a)] = inst.params.means[l][a] + inst.params.diag_covs[l][a].sqrt() * z;
            }
        }
        let max_sd = inst.params.diag_covs.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, &v| m.max(v.sqrt()));
        assert!(100.0 * 2f64.sqrt() >= 10.0 * max_sd);
        let acc = evaluate_fit(&inst, &inst.params, ScoreMode::Likelihood).unwrap();
        assert!(acc >= 0.999, "{acc}");
        let reversed = inst.params.permuted(&[2, 1, 0]);
        assert_eq!(evaluate_fit(&inst, &reversed, ScoreMode::Likelihood).unwrap(), acc);
    }

    #[test]
    fn single_component_accuracy() {
        let inst = gen_gmm_instance(6, 1, 200, 1.0, 7).unwrap();
        assert_eq!(evaluate_fit(&inst, &inst.params, ScoreMode::Posterior).unwrap(), 1.0);
        let rep = gmm_trial(&Table2Config::new(6, 1, 500, 1, 7), 0);
        assert_eq!(rep.accuracy, Some(1.0), "{:?}", rep.error);
    }

    #[test]
    fn table1_exact_data() {
        let s = run_table1(&Table1Config { d: 10, r: 3, eps: 0.0, trials: 3, seed: 1, refine: true }).unwrap();
        assert_eq!(s.failures, 0);
        assert!(s.abs_error.unwrap().max <= 1e-8);
    }

    #[test]
    fn empty_tables() {
        let s = run_table1(&Table1Config { d: 10, r: 3, eps: 0.1, trials: 0, seed: 1, refine: true }).unwrap();
        assert!(s.trials.is_empty() && s.abs_error.is_none());
        assert_eq!(reports_csv(&s.trials), "trial,rel_error,abs_error,accuracy,seconds\n");
    }

    #[test]
    fn csv_cells() {
        let mut t = TrialReport::empty(3);
        t.accuracy = Some(0.5);
        t.seconds = 0.25;
        assert_eq!(reports_csv(&[t]).lines().nth(1).unwrap(), "3,,,0.5,0.25");
    }
}
