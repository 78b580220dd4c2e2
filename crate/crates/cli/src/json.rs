//! JSON documents with `%.17g` numbers.

use ist3_core::decomp::Decomposition;
use ist3_core::gmm::GmmFit;
use ist3_core::io::fmt_g17;
use ist3_core::simulate::{Stats, Table1Summary, Table2Summary, TrialReport};
use ist3_core::C64;
use serde::ser::Error as _;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// A float written with 17 significant digits; non-finite values become `null`.
#[derive(Debug, Clone, Copy)]
pub struct G17(pub f64);

impl Serialize for G17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(fmt_g17(self.0)).map_err(S::Error::custom)?;
        raw.serialize(s)
    }
}

pub fn nums(v: impl IntoIterator<Item = f64>) -> Vec<G17> {
    v.into_iter().map(G17).collect()
}

fn complex(z: C64) -> [G17; 2] {
    [G17(z.re), G17(z.im)]
}

pub fn to_string<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
pub struct DecompositionDoc {
    pub d: usize,
    pub r: usize,
    pub rank_estimated: bool,
    pub refined: bool,
    pub omega_residual: G17,
    pub unrefined_residual: G17,
    pub xi: Vec<G17>,
    /// `[re, im]` pairs.
    pub lambda: Vec<[G17; 2]>,
    pub gamma: Vec<[G17; 2]>,
    /// One list of `[re, im]` pairs per factor.
    pub vectors: Vec<Vec<[G17; 2]>>,
    /// Factors after cube-root-of-unity realification.
    pub real_vectors: Vec<Vec<G17>>,
    pub warnings: Vec<String>,
}

impl DecompositionDoc {
    pub fn new(dec: &Decomposition<f64>, rank_estimated: bool) -> Self {
        Self {
            d: dec.d,
            r: dec.r,
            rank_estimated,
            refined: dec.refined,
            omega_residual: G17(dec.omega_residual),
            unrefined_residual: G17(dec.unrefined_residual),
            xi: nums(dec.xi.iter().copied()),
            lambda: dec.lambda.iter().map(|&z| complex(z)).collect(),
            gamma: dec.gamma.iter().map(|&z| complex(z)).collect(),
            vectors: dec.vectors.iter().map(|v| v.iter().map(|&z| complex(z)).collect()).collect(),
            real_vectors: dec.vectors.iter().map(|v| nums(ist3_core::gmm::realify(v).iter().copied())).collect(),
            warnings: dec.warnings.iter().map(ToString::to_string).collect(),
        }
    }
}

#[derive(Serialize)]
pub struct FitDiagnosticsDoc {
    pub omega_residual: G17,
    pub objective: G17,
    pub initial_objective: G17,
    pub refine_failed: bool,
    pub covariance_rank_deficient: bool,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
pub struct GmmDoc {
    pub d: usize,
    pub r: usize,
    pub rank_estimated: bool,
    pub n_samples: usize,
    pub weights: Vec<G17>,
    pub means: Vec<Vec<G17>>,
    pub diag_covs: Vec<Vec<G17>>,
    pub diagnostics: FitDiagnosticsDoc,
}

impl GmmDoc {
    pub fn new(fit: &GmmFit<f64>, n_samples: usize, rank_estimated: bool) -> Self {
        let p = &fit.params;
        let diag = &fit.diagnostics;
        Self {
            d: p.d(),
            r: p.r(),
            rank_estimated,
            n_samples,
            weights: nums(p.weights.iter().copied()),
            means: p.means.iter().map(|m| nums(m.iter().copied())).collect(),
            diag_covs: p.diag_covs.iter().map(|m| nums(m.iter().copied())).collect(),
            diagnostics: FitDiagnosticsDoc {
                omega_residual: G17(diag.omega_residual),
                objective: G17(diag.objective),
                initial_objective: G17(diag.initial_objective),
                refine_failed: diag.refine_failed,
                covariance_rank_deficient: diag.covariance_rank_deficient,
                warnings: diag.decomposition_warnings.iter().map(ToString::to_string).collect(),
            },
        }
    }
}

#[derive(Serialize)]
pub struct StatsDoc {
    pub min: G17,
    pub mean: G17,
    pub max: G17,
    pub count: usize,
}

fn stats(s: Option<Stats>) -> Option<StatsDoc> {
    s.map(|s| StatsDoc { min: G17(s.min), mean: G17(s.mean), max: G17(s.max), count: s.count })
}

#[derive(Serialize)]
pub struct TrialDoc {
    pub trial: usize,
    pub rel_error: Option<G17>,
    pub abs_error: Option<G17>,
    pub accuracy: Option<G17>,
    pub seconds: G17,
    pub error: Option<String>,
    pub warnings: Vec<String>,
}

fn trials(ts: &[TrialReport]) -> Vec<TrialDoc> {
    ts.iter()
        .map(|t| TrialDoc {
            trial: t.trial,
            rel_error: t.rel_error.map(G17),
            abs_error: t.abs_error.map(G17),
            accuracy: t.accuracy.map(G17),
            seconds: G17(t.seconds),
            error: t.error.clone(),
            warnings: t.warnings.clone(),
        })
        .collect()
}

#[derive(Serialize)]
pub struct Table1Doc {
    pub table: u8,
    pub d: usize,
    pub r: usize,
    pub eps: G17,
    pub trials: usize,
    pub seed: u64,
    pub refine: bool,
    pub rel_error: Option<StatsDoc>,
    pub abs_error: Option<StatsDoc>,
    pub mean_seconds: Option<G17>,
    pub failures: usize,
    pub per_trial: Vec<TrialDoc>,
}

impl Table1Doc {
    pub fn new(s: &Table1Summary) -> Self {
        let c = &s.config;
        Self {
            table: 1,
            d: c.d,
            r: c.r,
            eps: G17(c.eps),
            trials: c.trials,
            seed: c.seed,
            refine: c.refine,
            rel_error: stats(s.rel_error),
            abs_error: stats(s.abs_error),
            mean_seconds: s.mean_seconds.map(G17),
            failures: s.failures,
            per_trial: trials(&s.trials),
        }
    }
}

#[derive(Serialize)]
pub struct Table2Doc {
    pub table: u8,
    pub d: usize,
    pub r: usize,
    pub samples: usize,
    pub trials: usize,
    pub seed: u64,
    pub mean_scale: G17,
    pub refine: bool,
    pub score: &'static str,
    pub accuracy: Option<StatsDoc>,
    pub mean_seconds: Option<G17>,
    pub failures: usize,
    pub per_trial: Vec<TrialDoc>,
}

impl Table2Doc {
    pub fn new(s: &Table2Summary, score: &'static str) -> Self {
        let c = &s.config;
        Self {
            table: 2,
            d: c.d,
            r: c.r,
            samples: c.samples,
            trials: c.trials,
            seed: c.seed,
            mean_scale: G17(c.mean_scale),
            refine: c.refine,
            score,
            accuracy: stats(s.accuracy),
            mean_seconds: s.mean_seconds.map(G17),
            failures: s.failures,
            per_trial: trials(&s.trials),
        }
    }
}
