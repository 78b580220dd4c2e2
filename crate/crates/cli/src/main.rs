//! `ist3`: incomplete symmetric tensor decomposition and diagonal Gaussian
//! mixture learning from the command line.
//!
//! Exit codes: 0 success, 1 input error, 2 numerical degeneracy (results
//! are still written when there are any).

mod json;

use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ist3_core::decomp::{approximate, rank_profile, ProjectionConfig};
use ist3_core::error::max_rank;
use ist3_core::gmm::{classify, fit_moments, sample_moments, FitOptions, ScoreMode};
use ist3_core::io::{read_omega, read_samples, write_omega_complex, write_omega_real, write_samples, OmegaData};
use ist3_core::numkit::DEFAULT_RANK_TOL;
use ist3_core::simulate::{
    gen_gmm_instance, gen_tensor_trial, reports_csv, run_table1, run_table2, Table1Config, Table2Config,
};
use ist3_core::symtensor::OmegaTensor;
use ist3_core::{Error, Scalar};

#[derive(Parser, Debug)]
#[command(name = "ist3", version, about = "Incomplete symmetric tensor decomposition and Gaussian mixture learning")]
struct Cli {
    /// Worker threads for trial and sample parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose or approximate an Ω-tensor file.
    Decompose(DecomposeArgs),
    /// Learn a diagonal Gaussian mixture from a CSV of samples.
    Learn(LearnArgs),
    /// Print the estimated rank of an Ω-tensor file.
    Rank(RankArgs),
    /// Reproduce the tensor (table 1) or mixture (table 2) experiments.
    Bench(BenchArgs),
    /// Write a random Ω-tensor `Σ p_i^⊗3` plus noise of norm `eps`.
    Tensor(TensorArgs),
    /// Write samples from a random diagonal mixture as CSV.
    Sample(SampleArgs),
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    tensor_file: PathBuf,
    /// Rank; estimated from the flattening when omitted.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative singular-value threshold for the rank estimate.
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    tol: f64,
    /// Skip the Levenberg–Marquardt refinement.
    #[arg(long)]
    no_refine: bool,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the reconstructed Ω-tensor to this file.
    #[arg(long)]
    reconstruct: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LearnArgs {
    csv_file: PathBuf,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    tol: f64,
    #[arg(long)]
    no_refine: bool,
    /// Scoring rule used for `--labels`.
    #[arg(long, value_enum, default_value_t = Score::Likelihood)]
    score: Score,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the predicted component of every sample here, one per line.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RankArgs {
    tensor_file: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    tol: f64,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    table: u8,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    r: usize,
    /// Perturbation norm (table 1).
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Samples per instance (table 2).
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standard deviation of the mean entries (table 2).
    #[arg(long, default_value_t = 1.0)]
    mean_scale: f64,
    #[arg(long)]
    no_refine: bool,
    #[arg(long, value_enum, default_value_t = Score::Likelihood)]
    score: Score,
    /// Write `<out>.csv` (per trial) and `<out>.json` (summary).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TensorArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    r: usize,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    r: usize,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    mean_scale: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the true component of every sample here, one per line.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Score {
    Likelihood,
    Posterior,
}

impl Score {
    fn mode(self) -> ScoreMode {
        match self {
            Score::Likelihood => ScoreMode::Likelihood,
            Score::Posterior => ScoreMode::Posterior,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Score::Likelihood => "likelihood",
            Score::Posterior => "posterior",
        }
    }
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::RepeatedEigenvalues { .. } | Error::DegenerateComponent { .. } | Error::DependentEigenvectors { .. } => {
                Failure::Numerical(e.to_string())
            }
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: io::Error) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

#[derive(Debug, PartialEq, Eq)]
enum Status {
    Ok,
    Degenerate,
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| io_err(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn open(path: &Path) -> Result<BufReader<fs::File>, Failure> {
    fs::File::open(path).map(BufReader::new).map_err(|e| io_err(path, e))
}

/// Threshold rank when it fits the bound, otherwise the largest singular-value gap.
fn choose_rank<S: Scalar<Real = f64>>(f: &OmegaTensor<S>, tol: f64) -> Result<usize, Failure> {
    let d = f.dim();
    let profile = rank_profile(f, tol)?;
    let bound = max_rank(d);
    let r = if profile.rank <= bound { profile.rank } else { profile.gap_rank };
    log::info!("rank estimate: threshold {}, gap {}, using {r}", profile.rank, profile.gap_rank);
    if r == 0 {
        return Err(Failure::Input("estimated rank is 0; the tensor is numerically zero".into()));
    }
    if r > bound {
        return Err(Failure::Input(format!(
            "estimated rank {r} exceeds the bound d/2 - 1 = {bound} for d = {d}; pass --r"
        )));
    }
    Ok(r)
}

fn decompose_any<S: Scalar<Real = f64>>(f: &OmegaTensor<S>, a: &DecomposeArgs) -> Result<Status, Failure> {
    let (r, estimated) = match a.r {
        Some(r) => (r, false),
        None => (choose_rank(f, a.tol)?, true),
    };
    let dec = approximate(f, r, &ProjectionConfig::seeded(a.seed), !a.no_refine)?;
    if let Some(p) = &a.reconstruct {
        let recon = dec.reconstruct_omega()?;
        let text = if recon.as_slice().iter().all(|z| z.im == 0.0) {
            write_omega_real(&recon.real_part())
        } else {
            write_omega_complex(&recon)
        };
        fs::write(p, text).map_err(|e| io_err(p, e))?;
    }
    for w in &dec.warnings {
        log::warn!("{w}");
    }
    emit(a.out.as_deref(), &json::to_string(&json::DecompositionDoc::new(&dec, estimated)))?;
    Ok(if dec.has_degeneracy() { Status::Degenerate } else { Status::Ok })
}

fn cmd_decompose(a: &DecomposeArgs) -> Result<Status, Failure> {
    let file = read_omega(open(&a.tensor_file)?)?;
    match &file.data {
        OmegaData::Real(f) => decompose_any(f, a),
        OmegaData::Complex(f) => decompose_any(f, a),
    }
}

fn cmd_learn(a: &LearnArgs) -> Result<Status, Failure> {
    let samples = read_samples(open(&a.csv_file)?)?;
    let moments = sample_moments(&samples)?;
    let (r, estimated) = match a.r {
        Some(r) => (r, false),
        None => (choose_rank(&moments.m3.omega_extract()?, a.tol)?, true),
    };
    let fit = fit_moments(&moments, r, &FitOptions { refine: !a.no_refine, seed: a.seed })?;
    if let Some(p) = &a.labels {
        let mut text = String::with_capacity(samples.nrows() * 2);
        for row in samples.row_iter() {
            text.push_str(&classify(&fit.params, &row.transpose(), a.score.mode()).to_string());
            text.push('\n');
        }
        fs::write(p, text).map_err(|e| io_err(p, e))?;
    }
    emit(a.out.as_deref(), &json::to_string(&json::GmmDoc::new(&fit, samples.nrows(), estimated)))?;
    Ok(if fit.diagnostics.has_degeneracy() { Status::Degenerate } else { Status::Ok })
}

fn cmd_rank(a: &RankArgs) -> Result<Status, Failure> {
    let file = read_omega(open(&a.tensor_file)?)?;
    let rank = match &file.data {
        OmegaData::Real(f) => rank_profile(f, a.tol)?.rank,
        OmegaData::Complex(f) => rank_profile(f, a.tol)?.rank,
    };
    println!("{rank}");
    Ok(Status::Ok)
}

fn cmd_bench(a: &BenchArgs) -> Result<Status, Failure> {
    let (csv, doc) = if a.table == 1 {
        let s = run_table1(&Table1Config {
            d: a.d,
            r: a.r,
            eps: a.eps,
            trials: a.trials,
            seed: a.seed,
            refine: !a.no_refine,
        })?;
        (reports_csv(&s.trials), json::to_string(&json::Table1Doc::new(&s)))
    } else {
        let cfg = Table2Config {
            mean_scale: a.mean_scale,
            refine: !a.no_refine,
            score: a.score.mode(),
            ..Table2Config::new(a.d, a.r, a.samples, a.trials, a.seed)
        };
        let s = run_table2(&cfg)?;
        (reports_csv(&s.trials), json::to_string(&json::Table2Doc::new(&s, a.score.name())))
    };
    if let Some(prefix) = &a.out {
        let with_ext = |ext: &str| {
            let mut p = prefix.clone().into_os_string();
            p.push(ext);
            PathBuf::from(p)
        };
        let (csv_path, json_path) = (with_ext(".csv"), with_ext(".json"));
        fs::write(&csv_path, csv).map_err(|e| io_err(&csv_path, e))?;
        fs::write(&json_path, &doc).map_err(|e| io_err(&json_path, e))?;
    }
    print!("{doc}");
    Ok(Status::Ok)
}

fn cmd_tensor(a: &TensorArgs) -> Result<Status, Failure> {
    let t = gen_tensor_trial(a.d, a.r, a.eps, a.seed)?;
    emit(a.out.as_deref(), &write_omega_real(&t.perturbed))?;
    Ok(Status::Ok)
}

fn cmd_sample(a: &SampleArgs) -> Result<Status, Failure> {
    let inst = gen_gmm_instance(a.d, a.r, a.samples, a.mean_scale, a.seed)?;
    if let Some(p) = &a.labels {
        let text: String = inst.labels.iter().map(|l| format!("{l}\n")).collect();
        fs::write(p, text).map_err(|e| io_err(p, e))?;
    }
    emit(a.out.as_deref(), &write_samples(&inst.samples))?;
    Ok(Status::Ok)
}

fn run(cli: &Cli) -> Result<Status, Failure> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Input(format!("--threads: {e}")))?;
    }
    match &cli.command {
        Command::Decompose(a) => cmd_decompose(a),
        Command::Learn(a) => cmd_learn(a),
        Command::Rank(a) => cmd_rank(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Tensor(a) => cmd_tensor(a),
        Command::Sample(a) => cmd_sample(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Degenerate) => ExitCode::from(2),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}
