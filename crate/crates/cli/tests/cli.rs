use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ist3_core::align::align_means;
use ist3_core::io::write_omega_real;
use ist3_core::simulate::gen_gmm_instance;
use ist3_core::symtensor::OmegaTensor;
use nalgebra::DVector;
use serde_json::Value;
use tempfile::TempDir;

fn ist3(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ist3")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn two_term() -> OmegaTensor<f64> {
    OmegaTensor::from_rank_one_sum(
        &[0.4, 0.6],
        &[DVector::from_element(6, 1.0), DVector::from_vec(vec![1.0, -1.0, 2.0, -1.0, 2.0, 3.0])],
    )
    .unwrap()
}

fn write_tensor(dir: &TempDir, name: &str, f: &OmegaTensor<f64>) -> std::path::PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, write_omega_real(f)).unwrap();
    p
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn decompose_two_term_example() {
    let dir = TempDir::new().unwrap();
    let input = write_tensor(&dir, "f.txt", &two_term());
    let out = ist3(&["decompose", path_str(&input), "--r", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["r"], 2);
    assert_eq!(doc["d"], 6);
    assert!(doc["omega_residual"].as_f64().unwrap() <= 1e-8);
    let mut lambdas: Vec<f64> = doc["lambda"].as_array().unwrap().iter().map(|z| z[0].as_f64().unwrap()).collect();
    lambdas.sort_by(f64::total_cmp);
    assert!((lambdas[0] - 0.4).abs() < 1e-8 && (lambdas[1] - 0.6).abs() < 1e-8, "{lambdas:?}");
}

#[test]
fn decompose_estimates_rank() {
    let dir = TempDir::new().unwrap();
    let input = write_tensor(&dir, "f.txt", &two_term());
    let out = ist3(&["decompose", path_str(&input)]);
    assert_eq!(code(&out), 0);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["r"], 2);
    assert_eq!(doc["rank_estimated"], true);
}

#[test]
fn reconstruct_round_trip() {
    let dir = TempDir::new().unwrap();
    let f = two_term();
    let input = write_tensor(&dir, "f.txt", &f);
    let recon = dir.path().join("recon.txt");
    let json = dir.path().join("out.json");
    let out = ist3(&["decompose", path_str(&input), "--r", "2", "--reconstruct", path_str(&recon), "--out", path_str(&json)]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    assert!(serde_json::from_slice::<Value>(&fs::read(&json).unwrap()).is_ok());
    let back = ist3_core::io::read_omega_str(&fs::read_to_string(&recon).unwrap()).unwrap();
    let ist3_core::io::OmegaData::Real(g) = back.data else { panic!("expected a real tensor") };
    let diff = g.as_slice().iter().zip(f.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-10, "{diff}");
}

#[test]
fn rank_above_bound_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let input = write_tensor(&dir, "f.txt", &two_term());
    let out = ist3(&["decompose", path_str(&input), "--r", "6"]);
    assert_eq!(code(&out), 1);
    assert!(!out.stderr.is_empty());
}

#[test]
fn empty_file_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("empty.txt");
    fs::write(&input, "").unwrap();
    assert_eq!(code(&ist3(&["decompose", path_str(&input)])), 1);
    assert_eq!(code(&ist3(&["rank", path_str(&input)])), 1);
}

#[test]
fn missing_file_is_an_input_error() {
    assert_eq!(code(&ist3(&["rank", "/nonexistent/omega.txt"])), 1);
}

#[test]
fn rank_reports_two_one_zero() {
    let dir = TempDir::new().unwrap();
    let one = OmegaTensor::from_rank_one_sum(&[1.0], &[DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5, 3.0, 1.5])]).unwrap();
    let cases = [(two_term(), "2"), (one, "1"), (OmegaTensor::zeros(6).unwrap(), "0")];
    for (i, (f, want)) in cases.iter().enumerate() {
        let input = write_tensor(&dir, &format!("f{i}.txt"), f);
        let out = ist3(&["rank", path_str(&input)]);
        assert_eq!(code(&out), 0);
        assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), *want);
    }
}

#[test]
fn bench_with_no_trials() {
    let dir = TempDir::new().unwrap();
    let prefix = dir.path().join("run");
    let out = ist3(&["bench", "--table", "1", "--d", "10", "--r", "3", "--trials", "0", "--out", path_str(&prefix)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["trials"], 0);
    assert!(doc["rel_error"].is_null());
    assert_eq!(fs::read_to_string(prefix.with_extension("csv")).unwrap().lines().count(), 1);
    assert!(prefix.with_extension("json").exists());
}

#[test]
fn bench_table1_writes_one_row_per_trial() {
    let out = ist3(&["bench", "--table", "1", "--d", "12", "--r", "3", "--eps", "0.01", "--trials", "3", "--seed", "5"]);
    assert_eq!(code(&out), 0);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["per_trial"].as_array().unwrap().len(), 3);
    assert!(doc["abs_error"]["mean"].as_f64().unwrap() < 0.1);
}

#[test]
fn bench_rejects_unknown_table() {
    assert_ne!(code(&ist3(&["bench", "--table", "3", "--d", "10", "--r", "3"])), 0);
}

#[test]
fn tensor_generator_is_seeded() {
    let a = ist3(&["tensor", "--d", "8", "--r", "2", "--eps", "0.1", "--seed", "9"]);
    let b = ist3(&["tensor", "--d", "8", "--r", "2", "--eps", "0.1", "--seed", "9"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert!(ist3_core::io::read_omega_str(&String::from_utf8_lossy(&a.stdout)).is_ok());
}

#[test]
fn learn_recovers_sampled_means() {
    let dir = TempDir::new().unwrap();
    let (d, r, n, seed) = (12, 3, 20_000, 11);
    let csv = dir.path().join("x.csv");
    let labels = dir.path().join("labels.txt");
    let out = ist3(&[
        "sample", "--d", &d.to_string(), "--r", &r.to_string(), "--samples", &n.to_string(),
        "--seed", &seed.to_string(), "--mean-scale", "3", "--out", path_str(&csv),
    ]);
    assert_eq!(code(&out), 0);
    let out = ist3(&["learn", path_str(&csv), "--r", "3", "--labels", path_str(&labels)]);
    assert!(code(&out) == 0 || code(&out) == 2, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["n_samples"], n);
    let means: Vec<DVector<f64>> =
        doc["means"].as_array().unwrap().iter().map(|m| DVector::from_vec(floats(m))).collect();
    let truth = gen_gmm_instance(d, r, n, 3.0, seed).unwrap().params;
    let perm = align_means(&means, &truth.means);
    let rms: f64 = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| (&means[j] - &truth.means[i]).norm() / (d as f64).sqrt())
        .sum::<f64>()
        / r as f64;
    assert!(rms <= 0.15, "mean rms error {rms}");
    assert_eq!(fs::read_to_string(&labels).unwrap().lines().count(), n);
}
