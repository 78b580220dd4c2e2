//! Text formats: the Ω-tensor file and sample CSV files.
//!
//! Ω-tensor files start with `ist3 d=<d> field=<real|complex>` followed by
//! one `i j k re [im]` line per triple `i < j < k` (0-based).

use std::fmt::Write as _;
use std::io::{BufRead, Read};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Complex;
use crate::symtensor::{omega_count, omega_offset, OmegaTensor};

/// `%.17g` formatting: 17 significant digits, trailing zeros dropped.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (16 - exp).max(0) as usize;
    trim_fraction(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OmegaData {
    Real(OmegaTensor<f64>),
    Complex(OmegaTensor<Complex<f64>>),
}

impl OmegaData {
    pub fn dim(&self) -> usize {
        match self {
            OmegaData::Real(f) => f.dim(),
            OmegaData::Complex(f) => f.dim(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaFile {
    pub data: OmegaData,
    /// Number of triples absent from the file (set to zero).
    pub missing: usize,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_header(line: &str) -> std::result::Result<(usize, bool), String> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some("ist3") {
        return Err("expected header `ist3 d=<d> field=<real|complex>`".into());
    }
    let (mut d, mut complex) = (None, None);
    for p in parts {
        match p.split_once('=') {
            Some(("d", v)) => d = Some(v.parse::<usize>().map_err(|_| format!("bad dimension `{v}`"))?),
            Some(("field", "real")) => complex = Some(false),
            Some(("field", "complex")) => complex = Some(true),
            Some(("field", v)) => return Err(format!("unknown field `{v}`")),
            _ => return Err(format!("unexpected header token `{p}`")),
        }
    }
    match (d, complex) {
        (Some(d), Some(c)) => Ok((d, c)),
        _ => Err("header needs both d= and field=".into()),
    }
}

fn parse_num(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| parse_err(line, format!("bad number `{tok}`")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value `{tok}`")));
    }
    Ok(v)
}

/// Reads an Ω-tensor file. Blank lines and lines starting with `#` are skipped.
pub fn read_omega<R: BufRead>(reader: R) -> Result<OmegaFile> {
    let mut lines = reader.lines().enumerate();
    let (d, complex) = loop {
        match lines.next() {
            None => return Err(parse_err(1, "empty file")),
            Some((n, line)) => {
                let line = line.map_err(|e| parse_err(n + 1, e.to_string()))?;
                let t = line.trim();
                if t.is_empty() || t.starts_with('#') {
                    continue;
                }
                break parse_header(t).map_err(|m| parse_err(n + 1, m))?;
            }
        }
    };
    if d < 3 {
        return Err(Error::EmptyOmega { d });
    }
    let mut re = OmegaTensor::<f64>::zeros(d)?;
    let mut im = OmegaTensor::<f64>::zeros(d)?;
    let mut seen = vec![false; omega_count(d)];
    let mut filled = 0;
    for (n, line) in lines {
        let ln = n + 1;
        let line = line.map_err(|e| parse_err(ln, e.to_string()))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = t.split_whitespace().collect();
        let want = if complex { 5 } else { 4 };
        if toks.len() != want {
            return Err(parse_err(ln, format!("expected {want} fields, found {}", toks.len())));
        }
        let mut idx = [0usize; 3];
        for (slot, tok) in idx.iter_mut().zip(&toks) {
            *slot = tok.parse().map_err(|_| parse_err(ln, format!("bad label `{tok}`")))?;
        }
        let [i, j, k] = idx;
        if !(i < j && j < k) {
            return Err(parse_err(ln, format!("labels {i} {j} {k} must be strictly increasing")));
        }
        if k >= d {
            return Err(parse_err(ln, format!("label {k} out of range for d={d}")));
        }
        let pos = omega_offset(d, i, j, k);
        if seen[pos] {
            return Err(parse_err(ln, format!("duplicate triple {i} {j} {k}")));
        }
        seen[pos] = true;
        filled += 1;
        re.set(i, j, k, parse_num(toks[3], ln)?)?;
        if complex {
            im.set(i, j, k, parse_num(toks[4], ln)?)?;
        }
    }
    let missing = seen.len() - filled;
    if missing > 0 {
        log::warn!("{missing} of {} triples missing; set to 0", seen.len());
    }
    let data = if complex {
        let v = re.as_slice().iter().zip(im.as_slice()).map(|(&a, &b)| Complex::new(a, b)).collect();
        OmegaData::Complex(OmegaTensor::from_vec(d, v)?)
    } else {
        OmegaData::Real(re)
    };
    Ok(OmegaFile { data, missing })
}

pub fn read_omega_str(s: &str) -> Result<OmegaFile> {
    read_omega(s.as_bytes())
}

pub fn write_omega_real(f: &OmegaTensor<f64>) -> String {
    let mut out = format!("ist3 d={} field=real\n", f.dim());
    for ([i, j, k], v) in f.iter() {
        writeln!(out, "{i} {j} {k} {}", fmt_g17(v)).expect("write to string");
    }
    out
}

pub fn write_omega_complex(f: &OmegaTensor<Complex<f64>>) -> String {
    let mut out = format!("ist3 d={} field=complex\n", f.dim());
    for ([i, j, k], v) in f.iter() {
        writeln!(out, "{i} {j} {k} {} {}", fmt_g17(v.re), fmt_g17(v.im)).expect("write to string");
    }
    out
}

pub fn write_omega(data: &OmegaData) -> String {
    match data {
        OmegaData::Real(f) => write_omega_real(f),
        OmegaData::Complex(f) => write_omega_complex(f),
    }
}

/// Reads samples, one per row. A first record that does not parse as numbers is taken as a header.
pub fn read_samples<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (n, rec) in rdr.records().enumerate() {
        let ln = n + 1;
        let rec = rec.map_err(|e| parse_err(ln, e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if n == 0 => continue,
            Err(_) => {
                let bad = rec.iter().find(|t| t.parse::<f64>().is_err()).unwrap_or_default();
                return Err(parse_err(ln, format!("bad number `{bad}`")));
            }
        };
        if row.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(ln, "non-finite value"));
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(ln, format!("expected {w} columns, found {}", row.len())));
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let Some(d) = width else {
        return Err(Error::InvalidInput("no samples in input".into()));
    };
    Ok(DMatrix::from_row_slice(rows, d, &values))
}

pub fn write_samples(samples: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in samples.row_iter() {
        let cells: Vec<String> = row.iter().map(|&v| fmt_g17(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g17_matches_printf() {
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(1.0), "1");
        assert_eq!(fmt_g17(-2.5), "-2.5");
        assert_eq!(fmt_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(fmt_g17(1e17), "1e+17");
        assert_eq!(fmt_g17(123456.0), "123456");
        assert_eq!(fmt_g17(0.0001), "0.0001");
        assert_eq!(fmt_g17(f64::NAN), "nan");
    }

    #[test]
    fn reads_real_file() {
        let text = "ist3 d=4 field=real\n0 1 2 1.5\n0 1 3 -2\n# note\n\n0 2 3 3\n1 2 3 4e-1\n";
        let f = read_omega_str(text).unwrap();
        assert_eq!(f.missing, 0);
        let OmegaData::Real(t) = f.data else { panic!("expected real") };
        assert_eq!(t.as_slice(), &[1.5, -2.0, 3.0, 0.4]);
    }

    #[test]
    fn missing_triples_are_zero() {
        let f = read_omega_str("ist3 d=4 field=complex\n1 2 3 1 -1\n").unwrap();
        assert_eq!(f.missing, 3);
        let OmegaData::Complex(t) = f.data else { panic!("expected complex") };
        assert_eq!(t.get(1, 2, 3).unwrap(), Complex::new(1.0, -1.0));
        assert_eq!(t.get(0, 1, 2).unwrap(), Complex::new(0.0, 0.0));
    }

    #[test]
    fn parse_errors_carry_lines() {
        let cases = [
            ("", 1),
            ("hello\n", 1),
            ("ist3 d=4 field=real\n0 1 2 x\n", 2),
            ("ist3 d=4 field=real\n0 1 2 1\n2 1 0 1\n", 3),
            ("ist3 d=4 field=real\n0 1 4 1\n", 2),
            ("ist3 d=4 field=real\n0 1 2 1\n0 1 2 1\n", 3),
            ("ist3 d=4 field=real\n0 1 2 1 1\n", 2),
            ("ist3 d=4 field=quaternion\n", 1),
        ];
        for (text, line) in cases {
            match read_omega_str(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn samples_with_and_without_header() {
        let a = read_samples("x1,x2,x3\n1,2,3\n4,5,6\n".as_bytes()).unwrap();
        let b = read_samples("1,2,3\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shape(), (2, 3));
        assert_eq!(a[(1, 0)], 4.0);
        assert!(matches!(read_samples("1,2\n3\n".as_bytes()), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read_samples("a,b\n".as_bytes()), Err(Error::InvalidInput(_))));
        assert!(matches!(read_samples("1,2\n3,oops\n".as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    proptest! {
        #[test]
        fn g17_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_g17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }

        #[test]
        fn omega_round_trip(d in 3usize..7, seed in proptest::collection::vec(-1e6..1e6f64, 35)) {
            let n = omega_count(d);
            let f = OmegaTensor::from_vec(d, seed[..n].to_vec()).unwrap();
            let back = read_omega_str(&write_omega_real(&f)).unwrap();
            prop_assert_eq!(back.data, OmegaData::Real(f));
        }

        #[test]
        fn complex_round_trip(d in 3usize..6, re in proptest::collection::vec(-10.0..10.0f64, 10), im in proptest::collection::vec(-10.0..10.0f64, 10)) {
            let n = omega_count(d);
            let v = (0..n).map(|t| Complex::new(re[t], im[t])).collect();
            let f = OmegaTensor::from_vec(d, v).unwrap();
            let back = read_omega_str(&write_omega_complex(&f)).unwrap();
            prop_assert_eq!(back.data, OmegaData::Complex(f));
        }
    }
}
