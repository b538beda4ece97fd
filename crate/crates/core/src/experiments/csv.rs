//! CSV serialization of sweep results.
//!
//! Fixed header, one row per grid point in N-major, k-minor order. Floats are
//! written in Rust's shortest round-trip scientific notation, so parsing the
//! file recovers every value bit-exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::SweepResult;

pub const CSV_HEADER: &str =
    "model,activation,N,d,k,p,mean_sensitivity,std_sensitivity,mean_lambda_min,jitter_rate,theory_rate";

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:e},{:e},{:e},{:e},{:e}\n",
                self.model.name(),
                self.activation.name(),
                r.n,
                r.d,
                r.k,
                r.p,
                r.mean_sensitivity,
                r.std_sensitivity,
                r.mean_lambda_min,
                r.jitter_rate,
                r.theory_rate,
            ));
        }
        out
    }
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(result.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
}

/// Parsed CSV row, numeric fields only.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub model: String,
    pub activation: String,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub p: usize,
    pub mean_sensitivity: f64,
    pub std_sensitivity: f64,
    pub mean_lambda_min: f64,
    pub jitter_rate: f64,
    pub theory_rate: f64,
}

/// Parse a CSV produced by [`emit_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        _ => return Err(Error::InvalidArgument("missing or wrong CSV header".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(Error::InvalidArgument(format!(
                "row {}: expected 11 fields, got {}",
                i + 2,
                f.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("row {}: bad float {s:?}", i + 2)))
        };
        let int = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("row {}: bad integer {s:?}", i + 2)))
        };
        rows.push(CsvRow {
            model: f[0].to_string(),
            activation: f[1].to_string(),
            n: int(f[2])?,
            d: int(f[3])?,
            k: int(f[4])?,
            p: int(f[5])?,
            mean_sensitivity: num(f[6])?,
            std_sensitivity: num(f[7])?,
            mean_lambda_min: num(f[8])?,
            jitter_rate: num(f[9])?,
            theory_rate: num(f[10])?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::super::{SweepResult, SweepRow};
    use super::*;
    use crate::activations::Activation;
    use crate::models::ModelKind;

    fn sample_result(rows: Vec<SweepRow>) -> SweepResult {
        SweepResult {
            rows,
            model: ModelKind::Rf,
            activation: Activation::tanh(),
            config_echo: String::new(),
            wall_time_secs: 0.0,
        }
    }

    fn row(n: usize, k: usize, s: f64) -> SweepRow {
        SweepRow {
            n,
            d: 4,
            k,
            p: k,
            mean_sensitivity: s,
            std_sensitivity: s / 10.0,
            mean_lambda_min: 1.2345e-3,
            jitter_rate: 0.0,
            theory_rate: 2.0,
            failed_trials: 0,
        }
    }

    #[test]
    fn empty_result_is_header_only() {
        let csv = sample_result(vec![]).to_csv();
        assert_eq!(csv, format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn grid_rows_in_documented_order() {
        let csv =
            sample_result(vec![row(2, 4, 1.0), row(2, 8, 2.0), row(3, 4, 3.0), row(3, 8, 4.0)])
                .to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("rf,tanh,2,4,4,"));
        assert!(lines[4].starts_with("rf,tanh,3,4,8,"));
    }

    #[test]
    fn floats_round_trip_bit_exactly() {
        let vals = [1.0 / 3.0, 2.5e-17, 12345.678901234567, f64::NAN, 0.1 + 0.2];
        let rows: Vec<SweepRow> = vals.iter().enumerate().map(|(i, &v)| row(i + 1, 2, v)).collect();
        let result = sample_result(rows);
        let parsed = parse_csv(&result.to_csv()).unwrap();
        for (r, &v) in parsed.iter().zip(&vals) {
            if v.is_nan() {
                assert!(r.mean_sensitivity.is_nan());
            } else {
                assert_eq!(r.mean_sensitivity.to_bits(), v.to_bits());
            }
            assert_eq!(r.mean_lambda_min.to_bits(), (1.2345e-3f64).to_bits());
        }
    }

    #[test]
    fn parse_rejects_wrong_header() {
        assert!(parse_csv("a,b,c\n1,2,3\n").is_err());
    }
}
