//! File formats.
//!
//! Matrices are stored as CSV with one sample per row (`T` rows, `n`
//! columns) and an optional header line; internally they are `n × T`.
//! Square matrices such as `A` and `B̂` are stored as JSON
//! `{"n": n, "data": [row-major entries]}`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::christoffel::{ObservationSet, ScoreReport};
use crate::error::{Error, Result};
use crate::ica::SeparationResult;
use crate::synthdata::{GeneratedData, MixtureSpec};

fn parse_error(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Reads a `T × n` CSV of reals and returns it as an `n × T` matrix.
///
/// A first line containing any non-numeric field is treated as a header.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if k == 0 => continue,
            Err(e) => {
                let field = record
                    .iter()
                    .find(|f| f.parse::<f64>().is_err())
                    .unwrap_or("");
                return Err(parse_error(
                    path,
                    line,
                    format!("cannot parse '{field}' as a number ({e})"),
                ));
            }
        };
        if let Some(col) = values.iter().position(|v| !v.is_finite()) {
            return Err(parse_error(
                path,
                line,
                format!("non-finite value in column {}", col + 1),
            ));
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(parse_error(
                    path,
                    line,
                    format!("expected {w} fields, found {}", values.len()),
                ));
            }
            _ => {}
        }
        rows.push(values);
    }
    let n = width.ok_or(Error::EmptyObservations)?;
    Ok(DMatrix::from_fn(n, rows.len(), |i, t| rows[t][i]))
}

pub fn read_observations(path: &Path) -> Result<ObservationSet> {
    ObservationSet::new(read_matrix_csv(path)?)
}

/// Writes an `n × T` matrix as `T` rows with header `prefix1,…,prefixn`.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>, prefix: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((1..=m.nrows()).map(|i| format!("{prefix}{i}")))?;
    for col in m.column_iter() {
        w.write_record(col.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// One label per line, optional header.
pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    let text = fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let field = raw.trim();
        if field.is_empty() {
            continue;
        }
        match field {
            "0" => labels.push(0),
            "1" => labels.push(1),
            _ if k == 0 && field.parse::<f64>().is_err() => {}
            _ => {
                return Err(parse_error(
                    path,
                    k as u64 + 1,
                    format!("label must be 0 or 1, got '{field}'"),
                ))
            }
        }
    }
    Ok(labels)
}

pub fn write_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "label")?;
    for l in labels {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

/// Square matrix in row-major JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrixJson {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SquareMatrixJson {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            n: m.nrows(),
            data: m.transpose().as_slice().to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.n * self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n * self.n,
                got: self.data.len(),
            });
        }
        Ok(DMatrix::from_row_slice(self.n, self.n, &self.data))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_square_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_json(path, &SquareMatrixJson::from_matrix(m))
}

pub fn read_square_matrix(path: &Path) -> Result<DMatrix<f64>> {
    read_json::<SquareMatrixJson>(path)?.to_matrix()
}

/// Summary stored next to `scores.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSidecar {
    pub n: usize,
    pub d: usize,
    pub eta: f64,
    pub threshold: f64,
    pub m: usize,
    pub condition_warning: bool,
}

impl From<&ScoreReport> for ScoreSidecar {
    fn from(r: &ScoreReport) -> Self {
        Self {
            n: r.n,
            d: r.degree,
            eta: r.eta,
            threshold: r.threshold,
            m: r.m,
            condition_warning: r.condition_warning,
        }
    }
}

/// Writes `scores.csv` (`t,theta,label`) and `scores.json` into `dir`.
pub fn write_score_report(dir: &Path, report: &ScoreReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("scores.csv"))?;
    w.write_record(["t", "theta", "label"])?;
    for (t, (theta, label)) in report.theta.iter().zip(&report.labels).enumerate() {
        w.write_record([t.to_string(), theta.to_string(), label.to_string()])?;
    }
    w.flush()?;
    write_json(&dir.join("scores.json"), &ScoreSidecar::from(report))
}

/// Reads back `(theta, labels)` from a `scores.csv`.
pub fn read_scores(path: &Path) -> Result<(Vec<f64>, Vec<u8>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let (mut theta, mut labels) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |msg: &str| parse_error(path, line, msg);
        theta.push(
            record
                .get(1)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| bad("bad theta"))?,
        );
        labels.push(
            record
                .get(2)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| bad("bad label"))?,
        );
    }
    Ok((theta, labels))
}

/// Writes `S_hat.csv`, `B_hat.json` and, when present, the score files.
pub fn write_separation(dir: &Path, result: &SeparationResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix_csv(&dir.join("S_hat.csv"), &result.s_hat, "s")?;
    write_square_matrix(&dir.join("B_hat.json"), &result.unmixing.b_hat)?;
    if let Some(report) = &result.report {
        write_score_report(dir, report)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationManifest {
    pub spec: MixtureSpec,
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: u64,
    pub version: String,
}

/// Writes `S.csv`, `X.csv`, `labels.csv`, `A.json` and `manifest.json`.
pub fn write_generated(
    dir: &Path,
    data: &GeneratedData,
    spec: &MixtureSpec,
    seed: u64,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix_csv(&dir.join("S.csv"), &data.s, "s")?;
    write_matrix_csv(&dir.join("X.csv"), &data.x, "x")?;
    write_labels(&dir.join("labels.csv"), &data.labels)?;
    write_square_matrix(&dir.join("A.json"), &data.a)?;
    let manifest = GenerationManifest {
        spec: spec.clone(),
        t: data.labels.len(),
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::christoffel::{classify, ClassifierConfig};
    use crate::synthdata::gen_mixture;

    #[test]
    fn matrix_csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let m = DMatrix::from_fn(3, 20, |i, t| ((i * 31 + t * 7) as f64).sin() * 1e3 / 7.0);
        let path = dir.path().join("m.csv");
        write_matrix_csv(&path, &m, "x").unwrap();
        assert_eq!(read_matrix_csv(&path).unwrap(), m);
    }

    #[test]
    fn header_is_optional() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        fs::write(&path, "1, 2\n3,4\n\n5,6\n").unwrap();
        let m = read_matrix_csv(&path).unwrap();
        assert_eq!(
            m,
            DMatrix::from_row_slice(2, 3, &[1.0, 3.0, 5.0, 2.0, 4.0, 6.0])
        );
        fs::write(&path, "a,b\n1,2\n").unwrap();
        assert_eq!(read_matrix_csv(&path).unwrap().shape(), (2, 1));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "x1,x2\n1,2\n3,oops\n").unwrap();
        let err = read_matrix_csv(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("line 3"));
        fs::write(&path, "1,2\n3\n").unwrap();
        assert!(matches!(
            read_matrix_csv(&path),
            Err(Error::Parse { line: 2, .. })
        ));
        fs::write(&path, "1,2\n3,NaN\n").unwrap();
        assert!(matches!(
            read_matrix_csv(&path),
            Err(Error::Parse { line: 2, .. })
        ));
        fs::write(&path, "").unwrap();
        assert!(matches!(
            read_matrix_csv(&path),
            Err(Error::EmptyObservations)
        ));
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.csv");
        write_labels(&path, &[0, 1, 1, 0]).unwrap();
        assert_eq!(read_labels(&path).unwrap(), vec![0, 1, 1, 0]);
        fs::write(&path, "0\n2\n").unwrap();
        assert!(matches!(
            read_labels(&path),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn square_matrix_is_row_major() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let j = SquareMatrixJson::from_matrix(&m);
        assert_eq!(j.data, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(j.to_matrix().unwrap(), m);
        assert!(SquareMatrixJson {
            n: 2,
            data: vec![1.0]
        }
        .to_matrix()
        .is_err());
    }

    #[test]
    fn score_files() {
        let dir = tempfile::tempdir().unwrap();
        let data = gen_mixture(&MixtureSpec::cubic(0.5, 0.0), 300, 1).unwrap();
        let report = classify(
            &data.observations().unwrap(),
            &ClassifierConfig::new(2, 0.5),
        )
        .unwrap();
        write_score_report(dir.path(), &report).unwrap();
        let (theta, labels) = read_scores(&dir.path().join("scores.csv")).unwrap();
        assert_eq!(theta, report.theta);
        assert_eq!(labels, report.labels);
        let side: ScoreSidecar = read_json(&dir.path().join("scores.json")).unwrap();
        assert_eq!((side.n, side.d, side.m), (3, 2, 10));
        assert_eq!(side.threshold, 5.0);
    }

    #[test]
    fn generated_dump() {
        let dir = tempfile::tempdir().unwrap();
        let spec = MixtureSpec::vanishing(0.4);
        let data = gen_mixture(&spec, 100, 9).unwrap();
        write_generated(dir.path(), &data, &spec, 9).unwrap();
        assert_eq!(read_matrix_csv(&dir.path().join("S.csv")).unwrap(), data.s);
        assert_eq!(read_matrix_csv(&dir.path().join("X.csv")).unwrap(), data.x);
        assert_eq!(
            read_labels(&dir.path().join("labels.csv")).unwrap(),
            data.labels
        );
        assert_eq!(
            read_square_matrix(&dir.path().join("A.json")).unwrap(),
            data.a
        );
        let manifest: GenerationManifest = read_json(&dir.path().join("manifest.json")).unwrap();
        assert_eq!((manifest.spec, manifest.t, manifest.seed), (spec, 100, 9));
    }
}
