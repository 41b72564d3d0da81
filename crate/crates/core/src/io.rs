//! File formats: far-field datasets, mode and T-matrix exports, trace tables
//! and sweep manifests. See `docs/format.md` for the normative description.
//!
//! Every text file starts with one JSON header line followed by a CSV body.
//! Floating-point values in CSV bodies are written with 17 significant digits
//! and header values with the shortest round-tripping representation, so
//! reading a file back reproduces the written values bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::modes::{self, ModeSet, C0};
use crate::quadrature::{Direction, QuadratureRule, RuleId};
use crate::scattering::ScatteringMatrix;
use crate::swe::{SweIndex, TransitionMatrix};
use crate::tracking::{TraceRow, TRACE_COLUMNS};

pub const FORMAT_VERSION: u32 = 1;
const DATASET_KIND: &str = "farfield-dataset";
const MODES_KIND: &str = "modes";
const TMATRIX_KIND: &str = "tmatrix";
const SCALING_NOTE: &str = "unweighted S(r,r') = (k/(j 4 pi)) F for a unit-amplitude plane wave, \
                            time dependence exp(j omega t), far field F exp(-jkr)/r";

fn number(x: f64) -> String {
    format!("{x:.16e}")
}

fn frequency_consistent(frequency_hz: f64, k: f64) -> bool {
    let expected = 2.0 * std::f64::consts::PI * frequency_hz / C0;
    (k - expected).abs() <= 1e-9 * expected.abs().max(f64::MIN_POSITIVE)
}

/// Rule sample as stored in headers: `[theta, phi, weight]`.
type RuleSample = [f64; 3];

fn rule_samples(rule: &QuadratureRule) -> Vec<RuleSample> {
    rule.points.iter().zip(&rule.weights).map(|(d, &w)| [d.theta(), d.phi(), w]).collect()
}

fn rule_from_samples(samples: &[RuleSample]) -> Result<QuadratureRule> {
    let points = samples.iter().map(|s| Direction::new(s[0], s[1])).collect::<Result<Vec<_>>>()?;
    QuadratureRule::from_samples(points, samples.iter().map(|s| s[2]).collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetHeader {
    kind: String,
    format_version: u32,
    frequency_hz: f64,
    wavenumber: f64,
    rule_id: RuleId,
    n_points: usize,
    rule: Vec<RuleSample>,
    scaling_note: String,
}

/// Reads the JSON header line and returns it with a reader over the body.
fn split_header<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(T, BufReader<File>)> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Parse { line: 1, message: format!("header: {e}") })?;
    Ok((header, reader))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize + 1).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line, message: format!("{other:?}") },
    }
}

/// Writes the unweighted matrix with its rule and frequency.
pub fn write_dataset(smat: &ScatteringMatrix, frequency_hz: f64, path: &Path) -> Result<()> {
    let rule = smat.rule();
    let header = DatasetHeader {
        kind: DATASET_KIND.into(),
        format_version: FORMAT_VERSION,
        frequency_hz,
        wavenumber: smat.k(),
        rule_id: rule.id,
        n_points: rule.len(),
        rule: rule_samples(rule),
        scaling_note: SCALING_NOTE.into(),
    };
    if !frequency_consistent(frequency_hz, smat.k()) {
        return Err(Error::InconsistentHeader(format!(
            "wavenumber {} does not match frequency {frequency_hz} Hz",
            smat.k()
        )));
    }
    let mut out = create(path)?;
    serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
    writeln!(out)?;
    let mut body = csv::Writer::from_writer(out);
    body.write_record(["row", "col", "re", "im"]).map_err(csv_error)?;
    let s = smat.unweighted();
    for i in 0..s.nrows() {
        for j in 0..s.ncols() {
            let z = s[(i, j)];
            body.write_record([i.to_string(), j.to_string(), number(z.re), number(z.im)]).map_err(csv_error)?;
        }
    }
    body.flush()?;
    Ok(())
}

/// A dataset read from disk.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub frequency_hz: f64,
    pub matrix: ScatteringMatrix,
}

impl Dataset {
    /// Reciprocity, decomposition and lossless checks of the stored matrix.
    pub fn validate(&self, floor: f64) -> Result<ValidationReport> {
        ValidationReport::compute(&self.matrix, floor)
    }
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let (header, body): (DatasetHeader, _) = split_header(path)?;
    if header.kind != DATASET_KIND {
        return Err(Error::InconsistentHeader(format!("expected a {DATASET_KIND} file, found '{}'", header.kind)));
    }
    if header.format_version != FORMAT_VERSION {
        return Err(Error::InconsistentHeader(format!("unsupported format version {}", header.format_version)));
    }
    if !frequency_consistent(header.frequency_hz, header.wavenumber) {
        return Err(Error::InconsistentHeader(format!(
            "wavenumber {} inconsistent with frequency {} Hz",
            header.wavenumber, header.frequency_hz
        )));
    }
    if header.rule.len() != header.n_points {
        return Err(Error::DimensionMismatch {
            what: "header rule samples".into(),
            expected: header.n_points,
            found: header.rule.len(),
        });
    }
    let rule = rule_from_samples(&header.rule)?;
    let dim = 2 * rule.len();
    let matrix = read_complex_body(body, dim, dim, "dataset body rows")?;
    Ok(Dataset { frequency_hz: header.frequency_hz, matrix: ScatteringMatrix::new(rule, header.wavenumber, matrix)? })
}

/// Reads `row,col,re,im` records that must cover a `rows × cols` matrix once.
fn read_complex_body<R: Read>(body: R, rows: usize, cols: usize, what: &str) -> Result<CMat> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body);
    let mut m = CMat::zeros(rows, cols);
    let mut seen = vec![false; rows * cols];
    let mut count = 0;
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        // +1 for the JSON header line that precedes the CSV.
        let line = record.position().map(|p| p.line() as usize + 1).unwrap_or(0);
        let field = |i: usize| -> Result<&str> {
            record.get(i).ok_or_else(|| Error::Parse { line, message: format!("missing column {i}") })
        };
        let parse_index = |s: &str| {
            s.trim().parse::<usize>().map_err(|e| Error::Parse { line, message: format!("index '{s}': {e}") })
        };
        let parse_value =
            |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse { line, message: format!("value '{s}': {e}") });
        let (i, j) = (parse_index(field(0)?)?, parse_index(field(1)?)?);
        let z = C64::new(parse_value(field(2)?)?, parse_value(field(3)?)?);
        if i >= rows || j >= cols {
            return Err(Error::Parse { line, message: format!("entry ({i}, {j}) outside a {rows} x {cols} matrix") });
        }
        if std::mem::replace(&mut seen[i * cols + j], true) {
            return Err(Error::Parse { line, message: format!("duplicate entry ({i}, {j})") });
        }
        m[(i, j)] = z;
        count += 1;
    }
    if count != rows * cols {
        return Err(Error::DimensionMismatch { what: what.into(), expected: rows * cols, found: count });
    }
    Ok(m)
}

/// Checks run on an ingested or generated matrix.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    /// `None` when the rule is not closed under inversion.
    pub reciprocity: Option<crate::scattering::ReciprocityReport>,
    /// `||2t+1| − 1|` over the 25 most significant modes.
    pub lossless_max: f64,
    pub lossless_mean: f64,
    /// Largest relative eigenpair residual.
    pub eigen_residual_max: f64,
    pub modes: ModeSet,
}

/// Number of leading modes summarised in validation and precision reports.
pub const TOP_MODES: usize = 25;

impl ValidationReport {
    pub fn compute(smat: &ScatteringMatrix, _floor: f64) -> Result<Self> {
        let reciprocity = match crate::scattering::reciprocity_report(smat) {
            Ok(r) => Some(r),
            Err(Error::RuleNotInversionSymmetric { .. }) => None,
            Err(e) => return Err(e),
        };
        let weighted = if smat.is_weighted() { smat.clone() } else { crate::scattering::apply_weights(smat.clone())? };
        let modes = modes::decompose(&weighted)?;
        let top: Vec<f64> =
            modes.eigenvalues.iter().take(TOP_MODES).map(|t| ((2.0 * t + 1.0).norm() - 1.0).abs()).collect();
        let lossless_max = top.iter().copied().fold(0.0, f64::max);
        let lossless_mean = if top.is_empty() { 0.0 } else { top.iter().sum::<f64>() / top.len() as f64 };
        let eigen_residual_max = modes.residuals.iter().copied().fold(0.0, f64::max);
        Ok(ValidationReport { reciprocity, lossless_max, lossless_mean, eigen_residual_max, modes })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModesHeader {
    kind: String,
    format_version: u32,
    k: f64,
    frequency_hz: f64,
    n_q: usize,
    rule_id: RuleId,
    rule: Vec<RuleSample>,
    significance_floor: f64,
}

pub const MODE_COLUMNS: [&str; 7] = ["n", "re_t", "im_t", "significance", "alpha_n", "lambda_n", "lossless_residual"];

/// Writes eigenvalues, metrics and eigenvectors of one frequency.
///
/// The body holds the mode table, a blank line, then `mode,row,re,im`
/// records of the eigenvectors.
pub fn write_modes(modes: &ModeSet, floor: f64, path: &Path) -> Result<()> {
    let header = ModesHeader {
        kind: MODES_KIND.into(),
        format_version: FORMAT_VERSION,
        k: modes.k,
        frequency_hz: modes::frequency(modes.k),
        n_q: modes.rule.len(),
        rule_id: modes.rule.id,
        rule: rule_samples(&modes.rule),
        significance_floor: floor,
    };
    let mut out = create(path)?;
    serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
    writeln!(out)?;
    {
        let mut table = csv::Writer::from_writer(&mut out);
        table.write_record(MODE_COLUMNS).map_err(csv_error)?;
        for (n, t) in modes.eigenvalues.iter().enumerate() {
            let m = modes::metrics(*t, floor);
            let lambda = m.lambda.map(|l| number(l.re)).unwrap_or_else(|| "inf".into());
            table
                .write_record([
                    n.to_string(),
                    number(t.re),
                    number(t.im),
                    number(m.significance),
                    number(m.alpha),
                    lambda,
                    number(m.lossless_residual),
                ])
                .map_err(csv_error)?;
        }
        table.flush()?;
    }
    writeln!(out)?;
    let mut vectors = csv::Writer::from_writer(out);
    vectors.write_record(["mode", "row", "re", "im"]).map_err(csv_error)?;
    let f = &modes.eigenvectors;
    for n in 0..f.ncols() {
        for i in 0..f.nrows() {
            vectors
                .write_record([n.to_string(), i.to_string(), number(f[(i, n)].re), number(f[(i, n)].im)])
                .map_err(csv_error)?;
        }
    }
    vectors.flush()?;
    Ok(())
}

/// Reads a mode export back. Residuals are not stored and come back as zero.
pub fn read_modes(path: &Path) -> Result<ModeSet> {
    let (header, mut body): (ModesHeader, _) = split_header(path)?;
    if header.kind != MODES_KIND {
        return Err(Error::InconsistentHeader(format!("expected a {MODES_KIND} file, found '{}'", header.kind)));
    }
    let rule = rule_from_samples(&header.rule)?;
    let dim = 2 * rule.len();
    let mut text = String::new();
    body.read_to_string(&mut text)?;
    let (table, vectors) = text
        .split_once("\n\n")
        .ok_or_else(|| Error::Parse { line: 0, message: "missing eigenvector section".into() })?;
    let mut eigenvalues = Vec::new();
    let mut reader = csv::Reader::from_reader(table.as_bytes());
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize + 1).unwrap_or(0);
        let value = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse { line, message: format!("column {i}") })
        };
        eigenvalues.push(C64::new(value(1)?, value(2)?));
    }
    let eigenvectors = read_complex_body(vectors.as_bytes(), eigenvalues.len(), dim, "eigenvector entries")?;
    // Stored as (mode, row); transpose into columns.
    let eigenvectors = eigenvectors.transpose().to_owned();
    Ok(ModeSet { k: header.k, rule, residuals: vec![0.0; eigenvalues.len()], eigenvalues, eigenvectors })
}

#[derive(Debug, Serialize, Deserialize)]
struct TMatrixHeader {
    kind: String,
    format_version: u32,
    l_max: usize,
    frequency_hz: f64,
    k: f64,
}

/// Writes a transition matrix in canonical `α` order.
pub fn write_tmatrix(tmat: &TransitionMatrix, k: f64, path: &Path) -> Result<()> {
    let header = TMatrixHeader {
        kind: TMATRIX_KIND.into(),
        format_version: FORMAT_VERSION,
        l_max: tmat.l_max,
        frequency_hz: modes::frequency(k),
        k,
    };
    let mut out = create(path)?;
    serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
    writeln!(out)?;
    let mut body = csv::Writer::from_writer(out);
    body.write_record(["alpha_row", "alpha_col", "re", "im"]).map_err(csv_error)?;
    for i in 0..tmat.entries.nrows() {
        for j in 0..tmat.entries.ncols() {
            let z = tmat.entries[(i, j)];
            body.write_record([i.to_string(), j.to_string(), number(z.re), number(z.im)]).map_err(csv_error)?;
        }
    }
    body.flush()?;
    Ok(())
}

pub fn read_tmatrix(path: &Path) -> Result<(TransitionMatrix, f64)> {
    let (header, body): (TMatrixHeader, _) = split_header(path)?;
    if header.kind != TMATRIX_KIND {
        return Err(Error::InconsistentHeader(format!("expected a {TMATRIX_KIND} file, found '{}'", header.kind)));
    }
    let n = crate::swe::swe_count(header.l_max);
    let entries = read_complex_body(body, n, n, "T-matrix entries")?;
    Ok((TransitionMatrix { l_max: header.l_max, entries }, header.k))
}

/// Human-readable label of a spherical-wave index, e.g. `TM l=2 m=-1`.
pub fn swe_label(alpha: usize) -> String {
    let i = SweIndex::from_alpha(alpha);
    format!("{} l={} m={}", if i.tau == 1 { "TE" } else { "TM" }, i.l, i.m)
}

/// Writes the long-format trace table.
pub fn write_traces(rows: &[TraceRow], path: &Path) -> Result<()> {
    let mut out = csv::Writer::from_writer(create(path)?);
    out.write_record(TRACE_COLUMNS).map_err(csv_error)?;
    for r in rows {
        out.write_record([
            r.trace_id.to_string(),
            number(r.frequency_hz),
            number(r.t.re),
            number(r.t.im),
            number(r.alpha),
            number(r.significance),
            r.correlation.map(number).unwrap_or_default(),
        ])
        .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

/// Status of one frequency of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub frequency_hz: f64,
    pub dataset: Option<String>,
    pub modes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tmatrix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Index of a sweep directory, listing per-frequency files in ascending
/// frequency. Written after all frequencies have been attempted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub complete: bool,
    pub backend: String,
    pub rule_id: RuleId,
    pub entries: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traces: Option<String>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn write_manifest(manifest: &Manifest, dir: &Path) -> Result<()> {
    let path = dir.join(MANIFEST_NAME);
    let mut out = create(&path)?;
    serde_json::to_writer_pretty(&mut out, manifest).map_err(std::io::Error::from)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_NAME))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })
}

/// Paths of the datasets listed in a sweep manifest, in order.
pub fn manifest_datasets(dir: &Path, manifest: &Manifest) -> Vec<(f64, PathBuf)> {
    manifest.entries.iter().filter_map(|e| e.dataset.as_ref().map(|d| (e.frequency_hz, dir.join(d)))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::lebedev_rule;

    #[test]
    fn number_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE, -0.0] {
            let s = number(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn zero_dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rule = lebedev_rule(6).unwrap();
        let f = 1e8;
        let s = ScatteringMatrix::new(rule, modes::wavenumber(f), CMat::zeros(12, 12)).unwrap();
        let path = dir.path().join("zero.csv");
        write_dataset(&s, f, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(crate::linalg::max_abs(back.matrix.unweighted()), 0.0);
        assert_eq!(back.matrix.rule().id, RuleId::Lebedev(6));
    }

    #[test]
    fn inconsistent_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let rule = lebedev_rule(6).unwrap();
        let s = ScatteringMatrix::new(rule, 1.0, CMat::zeros(12, 12)).unwrap();
        let path = dir.path().join("bad.csv");
        assert!(matches!(write_dataset(&s, 1e9, &path), Err(Error::InconsistentHeader(_))));
        // Hand-edit a valid file's frequency.
        write_dataset(&s, modes::frequency(1.0), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let edited = text.replacen("\"frequency_hz\":", "\"frequency_hz\":1", 1);
        std::fs::write(&path, edited).unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::InconsistentHeader(_))));
    }

    #[test]
    fn truncated_body_reports_counts() {
        let dir = tempfile::tempdir().unwrap();
        let rule = lebedev_rule(6).unwrap();
        let s = ScatteringMatrix::new(rule, 1.0, CMat::zeros(12, 12)).unwrap();
        let path = dir.path().join("t.csv");
        write_dataset(&s, modes::frequency(1.0), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let kept: Vec<&str> = text.lines().take(2 + 100).collect();
        std::fs::write(&path, kept.join("\n") + "\n").unwrap();
        match read_dataset(&path) {
            Err(Error::DimensionMismatch { expected, found, .. }) => assert_eq!((expected, found), (144, 100)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_value_reports_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let rule = lebedev_rule(6).unwrap();
        let s = ScatteringMatrix::new(rule, 1.0, CMat::zeros(12, 12)).unwrap();
        let path = dir.path().join("m.csv");
        write_dataset(&s, modes::frequency(1.0), &path).unwrap();
        let mut lines: Vec<String> = std::fs::read_to_string(&path).unwrap().lines().map(String::from).collect();
        lines[9] = "7,0,abc,0".into();
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        match read_dataset(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 10),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn custom_rule_needs_four_pi() {
        let samples =
            vec![[0.0, 0.0, 2.0 * std::f64::consts::PI], [std::f64::consts::PI, 0.0, 2.0 * std::f64::consts::PI]];
        let rule = rule_from_samples(&samples).unwrap();
        assert_eq!(rule.id, RuleId::Custom);
        let bad = vec![[0.0, 0.0, 1.0]];
        assert!(matches!(rule_from_samples(&bad), Err(Error::UnknownRule { .. })));
    }
}
