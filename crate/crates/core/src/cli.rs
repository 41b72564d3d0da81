//! Command-line driver: run configuration, sweeps, dataset validation and
//! quadrature precision studies.
//!
//! Commands return a [`Failure`] whose [`Failure::exit_code`] is the process
//! exit status: 1 for usage and configuration problems, 2 for failed
//! validation thresholds, 3 for compute or I/O failures during a run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dda::{BlockSpec, DdaBackend};
use crate::error::Error;
use crate::io::{self, Manifest, ManifestEntry, ValidationReport, TOP_MODES};
use crate::linalg::max_abs;
use crate::mie::{self, Layer, LayeredSphere, MieBackend, Truncation};
use crate::modes::{self, DecomposeOptions, ModeSet, C0};
use crate::par::Execution;
use crate::quadrature::{lebedev_rule, minimum_points, plane_wave_estimate, QuadratureRule};
use crate::scattering::{apply_weights, assemble, ScatteringBackend};
use crate::tracking::{self, SweepResult, TrackingOptions};

/// Reason a command stopped, mapped onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Validation(String),
    Compute(Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Compute(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "configuration error: {m}"),
            Failure::Validation(m) => write!(f, "validation failed: {m}"),
            Failure::Compute(e) => write!(f, "compute failure: {e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure::Usage(message.into())
}

/// Which scatterer (or recorded data) a run uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BackendConfig {
    Mie {
        radius_m: f64,
        layers: Vec<Layer>,
        #[serde(default = "converged")]
        truncation: Truncation,
    },
    Dda {
        extent: [usize; 3],
        spacing_m: f64,
        eps_r: f64,
    },
    /// A directory holding a sweep manifest and its datasets.
    Dataset {
        dir: PathBuf,
    },
}

fn converged() -> Truncation {
    Truncation::Converged
}

impl BackendConfig {
    /// Radius of the smallest sphere enclosing the scatterer.
    pub fn characteristic_radius(&self) -> Option<f64> {
        match self {
            BackendConfig::Mie { radius_m, .. } => Some(*radius_m),
            BackendConfig::Dda { extent, spacing_m, eps_r } => {
                Some(BlockSpec { extent: *extent, spacing_m: *spacing_m, eps_r: *eps_r }.circumscribing_radius())
            }
            BackendConfig::Dataset { .. } => None,
        }
    }

    /// The solver for computed backends; `None` for recorded datasets.
    pub fn solver(&self) -> Result<Option<Box<dyn ScatteringBackend>>, Failure> {
        Ok(match self {
            BackendConfig::Mie { radius_m, layers, truncation } => {
                let sphere = LayeredSphere::new(*radius_m, layers.clone()).map_err(|e| usage(e.to_string()))?;
                Some(Box::new(MieBackend::new(sphere, *truncation)))
            }
            BackendConfig::Dda { extent, spacing_m, eps_r } => {
                if extent.contains(&0) {
                    return Err(usage(format!("dda extent {extent:?} holds no cells")));
                }
                if !(*spacing_m > 0.0) {
                    return Err(usage("dda spacing_m must be positive"));
                }
                if *eps_r == 1.0 {
                    return Err(usage("dda eps_r = 1 has no contrast"));
                }
                Some(Box::new(DdaBackend::new(BlockSpec { extent: *extent, spacing_m: *spacing_m, eps_r: *eps_r })))
            }
            BackendConfig::Dataset { .. } => None,
        })
    }

    fn name(&self) -> &'static str {
        match self {
            BackendConfig::Mie { .. } => "mie",
            BackendConfig::Dda { .. } => "dda",
            BackendConfig::Dataset { .. } => "dataset",
        }
    }
}

/// Frequency points of a sweep, either linear in frequency or a list of
/// electrical sizes `ka` for a given radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridConfig {
    Linear {
        start_hz: f64,
        stop_hz: f64,
        count: usize,
    },
    ElectricalSize {
        ka: Vec<f64>,
        /// Defaults to the backend's enclosing radius.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius_m: Option<f64>,
    },
}

impl GridConfig {
    pub fn frequencies(&self, default_radius: Option<f64>) -> Result<Vec<f64>, Failure> {
        let f = match self {
            GridConfig::Linear { count: 0, .. } => return Err(usage("frequency grid is empty")),
            GridConfig::Linear { start_hz, stop_hz, count } => {
                if !(*start_hz > 0.0) || !(stop_hz >= start_hz) || !stop_hz.is_finite() {
                    return Err(usage(format!("invalid frequency range {start_hz} .. {stop_hz} Hz")));
                }
                if *count == 1 {
                    vec![*start_hz]
                } else {
                    let step = (stop_hz - start_hz) / (*count - 1) as f64;
                    (0..*count).map(|i| if i + 1 == *count { *stop_hz } else { start_hz + step * i as f64 }).collect()
                }
            }
            GridConfig::ElectricalSize { ka, radius_m } => {
                if ka.is_empty() {
                    return Err(usage("ka list is empty"));
                }
                let radius =
                    radius_m.or(default_radius).ok_or_else(|| usage("a ka grid needs radius_m for this backend"))?;
                if ka.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                    return Err(usage("ka values must be positive"));
                }
                ka.iter().map(|x| x / radius * C0 / (2.0 * std::f64::consts::PI)).collect()
            }
        };
        if f.windows(2).any(|w| w[1] <= w[0]) && f.len() > 1 {
            return Err(usage("frequencies must be strictly ascending"));
        }
        Ok(f)
    }
}

/// Quadrature choice: a Lebedev size, or `"auto"` for the smallest size
/// that covers the largest frequency of the sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QuadratureConfig {
    Points(usize),
    Keyword(AutoKeyword),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoKeyword {
    Auto,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig::Keyword(AutoKeyword::Auto)
    }
}

impl std::str::FromStr for QuadratureConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            Ok(QuadratureConfig::Keyword(AutoKeyword::Auto))
        } else {
            s.parse().map(QuadratureConfig::Points).map_err(|_| format!("expected a rule size or 'auto', got '{s}'"))
        }
    }
}

/// Thresholds used by every command; keys match `--tolerance KEY=VAL`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// `|t|` below which the characteristic angle is not defined.
    pub significance_floor: f64,
    /// Modes weaker than this are not tracked.
    pub min_significance: f64,
    /// Smallest correlation that continues a trace.
    pub min_correlation: f64,
    /// Relative eigenvalue distance treated as degenerate by the decomposition.
    pub degeneracy: f64,
    /// Relative eigenvalue distance treated as degenerate by the tracker.
    pub tracking_degeneracy: f64,
    /// Reciprocity residual relative to `max |S|`.
    pub reciprocity: f64,
    /// Largest `||2t + 1| − 1|` over the leading modes.
    pub lossless: f64,
    /// Largest relative eigenpair residual.
    pub eigen_residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let tracking = TrackingOptions::default();
        Tolerances {
            significance_floor: modes::DEFAULT_SIGNIFICANCE_FLOOR,
            min_significance: tracking.min_significance,
            min_correlation: tracking.min_correlation,
            degeneracy: DecomposeOptions::default().degeneracy_tolerance,
            tracking_degeneracy: tracking.degeneracy_tolerance,
            reciprocity: 1e-10,
            lossless: 1e-6,
            eigen_residual: 1e-8,
        }
    }
}

impl Tolerances {
    /// Applies one `KEY=VAL` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), Failure> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| usage(format!("tolerance override '{assignment}' is not KEY=VAL")))?;
        let value: f64 =
            value.trim().parse().map_err(|_| usage(format!("tolerance {key}: '{value}' is not a number")))?;
        if !(value >= 0.0) || !value.is_finite() {
            return Err(usage(format!("tolerance {key} must be a finite non-negative number")));
        }
        let mut map = match serde_json::to_value(*self).expect("tolerances serialize") {
            serde_json::Value::Object(m) => m,
            _ => unreachable!(),
        };
        if !map.contains_key(key.trim()) {
            let known: Vec<&String> = map.keys().collect();
            return Err(usage(format!("unknown tolerance '{key}' (known: {known:?})")));
        }
        map.insert(key.trim().to_string(), value.into());
        *self = serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| usage(e.to_string()))?;
        Ok(())
    }

    fn tracking(&self) -> TrackingOptions {
        TrackingOptions {
            min_significance: self.min_significance,
            min_correlation: self.min_correlation,
            degeneracy_tolerance: self.tracking_degeneracy,
        }
    }

    fn decomposition(&self) -> DecomposeOptions {
        DecomposeOptions { degeneracy_tolerance: self.degeneracy }
    }
}

/// Quadrature sizes compared by a precision study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecisionConfig {
    pub nq: Vec<usize>,
    pub reference: usize,
}

/// Everything a run needs, as read from the `--config` JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<PrecisionConfig>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    /// Frequencies of the grid; computed backends require one.
    pub fn frequencies(&self) -> Result<Vec<f64>, Failure> {
        let grid = self.grid.as_ref().ok_or_else(|| usage("no frequency grid configured"))?;
        grid.frequencies(self.backend.characteristic_radius())
    }

    /// The single rule shared by all frequencies of a computed sweep.
    pub fn resolve_rule(&self, frequencies: &[f64]) -> Result<QuadratureRule, Failure> {
        match self.quadrature {
            QuadratureConfig::Points(n) => lebedev_rule(n).map_err(|e| usage(e.to_string())),
            QuadratureConfig::Keyword(AutoKeyword::Auto) => {
                let radius = self
                    .backend
                    .characteristic_radius()
                    .ok_or_else(|| usage("automatic quadrature needs a computed backend"))?;
                let f_max = frequencies.iter().copied().fold(0.0, f64::max);
                let n = minimum_points(modes::wavenumber(f_max) * radius).map_err(|e| usage(e.to_string()))?;
                lebedev_rule(n).map_err(|e| usage(e.to_string()))
            }
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "scatmodes", version, about = "Characteristic modes from sampled scattering dyadics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute, decompose and track modes over a frequency sweep.
    Sweep(RunArgs),
    /// Check reciprocity, losslessness and eigenpair residuals of datasets.
    Validate {
        /// A dataset file or a sweep directory with a manifest.
        path: PathBuf,
        /// Threshold override, e.g. `lossless=1e-4`; repeatable.
        #[arg(long = "tolerance", value_name = "KEY=VAL")]
        tolerance: Vec<String>,
    },
    /// Compare decompositions at several quadrature sizes with a reference.
    PrecisionStudy {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated rule sizes to compare.
        #[arg(long, value_delimiter = ',')]
        nq_list: Vec<usize>,
        /// Rule size used as the reference; must be the largest.
        #[arg(long)]
        reference: Option<usize>,
    },
}

/// Config file plus overrides shared by the computing commands.
#[derive(Args, Debug, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Lebedev rule size or `auto`.
    #[arg(long)]
    pub nq: Option<QuadratureConfig>,
    #[arg(long)]
    pub freq_start: Option<f64>,
    #[arg(long)]
    pub freq_stop: Option<f64>,
    #[arg(long)]
    pub freq_count: Option<usize>,
    /// Backend as inline JSON (e.g. `{"type":"dda",...}`) or `dataset:DIR`.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long = "tolerance", value_name = "KEY=VAL")]
    pub tolerance: Vec<String>,
}

impl RunArgs {
    /// Loads the config file (if any) and applies the flag overrides.
    pub fn resolve(&self) -> Result<RunConfig, Failure> {
        let backend_override = self.backend.as_deref().map(parse_backend).transpose()?;
        let mut config = match (&self.config, backend_override.clone()) {
            (Some(path), _) => RunConfig::from_file(path)?,
            (None, Some(backend)) => RunConfig {
                backend,
                grid: None,
                quadrature: QuadratureConfig::default(),
                out: None,
                tolerances: Tolerances::default(),
                precision: None,
            },
            (None, None) => return Err(usage("either --config or --backend is required")),
        };
        if let Some(backend) = backend_override {
            config.backend = backend;
        }
        if let Some(out) = &self.out {
            config.out = Some(out.clone());
        }
        if let Some(nq) = self.nq {
            config.quadrature = nq;
        }
        match (self.freq_start, self.freq_stop, self.freq_count) {
            (None, None, None) => {}
            (start, stop, count) => {
                let (old_start, old_stop, old_count) = match &config.grid {
                    Some(GridConfig::Linear { start_hz, stop_hz, count }) => {
                        (Some(*start_hz), Some(*stop_hz), Some(*count))
                    }
                    _ => (None, None, None),
                };
                let start = start.or(old_start).ok_or_else(|| usage("--freq-start is required"))?;
                let count = count.or(old_count).unwrap_or(1);
                let stop = stop.or(old_stop).unwrap_or(start);
                config.grid = Some(GridConfig::Linear { start_hz: start, stop_hz: stop, count });
            }
        }
        for t in &self.tolerance {
            config.tolerances.set(t)?;
        }
        Ok(config)
    }
}

fn parse_backend(text: &str) -> Result<BackendConfig, Failure> {
    if let Some(dir) = text.strip_prefix("dataset:") {
        return Ok(BackendConfig::Dataset { dir: dir.into() });
    }
    serde_json::from_str(text).map_err(|e| usage(format!("--backend: {e}")))
}

/// Parses arguments and runs the selected command, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let execution = if cli.sequential { Execution::Sequential } else { Execution::default() };
    let outcome = match &cli.command {
        Command::Sweep(args) => args.resolve().and_then(|config| {
            let out = config.out.clone().ok_or_else(|| usage("no output directory (--out)"))?;
            cmd_sweep(&config, &out, execution).map(|s| println!("{s}"))
        }),
        Command::Validate { path, tolerance } => {
            let mut tolerances = Tolerances::default();
            tolerance.iter().try_for_each(|t| tolerances.set(t)).and_then(|_| {
                let (text, result) = cmd_validate(path, &tolerances);
                print!("{text}");
                result
            })
        }
        Command::PrecisionStudy { run, nq_list, reference } => run.resolve().and_then(|mut config| {
            if !nq_list.is_empty() || reference.is_some() {
                let base = config.precision.clone();
                config.precision = Some(PrecisionConfig {
                    nq: if nq_list.is_empty() {
                        base.as_ref().map(|p| p.nq.clone()).unwrap_or_default()
                    } else {
                        nq_list.clone()
                    },
                    reference: reference.or(base.map(|p| p.reference)).unwrap_or(110),
                });
            }
            let rows = cmd_precision_study(&config, execution)?;
            let table = precision_table(&rows);
            print!("{table}");
            if let Some(out) = &config.out {
                std::fs::create_dir_all(out).map_err(Error::from)?;
                std::fs::write(out.join("precision.csv"), &table).map_err(Error::from)?;
            }
            Ok(())
        }),
    };
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}

/// What a finished sweep produced.
#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub manifest: Manifest,
    pub traces: usize,
    pub seconds: f64,
}

impl std::fmt::Display for SweepSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let done = self.manifest.entries.iter().filter(|e| e.error.is_none()).count();
        write!(
            f,
            "{done}/{} frequencies, rule {}, {} traces, {:.2} s",
            self.manifest.entries.len(),
            self.manifest.rule_id,
            self.traces,
            self.seconds
        )
    }
}

fn indexed(prefix: &str, i: usize) -> String {
    format!("{prefix}_{i:04}.csv")
}

/// Runs a sweep and writes datasets, mode exports, traces and the manifest
/// into `out`. The manifest is written last; frequencies that failed are
/// listed with their error and make the sweep incomplete.
pub fn cmd_sweep(config: &RunConfig, out: &Path, execution: Execution) -> Result<SweepSummary, Failure> {
    let started = Instant::now();
    let tol = config.tolerances;
    let backend = config.backend.solver()?;
    let (frequencies, rule, sources): (Vec<f64>, QuadratureRule, Option<Vec<PathBuf>>) = match &config.backend {
        BackendConfig::Dataset { dir } => {
            let manifest = io::read_manifest(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
            let listed = io::manifest_datasets(dir, &manifest);
            if listed.is_empty() {
                return Err(usage(format!("{} lists no datasets", dir.display())));
            }
            let first = io::read_dataset(&listed[0].1)?;
            let (f, paths) = listed.into_iter().unzip();
            (f, first.matrix.rule().clone(), Some(paths))
        }
        _ => {
            let f = config.frequencies()?;
            let rule = config.resolve_rule(&f)?;
            (f, rule, None)
        }
    };
    if let (Some(radius), Some(f_max)) = (config.backend.characteristic_radius(), frequencies.last()) {
        let ka = modes::wavenumber(*f_max) * radius;
        if (rule.len() as f64) < plane_wave_estimate(ka) {
            log::warn!(
                "rule of {} points is below the {:.1}-point estimate at ka = {ka:.3}",
                rule.len(),
                plane_wave_estimate(ka)
            );
        }
    }
    std::fs::create_dir_all(out).map_err(Error::from)?;
    std::fs::write(out.join("config.json"), serde_json::to_string_pretty(config).expect("config serializes") + "\n")
        .map_err(Error::from)?;

    let results: Vec<(ManifestEntry, Result<ModeSet, Error>)> = execution.map(frequencies.len(), |i| {
        let f = frequencies[i];
        let entry = ManifestEntry { frequency_hz: f, dataset: None, modes: None, tmatrix: None, error: None };
        let attempt = || -> Result<(ManifestEntry, ModeSet), Error> {
            let mut entry = entry.clone();
            let dataset_name = indexed("dataset", i);
            let smat = match (&backend, &sources) {
                (Some(b), _) => {
                    let smat = assemble(b.as_ref(), &rule, modes::wavenumber(f), execution)?;
                    io::write_dataset(&smat, f, &out.join(&dataset_name))?;
                    smat
                }
                (None, Some(paths)) => {
                    let data = io::read_dataset(&paths[i])?;
                    if data.matrix.rule() != &rule {
                        return Err(Error::RuleMismatch { step: i });
                    }
                    std::fs::copy(&paths[i], out.join(&dataset_name))?;
                    data.matrix
                }
                (None, None) => unreachable!("dataset runs carry their sources"),
            };
            entry.dataset = Some(dataset_name);
            if let BackendConfig::Mie { radius_m, layers, truncation } = &config.backend {
                let backend = MieBackend::new(LayeredSphere::new(*radius_m, layers.clone())?, *truncation);
                let k = modes::wavenumber(f);
                let tmat = mie::layered_tmatrix(&backend.sphere, k * radius_m, backend.degree_for(k, &rule))?;
                let name = indexed("tmatrix", i);
                io::write_tmatrix(&tmat, k, &out.join(&name))?;
                entry.tmatrix = Some(name);
            }
            let modeset = modes::decompose_with(&apply_weights(smat)?, tol.decomposition())?;
            let name = indexed("modes", i);
            io::write_modes(&modeset, tol.significance_floor, &out.join(&name))?;
            entry.modes = Some(name);
            Ok((entry, modeset))
        };
        match attempt() {
            Ok((entry, modeset)) => (entry, Ok(modeset)),
            Err(e) => (ManifestEntry { error: Some(e.to_string()), ..entry }, Err(e)),
        }
    });

    let mut entries = Vec::new();
    let mut done_f = Vec::new();
    let mut done_modes = Vec::new();
    let mut first_error = None;
    for (entry, r) in results {
        match r {
            Ok(m) => {
                done_f.push(entry.frequency_hz);
                done_modes.push(m);
                entries.push(entry);
            }
            Err(e) => {
                log::error!("{:.6e} Hz: {e}", entry.frequency_hz);
                first_error.get_or_insert(e);
                entries.push(entry);
            }
        }
    }
    let mut trace_count = 0;
    let mut traces_file = None;
    if !done_modes.is_empty() {
        let sweep = SweepResult::new(done_f, done_modes)?;
        let traces = tracking::track(&sweep, tol.tracking())?;
        trace_count = traces.traces.len();
        io::write_traces(&tracking::trace_export(&traces, &sweep, tol.significance_floor), &out.join("traces.csv"))?;
        traces_file = Some("traces.csv".to_string());
    }
    let manifest = Manifest {
        format_version: io::FORMAT_VERSION,
        complete: first_error.is_none(),
        backend: config.backend.name().to_string(),
        rule_id: rule.id,
        entries,
        traces: traces_file,
    };
    io::write_manifest(&manifest, out)?;
    match first_error {
        Some(e) => Err(Failure::Compute(e)),
        None => Ok(SweepSummary { manifest, traces: trace_count, seconds: started.elapsed().as_secs_f64() }),
    }
}

/// Labels a matrix index as `θ@p` or `φ@p`.
fn describe_index(i: usize, n: usize) -> String {
    format!("{}@{}", if i < n { "theta" } else { "phi" }, i % n)
}

/// Validates a dataset or every dataset of a sweep directory. Returns the
/// report text and whether every threshold held.
pub fn cmd_validate(path: &Path, tol: &Tolerances) -> (String, Result<(), Failure>) {
    let files: Vec<PathBuf> = if path.is_dir() {
        match io::read_manifest(path) {
            Ok(m) => io::manifest_datasets(path, &m).into_iter().map(|(_, p)| p).collect(),
            Err(e) => return (String::new(), Err(usage(format!("{}: {e}", path.display())))),
        }
    } else {
        vec![path.to_path_buf()]
    };
    let mut text = String::new();
    let mut breaches = Vec::new();
    for file in &files {
        let data = match io::read_dataset(file) {
            Ok(d) => d,
            Err(
                e @ (Error::Io(_)
                | Error::Parse { .. }
                | Error::DimensionMismatch { .. }
                | Error::InconsistentHeader(_)
                | Error::UnknownRule { .. }),
            ) => {
                return (text, Err(usage(format!("{}: {e}", file.display()))));
            }
            Err(e) => return (text, Err(Failure::Compute(e))),
        };
        let report = match ValidationReport::compute(&data.matrix, tol.significance_floor) {
            Ok(r) => r,
            Err(e) => return (text, Err(Failure::Compute(e))),
        };
        let n = data.matrix.n_points();
        let scale = max_abs(data.matrix.unweighted()).max(f64::MIN_POSITIVE);
        let _ = writeln!(text, "{} ({:.9e} Hz, {} points)", file.display(), data.frequency_hz, n);
        let mut failed = Vec::new();
        match report.reciprocity {
            Some(r) => {
                let relative = r.residual / scale;
                let antipodes = data.matrix.rule().antipodes().unwrap_or_default();
                let location = r
                    .worst
                    .map(|(i, j)| {
                        let mirror_row = (j / n) * n + antipodes[j % n];
                        let mirror_col = (i / n) * n + antipodes[i % n];
                        format!(
                            " between row {} col {} and its mirror row {} col {}",
                            describe_index(i, n),
                            describe_index(j, n),
                            describe_index(mirror_row, n),
                            describe_index(mirror_col, n)
                        )
                    })
                    .unwrap_or_default();
                let _ = writeln!(text, "  reciprocity residual {relative:.3e} (relative){location}");
                if relative > tol.reciprocity {
                    failed.push(format!("reciprocity {relative:.3e}{location}"));
                }
            }
            None => {
                let _ = writeln!(text, "  reciprocity not checked: rule is not closed under inversion");
            }
        }
        let _ = writeln!(
            text,
            "  lossless residual over top {TOP_MODES}: max {:.3e}, mean {:.3e}",
            report.lossless_max, report.lossless_mean
        );
        if report.lossless_max > tol.lossless {
            failed.push(format!("lossless {:.3e}", report.lossless_max));
        }
        let _ = writeln!(text, "  eigenpair residual max {:.3e}", report.eigen_residual_max);
        if report.eigen_residual_max > tol.eigen_residual {
            failed.push(format!("eigenpair residual {:.3e}", report.eigen_residual_max));
        }
        let _ = writeln!(text, "  {}", if failed.is_empty() { "PASS" } else { "FAIL" });
        if !failed.is_empty() {
            breaches.push(format!("{}: {}", file.display(), failed.join(", ")));
        }
    }
    let result = if breaches.is_empty() { Ok(()) } else { Err(Failure::Validation(breaches.join("; "))) };
    (text, result)
}

/// One line of a precision study.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionRow {
    pub frequency_hz: f64,
    pub ka: f64,
    pub n_q: usize,
    /// Plane-wave count estimate at this `ka`.
    pub estimate: f64,
    /// Mean `||s_n| − 1|` over the leading modes.
    pub magnitude_error: f64,
    /// Mean wrapped phase difference of `s_n` against the reference.
    pub phase_error: f64,
    pub warning: Option<String>,
}

/// Errors of the `top` leading modes of `modes` against `reference`, pairing
/// modes by their position in the canonical order.
pub fn modal_errors(modes: &ModeSet, reference: &ModeSet, top: usize) -> (f64, f64) {
    let count = top.min(modes.len()).min(reference.len());
    if count == 0 {
        return (0.0, 0.0);
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let (mut magnitude, mut phase) = (0.0, 0.0);
    for n in 0..count {
        let s = 1.0 + 2.0 * modes.eigenvalues[n];
        let s_ref = 1.0 + 2.0 * reference.eigenvalues[n];
        magnitude += (s.norm() - 1.0).abs();
        let delta = (s.arg() - s_ref.arg()).rem_euclid(two_pi);
        phase += delta.min(two_pi - delta);
    }
    (magnitude / count as f64, phase / count as f64)
}

/// Decomposes at every configured rule size and compares with the reference.
pub fn cmd_precision_study(config: &RunConfig, execution: Execution) -> Result<Vec<PrecisionRow>, Failure> {
    let study =
        config.precision.clone().ok_or_else(|| usage("no precision study configured (nq list and reference)"))?;
    if study.nq.is_empty() {
        return Err(usage("precision study needs at least one rule size"));
    }
    if study.nq.iter().any(|&n| n > study.reference) {
        return Err(usage("the reference rule must be the largest"));
    }
    let backend = config.backend.solver()?.ok_or_else(|| usage("precision studies need a computed backend"))?;
    let radius = config.backend.characteristic_radius().expect("computed backends have a radius");
    let reference_rule = lebedev_rule(study.reference).map_err(|e| usage(e.to_string()))?;
    let rules: Vec<QuadratureRule> =
        study.nq.iter().map(|&n| lebedev_rule(n)).collect::<crate::Result<_>>().map_err(|e| usage(e.to_string()))?;
    let decompose = |rule: &QuadratureRule, k: f64| -> crate::Result<ModeSet> {
        modes::decompose_with(
            &apply_weights(assemble(backend.as_ref(), rule, k, execution)?)?,
            config.tolerances.decomposition(),
        )
    };
    let mut rows = Vec::new();
    for f in config.frequencies()? {
        let k = modes::wavenumber(f);
        let ka = k * radius;
        let estimate = plane_wave_estimate(ka);
        let reference = decompose(&reference_rule, k)?;
        let warning = ((study.reference as f64) < estimate).then(|| {
            format!(
                "ka {ka:.3} needs about {estimate:.0} points; the {}-point reference does not resolve it",
                study.reference
            )
        });
        for rule in &rules {
            let modes = if rule.id == reference_rule.id { reference.clone() } else { decompose(rule, k)? };
            let (magnitude_error, phase_error) = modal_errors(&modes, &reference, TOP_MODES);
            rows.push(PrecisionRow {
                frequency_hz: f,
                ka,
                n_q: rule.len(),
                estimate,
                magnitude_error,
                phase_error,
                warning: warning.clone(),
            });
        }
    }
    Ok(rows)
}

pub const PRECISION_COLUMNS: [&str; 8] =
    ["frequency_hz", "ka", "n_q", "estimate", "resolved", "magnitude_error", "phase_error", "warning"];

/// CSV rendering of a precision study.
pub fn precision_table(rows: &[PrecisionRow]) -> String {
    let mut out = PRECISION_COLUMNS.join(",") + "\n";
    for r in rows {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{},{:.6},{},{:.16e},{:.16e},{}",
            r.frequency_hz,
            r.ka,
            r.n_q,
            r.estimate,
            r.n_q as f64 >= r.estimate,
            r.magnitude_error,
            r.phase_error,
            r.warning.as_deref().unwrap_or("")
        );
    }
    out
}
