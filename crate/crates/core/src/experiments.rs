//! Temporal convergence studies: evolve a Gaussian wave packet to a fixed
//! time with a sweep of step counts and compare against a fine-step
//! reference computed with the same scheme on the same anti-aliasing set.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::antialias::{load_or_build, AntiAliasingSet, BuildOptions, CacheStatus};
use crate::error::{Error, Result};
use crate::lattice::Rank1Lattice;
use crate::operators::{make_gaussian, make_potential, KineticTable, PotentialField, PotentialKind};
use crate::spectral::{Snapshot, SpectralState};
use crate::splitting::{empirical_order, scheme, Propagator, SplittingScheme, ROUNDOFF_FLOOR};

/// Environment variable that overrides the configured cache directory.
pub const CACHE_DIR_ENV: &str = "LATSPEC_CACHE_DIR";

pub const DEFAULT_SWEEP: &[u64] = &[5, 10, 20, 50, 100, 200, 500, 1000];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Checked against the lattice when given.
    pub dimension: Option<usize>,
    /// Named lattice; mutually exclusive with `n`/`z`.
    pub preset: Option<String>,
    pub n: Option<u64>,
    pub z: Option<Vec<u64>>,
    pub potential: PotentialKind,
    pub scheme: String,
    pub epsilon: f64,
    pub final_time: f64,
    pub reference_steps: u64,
    pub sweep_steps: Vec<u64>,
    pub output: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dimension: None,
            preset: Some("paper-d2".into()),
            n: None,
            z: None,
            potential: PotentialKind::HarmonicV2,
            scheme: "s9odr6a".into(),
            epsilon: 1.0,
            final_time: 1.0,
            reference_steps: 10_000,
            sweep_steps: DEFAULT_SWEEP.to_vec(),
            output: None,
            cache_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn lattice(&self) -> Result<Rank1Lattice> {
        let lattice = match (&self.preset, self.n, &self.z) {
            (Some(name), None, None) => Rank1Lattice::preset(name)?,
            (None, Some(n), Some(z)) => Rank1Lattice::new(z.clone(), n)?,
            (Some(_), _, _) => return Err(Error::Config("give either a preset or n and z, not both".into())),
            _ => return Err(Error::Config("a lattice needs a preset or both n and z".into())),
        };
        if let Some(d) = self.dimension {
            if d != lattice.dim() {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: lattice.dim(),
                });
            }
        }
        Ok(lattice)
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice()?;
        scheme(&self.scheme)?;
        if self.potential == PotentialKind::Custom {
            return Err(Error::Config("convergence runs need potential v1 or v2".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(Error::Config(format!("final time must be positive, got {}", self.final_time)));
        }
        if self.sweep_steps.contains(&0) {
            return Err(Error::Config("sweep step counts must be positive".into()));
        }
        let max = self.sweep_steps.iter().copied().max().unwrap_or(0);
        if self.reference_steps <= max {
            return Err(Error::Config(format!(
                "reference steps ({}) must exceed the largest sweep entry ({max})",
                self.reference_steps
            )));
        }
        Ok(())
    }

    /// Cache directory after applying the environment override.
    pub fn resolved_cache_dir(&self) -> Option<PathBuf> {
        std::env::var_os(CACHE_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .or_else(|| self.cache_dir.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub m: u64,
    pub dt: f64,
    pub err: f64,
    /// True when `err` is at the roundoff floor and excluded from the fit.
    pub floor_filtered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: ExperimentConfig,
    /// SHA-256 of the anti-aliasing set in its cache serialization.
    pub aaset_hash: String,
    /// Sorted by descending `dt`.
    pub rows: Vec<ConvergenceRow>,
    /// `None` when fewer than three rows survive the floor filter.
    pub order: Option<f64>,
}

impl ConvergenceReport {
    pub fn from_rows(config: ExperimentConfig, aaset_hash: String, mut rows: Vec<ConvergenceRow>) -> Self {
        rows.sort_by_key(|r| r.m);
        for r in &mut rows {
            r.floor_filtered = r.err <= ROUNDOFF_FLOOR;
        }
        let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.dt, r.err)).collect();
        let order = empirical_order(&points).ok();
        Self {
            config,
            aaset_hash,
            rows,
            order,
        }
    }

    pub fn fitted_rows(&self) -> usize {
        self.rows.iter().filter(|r| !r.floor_filtered).count()
    }
}

/// Everything a run needs besides the step counts.
pub struct Problem {
    pub aa: Arc<AntiAliasingSet>,
    pub kinetic: KineticTable,
    pub potential: PotentialField,
    pub scheme: SplittingScheme,
    pub initial: SpectralState,
    pub epsilon: f64,
    pub cache_status: CacheStatus,
}

impl Problem {
    /// Builds everything from `config`, using `cache` for the anti-aliasing
    /// set.
    pub fn from_config(config: &ExperimentConfig, cache: Option<&Path>) -> Result<Self> {
        config.validate()?;
        let lattice = config.lattice()?;
        let (aa, cache_status) = load_or_build(&lattice, cache, BuildOptions::default())?;
        let aa = Arc::new(aa);
        Ok(Self {
            kinetic: KineticTable::new(&aa, config.epsilon)?,
            potential: make_potential(config.potential, &lattice)?,
            scheme: scheme(&config.scheme)?,
            initial: make_gaussian(&aa, config.epsilon)?,
            epsilon: config.epsilon,
            aa,
            cache_status,
        })
    }

    /// Evolves the initial state to `final_time` in `m` equal steps.
    pub fn solve(&self, m: u64, final_time: f64) -> Result<SpectralState> {
        let dt = final_time / m as f64;
        let mut state = self.initial.clone();
        Propagator::new(&self.scheme, &self.kinetic, &self.potential, self.epsilon, dt)?.evolve(&mut state, m)?;
        Ok(state)
    }
}

fn reference_key(config: &ExperimentConfig, aa: &AntiAliasingSet) -> String {
    let key = format!(
        "{}|{:?}|{}|{:e}|{:e}|{}",
        aa.lattice().fingerprint(),
        config.potential,
        config.scheme,
        config.epsilon,
        config.final_time,
        config.reference_steps
    );
    hex::encode(&Sha256::digest(key.as_bytes())[..8])
}

/// Loads the reference state from the cache directory or computes and
/// stores it.
fn reference_state(config: &ExperimentConfig, problem: &Problem, cache: Option<&Path>) -> Result<SpectralState> {
    let path = cache.map(|dir| dir.join(format!("ref_{}.snap", reference_key(config, &problem.aa))));
    if let Some(path) = &path {
        if let Ok(file) = fs::File::open(path) {
            if let Ok(state) = Snapshot::read_from(std::io::BufReader::new(file))
                .and_then(|s| s.into_state(problem.aa.clone()))
            {
                return Ok(state);
            }
        }
    }
    let state = problem.solve(config.reference_steps, config.final_time)?;
    if let Some(path) = &path {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        Snapshot::from(&state).write_to(std::io::BufWriter::new(fs::File::create(&tmp)?))?;
        fs::rename(tmp, path)?;
    }
    Ok(state)
}

fn distance(a: &SpectralState, b: &SpectralState) -> f64 {
    a.coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Runs the full study described by `config`.
pub fn run_convergence(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    run_convergence_in(config, config.resolved_cache_dir().as_deref())
}

/// As [`run_convergence`], with an explicit cache directory for the
/// anti-aliasing set and the reference snapshot.
pub fn run_convergence_in(config: &ExperimentConfig, cache: Option<&Path>) -> Result<ConvergenceReport> {
    let problem = Problem::from_config(config, cache)?;
    let reference = reference_state(config, &problem, cache)?;
    let mut ms = config.sweep_steps.clone();
    ms.sort_unstable();
    ms.dedup();
    let rows = ms
        .par_iter()
        .map(|&m| {
            let u = problem.solve(m, config.final_time)?;
            Ok(ConvergenceRow {
                m,
                dt: config.final_time / m as f64,
                err: distance(&u, &reference),
                floor_filtered: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::from_rows(config.clone(), problem.aa.content_hash(), rows))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

const CSV_TITLE: &str = "# latspec convergence report";
const CSV_COLUMNS: &str = "m,dt,err,floor_filtered";

pub fn to_csv(report: &ConvergenceReport) -> String {
    let mut out = String::new();
    writeln!(out, "{CSV_TITLE}").unwrap();
    writeln!(out, "# config: {}", report.config.to_json()).unwrap();
    writeln!(out, "# aaset_sha256: {}", report.aaset_hash).unwrap();
    match report.order {
        Some(p) => writeln!(out, "# order: {p:e}").unwrap(),
        None => writeln!(out, "# order: not-fitted").unwrap(),
    }
    writeln!(out, "{CSV_COLUMNS}").unwrap();
    for r in &report.rows {
        writeln!(out, "{},{:e},{:e},{}", r.m, r.dt, r.err, r.floor_filtered).unwrap();
    }
    out
}

pub fn from_csv(text: &str) -> Result<ConvergenceReport> {
    let bad = |what: &str| Error::Report(what.to_string());
    let mut lines = text.lines();
    if lines.next() != Some(CSV_TITLE) {
        return Err(bad("missing title line"));
    }
    let mut field = |key: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| bad("truncated header"))?;
        line.strip_prefix(&format!("# {key}: "))
            .map(str::to_string)
            .ok_or_else(|| Error::Report(format!("expected `{key}` header, found `{line}`")))
    };
    let config = ExperimentConfig::from_json(&field("config")?)?;
    let aaset_hash = field("aaset_sha256")?;
    let order = match field("order")?.as_str() {
        "not-fitted" => None,
        s => Some(s.parse().map_err(|_| bad("bad order"))?),
    };
    if lines.next() != Some(CSV_COLUMNS) {
        return Err(bad("missing column header"));
    }
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(Error::Report(format!("bad row `{line}`")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Report(format!("bad number `{s}`")));
            Ok(ConvergenceRow {
                m: cols[0].parse().map_err(|_| bad("bad step count"))?,
                dt: num(cols[1])?,
                err: num(cols[2])?,
                floor_filtered: cols[3].parse().map_err(|_| bad("bad flag"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport {
        config,
        aaset_hash,
        rows,
        order,
    })
}

pub fn to_json(report: &ConvergenceReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<ConvergenceReport> {
    Ok(serde_json::from_str(text)?)
}

pub fn render(report: &ConvergenceReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => to_csv(report),
        ReportFormat::Json => to_json(report),
    }
}

/// Writes the report to `path` in the given format.
pub fn emit(report: &ConvergenceReport, format: ReportFormat, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, render(report, format))?;
    Ok(())
}

/// Rough peak memory of a run on `(d, n)`, in bytes.
pub fn estimate_memory_bytes(d: usize, n: u64) -> u64 {
    let aaset = n * (4 * d as u64 + 8);
    let states = 3 * 16 * n;
    let tables = 2 * 8 * n;
    let factors = (18 * 16 * n).min(1 << 30);
    aaset + states + tables + factors
}
