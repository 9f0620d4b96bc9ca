//! Command-line orchestration: strict configs, a content-addressed cache
//! under `<out>/<hash>/`, reports with their invariant checks, and `verify`.

mod config;
mod report;
mod run;

pub use config::{
    Experiment, ExperimentConfig, ExperimentKind, GpParams, ManybodyParams, PoincareParams,
    ScatteringParams, WeightSource,
};
pub use report::{
    Check, GpResult, ManybodyResult, PoincareResult, Report, Results, ScatteringResult,
    SweepResult, WeightedSummary, ARTIFACT, REPORT_SCHEMA,
};
pub use run::{PHI_DATA, PHI_SIDECAR, SWEEP_CSV};

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::manybody::{SweepRow, SWEEP_HEADER};

pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";
pub const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub artifact: String,
    pub config_hash: String,
    pub seed: u64,
    pub reproducible: bool,
    /// Absent for reproducible runs.
    pub wall_time_seconds: Option<f64>,
    pub versions: BTreeMap<String, String>,
    /// SHA-256 of every file written by the run.
    pub files: BTreeMap<String, String>,
    /// SHA-256 of external inputs, keyed by path.
    pub inputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub report: Report,
    pub cached: bool,
}

/// Holds `<out>/.lock` for the lifetime of a run.
struct LockGuard(PathBuf);

impl LockGuard {
    fn acquire(path: PathBuf) -> Result<Self> {
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(format!(
                "{} exists; another run owns this output directory (delete it if that run died)",
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Cache key: the config hash, extended by the digests of external inputs.
pub fn run_key(cfg: &ExperimentConfig, base: &Path) -> Result<String> {
    let inputs = run::external_inputs(cfg, base)?;
    if inputs.is_empty() {
        return cfg.hash();
    }
    let mut h = Sha256::new();
    h.update(cfg.canonical_json()?.as_bytes());
    for (_, digest) in &inputs {
        h.update(b"\n");
        h.update(digest.as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

fn to_pretty(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Runs `cfg` (relative paths inside it resolve against `base`), or serves the
/// cached report for the same key unless `force` is set.
pub fn run(cfg: &ExperimentConfig, base: &Path, force: bool) -> Result<RunOutcome> {
    let key = run_key(cfg, base)?;
    let out = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&out)?;
    let _lock = LockGuard::acquire(out.join(LOCK_FILE))?;
    let dir = out.join(&key);
    if !force {
        if let Some(report) = cached_report(&dir, &key) {
            return Ok(RunOutcome {
                dir,
                report,
                cached: true,
            });
        }
    }
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(CONFIG_FILE), to_pretty(cfg)?)?;

    let start = Instant::now();
    let results = run::execute(cfg, base, &dir)?;
    let elapsed = start.elapsed().as_secs_f64();
    let report = Report {
        artifact: ARTIFACT.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        schema: REPORT_SCHEMA,
        config_hash: key.clone(),
        seed: cfg.seed,
        relations: results.relations(),
        checks: results.checks(),
        results,
    };
    fs::write(dir.join(REPORT_FILE), to_pretty(&report)?)?;

    let mut files = BTreeMap::new();
    let mut names: Vec<String> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in names {
        files.insert(name.clone(), sha256_file(&dir.join(&name))?);
    }
    let inputs = run::external_inputs(cfg, base)?
        .into_iter()
        .map(|(p, d)| (p.display().to_string(), d))
        .collect();
    let versions = BTreeMap::from([
        (ARTIFACT.to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("report_schema".to_string(), REPORT_SCHEMA.to_string()),
    ]);
    let manifest = Manifest {
        artifact: ARTIFACT.into(),
        config_hash: key,
        seed: cfg.seed,
        reproducible: cfg.reproducible,
        wall_time_seconds: (!cfg.reproducible).then_some(elapsed),
        versions,
        files,
        inputs,
    };
    fs::write(dir.join(MANIFEST_FILE), to_pretty(&manifest)?)?;
    Ok(RunOutcome {
        dir,
        report,
        cached: false,
    })
}

fn cached_report(dir: &Path, key: &str) -> Option<Report> {
    let manifest: Manifest =
        serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE)).ok()?).ok()?;
    if manifest.config_hash != key {
        return None;
    }
    let report_path = dir.join(REPORT_FILE);
    if manifest.files.get(REPORT_FILE)? != &sha256_file(&report_path).ok()? {
        return None;
    }
    let report: Report = serde_json::from_slice(&fs::read(&report_path).ok()?).ok()?;
    (report.config_hash == key).then_some(report)
}

/// Outcome of re-checking one report.
#[derive(Debug, Clone)]
pub struct Verification {
    pub path: PathBuf,
    pub checks: Vec<Check>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Re-evaluates every invariant against the stored numbers, plus the
/// manifest digests and, for sweeps, the CSV. Unreadable reports are
/// integrity errors.
pub fn verify_report(path: &Path) -> Result<Verification> {
    let bytes = fs::read(path).map_err(|e| Error::Integrity(format!("{}: {e}", path.display())))?;
    let report: Report = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Integrity(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut checks = report.results.checks();
    let recomputed: Vec<(&str, bool)> =
        checks.iter().map(|c| (c.name.as_str(), c.passed)).collect();
    let stored: Vec<(&str, bool)> = report
        .checks
        .iter()
        .map(|c| (c.name.as_str(), c.passed))
        .collect();
    let consistent = recomputed == stored;
    checks.push(Check {
        name: "stored_checks_consistent".into(),
        passed: consistent,
        detail: format!("{} stored, {} recomputed", stored.len(), recomputed.len()),
    });
    checks.push(Check {
        name: "artifact".into(),
        passed: report.artifact == ARTIFACT && report.schema == REPORT_SCHEMA,
        detail: format!("{} schema {}", report.artifact, report.schema),
    });
    if let Ok(m) = fs::read(dir.join(MANIFEST_FILE)) {
        let (ok, detail) = match serde_json::from_slice::<Manifest>(&m) {
            Ok(man) => {
                let digest = hex::encode(Sha256::digest(&bytes));
                let ok = man.config_hash == report.config_hash
                    && man.files.get(REPORT_FILE) == Some(&digest)
                    && man.seed == report.seed;
                (ok, format!("report digest {digest}"))
            }
            Err(e) => (false, format!("unreadable manifest: {e}")),
        };
        checks.push(Check {
            name: "manifest_digest".into(),
            passed: ok,
            detail,
        });
    }
    if let Results::Sweep(s) = &report.results {
        let (ok, detail) = match read_sweep_csv(&dir.join(&s.csv)) {
            Ok(table) => compare_csv(&table, &s.rows),
            Err(e) => (false, e.to_string()),
        };
        checks.push(Check {
            name: "csv_matches_rows".into(),
            passed: ok,
            detail,
        });
    }
    Ok(Verification {
        path: path.to_path_buf(),
        checks,
    })
}

fn read_sweep_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn compare_csv(table: &(Vec<String>, Vec<Vec<String>>), rows: &[SweepRow]) -> (bool, String) {
    if table.0 != SWEEP_HEADER {
        return (false, format!("header {:?}", table.0));
    }
    if table.1.len() != rows.len() {
        return (
            false,
            format!("{} csv rows, {} report rows", table.1.len(), rows.len()),
        );
    }
    for (line, row) in table.1.iter().zip(rows) {
        let expected = row.csv_record();
        // compare numerically so that formatting is not part of the contract
        let same = line.len() == expected.len()
            && line.iter().zip(&expected).all(|(a, b)| {
                match (a.parse::<f64>(), b.parse::<f64>()) {
                    (Ok(x), Ok(y)) => x == y,
                    _ => a == b,
                }
            });
        if !same {
            return (false, format!("row N = {} differs", row.n));
        }
    }
    (true, format!("{} rows", rows.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Scattering,
    Gp,
    Manybody,
    Sweep,
    Poincare,
    Verify,
}

impl Command {
    fn kind(self) -> Option<ExperimentKind> {
        Some(match self {
            Command::Scattering => ExperimentKind::Scattering,
            Command::Gp => ExperimentKind::Gp,
            Command::Manybody => ExperimentKind::Manybody,
            Command::Sweep => ExperimentKind::Sweep,
            Command::Poincare => ExperimentKind::Poincare,
            Command::Verify => return None,
        })
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bec-lab",
    version,
    about = "Desk-scale checks of condensation in the Gross-Pitaevskii limit"
)]
pub struct Cli {
    pub command: Command,
    /// Strict JSON experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Recompute even when a cached report exists.
    #[arg(long)]
    pub force: bool,
    /// Leave run-dependent fields such as the wall time out of the manifest.
    #[arg(long)]
    pub reproducible: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output root; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reports to check (verify only).
    pub reports: Vec<PathBuf>,
}

/// Loads the config named on the command line and applies the flag overrides.
pub fn effective_config(cli: &Cli) -> Result<(ExperimentConfig, PathBuf)> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config {
        path: "--config".into(),
        message: "a configuration file is required".into(),
    })?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.reproducible {
        cfg.reproducible = true;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.display().to_string();
    }
    // relative paths inside the config, like `output_dir`, are taken from the working directory
    Ok((cfg, PathBuf::from(".")))
}

/// Runs one command and returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match cli.command.kind() {
        Some(kind) => {
            if !cli.reports.is_empty() {
                return Err(Error::Config {
                    path: "reports".into(),
                    message: "report paths are only accepted by verify".into(),
                });
            }
            let (cfg, base) = effective_config(cli)?;
            if cfg.experiment.kind() != kind {
                return Err(Error::Config {
                    path: "experiment".into(),
                    message: format!(
                        "config describes `{}`, not `{}`",
                        cfg.experiment.kind().name(),
                        kind.name()
                    ),
                });
            }
            let outcome = run(&cfg, &base, cli.force)?;
            let report_path = outcome.dir.join(REPORT_FILE);
            println!(
                "{} {}{}",
                kind.name(),
                report_path.display(),
                if outcome.cached { " (cached)" } else { "" }
            );
            let failed: Vec<&Check> = outcome.report.checks.iter().filter(|c| !c.passed).collect();
            for c in &failed {
                println!("FAIL {}: {}", c.name, c.detail);
            }
            Ok(if failed.is_empty() { 0 } else { 4 })
        }
        None => {
            let mut paths = cli.reports.clone();
            if cli.config.is_some() {
                let (cfg, base) = effective_config(cli)?;
                let key = run_key(&cfg, &base)?;
                paths.push(PathBuf::from(&cfg.output_dir).join(key).join(REPORT_FILE));
            }
            if paths.is_empty() {
                return Err(Error::Config {
                    path: "verify".into(),
                    message: "give --config or report paths".into(),
                });
            }
            let mut all = true;
            for p in &paths {
                let v = verify_report(p)?;
                let pass = v.passed();
                all &= pass;
                println!("{} {}", if pass { "PASS" } else { "FAIL" }, p.display());
                for c in v.failures() {
                    println!("  {}: {}", c.name, c.detail);
                }
            }
            Ok(if all { 0 } else { 4 })
        }
    }
}

/// Parses `args` (including the program name) and runs; clap usage errors map
/// to the configuration exit code.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => main_with(cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            code
        }
    }
}
