//! Configuration-driven experiment runner for hitlab.
//!
//! Every run writes `record.json` (configuration echo with all defaults, results
//! payload, warnings) and one CSV per curve into the output directory.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | I/O or other failure |
//! | 2 | invalid configuration (nothing is written) |
//! | 3 | a cap was exceeded |
//! | 4 | an iteration did not converge |
//! | 5 | replay mismatch |

pub mod config;
pub mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use hitlab_core::HitError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use config::{ExperimentConfig, Kind, Mode};
pub use run::{execute, Outcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CAP: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;
pub const EXIT_REPLAY_MISMATCH: i32 = 5;

pub const ARTIFACT_VERSION: &str = concat!("hitlab ", env!("CARGO_PKG_VERSION"));

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Run(HitError),
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_OTHER,
            CliError::Run(HitError::CapExceeded { .. }) => EXIT_CAP,
            CliError::Run(HitError::NonConvergence(_)) => EXIT_NONCONVERGENCE,
            CliError::Run(_) => EXIT_OTHER,
            CliError::Mismatch(_) => EXIT_REPLAY_MISMATCH,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Run(e) => write!(f, "{e}"),
            CliError::Mismatch(m) => write!(f, "replay mismatch: {m}"),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub artifact_version: String,
    pub config: ExperimentConfig,
    pub wall_time_seconds: f64,
    pub results: Value,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
    /// Error that ended the run early, if any.
    pub error: Option<String>,
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub kind: Option<Kind>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
}

/// Parses, applies overrides, resolves defaults and validates.
pub fn load_config(text: &str, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut config = ExperimentConfig::from_json(text).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(kind) = overrides.kind {
        match config.kind {
            Some(k) if k != kind => {
                return Err(CliError::Config(format!(
                    "configuration is for {}, not {}",
                    k.name(),
                    kind.name()
                )))
            }
            _ => config.kind = Some(kind),
        }
    }
    if let Some(seed) = overrides.seed {
        config.master_seed = seed;
    }
    if let Some(mode) = overrides.mode {
        config.mode = mode;
    }
    if let Some(out) = &overrides.out {
        config.output.dir = Some(out.clone());
    }
    config.resolve().map_err(|e| CliError::Config(e.to_string()))?;
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(config)
}

/// A finished run. `error` is the first failure; the record still holds
/// everything computed before it.
pub struct RunOutput {
    pub record: RunRecord,
    pub csv: Vec<(String, String)>,
    pub error: Option<HitError>,
}

/// Runs a resolved configuration without touching the file system.
pub fn run_config(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let prepared = config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let start = Instant::now();
    let outcome = execute(config, &prepared);
    let record = RunRecord {
        artifact_version: ARTIFACT_VERSION.to_string(),
        config: config.clone(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        results: normalize(&Value::Object(outcome.results)),
        warnings: outcome.warnings,
        files: outcome.csv.iter().map(|(n, _)| n.clone()).collect(),
        error: outcome.error.as_ref().map(|e| e.to_string()),
    };
    Ok(RunOutput { record, csv: outcome.csv, error: outcome.error })
}

/// The same JSON text the record file holds, so in-memory and on-disk payloads
/// compare equal.
fn normalize(v: &Value) -> Value {
    serde_json::from_str(&serde_json::to_string(v).expect("serializable")).expect("valid json")
}

pub fn write_outputs(dir: &Path, record: &RunRecord, csv: &[(String, String)]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for (name, body) in csv {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| io_err(&path, e))?;
    }
    let path = dir.join("record.json");
    let text = serde_json::to_string_pretty(record).expect("serializable");
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

/// Runs and writes; partial results are written before the error is returned.
pub fn run_and_write(config: &ExperimentConfig) -> Result<RunRecord, CliError> {
    let out = run_config(config)?;
    if let Some(dir) = &config.output.dir {
        write_outputs(dir, &out.record, &out.csv)?;
    }
    match out.error {
        Some(e) => {
            for w in &out.record.warnings {
                eprintln!("warning: {w}");
            }
            Err(CliError::Run(e))
        }
        None => Ok(out.record),
    }
}

/// First JSON path at which `a` and `b` differ.
pub fn first_difference(a: &Value, b: &Value) -> Option<String> {
    fn walk(a: &Value, b: &Value, path: &mut String) -> Option<String> {
        match (a, b) {
            (Value::Object(x), Value::Object(y)) => {
                let mut keys: Vec<&String> = x.keys().chain(y.keys()).collect();
                keys.sort();
                keys.dedup();
                for k in keys {
                    let len = path.len();
                    path.push('.');
                    path.push_str(k);
                    let r = match (x.get(k), y.get(k)) {
                        (Some(u), Some(v)) => walk(u, v, path),
                        _ => Some(path.clone()),
                    };
                    if r.is_some() {
                        return r;
                    }
                    path.truncate(len);
                }
                None
            }
            (Value::Array(x), Value::Array(y)) => {
                for (i, (u, v)) in x.iter().zip(y).enumerate() {
                    let len = path.len();
                    path.push_str(&format!("[{i}]"));
                    if let Some(r) = walk(u, v, path) {
                        return Some(r);
                    }
                    path.truncate(len);
                }
                (x.len() != y.len()).then(|| format!("{path} (length {} vs {})", x.len(), y.len()))
            }
            _ => (a != b).then(|| path.clone()),
        }
    }
    let mut path = String::from("$");
    walk(a, b, &mut path)
}

/// Re-executes a record's configuration and compares the payloads.
pub fn replay(record_path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<RunRecord, CliError> {
    let text = fs::read_to_string(record_path).map_err(|e| io_err(record_path, e))?;
    let old: RunRecord =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("unreadable record: {e}")))?;
    if let Some(seed) = seed {
        if seed != old.config.master_seed {
            return Err(CliError::Config(format!(
                "seed {seed} differs from the recorded master_seed {}; that is a configuration change, not a replay",
                old.config.master_seed
            )));
        }
    }
    let mut config = old.config.clone();
    config.output.dir = out;
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let new = match run_and_write(&config) {
        Ok(r) => r,
        Err(CliError::Run(e)) if old.error.is_some() => {
            return if old.error.as_deref() == Some(e.to_string().as_str()) {
                Err(CliError::Run(e))
            } else {
                Err(CliError::Mismatch(format!("error changed to {e}")))
            };
        }
        Err(e) => return Err(e),
    };
    if let Some(path) = first_difference(&old.results, &new.results) {
        return Err(CliError::Mismatch(format!("results differ first at {path}")));
    }
    Ok(new)
}

#[derive(Debug, Parser)]
#[command(name = "hitlab", version, about = "Hitting-time statistics experiments")]
pub struct Cli {
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed for all random streams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, conflicts_with = "float")]
    pub exact: bool,
    #[arg(long, global = true)]
    pub float: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment named in the configuration.
    Run(ConfigArg),
    /// Re-run a record and check that its results are reproduced.
    Replay { record: PathBuf },
    Survival(ConfigArg),
    EscapeRate(ConfigArg),
    Theta(ConfigArg),
    Lcurve(ConfigArg),
    Lzero(ConfigArg),
    UnionCheck(ConfigArg),
    Hypotheses(ConfigArg),
    Phi(ConfigArg),
    Ball(ConfigArg),
}

impl Command {
    fn parts(&self) -> Option<(Option<Kind>, &Path)> {
        let (kind, arg) = match self {
            Command::Replay { .. } => return None,
            Command::Run(a) => (None, a),
            Command::Survival(a) => (Some(Kind::Survival), a),
            Command::EscapeRate(a) => (Some(Kind::EscapeRate), a),
            Command::Theta(a) => (Some(Kind::Theta), a),
            Command::Lcurve(a) => (Some(Kind::Lcurve), a),
            Command::Lzero(a) => (Some(Kind::Lzero), a),
            Command::UnionCheck(a) => (Some(Kind::UnionCheck), a),
            Command::Hypotheses(a) => (Some(Kind::Hypotheses), a),
            Command::Phi(a) => (Some(Kind::Phi), a),
            Command::Ball(a) => (Some(Kind::Ball), a),
        };
        Some((kind, arg.config.as_path()))
    }
}

fn summary(record: &RunRecord) -> String {
    let mut s = format!(
        "{} finished in {:.3}s",
        record.config.kind().name(),
        record.wall_time_seconds
    );
    if let Some(dir) = &record.config.output.dir {
        s.push_str(&format!(", outputs in {}", dir.display()));
    }
    for w in &record.warnings {
        s.push_str(&format!("\nwarning: {w}"));
    }
    s
}

/// Executes a parsed command line and returns the process exit code.
pub fn dispatch(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot configure {n} threads: {e}");
            return EXIT_OTHER;
        }
    }
    let mode = match (cli.exact, cli.float) {
        (true, _) => Some(Mode::Exact),
        (_, true) => Some(Mode::Float),
        _ => None,
    };
    let result = match cli.command.parts() {
        None => {
            let Command::Replay { record } = &cli.command else { unreachable!() };
            replay(record, cli.seed, cli.out.clone()).map(|r| {
                println!("replay matches: {}", summary(&r));
            })
        }
        Some((kind, path)) => fs::read_to_string(path)
            .map_err(|e| io_err(path, e))
            .and_then(|text| {
                load_config(&text, &Overrides { kind, out: cli.out.clone(), seed: cli.seed, mode })
            })
            .and_then(|config| run_and_write(&config))
            .map(|r| {
                println!("{}", summary(&r));
                if r.config.output.dir.is_none() {
                    println!("{}", serde_json::to_string_pretty(&r.results).expect("serializable"));
                }
            }),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
