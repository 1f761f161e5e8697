use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{Diagnostic, Experiment, ExperimentConfig};
use super::experiments;
use crate::Error;

/// Environment variable that redirects every run's artifacts to
/// `$FLOWCAP_OUT_DIR/<name>`.
pub const OUT_DIR_ENV: &str = "FLOWCAP_OUT_DIR";

/// Why a run stopped, grouped the way the exit status reports it.
#[derive(Debug)]
pub enum RunError {
    /// Unreadable, malformed or invalid config. Exit status 2.
    Config(Vec<Diagnostic>),
    /// A computation failed. Exit status 3.
    Numerical(Error),
    /// The run finished but a residual, rate or verdict missed its
    /// expectation. Artifacts are still written. Exit status 4.
    Tolerance(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Tolerance(_) => 4,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(ds) => {
                write!(f, "invalid config")?;
                for d in ds {
                    write!(f, "\n  {d}")?;
                }
                Ok(())
            }
            RunError::Numerical(e) => write!(f, "numerical failure: {e}"),
            RunError::Tolerance(msg) => write!(f, "tolerance not met: {msg}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e.root() {
            Error::ToleranceNotMet { .. } => RunError::Tolerance(e.to_string()),
            Error::InvalidProblem(_)
            | Error::UnsupportedFamily(_)
            | Error::InvalidField(_)
            | Error::DimensionMismatch { .. }
            | Error::EmptyBox
            | Error::Json(_) => RunError::Config(vec![Diagnostic::new("<config>", e.to_string())]),
            _ => RunError::Numerical(e),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Numerical(Error::Io(e))
    }
}

/// Files a run wrote and a short human summary.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
    pub summary: Vec<String>,
}

/// Writes artifacts into one directory and remembers what it wrote.
pub(crate) struct Artifacts {
    dir: PathBuf,
    digest: String,
    pub(crate) outcome: RunOutcome,
}

impl Artifacts {
    fn new(dir: &Path, digest: String) -> Result<Self, RunError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            digest,
            outcome: RunOutcome::default(),
        })
    }

    pub(crate) fn digest(&self) -> &str {
        &self.digest
    }

    /// `header` then one line per row.
    pub(crate) fn csv<I>(&mut self, name: &str, header: &str, rows: I) -> Result<(), RunError>
    where
        I: IntoIterator<Item = String>,
    {
        let mut text = String::from(header);
        text.push('\n');
        for r in rows {
            text.push_str(&r);
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }

    /// Pretty JSON with a trailing newline.
    pub(crate) fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.outcome.artifacts.push(path);
        Ok(())
    }

    pub(crate) fn say(&mut self, line: impl Into<String>) {
        self.outcome.summary.push(line.into());
    }
}

/// Reads and parses a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, RunError> {
    let text = fs::read_to_string(path).map_err(|e| {
        RunError::Config(vec![Diagnostic::new(
            "<file>",
            format!("cannot read {}: {e}", path.display()),
        )])
    })?;
    ExperimentConfig::from_json(&text).map_err(|d| RunError::Config(vec![d]))
}

/// Diagnostics for a config file without running it; empty means runnable.
/// Fails only when the file cannot be read.
pub fn validate(path: &Path) -> std::io::Result<Vec<Diagnostic>> {
    let text = fs::read_to_string(path)?;
    Ok(match ExperimentConfig::from_json(&text) {
        Ok(cfg) => cfg.diagnostics(),
        Err(d) => vec![d],
    })
}

/// Where a run writes: `override/<name>` when an override is given,
/// otherwise the config's `output`.
pub fn output_dir(config: &ExperimentConfig, override_dir: Option<&Path>) -> PathBuf {
    match override_dir {
        Some(root) => root.join(&config.name),
        None => config.output.clone(),
    }
}

/// Runs an experiment, writing its artifacts to `out_dir`.
///
/// Artifacts depend only on the config: rerunning with the same config and
/// seed reproduces them byte for byte.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, RunError> {
    let mut ds = config.diagnostics();
    // the directory actually used may differ from `output`
    ds.retain(|d| d.field != "output" || out_dir == config.output);
    if !ds.is_empty() {
        return Err(RunError::Config(ds));
    }
    let mut art = Artifacts::new(out_dir, config.digest())?;
    let seed = config.seed.unwrap_or(0);
    let verdict = match &config.experiment {
        Experiment::Convergence(s) => experiments::convergence(config, s, &mut art),
        Experiment::Interpolate(s) => experiments::interpolate(config, s, seed, &mut art),
        Experiment::Rank(s) => experiments::rank(config, s, seed, &mut art),
        Experiment::Counterexample(s) => experiments::counterexample(config, s, seed, &mut art),
        Experiment::ApproxRelu(s) => experiments::approx_relu(config, s, &mut art),
        Experiment::Gronwall(s) => experiments::gronwall(config, s, seed, &mut art),
    };
    verdict.map(|()| art.outcome)
}
