//! Experiment harness: config validation, dispatch and report writing.

pub mod config;
pub mod error;
pub mod output;
pub mod runner;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{validate_config, ExperimentConfig, ExperimentKind};
pub use error::CliError;
pub use output::RunSummary;
pub use runner::run_experiment;

/// Reads, validates and runs one experiment, writing its report into
/// `out`, else the config's `output`, else `out/<experiment>`.
pub fn execute(
    kind: ExperimentKind,
    config_path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<RunSummary, CliError> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", config_path.display())))?;
    let mut cfg = validate_config(&text, kind)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    let dir = match (out, &cfg.output) {
        (Some(dir), _) => dir.to_path_buf(),
        (None, Some(dir)) => PathBuf::from(dir),
        (None, None) => Path::new("out").join(kind.name()),
    };
    let report = run_experiment(&cfg)?;
    report.write(&dir, kind.name(), cfg.run.seed, &cfg)
}
