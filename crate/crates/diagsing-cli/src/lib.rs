//! Scenario runner for the diagsing library: JSON configs in, CSV tables out.

pub mod config;
pub mod error;
pub mod output;
pub mod scenario;
pub mod verify;

pub use config::{parse_config, ScenarioConfig};
pub use error::CliError;
pub use scenario::{run, verify, Scenario};

use std::path::Path;

/// Reads and validates a config file. Any failure is a config error.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_config(&text)?)
}

/// Sizes the global worker pool. Only a hint: results never depend on it.
pub fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads.filter(|&n| n > 0) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
