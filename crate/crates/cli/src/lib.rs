//! Configuration, presets and subcommand drivers behind the `mlheat` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod presets;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};

/// Loads a named preset or a config file.
pub fn load_config(preset: Option<&str>, path: Option<&std::path::Path>) -> Result<ExperimentConfig> {
    match (preset, path) {
        (Some(name), None) => {
            let text = presets::lookup(name).ok_or_else(|| {
                let known: Vec<&str> = presets::PRESETS.iter().map(|(n, _)| *n).collect();
                CliError::config("--preset", format!("unknown preset `{name}` (known: {})", known.join(", ")))
            })?;
            ExperimentConfig::from_toml(text, &format!("preset {name}"))
        }
        (None, Some(p)) => ExperimentConfig::from_file(p),
        _ => Err(CliError::config("--config", "give exactly one of --config or --preset")),
    }
}
