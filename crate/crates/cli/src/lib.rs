//! Experiment runner: loads a config (file or preset), applies overrides,
//! validates, runs the requested computation and writes CSV tables plus a
//! JSON manifest.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod presets;

use std::path::PathBuf;
use std::time::Instant;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::CliError;
pub use output::Manifest;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Options shared by every experiment subcommand.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub out: Option<String>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub set: Vec<String>,
}

/// Loads, overrides and parses the config without running anything.
pub fn resolve_config(kind: ExperimentKind, opts: &RunOptions) -> Result<ExperimentConfig, CliError> {
    let mut value = match (&opts.config, &opts.preset) {
        (Some(path), None) => config::load_value(path)?,
        (None, Some(name)) => {
            let preset = presets::find(name).ok_or_else(|| CliError::Config {
                field: "--preset".into(),
                reason: format!("unknown preset '{name}'"),
            })?;
            config::to_value(&preset.config())
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Config {
                field: "--preset".into(),
                reason: "give either --config or --preset, not both".into(),
            })
        }
        (None, None) => {
            return Err(CliError::Config {
                field: "--config".into(),
                reason: "a config file or --preset is required".into(),
            })
        }
    };
    for assignment in &opts.set {
        config::apply_override(&mut value, assignment)?;
    }
    let mut cfg = config::from_value(value)?;
    if opts.seed.is_some() {
        cfg.seed = opts.seed;
    }
    if cfg.kind.is_none() {
        cfg.kind = Some(kind);
    }
    Ok(cfg)
}

/// Runs one experiment end to end and returns the manifest that was written.
pub fn execute(kind: ExperimentKind, opts: &RunOptions) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let cfg = resolve_config(kind, opts)?;
    let resolved = cfg.validate(kind)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = opts.jobs {
        if jobs == 0 {
            return Err(CliError::Config {
                field: "--jobs".into(),
                reason: "must be at least 1".into(),
            });
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder.build().map_err(|e| CliError::Config {
        field: "--jobs".into(),
        reason: e.to_string(),
    })?;
    let result = pool.install(|| experiments::run(&cfg, &resolved))?;

    let prefix = opts.out.clone().or_else(|| cfg.output.clone()).unwrap_or_default();
    let mut files = Vec::new();
    let mut entries = Vec::new();
    for table in &result.tables {
        let path = output::output_path(&prefix, &table.name, "csv");
        let bytes = table.to_csv();
        entries.push(output::OutputEntry {
            path: path.display().to_string(),
            rows: table.rows.len(),
            sha256: output::sha256_hex(&bytes),
        });
        files.push((path, bytes));
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: VERSION.into(),
        experiment: kind.name().into(),
        config: serde_json::to_value(&cfg).expect("config serializes to JSON"),
        outputs: entries,
        duration_seconds: start.elapsed().as_secs_f64(),
        warnings: result.warnings,
        calibration: result.calibration,
    };
    let manifest_path = output::output_path(&prefix, "manifest", "json");
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    manifest_bytes.push(b'\n');
    files.push((manifest_path, manifest_bytes));
    output::write_all(&files)?;
    Ok(manifest)
}

/// Human-readable preset catalog.
pub fn preset_catalog() -> String {
    let mut out = String::new();
    for p in presets::PRESETS {
        out.push_str(&format!("{:<6} {:<12} {}", p.name, p.kind.name(), p.description));
        if !p.required.is_empty() {
            out.push_str(&format!(" [requires: {}]", p.required.join(", ")));
        }
        out.push('\n');
    }
    out
}

/// TOML text of a preset, suitable as a starting config file.
pub fn preset_toml(name: &str) -> Result<String, CliError> {
    let preset = presets::find(name).ok_or_else(|| CliError::Config {
        field: "--show".into(),
        reason: format!("unknown preset '{name}'"),
    })?;
    toml::to_string_pretty(&preset.config()).map_err(|e| CliError::Config {
        field: "--show".into(),
        reason: e.to_string(),
    })
}
