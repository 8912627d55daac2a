//! Run configuration: a JSON document, overridden by command-line flags.

use std::path::Path;

use modegraph::dynamics::{DeviceConfig, ParticleSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Grid,
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub mode: u32,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    /// Start time of each piece, first one 0.
    pub breakpoints: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Mode then 1-based indices of the probed box, e.g. `[2, 1, 1]`.
    pub cell: Vec<u32>,
    pub depth: u32,
    pub cell_modes: u32,
    pub connector_modes: u32,
}

/// Every parameter a command may read. Unused keys keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub device: DeviceConfig,
    pub seed: u64,

    // simulate
    pub initial_state: Vec<f64>,
    pub schedule: Vec<Segment>,
    pub mixture: Option<MixtureConfig>,
    pub dt: f64,
    pub sample_dt: Option<f64>,

    // graph and plan
    pub region: Option<String>,
    pub transit: bool,
    pub probe: Option<ProbeConfig>,
    pub from: Vec<String>,
    pub to: Vec<String>,
    pub tolerance: f64,

    // localctrl
    pub sweep: SweepMode,
    pub spacing_um: f64,
    pub samples: u64,
    pub sample_particles: usize,
    pub radius_range_um: (f64, f64),

    // relax
    pub period: f64,
    pub halvings: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            device: DeviceConfig::reference_two_particle(),
            seed: 0,
            initial_state: Vec::new(),
            schedule: Vec::new(),
            mixture: None,
            dt: 1e-4,
            sample_dt: None,
            region: None,
            transit: false,
            probe: None,
            from: Vec::new(),
            to: Vec::new(),
            tolerance: 1e-6,
            sweep: SweepMode::Grid,
            spacing_um: 5.0,
            samples: 3000,
            sample_particles: 2,
            radius_range_um: (1.0, 2.0),
            period: 0.05,
            halvings: 3,
        }
    }
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// JSON run configuration, or a manifest from an earlier run.
    #[arg(long, value_name = "PATH")]
    pub config: Option<std::path::PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "modegraph-out")]
    pub out: std::path::PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of available modes N.
    #[arg(long)]
    pub modes: Option<u32>,
    /// Comma-separated particle radii in µm.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub particles: Option<Vec<f64>>,
    /// Grid spacing in µm.
    #[arg(long, value_name = "UM")]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub samples: Option<u64>,
    /// Node region `LO,HI` or `LO,HI:desc`.
    #[arg(long, value_name = "SPEC")]
    pub region: Option<String>,
    /// Restrict written files to these formats.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub format: Vec<Format>,
    /// Worker threads (overrides MODEGRAPH_THREADS).
    #[arg(long, env = "MODEGRAPH_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Dot,
    Svg,
}

fn parse_document(text: &str, origin: &str) -> Result<RunConfig, CliError> {
    let err = |e: serde_json::Error| CliError::Config(format!("{origin}: {e}"));
    let value: Value = serde_json::from_str(text).map_err(err)?;
    // A manifest carries the resolved configuration under `config`.
    match value {
        Value::Object(mut m) if m.contains_key("manifest_version") => {
            let cfg = m
                .remove("config")
                .ok_or_else(|| CliError::Config(format!("{origin}: manifest without config")))?;
            serde_json::from_value(cfg).map_err(err)
        }
        // Parse the text again so schema errors carry line and column.
        _ => serde_json::from_str(text).map_err(err),
    }
}

pub fn load(o: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = match &o.config {
        Some(path) => read_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(n) = o.modes {
        cfg.device.mode_count = n;
    }
    if let Some(r) = &o.particles {
        cfg.device.particles = r.iter().map(|&r| ParticleSpec::with_radius(r)).collect();
    }
    if let Some(s) = o.spacing {
        cfg.spacing_um = s;
    }
    if let Some(s) = o.samples {
        cfg.samples = s;
    }
    if let Some(r) = &o.region {
        cfg.region = Some(r.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_file(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_document(&text, &path.display().to_string())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.device.validate()?;
        let bad = |field: &str, why: &str| Err(CliError::Config(format!("{field}: {why}")));
        if !(self.dt > 0.0) {
            return bad("dt", "must be positive");
        }
        if matches!(self.sample_dt, Some(s) if !(s > 0.0)) {
            return bad("sample_dt", "must be positive");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance", "must be positive");
        }
        if !(self.spacing_um > 0.0) {
            return bad("spacing_um", "must be positive");
        }
        if !(self.period > 0.0) {
            return bad("period", "must be positive");
        }
        for (j, s) in self.schedule.iter().enumerate() {
            if s.mode == 0 {
                return bad(&format!("schedule[{j}].mode"), "modes start at 1");
            }
            if !(s.duration >= 0.0 && s.duration.is_finite()) {
                return bad(&format!("schedule[{j}].duration"), "must be non-negative");
            }
        }
        if let Some(m) = &self.mixture {
            if m.breakpoints.len() != m.weights.len() {
                return bad("mixture", "needs one weight vector per breakpoint");
            }
            if !(m.horizon >= 0.0) {
                return bad("mixture.horizon", "must be non-negative");
            }
        }
        if let Some(p) = &self.probe {
            if p.cell.len() < 2 {
                return bad("probe.cell", "needs a mode and at least one index");
            }
        }
        Ok(())
    }
}
