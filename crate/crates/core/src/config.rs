//! Structured run configuration: a flat TOML document with strict unknown-key
//! rejection and constraint validation at parse time.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::initial::{InitialCondition, BUILTIN_NAMES};
use crate::integrator::StepConfig;
use crate::state::Params;

#[derive(Debug, Error)]
pub enum ConfigError {
    /// Syntax and unknown-key errors; the underlying message carries the
    /// line/column span.
    #[error("config parse error: {0}")]
    Syntax(#[from] toml::de::Error),

    #[error("config constraint on '{key}': {message}")]
    Constraint { key: &'static str, message: String },

    #[error("config i/o on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("initial-condition file not resolvable: {0}")]
    MissingIcFile(PathBuf),
}

fn one() -> f64 {
    1.0
}
fn default_dt_init() -> f64 {
    1.0
}
fn default_cfl() -> f64 {
    0.4
}
fn default_picard_tol() -> f64 {
    1e-10
}
fn default_picard_max_iter() -> usize {
    50
}
fn default_dt_min() -> f64 {
    1e-12
}
fn default_tol_phi() -> f64 {
    1e-8
}
fn default_amplitude() -> f64 {
    0.2
}
fn default_mean_theta_tol() -> f64 {
    1e-6
}

/// Full description of one run. Unknown keys are rejected; all keys except
/// `n_cells`, `epsilon`, `beta`, `t_end` and the initial-condition choice
/// have defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_cells: usize,
    pub epsilon: f64,
    pub beta: f64,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default = "one")]
    pub gas_const: f64,
    #[serde(default = "one")]
    pub c_v: f64,
    #[serde(default = "one")]
    pub kappa_tilde: f64,
    #[serde(default = "default_dt_init")]
    pub dt_init: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max_iter")]
    pub picard_max_iter: usize,
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
    #[serde(default = "default_tol_phi")]
    pub tol_phi: f64,
    #[serde(default = "default_mean_theta_tol")]
    pub mean_theta_tol: f64,
    pub t_end: f64,
    /// Builtin initial-condition name; exactly one of `ic` and `ic_file`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ic: Option<String>,
    #[serde(default = "default_amplitude")]
    pub ic_amplitude: f64,
    /// Snapshot file to start from instead of a builtin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ic_file: Option<PathBuf>,
    /// Rescale the temperature so the total energy is exactly 1 (the
    /// reference normalization); mass is always normalized.
    #[serde(default)]
    pub normalize_energy: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub fail_fast: bool,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn params(&self) -> Params {
        Params {
            epsilon: self.epsilon,
            beta: self.beta,
            nu: self.nu,
            gas_const: self.gas_const,
            c_v: self.c_v,
            kappa_tilde: self.kappa_tilde,
        }
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            dt_init: self.dt_init,
            cfl_safety: self.cfl_safety,
            picard_tol: self.picard_tol,
            picard_max_iter: self.picard_max_iter,
            dt_min: self.dt_min,
        }
    }

    pub fn initial_condition(&self) -> Result<Option<InitialCondition>, ConfigError> {
        match (&self.ic, &self.ic_file) {
            (Some(name), None) => InitialCondition::from_name(name, self.ic_amplitude, self.seed)
                .map(Some)
                .map_err(|_| ConfigError::Constraint {
                    key: "ic",
                    message: format!("unknown builtin '{name}', expected one of {BUILTIN_NAMES:?}"),
                }),
            (None, Some(_)) => Ok(None),
            (Some(_), Some(_)) => Err(ConfigError::Constraint {
                key: "ic",
                message: "give exactly one of 'ic' and 'ic_file'".into(),
            }),
            (None, None) => Err(ConfigError::Constraint {
                key: "ic",
                message: "one of 'ic' or 'ic_file' is required".into(),
            }),
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let constraint = |key: &'static str, message: String| ConfigError::Constraint { key, message };
        if self.n_cells < 2 {
            return Err(constraint("n_cells", format!("{} < 2", self.n_cells)));
        }
        let positive = [
            ("epsilon", self.epsilon),
            ("beta", self.beta),
            ("nu", self.nu),
            ("gas_const", self.gas_const),
            ("c_v", self.c_v),
            ("kappa_tilde", self.kappa_tilde),
            ("dt_init", self.dt_init),
            ("picard_tol", self.picard_tol),
            ("dt_min", self.dt_min),
            ("t_end", self.t_end),
        ];
        for (key, value) in positive {
            if !(value > 0.0) {
                return Err(constraint(key, format!("{value} must be > 0")));
            }
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(constraint(
                "cfl_safety",
                format!("{} must be in (0, 1]", self.cfl_safety),
            ));
        }
        if self.picard_max_iter == 0 {
            return Err(constraint("picard_max_iter", "must be >= 1".into()));
        }
        if !(self.tol_phi >= 0.0) {
            return Err(constraint("tol_phi", format!("{} must be >= 0", self.tol_phi)));
        }
        if !(self.mean_theta_tol >= 0.0) {
            return Err(constraint(
                "mean_theta_tol",
                format!("{} must be >= 0", self.mean_theta_tol),
            ));
        }
        if let Some(k) = self.snapshot_every_steps {
            if k == 0 {
                return Err(constraint("snapshot_every_steps", "must be > 0".into()));
            }
        }
        if self.ic.as_deref() == Some("sine_perturbation")
            && !(self.ic_amplitude > 0.0 && self.ic_amplitude < 0.5)
        {
            return Err(constraint(
                "ic_amplitude",
                format!("{} must be in (0, 0.5)", self.ic_amplitude),
            ));
        }
        self.initial_condition()?;
        Ok(())
    }
}

/// Parse a config document; unknown keys and constraint violations are
/// errors, missing optional keys take their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Read, parse, and resolve a config file: a relative `ic_file` resolves
/// against the config's directory and must exist.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(ic_file) = &cfg.ic_file {
        let resolved = if ic_file.is_relative() {
            path.parent().unwrap_or(Path::new(".")).join(ic_file)
        } else {
            ic_file.clone()
        };
        if !resolved.is_file() {
            return Err(ConfigError::MissingIcFile(resolved));
        }
        cfg.ic_file = Some(resolved);
    }
    Ok(cfg)
}

/// Serialize a config so that `parse_config(serialize_config(c)) == c`.
pub fn serialize_config(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("RunConfig serializes to TOML")
}
