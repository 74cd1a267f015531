//! Run configuration: one JSON document, optionally patched by `--set` flags.

use std::path::Path;

use dirac_chimera::grid::GridSpec;
use dirac_chimera::junction::{JunctionConfig, Spin};
use dirac_chimera::observables::DEFAULT_DELTA;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// `n` evenly spaced values from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Range {
    fn validate(&self, name: &str) -> Result<(), CliError> {
        if self.n == 0 {
            return Err(CliError::Validation(format!("{name}: empty grid (n = 0)")));
        }
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(CliError::Validation(format!("{name}: bounds must be finite")));
        }
        if self.n == 1 && self.min != self.max {
            return Err(CliError::Validation(format!("{name}: a single point needs min == max")));
        }
        if self.n > 1 && self.max <= self.min {
            return Err(CliError::Validation(format!("{name}: max must exceed min")));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        dirac_chimera::observables::linspace(self.min, self.max, self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Bin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareBlock {
    pub spin: Spin,
    pub eps: f64,
    pub n_orbits: usize,
    pub n_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub junction: JunctionConfig,
    /// Single energy (smatrix, nearfield, xsec).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Energy grid (smatrix, delay, xsec, polarization, sweep).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_grid: Option<Range>,
    /// Eccentricity grid (polarization, sweep); replaces `junction.xi`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_grid: Option<Range>,
    #[serde(default = "both_spins")]
    pub spins: Vec<Spin>,
    #[serde(default = "default_delta")]
    pub delta_eps: f64,
    /// Also evaluate the delay with half the final step.
    #[serde(default = "yes")]
    pub richardson: bool,
    #[serde(default)]
    pub theta_prime: f64,
    /// Average transport cross sections over 16 incident directions.
    #[serde(default)]
    pub average_directions: bool,
    /// Number of scattering angles for differential cross sections (0 = none).
    #[serde(default)]
    pub scattering_angles: usize,
    /// Add `sigma_diff^(1/8)` next to the differential cross section.
    #[serde(default)]
    pub eighth_root: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Store real and imaginary spinor components in near-field output.
    #[serde(default)]
    pub components: bool,
    /// Add `log10` density channels to near-field output.
    #[serde(default)]
    pub log_density: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poincare: Option<PoincareBlock>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

fn both_spins() -> Vec<Spin> {
    Spin::BOTH.to_vec()
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn yes() -> bool {
    true
}

/// Sets `path` (dot separated) in `doc` to `raw`, parsed as JSON when possible.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("override `{assignment}` is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Validation(format!("override `{path}`: `{key}` is not inside an object")))?;
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split always yields one key")
}

impl RunConfig {
    /// Reads `path`, applies overrides in order and deserializes.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut doc: Value = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        serde_json::from_value(doc).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    /// Checks shared fields; subcommands check the blocks they need.
    pub fn validate(&self) -> Result<(), CliError> {
        self.junction.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        if let Some(g) = &self.energy_grid {
            g.validate("energy_grid")?;
        }
        if let Some(g) = &self.xi_grid {
            g.validate("xi_grid")?;
            for xi in g.values() {
                self.junction.with_xi(xi).validate().map_err(|e| CliError::Validation(format!("xi_grid: {e}")))?;
            }
        }
        if let Some(eps) = self.eps {
            if !eps.is_finite() {
                return Err(CliError::Validation("eps must be finite".into()));
            }
        }
        if self.spins.is_empty() {
            return Err(CliError::Validation("spins must not be empty".into()));
        }
        let mut spins = self.spins.clone();
        spins.sort();
        spins.dedup();
        if spins.len() != self.spins.len() {
            return Err(CliError::Validation("spins lists a spin twice".into()));
        }
        if !(self.delta_eps > 0.0) || !self.delta_eps.is_finite() {
            return Err(CliError::Validation("delta_eps must be positive".into()));
        }
        if !self.theta_prime.is_finite() {
            return Err(CliError::Validation("theta_prime must be finite".into()));
        }
        if let Some(g) = &self.grid {
            g.validate().map_err(|e| CliError::Validation(format!("grid: {e}")))?;
        }
        Ok(())
    }

    pub fn require_energy_grid(&self) -> Result<Vec<f64>, CliError> {
        self.energy_grid
            .map(|g| g.values())
            .ok_or_else(|| CliError::Validation("energy_grid is required for this command".into()))
    }

    pub fn require_xi_grid(&self) -> Result<Vec<f64>, CliError> {
        self.xi_grid
            .map(|g| g.values())
            .ok_or_else(|| CliError::Validation("xi_grid is required for this command".into()))
    }

    pub fn require_eps(&self) -> Result<f64, CliError> {
        self.eps.ok_or_else(|| CliError::Validation("eps is required for this command".into()))
    }

    /// `eps` if given, else the energy grid.
    pub fn energies(&self) -> Result<Vec<f64>, CliError> {
        match (self.eps, &self.energy_grid) {
            (Some(_), Some(_)) => Err(CliError::Validation("give either eps or energy_grid, not both".into())),
            (Some(e), None) => Ok(vec![e]),
            (None, Some(g)) => Ok(g.values()),
            (None, None) => Err(CliError::Validation("eps or energy_grid is required for this command".into())),
        }
    }

    pub fn directions(&self) -> Vec<f64> {
        if self.average_directions {
            dirac_chimera::observables::averaging_directions()
        } else {
            vec![self.theta_prime]
        }
    }
}
