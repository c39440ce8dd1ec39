//! Run configuration shared by the single-run CLI commands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coverage::HistogramSpec;
use crate::dynamics::{Integrator, DEFAULT_DT};
use crate::ensemble::RandomizationConfig;
use crate::error::{Error, Result};
use crate::lyapunov::LleConfig;
use crate::params::{DriveSpec, SystemParams};

/// Ensemble size of the large randomization runs selected by `--full`.
pub const FULL_ENSEMBLE: usize = 128 * 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemParams,
    pub drive: DriveSpec,
    pub dt: f64,
    pub lle: LleConfig,
    pub histogram: HistogramSpec,
    pub randomization: RandomizationConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemParams::default(),
            drive: DriveSpec::default(),
            dt: DEFAULT_DT,
            lle: LleConfig::default(),
            histogram: HistogramSpec::default(),
            randomization: RandomizationConfig::default(),
            seed: 20240601,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn integrator(&self) -> Result<Integrator> {
        Integrator::new(self.dt)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.drive.validate()?;
        self.integrator()?;
        self.lle.validate()?;
        self.randomization.validate()?;
        self.histogram.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Direction;

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig {
            drive: DriveSpec::along(2.2, 100.0, Direction::new([1.0, 2.0, 2.0]).unwrap()),
            seed: 9_000_000_000,
            ..RunConfig::default()
        };
        c.randomization.stop_at_floor = true;
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        let again: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::from_toml("seed = 3\n[drive]\namplitude_hbar_d_over_eps = 2.2\nfreq_hz = 60.0\ndirection = [0.0, 0.0, 1.0]\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.system, SystemParams::default());
        assert_eq!(c.drive.amplitude_hbar_d_over_eps, 2.2);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("sed = 3\n").is_err());
    }
}
