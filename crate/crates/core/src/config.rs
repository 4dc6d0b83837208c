//! Run configuration for the command-line front end.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flows::ElementaryFlow;
use crate::indexing::{IncrementRegion, RectSet};
use crate::laws::LevyTriplet;
use crate::simulate::ProcessSpec;
use crate::verify::{SuiteOptions, SUITES};

/// The process part of a run: everything in a [`ProcessSpec`] but the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    pub triplet: LevyTriplet,
    pub dim: usize,
    pub level: u32,
}

/// Overrides for the suite and check tolerances.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub radius_constant: Option<f64>,
    pub alpha: Option<f64>,
    pub kernel_tol: Option<f64>,
    pub exact_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub process: Option<ProcessConfig>,
    #[serde(default)]
    pub regions: Vec<IncrementRegion>,
    #[serde(default)]
    pub flow: Option<ElementaryFlow>,
    #[serde(default)]
    pub semilattice: Vec<RectSet>,
    #[serde(default)]
    pub suites: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Monte Carlo paths for simulate/project/decompose and the suites.
    #[serde(default)]
    pub paths: Option<u64>,
    /// Number of steps of the projection mesh.
    #[serde(default)]
    pub mesh: Option<usize>,
    /// `(v1, v2)` pairs for the Chapman–Kolmogorov check.
    #[serde(default)]
    pub volumes: Vec<[f64; 2]>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn config_error(field: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{field}`: {reason}"))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.process {
            p.triplet.validate().map_err(|e| match e {
                Error::InvalidParameter { field, reason } => {
                    config_error(&format!("process.triplet.{field}"), reason)
                }
                other => other,
            })?;
            ProcessSpec::new(p.triplet.clone(), p.dim, p.level, 0).map_err(|e| config_error("process", e))?;
        }
        for (i, r) in self.regions.iter().enumerate() {
            if let Some(p) = &self.process {
                if r.dim().is_some_and(|d| d != p.dim) {
                    return Err(config_error(&format!("regions[{i}]"), "dimension differs from process.dim"));
                }
            }
        }
        for name in &self.suites {
            if !SUITES.contains(&name.as_str()) {
                return Err(config_error("suites", format!("unknown suite `{name}`")));
            }
        }
        if self.threads == Some(0) {
            return Err(config_error("threads", "must be at least 1"));
        }
        if self.paths == Some(0) {
            return Err(config_error("paths", "must be at least 1"));
        }
        if self.mesh == Some(0) {
            return Err(config_error("mesh", "must be at least 1"));
        }
        for (i, [a, b]) in self.volumes.iter().enumerate() {
            if !(*a >= 0.0 && *b >= 0.0 && a.is_finite() && b.is_finite()) {
                return Err(config_error(&format!("volumes[{i}]"), "volumes must be finite and >= 0"));
            }
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0)) || self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(config_error("epsilons", "must be positive and strictly decreasing"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.radius_constant", t.radius_constant),
            ("tolerances.alpha", t.alpha),
            ("tolerances.kernel_tol", t.kernel_tol),
            ("tolerances.exact_tol", t.exact_tol),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(config_error(name, format!("must be finite and > 0, got {v}")));
                }
            }
        }
        if t.alpha.is_some_and(|a| a >= 1.0) {
            return Err(config_error("tolerances.alpha", "must be below 1"));
        }
        Ok(())
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| config_error("seed", "required for sampling commands"))
    }

    pub fn require_process(&self) -> Result<&ProcessConfig> {
        self.process.as_ref().ok_or_else(|| config_error("process", "required for this command"))
    }

    /// The seeded process spec of a sampling command.
    pub fn process_spec(&self) -> Result<ProcessSpec> {
        let p = self.require_process()?;
        ProcessSpec::new(p.triplet.clone(), p.dim, p.level, self.require_seed()?)
    }

    pub fn suite_options(&self) -> Result<SuiteOptions> {
        let d = SuiteOptions::default();
        let t = &self.tolerances;
        Ok(SuiteOptions {
            seed: self.require_seed()?,
            paths: self.paths.unwrap_or(d.paths),
            radius_constant: t.radius_constant.unwrap_or(d.radius_constant),
            alpha: t.alpha.unwrap_or(d.alpha),
            kernel_tol: t.kernel_tol.unwrap_or(d.kernel_tol),
            exact_tol: t.exact_tol.unwrap_or(d.exact_tol),
        })
    }

    /// SHA-256 of the canonical JSON form, leaving out the settings that
    /// cannot change any output (output directory and thread count).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.threads = None;
        let text = serde_json::to_string(&c).expect("config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_sigma_names_the_field() {
        let err = RunConfig::from_json(
            r#"{"process": {"triplet": {"sigma": -1, "gamma": 0, "nu": {"type": "none"}}, "dim": 2, "level": 3}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("sigma"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_json(r#"{"seed": 1, "sed": 2}"#).unwrap_err();
        assert!(err.to_string().contains("sed"), "{err}");
    }

    #[test]
    fn seed_is_required_for_sampling() {
        let c = RunConfig::from_json(
            r#"{"process": {"triplet": {"sigma": 1, "gamma": 0, "nu": {"type": "none"}}, "dim": 2, "level": 3}}"#,
        )
        .unwrap();
        assert!(c.process_spec().is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = RunConfig::from_json(r#"{"seed": 1, "out": "a", "threads": 2}"#).unwrap();
        let b = RunConfig::from_json(r#"{"seed": 1, "out": "b"}"#).unwrap();
        let c = RunConfig::from_json(r#"{"seed": 2}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
