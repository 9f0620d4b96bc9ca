use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::manybody::{
    GroundOptions, LocalizationOptions, SweepOptions, TensorOptions, Truncation,
};
use crate::model::ProblemDefinition;
use crate::poincare::RegionShape;

/// A complete run description. Strict: unknown fields anywhere are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub problem: ProblemDefinition,
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub reproducible: bool,
}

fn default_output_dir() -> String {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Scattering(ScatteringParams),
    Gp(GpParams),
    Manybody(ManybodyParams),
    Sweep(SweepOptions),
    Poincare(PoincareParams),
}

impl Experiment {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Experiment::Scattering(_) => ExperimentKind::Scattering,
            Experiment::Gp(_) => ExperimentKind::Gp,
            Experiment::Manybody(_) => ExperimentKind::Manybody,
            Experiment::Sweep(_) => ExperimentKind::Sweep,
            Experiment::Poincare(_) => ExperimentKind::Poincare,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Scattering,
    Gp,
    Manybody,
    Sweep,
    Poincare,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Scattering => "scattering",
            ExperimentKind::Gp => "gp",
            ExperimentKind::Manybody => "manybody",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Poincare => "poincare",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringParams {
    /// Matching radius; defaults to `max(4 R, 1)` for range `R`.
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default = "default_scattering_tol")]
    pub tol: f64,
}

fn default_scattering_tol() -> f64 {
    1e-10
}

/// Either `g` directly, or `particles` and `scattering_length`, from which `g`
/// follows by the three- or two-dimensional coupling rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpParams {
    #[serde(default)]
    pub g: Option<f64>,
    #[serde(default)]
    pub particles: Option<usize>,
    #[serde(default)]
    pub scattering_length: Option<f64>,
    #[serde(default = "default_gp_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_gp_tol")]
    pub tol: f64,
}

fn default_gp_max_iter() -> usize {
    500
}

fn default_gp_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManybodyParams {
    pub particles: usize,
    /// Coupling `g = 4 pi N a`; fixes the scattering length of the pair potential.
    pub g: f64,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub tensor: TensorOptions,
    #[serde(default)]
    pub ground: GroundOptions,
    /// Two-particle localization profile, when requested.
    #[serde(default)]
    pub localization: Option<LocalizationOptions>,
    #[serde(default = "default_gp_tol")]
    pub gp_tol: f64,
    #[serde(default = "default_gp_max_iter")]
    pub gp_max_iter: usize,
    #[serde(default = "default_scattering_tol")]
    pub scattering_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareParams {
    pub region: RegionShape,
    pub dimension: usize,
    /// Cells across the bounding cube of the region.
    pub cells: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub weight: WeightSource,
}

fn default_trials() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSource {
    /// `h = 1/|K|`.
    #[default]
    Uniform,
    /// `w = phi^2` from a dump written by a `gp` run (path of its JSON sidecar).
    GpDump { path: String },
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig =
            serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        ExperimentConfig::from_json(&text)
    }

    fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: &str| Error::Config {
            path: path.into(),
            message: message.into(),
        };
        match &self.experiment {
            Experiment::Scattering(_) => {
                self.problem.pair_potential()?;
            }
            Experiment::Gp(p) => {
                self.problem.trap()?;
                self.problem.grid()?;
                match (p.g, p.particles, p.scattering_length) {
                    (Some(_), None, None) | (None, Some(_), Some(_)) => {}
                    _ => {
                        return Err(bad(
                            "experiment.gp",
                            "give either `g` or both `particles` and `scattering_length`",
                        ))
                    }
                }
            }
            Experiment::Manybody(p) => {
                self.problem.trap()?;
                self.problem.grid()?;
                self.problem.pair_potential()?;
                if p.particles == 0 {
                    return Err(bad("experiment.manybody.particles", "must be positive"));
                }
                if p.localization.is_some() && p.particles != 2 {
                    return Err(bad(
                        "experiment.manybody.localization",
                        "defined for two particles only",
                    ));
                }
            }
            Experiment::Sweep(_) => {
                self.problem.trap()?;
                self.problem.grid()?;
                self.problem.pair_potential()?;
            }
            Experiment::Poincare(p) => {
                if p.trials == 0 {
                    return Err(bad("experiment.poincare.trials", "must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Compact JSON with sorted keys.
    pub fn canonical_json(&self) -> Result<String> {
        // `Value` keeps object keys in a sorted map
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string(&value)?)
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(
            self.canonical_json()?.as_bytes(),
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GP: &str = r#"{
        "problem": {
            "trap": {"dimension": 3, "kind": {"harmonic": {"stiffness": [1, 1, 1]}}},
            "grid": {"dimension": 3, "extent": [[-7,7],[-7,7],[-7,7]], "points": [33,33,33]}
        },
        "experiment": {"gp": {"g": 0}}
    }"#;

    #[test]
    fn strict_parse_reports_field_path() {
        let cfg = ExperimentConfig::from_json(GP).unwrap();
        assert_eq!(cfg.experiment.kind(), ExperimentKind::Gp);
        let bad = GP.replace(r#""g": 0"#, r#""g": 0, "gg": 1"#);
        match ExperimentConfig::from_json(&bad) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "experiment.gp.gg"),
            other => panic!("{other:?}"),
        }
        let both = GP.replace(r#""g": 0"#, r#""g": 0, "particles": 3"#);
        assert!(matches!(
            ExperimentConfig::from_json(&both),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn every_field_changes_the_hash() {
        let base = ExperimentConfig::from_json(GP).unwrap();
        let mut seen = vec![base.hash().unwrap()];
        let mut c = base.clone();
        c.seed = 1;
        seen.push(c.hash().unwrap());
        let mut c = base.clone();
        c.reproducible = true;
        seen.push(c.hash().unwrap());
        let mut c = base.clone();
        c.output_dir = "elsewhere".into();
        seen.push(c.hash().unwrap());
        let c = ExperimentConfig::from_json(&GP.replace(r#""g": 0"#, r#""g": 1e-300"#)).unwrap();
        seen.push(c.hash().unwrap());
        let mut uniq = seen.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), seen.len());
        assert_eq!(
            base.hash().unwrap(),
            ExperimentConfig::from_json(GP).unwrap().hash().unwrap()
        );
    }
}
