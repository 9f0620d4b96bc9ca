//! Physical problem definition shared by every solver: traps, pair
//! potentials, grids and the unit convention.

mod grid;
mod potential;
mod trap;

pub use grid::Grid;
pub use potential::PairPotential;
pub use trap::{TrapKind, TrapSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Units with `hbar^2 / 2m = 1`: energies are inverse squared lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UnitConvention;

impl UnitConvention {
    pub const HBAR2_OVER_2M: f64 = 1.0;
}

/// The JSON problem document: `{"trap": .., "pair_potential": .., "grid": ..}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDefinition {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trap: Option<TrapSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_potential: Option<PairPotential>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
}

impl ProblemDefinition {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn trap(&self) -> Result<&TrapSpec> {
        self.trap.as_ref().ok_or_else(|| missing("problem.trap"))
    }

    pub fn pair_potential(&self) -> Result<&PairPotential> {
        self.pair_potential
            .as_ref()
            .ok_or_else(|| missing("problem.pair_potential"))
    }

    pub fn grid(&self) -> Result<&Grid> {
        self.grid.as_ref().ok_or_else(|| missing("problem.grid"))
    }
}

fn missing(path: &str) -> Error {
    Error::Config {
        path: path.to_string(),
        message: "required for this experiment".into(),
    }
}

/// Evaluates the trap at a point.
pub fn evaluate_trap(trap: &TrapSpec, point: &[f64]) -> Result<f64> {
    trap.evaluate(point)
}

/// Rescales an interaction of unit scattering length to scattering length `a`.
pub fn scale_pair_potential(base: &PairPotential, a: f64) -> Result<PairPotential> {
    base.scale(a)
}
