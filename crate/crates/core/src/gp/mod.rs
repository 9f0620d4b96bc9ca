//! Gross-Pitaevskii functional `E[phi] = \int |grad phi|^2 + V phi^2 + g phi^4`
//! under `\int phi^2 = 1`: minimization, energy decomposition, and the
//! predicted large-N split of the energy into kinetic, trap and interaction
//! parts.

mod laplacian;
mod minimize;

pub use laplacian::{DirichletLaplacian, StencilOrder};
pub(crate) use minimize::CgWorkspace;
pub use minimize::{
    minimize_gp, minimize_gp_with, GpOptions, GpState, BOUNDARY_LIMIT, MONOTONE_SLACK,
};

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Grid;

/// Energy components of a GP state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpComponents {
    pub kinetic: f64,
    pub potential: f64,
    pub interaction: f64,
}

impl GpComponents {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential + self.interaction
    }
}

pub fn gp_energy_components(state: &GpState) -> GpComponents {
    GpComponents {
        kinetic: state.energy_kinetic,
        potential: state.energy_potential,
        interaction: state.energy_interaction,
    }
}

/// Scaling identity of a harmonic trap, `2K - 2P + d I`; zero at the minimizer.
pub fn virial_defect(state: &GpState) -> f64 {
    2.0 * state.energy_kinetic - 2.0 * state.energy_potential
        + state.dimension as f64 * state.energy_interaction
}

/// Predicted per-particle limits of the many-body energy components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyComponentPrediction {
    pub kinetic_qm: f64,
    pub potential_qm: f64,
    pub interaction_qm: f64,
    pub s: f64,
}

impl EnergyComponentPrediction {
    pub fn total(&self) -> f64 {
        self.kinetic_qm + self.potential_qm + self.interaction_qm
    }
}

/// Splits `g \int phi^4` into a kinetic share `s` and an interaction share `1 - s`.
pub fn predict_components(state: &GpState, s: f64) -> Result<EnergyComponentPrediction> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::invalid(format!(
            "kinetic fraction s = {s} outside (0, 1]"
        )));
    }
    let quartic_energy = state.g * state.quartic;
    Ok(EnergyComponentPrediction {
        kinetic_qm: state.energy_kinetic + s * quartic_energy,
        potential_qm: state.energy_potential,
        interaction_qm: (1.0 - s) * quartic_energy,
        s,
    })
}

/// Three-dimensional coupling `g = 4 pi N a`.
pub fn coupling_3d(n: usize, a: f64) -> Result<f64> {
    if n == 0 || !(a >= 0.0) {
        return Err(Error::invalid("need N >= 1 and a >= 0"));
    }
    Ok(4.0 * PI * n as f64 * a)
}

/// Two-dimensional coupling `g = 4 pi N / |ln(a^2 N)|`, valid for `a^2 N < 1`.
pub fn coupling_2d(n: usize, a: f64) -> Result<f64> {
    if n == 0 || !(a > 0.0) {
        return Err(Error::invalid("need N >= 1 and a > 0"));
    }
    let x = a * a * n as f64;
    if x >= 1.0 {
        return Err(Error::OutOfRegime { value: x });
    }
    Ok(4.0 * PI * n as f64 / x.ln().abs())
}

/// Sidecar describing a binary dump of `phi`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiDumpHeader {
    pub grid: Grid,
    pub g: f64,
    pub data_file: String,
    pub layout: String,
}

/// Writes `phi` as little-endian f64 in row-major grid order plus a JSON sidecar.
pub fn write_phi_dump(state: &GpState, bin_path: &Path, sidecar_path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 * state.phi.len());
    for v in &state.phi {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(bin_path, bytes)?;
    let header = PhiDumpHeader {
        grid: state.grid.clone(),
        g: state.g,
        data_file: bin_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        layout: "f64-le row-major".into(),
    };
    fs::write(sidecar_path, serde_json::to_vec_pretty(&header)?)?;
    Ok(())
}

/// Reads a dump written by [`write_phi_dump`]; the data file is resolved next to the sidecar.
pub fn read_phi_dump(sidecar_path: &Path) -> Result<(Grid, Vec<f64>)> {
    let header: PhiDumpHeader = serde_json::from_slice(&fs::read(sidecar_path)?)?;
    let dir = sidecar_path.parent().unwrap_or(Path::new("."));
    let bytes = fs::read(dir.join(&header.data_file))?;
    if bytes.len() != 8 * header.grid.len() {
        return Err(Error::Integrity(format!(
            "phi dump has {} bytes, expected {}",
            bytes.len(),
            8 * header.grid.len()
        )));
    }
    let phi = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((header.grid, phi))
}
