use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::metrics::{
    condensate_metrics, energy_components, gp_coefficients, hartree_energy_per_particle,
};
use super::modes::{build_mode_basis, Truncation};
use super::tensor::{interaction_tensor_with, TensorOptions};
use super::{ground_state, GroundOptions};
use crate::error::{Error, Result};
use crate::gp::{minimize_gp_with, predict_components, GpOptions, GpState};
use crate::model::{Grid, PairPotential, TrapSpec};
use crate::scattering::{solve_zero_energy, tall_soft_sphere};

pub const SWEEP_HEADER: [&str; 15] = [
    "N",
    "a",
    "g",
    "E_qm_per_N",
    "E_gp",
    "gp_overlap",
    "trace_distance",
    "momentum_l1",
    "kin",
    "pot",
    "int",
    "kin_pred",
    "pot_pred",
    "int_pred",
    "s",
];

/// Smallest kinetic fraction of the soft sphere that stands in for a hard core.
pub const HARD_CORE_MIN_S: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    pub n_list: Vec<usize>,
    pub g: f64,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default = "default_gp_tol")]
    pub gp_tol: f64,
    #[serde(default = "default_gp_max_iter")]
    pub gp_max_iter: usize,
    #[serde(default = "default_scattering_tol")]
    pub scattering_tol: f64,
    #[serde(default)]
    pub tensor: TensorOptions,
    #[serde(default)]
    pub ground: GroundOptions,
}

fn default_gp_tol() -> f64 {
    1e-8
}

fn default_gp_max_iter() -> usize {
    500
}

fn default_scattering_tol() -> f64 {
    1e-10
}

/// One row of the large-`N` trend table; every energy is per particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub a: f64,
    pub g: f64,
    #[serde(rename = "E_qm_per_N")]
    pub e_qm_per_n: f64,
    #[serde(rename = "E_gp")]
    pub e_gp: f64,
    pub gp_overlap: f64,
    pub trace_distance: f64,
    pub momentum_l1: f64,
    pub kin: f64,
    pub pot: f64,
    pub int: f64,
    pub kin_pred: f64,
    pub pot_pred: f64,
    pub int_pred: f64,
    pub s: f64,
    pub condensate_fraction: f64,
    pub pair_moment: f64,
    pub pair_moment_constant: f64,
    pub hartree_per_n: f64,
    pub fock_dimension: usize,
    pub residual: f64,
    pub truncation_weight: f64,
    pub momentum_mass: f64,
    /// Set when a hard core was replaced by a soft sphere of equal scattering length.
    pub substitution: Option<String>,
}

impl SweepRow {
    /// The fifteen CSV columns in header order.
    pub fn csv_record(&self) -> Vec<String> {
        let f = |x: f64| format!("{x:.17e}");
        vec![
            self.n.to_string(),
            f(self.a),
            f(self.g),
            f(self.e_qm_per_n),
            f(self.e_gp),
            f(self.gp_overlap),
            f(self.trace_distance),
            f(self.momentum_l1),
            f(self.kin),
            f(self.pot),
            f(self.int),
            f(self.kin_pred),
            f(self.pot_pred),
            f(self.int_pred),
            f(self.s),
        ]
    }
}

/// Matching radius used when measuring a pair potential.
fn matching_radius(v: &PairPotential) -> f64 {
    (4.0 * v.range()).max(1.0)
}

/// The interaction used in a mode expansion at scattering length `a`, its
/// kinetic fraction, and a note when a hard core had to be replaced.
pub fn manybody_potential(
    base: &PairPotential,
    a: f64,
    tol: f64,
) -> Result<(PairPotential, f64, Option<String>)> {
    if let PairPotential::HardSphere { .. } = base {
        let v = tall_soft_sphere(a, HARD_CORE_MIN_S)?;
        let s = solve_zero_energy(&v, matching_radius(&v), tol * a)?
            .s
            .unwrap_or(1.0);
        let note =
            format!("hard core replaced by {v:?} with scattering length {a:.6e} and s = {s:.6}");
        return Ok((v, s, Some(note)));
    }
    let sol = solve_zero_energy(base, matching_radius(base), tol)?;
    let s = sol
        .s
        .ok_or_else(|| Error::invalid("the base potential has zero scattering length"))?;
    // rescale so the result has scattering length exactly `a`
    let v = base.scale(a / sol.a)?;
    Ok((v, s, None))
}

/// Exact ground states for every `N` at fixed `g = 4 pi N a`, compared with
/// the GP minimizer on `grid`.
pub fn gp_limit_sweep(
    trap: &TrapSpec,
    base: &PairPotential,
    grid: &Grid,
    opts: &SweepOptions,
) -> Result<(GpState, Vec<SweepRow>)> {
    if trap.dimension() != 3 {
        return Err(Error::invalid(
            "the many-body sweep runs in three dimensions",
        ));
    }
    if opts.n_list.is_empty() || opts.n_list.contains(&0) {
        return Err(Error::invalid("N list must be nonempty and positive"));
    }
    let gp_opts = GpOptions {
        max_iter: opts.gp_max_iter,
        tol: opts.gp_tol,
        ..GpOptions::default()
    };
    let gp = minimize_gp_with(trap, opts.g, grid, &gp_opts)?;
    let basis = build_mode_basis(trap, grid, opts.truncation)?;
    let coeffs = gp_coefficients(&basis, &gp)?;
    let mut rows = Vec::with_capacity(opts.n_list.len());
    for &n in &opts.n_list {
        let a = opts.g / (4.0 * PI * n as f64);
        let (v, s, substitution) = if opts.g == 0.0 {
            let (_, s, _) = manybody_potential(base, 1.0, opts.scattering_tol)?;
            (PairPotential::zero(), s, None)
        } else {
            manybody_potential(base, a, opts.scattering_tol)?
        };
        let tensor = interaction_tensor_with(&basis, &v, &opts.tensor)?;
        let ground = ground_state(&basis, &tensor, n, &opts.ground)?;
        let report = condensate_metrics(&ground, &gp, &basis)?;
        let comps = energy_components(&ground, &basis, trap)?;
        let pred = predict_components(&gp, s)?;
        rows.push(SweepRow {
            n,
            a,
            g: opts.g,
            e_qm_per_n: ground.energy / n as f64,
            e_gp: gp.energy_total,
            gp_overlap: report.gp_overlap,
            trace_distance: report.trace_distance,
            momentum_l1: report.momentum_l1,
            kin: comps.kinetic,
            pot: comps.potential,
            int: comps.interaction,
            kin_pred: pred.kinetic_qm,
            pot_pred: pred.potential_qm,
            int_pred: pred.interaction_qm,
            s,
            condensate_fraction: report.condensate_fraction,
            pair_moment: report.pair_moment,
            pair_moment_constant: report.pair_moment_constant,
            hartree_per_n: hartree_energy_per_particle(&basis, &tensor, n, &coeffs.coefficients),
            fock_dimension: ground.dimension(),
            residual: ground.residual,
            truncation_weight: report.truncation_weight,
            momentum_mass: report.momentum_mass,
            substitution,
        });
    }
    Ok((gp, rows))
}
