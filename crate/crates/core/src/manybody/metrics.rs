use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::modes::{ModeBasis, ModeFamily};
use super::tensor::{pair_index, InteractionTensor};
use super::ManyBodyGround;
use crate::error::{Error, Result};
use crate::gp::GpState;
use crate::model::{Grid, TrapSpec};

/// Smallest share of `|phi_GP|^2` the truncated basis must hold.
pub const MIN_TRUNCATION_WEIGHT: f64 = 0.99;
/// Share of `N` the momentum grid must capture before coverage is flagged.
pub const MIN_MOMENTUM_MASS: f64 = 0.999;

/// `phi_GP` expanded in the modes and renormalized inside their span.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpCoefficients {
    pub coefficients: Vec<f64>,
    /// `sum_i <phi_i|phi_GP>^2` before renormalization.
    pub weight: f64,
}

pub fn gp_coefficients(basis: &ModeBasis, gp: &GpState) -> Result<GpCoefficients> {
    if !basis.grid.is_compatible(&gp.grid) {
        return Err(Error::invalid(
            "the GP state and the modes live on different grids",
        ));
    }
    let raw = basis.project(&gp.phi);
    let weight: f64 = raw.iter().map(|c| c * c).sum();
    if weight < MIN_TRUNCATION_WEIGHT {
        return Err(Error::BasisInsufficient { weight });
    }
    let s = weight.sqrt();
    Ok(GpCoefficients {
        coefficients: raw.iter().map(|c| c / s).collect(),
        weight,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensateReport {
    /// Largest eigenvalue of `gamma / N`.
    pub condensate_fraction: f64,
    /// `<phi_GP|gamma|phi_GP> / N`.
    pub gp_overlap: f64,
    /// `Tr|gamma/N - P_GP|` inside the truncated space.
    pub trace_distance: f64,
    /// `\int |rho_hat/N - |phi_GP_hat|^2| d^3k / (2 pi)^3`.
    pub momentum_l1: f64,
    /// `<(b*)^2 b^2> / N^2` with `b` annihilating the GP mode.
    pub pair_moment: f64,
    /// `c` in `pair_moment >= gp_overlap^2 - c / N`.
    pub pair_moment_constant: f64,
    pub truncation_weight: f64,
    /// `\int rho_hat / N` captured by the momentum grid.
    pub momentum_mass: f64,
    pub momentum_coverage_ok: bool,
}

/// Condensate diagnostics of a ground state against `phi_GP`.
pub fn condensate_metrics(
    ground: &ManyBodyGround,
    gp: &GpState,
    basis: &ModeBasis,
) -> Result<CondensateReport> {
    let coeffs = gp_coefficients(basis, gp)?;
    let c = DVector::from_vec(coeffs.coefficients.clone());
    let n = ground.n_particles as f64;
    let gamma_n = &ground.gamma / n;
    let spectrum = SymmetricEigen::new(gamma_n.clone()).eigenvalues;
    let condensate_fraction = spectrum.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let gp_overlap = c.dot(&(&gamma_n * &c));
    let diff = &gamma_n - &c * c.transpose();
    let trace_distance = SymmetricEigen::new(diff)
        .eigenvalues
        .iter()
        .map(|x| x.abs())
        .sum();
    let k_grid = default_momentum_grid(basis);
    let momentum = momentum_distribution(ground, basis, &k_grid, Some(&coeffs.coefficients))?;
    let pair_moment = pair_moment(ground, &coeffs.coefficients);
    Ok(CondensateReport {
        condensate_fraction,
        gp_overlap,
        trace_distance,
        momentum_l1: momentum.l1.unwrap_or(0.0),
        pair_moment,
        pair_moment_constant: 1.0,
        truncation_weight: coeffs.weight,
        momentum_mass: momentum.mass,
        momentum_coverage_ok: momentum.coverage_ok,
    })
}

/// Momentum grid wide enough for the highest mode of the basis.
pub fn default_momentum_grid(basis: &ModeBasis) -> Grid {
    let dim = basis.dimension();
    match &basis.family {
        ModeFamily::Harmonic { omega } => {
            let q = basis.quanta.iter().flatten().cloned().max().unwrap_or(0) as f64;
            let w = omega.iter().cloned().fold(0.0, f64::max);
            let half = w.sqrt() * ((2.0 * q + 1.0).sqrt() + 7.0);
            let points = 2 * (half / (0.3 * w.sqrt())).ceil() as usize + 1;
            Grid::centered_cube(dim, half, points).expect("valid momentum grid")
        }
        ModeFamily::Box { side } => {
            let q = basis.quanta.iter().flatten().cloned().max().unwrap_or(1) as f64;
            let half = PI * (q + 30.0) / side;
            let points = 2 * (2.0 * (q + 30.0)).ceil() as usize + 1;
            Grid::centered_cube(dim, half, points).expect("valid momentum grid")
        }
        ModeFamily::Numeric => {
            let ext = basis.grid.extent();
            let sp = basis.grid.spacing();
            let axes: Vec<[f64; 2]> = sp.iter().map(|h| [-PI / h, PI / h]).collect();
            let pts: Vec<usize> = ext
                .iter()
                .zip(sp)
                .map(|([lo, hi], h)| 2 * ((hi - lo) / h).ceil() as usize + 1)
                .collect();
            Grid::new(dim, axes, pts).expect("valid momentum grid")
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentumDistribution {
    pub k_grid: Grid,
    /// `rho_hat(k) / N`.
    pub density: Vec<f64>,
    /// `|phi_GP_hat(k)|^2`, when a reference orbital was given.
    pub gp_density: Option<Vec<f64>>,
    /// `\int rho_hat / N d^dk / (2 pi)^d` over the grid.
    pub mass: f64,
    pub coverage_ok: bool,
    pub l1: Option<f64>,
}

/// `rho_hat(k) = sum_ij gamma[i,j] phi_i_hat(k) conj(phi_j_hat(k))` on a momentum grid.
pub fn momentum_distribution(
    ground: &ManyBodyGround,
    basis: &ModeBasis,
    k_grid: &Grid,
    gp_coefficients: Option<&[f64]>,
) -> Result<MomentumDistribution> {
    let transforms = basis.fourier(k_grid)?;
    let m = basis.len();
    let n = ground.n_particles as f64;
    let dim = k_grid.dimension() as i32;
    let measure = 1.0 / (2.0 * PI).powi(dim);
    let weights = k_grid.weights();
    let gamma = &ground.gamma / n;
    let mut density = Vec::with_capacity(k_grid.len());
    let mut gp_density = gp_coefficients.map(|_| Vec::with_capacity(k_grid.len()));
    let mut re = vec![0.0; m];
    let mut im = vec![0.0; m];
    for kk in 0..k_grid.len() {
        for i in 0..m {
            re[i] = transforms[i][kk].re;
            im[i] = transforms[i][kk].im;
        }
        let mut rho = 0.0;
        for i in 0..m {
            let mut gr = 0.0;
            let mut gi = 0.0;
            for j in 0..m {
                gr += gamma[(i, j)] * re[j];
                gi += gamma[(i, j)] * im[j];
            }
            rho += re[i] * gr + im[i] * gi;
        }
        density.push(rho);
        if let (Some(c), Some(out)) = (gp_coefficients, gp_density.as_mut()) {
            let a: f64 = c.iter().zip(&re).map(|(x, y)| x * y).sum();
            let b: f64 = c.iter().zip(&im).map(|(x, y)| x * y).sum();
            out.push(a * a + b * b);
        }
    }
    let mass = measure
        * density
            .iter()
            .zip(&weights)
            .map(|(d, w)| d * w)
            .sum::<f64>();
    let l1 = gp_density.as_ref().map(|gpd| {
        measure
            * density
                .iter()
                .zip(gpd)
                .zip(&weights)
                .map(|((d, g), w)| (d - g).abs() * w)
                .sum::<f64>()
    });
    Ok(MomentumDistribution {
        k_grid: k_grid.clone(),
        density,
        gp_density,
        mass,
        coverage_ok: mass >= MIN_MOMENTUM_MASS,
        l1,
    })
}

/// `||b b psi||^2 / N^2` for `b = sum_i c_i a_i`.
pub fn pair_moment(ground: &ManyBodyGround, coefficients: &[f64]) -> f64 {
    let mut current: HashMap<Vec<u8>, f64> = ground
        .fock
        .states()
        .iter()
        .zip(&ground.coefficients)
        .filter(|(_, &c)| c != 0.0)
        .map(|(s, &c)| (s.clone(), c))
        .collect();
    for _ in 0..2 {
        let mut next: HashMap<Vec<u8>, f64> = HashMap::new();
        let mut keys: Vec<&Vec<u8>> = current.keys().collect();
        // fixed accumulation order keeps the result reproducible
        keys.sort();
        for occ in keys {
            let amp = current[occ];
            for (i, &ci) in coefficients.iter().enumerate() {
                if ci == 0.0 || occ[i] == 0 {
                    continue;
                }
                let mut o = occ.clone();
                o[i] -= 1;
                *next.entry(o).or_insert(0.0) += ci * (occ[i] as f64).sqrt() * amp;
            }
        }
        current = next;
    }
    let mut keys: Vec<&Vec<u8>> = current.keys().collect();
    keys.sort();
    let n = ground.n_particles as f64;
    keys.iter().map(|k| current[*k].powi(2)).sum::<f64>() / (n * n)
}

/// Rayleigh quotient per particle of the product state `phi^{(x)N}` with
/// `phi = sum c_i phi_i`, in the same truncated Hamiltonian.
pub fn hartree_energy_per_particle(
    basis: &ModeBasis,
    tensor: &InteractionTensor,
    n: usize,
    c: &[f64],
) -> f64 {
    let m = basis.len();
    let one: f64 = (0..m).map(|i| basis.energies[i] * c[i] * c[i]).sum();
    let p = m * (m + 1) / 2;
    let mut x = vec![0.0; p];
    for i in 0..m {
        for k in 0..m {
            x[pair_index(i, k)] += c[i] * c[k];
        }
    }
    let xv = DVector::from_vec(x);
    let quartic = xv.dot(&(tensor.pair_matrix() * &xv));
    one + 0.5 * (n as f64 - 1.0) * quartic
}

/// Per-particle kinetic, trap and pair energies of a ground state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManyBodyComponents {
    pub kinetic: f64,
    pub potential: f64,
    pub interaction: f64,
}

pub fn energy_components(
    ground: &ManyBodyGround,
    basis: &ModeBasis,
    trap: &TrapSpec,
) -> Result<ManyBodyComponents> {
    let (kin, pot): (DMatrix<f64>, DMatrix<f64>) = basis.one_body_matrices(trap)?;
    let n = ground.n_particles as f64;
    let tr = |a: &DMatrix<f64>| (a * &ground.gamma).trace();
    let kinetic = tr(&kin) / n;
    let potential = tr(&pot) / n;
    Ok(ManyBodyComponents {
        kinetic,
        potential,
        interaction: ground.energy / n - kinetic - potential,
    })
}
