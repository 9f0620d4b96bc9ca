//! Few-boson exact diagonalization in a truncated trap-mode basis and the
//! condensate diagnostics derived from the ground state.
//!
//! The Hamiltonian is
//! `H = sum_i eps_i a*_i a_i + 1/2 sum V[i,j,k,l] a*_i a*_j a_l a_k`
//! over real orthonormal modes, with `V` the pair matrix elements of the
//! scaled interaction. The one-particle density matrix is
//! `gamma[i,j] = <a*_j a_i>`, trace `N`.

mod fock;
mod hamiltonian;
mod localization;
mod metrics;
mod modes;
mod sweep;
mod tensor;

pub use fock::{fock_dimension, FockBasis};
pub use hamiltonian::{build_hamiltonian, lanczos_ground, Eigenpair, LanczosOptions, SparseMatrix};
pub use localization::{localization_profile, LocalizationOptions, LocalizationProfile};
pub use metrics::{
    condensate_metrics, default_momentum_grid, energy_components, gp_coefficients,
    hartree_energy_per_particle, momentum_distribution, pair_moment, CondensateReport,
    GpCoefficients, ManyBodyComponents, MomentumDistribution, MIN_MOMENTUM_MASS,
    MIN_TRUNCATION_WEIGHT,
};
pub use modes::{build_mode_basis, ModeBasis, ModeFamily, Truncation};
pub use sweep::{
    gp_limit_sweep, manybody_potential, SweepOptions, SweepRow, HARD_CORE_MIN_S, SWEEP_HEADER,
};
pub use tensor::{
    interaction_tensor, interaction_tensor_with, pair_index, InteractionTensor, TensorOptions,
    TensorRoute,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on the unrestricted Fock dimension.
pub const DEFAULT_CAP: usize = 200_000;

/// Which symmetry block to diagonalize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorChoice {
    /// The block even under every axis reflection when the modes carry
    /// parities, else the full space.
    #[default]
    Auto,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundOptions {
    pub cap: usize,
    pub sector: SectorChoice,
    pub tol: f64,
    pub krylov: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for GroundOptions {
    fn default() -> Self {
        let l = LanczosOptions::default();
        GroundOptions {
            cap: DEFAULT_CAP,
            sector: SectorChoice::Auto,
            tol: l.tol,
            krylov: l.krylov,
            max_restarts: l.max_restarts,
            seed: l.seed,
        }
    }
}

/// Ground state of `N` bosons in a truncated basis.
#[derive(Debug, Clone)]
pub struct ManyBodyGround {
    pub n_particles: usize,
    pub energy: f64,
    pub coefficients: Vec<f64>,
    pub gamma: DMatrix<f64>,
    pub residual: f64,
    pub matvecs: usize,
    pub fock: FockBasis,
    /// Dimension of the unrestricted space.
    pub full_dimension: usize,
}

impl ManyBodyGround {
    pub fn dimension(&self) -> usize {
        self.fock.len()
    }
}

/// Lowest eigenpair of `H` in the Fock space of `n` bosons.
pub fn ground_state(
    basis: &ModeBasis,
    tensor: &InteractionTensor,
    n: usize,
    opts: &GroundOptions,
) -> Result<ManyBodyGround> {
    if n == 0 {
        return Err(Error::invalid("need at least one particle"));
    }
    if tensor.n_modes() != basis.len() {
        return Err(Error::invalid(
            "tensor and basis disagree on the mode count",
        ));
    }
    let full_dimension = fock_dimension(n, basis.len());
    let fock = match (opts.sector, &basis.parities) {
        (SectorChoice::Auto, Some(par)) => FockBasis::with_sector(n, par, 0, opts.cap)?,
        _ => FockBasis::new(n, basis.len(), opts.cap)?,
    };
    let one_body = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(basis.energies.clone()));
    let h = build_hamiltonian(&fock, &one_body, tensor)?;
    let lanczos = LanczosOptions {
        krylov: opts.krylov,
        tol: opts.tol,
        max_restarts: opts.max_restarts,
        seed: opts.seed,
    };
    let pair = lanczos_ground(&h, &lanczos)?;
    let gamma = one_body_density(&fock, &pair.vector);
    Ok(ManyBodyGround {
        n_particles: n,
        energy: pair.value,
        coefficients: pair.vector,
        gamma,
        residual: pair.residual,
        matvecs: pair.matvecs,
        fock,
        full_dimension,
    })
}

/// `gamma[i,j] = <psi| a*_j a_i |psi>` for real coefficients.
pub fn one_body_density(fock: &FockBasis, coefficients: &[f64]) -> DMatrix<f64> {
    let m = fock.n_modes();
    let mut gamma = DMatrix::zeros(m, m);
    let mut work = vec![0u8; m];
    for (idx, occ) in fock.states().iter().enumerate() {
        let c = coefficients[idx];
        if c == 0.0 {
            continue;
        }
        for i in 0..m {
            if occ[i] == 0 {
                continue;
            }
            gamma[(i, i)] += c * c * occ[i] as f64;
            for j in 0..m {
                if j == i {
                    continue;
                }
                work.copy_from_slice(occ);
                work[i] -= 1;
                work[j] += 1;
                if let Some(other) = fock.index_of(&work) {
                    let amp = (occ[i] as f64 * work[j] as f64).sqrt();
                    gamma[(i, j)] += coefficients[other] * c * amp;
                }
            }
        }
    }
    0.5 * (&gamma + gamma.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Grid, PairPotential, TrapSpec};

    fn harmonic_basis(q: usize) -> ModeBasis {
        let trap = TrapSpec::isotropic_harmonic(3).unwrap();
        let grid = Grid::centered_cube(3, 6.5, 41).unwrap();
        build_mode_basis(&trap, &grid, Truncation::MaxQuanta(q)).unwrap()
    }

    #[test]
    fn free_bosons_condense_in_lowest_mode() {
        let basis = harmonic_basis(2);
        let t = InteractionTensor::zeros(basis.len());
        let g = ground_state(&basis, &t, 2, &GroundOptions::default()).unwrap();
        assert!((g.energy - 6.0).abs() < 1e-10);
        assert!((g.gamma[(0, 0)] - 2.0).abs() < 1e-10);
        let off: f64 = g.gamma.iter().map(|x| x.abs()).sum::<f64>() - g.gamma[(0, 0)].abs();
        assert!(off < 1e-10);
    }

    #[test]
    fn single_particle_has_no_pair_energy() {
        let basis = harmonic_basis(1);
        let v = PairPotential::soft_sphere(5.0, 0.5).unwrap();
        let t = interaction_tensor(&basis, &v).unwrap();
        let g = ground_state(&basis, &t, 1, &GroundOptions::default()).unwrap();
        assert!((g.energy - 3.0).abs() < 1e-10);
        assert!((g.gamma.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_trace_and_spectrum() {
        let basis = harmonic_basis(2);
        let v = PairPotential::soft_sphere(3.0, 0.6).unwrap();
        let t = interaction_tensor(&basis, &v).unwrap();
        let g = ground_state(&basis, &t, 3, &GroundOptions::default()).unwrap();
        assert!((g.gamma.trace() - 3.0).abs() < 1e-8);
        let eig = nalgebra::SymmetricEigen::new(g.gamma.clone() / 3.0).eigenvalues;
        assert!(eig.iter().all(|&x| x > -1e-10 && x < 1.0 + 1e-10));
        assert!((crate::numerics::norm(&g.coefficients) - 1.0).abs() < 1e-10);
        assert!(g.residual <= 1e-9);
    }
}
