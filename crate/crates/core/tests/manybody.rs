mod common;

use std::f64::consts::PI;

use bec_lab::gp::minimize_gp;
use bec_lab::manybody::{
    build_hamiltonian, build_mode_basis, condensate_metrics, default_momentum_grid, fock_dimension,
    gp_coefficients, ground_state, interaction_tensor, momentum_distribution, pair_moment,
    FockBasis, GroundOptions, InteractionTensor, ModeBasis, SectorChoice, Truncation,
};
use bec_lab::model::{Grid, PairPotential, TrapSpec};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

fn harmonic_basis(q: usize) -> (TrapSpec, ModeBasis) {
    let trap = TrapSpec::isotropic_harmonic(3).unwrap();
    let grid = Grid::centered_cube(3, 7.0, 45).unwrap();
    let basis = build_mode_basis(&trap, &grid, Truncation::MaxQuanta(q)).unwrap();
    (trap, basis)
}

fn full_sector() -> GroundOptions {
    GroundOptions {
        sector: SectorChoice::Full,
        ..GroundOptions::default()
    }
}

fn assert_matches_first_quantized(basis: &ModeBasis, tensor: &InteractionTensor, n: usize) {
    let m = basis.len();
    assert!(fock_dimension(n, m) <= 500);
    let oracle =
        common::first_quantized_ground(&basis.energies, |i, j, k, l| tensor.get(i, j, k, l), n);
    for sector in [SectorChoice::Full, SectorChoice::Auto] {
        let opts = GroundOptions {
            sector,
            ..GroundOptions::default()
        };
        let g = ground_state(basis, tensor, n, &opts).unwrap();
        assert!(
            (g.energy - oracle.energy).abs() < 1e-9 * oracle.energy.abs().max(1.0),
            "N = {n}, M = {m}, {sector:?}: {} vs {}",
            g.energy,
            oracle.energy
        );
        let worst = (&g.gamma - &oracle.gamma).abs().max();
        assert!(
            worst < 1e-8,
            "N = {n}, M = {m}, {sector:?}: gamma off by {worst:.2e}"
        );
    }
}

#[test]
fn harmonic_instances_match_first_quantized_diagonalization() {
    let v = PairPotential::soft_sphere(5.0, 0.8).unwrap();
    for (n, q) in [(2, 3), (3, 2), (4, 1), (5, 1)] {
        let (_, basis) = harmonic_basis(q);
        let tensor = interaction_tensor(&basis, &v).unwrap();
        assert_matches_first_quantized(&basis, &tensor, n);
    }
}

#[test]
fn box_instance_matches_first_quantized_diagonalization() {
    let trap = TrapSpec::unit_box(3).unwrap();
    let grid = Grid::new(3, vec![[0.0, 1.0]; 3], vec![33; 3]).unwrap();
    let basis = build_mode_basis(&trap, &grid, Truncation::MaxQuanta(1)).unwrap();
    let v = PairPotential::soft_sphere(400.0, 0.3).unwrap();
    let tensor = interaction_tensor(&basis, &v).unwrap();
    assert_matches_first_quantized(&basis, &tensor, 3);
}

#[test]
fn lanczos_matches_dense_diagonalization_on_sweep_sectors() {
    let v = PairPotential::soft_sphere(2.0, 1.0).unwrap();
    let (_, basis) = harmonic_basis(3);
    let tensor = interaction_tensor(&basis, &v).unwrap();
    for n in [2, 3] {
        let g = ground_state(&basis, &tensor, n, &GroundOptions::default()).unwrap();
        assert!(g.dimension() <= 500);
        let one_body = DMatrix::from_diagonal(&DVector::from_vec(basis.energies.clone()));
        let h = build_hamiltonian(&g.fock, &one_body, &tensor)
            .unwrap()
            .to_dense();
        let eig = SymmetricEigen::new(h);
        let low = eig.eigenvalues.min();
        assert!(
            (g.energy - low).abs() < 1e-9 * low.abs(),
            "{} vs {low}",
            g.energy
        );
    }
}

#[test]
fn free_condensate_momentum_density_is_the_gaussian() {
    let (_, basis) = harmonic_basis(2);
    let free = InteractionTensor::zeros(basis.len());
    let g = ground_state(&basis, &free, 3, &full_sector()).unwrap();
    let k_grid = default_momentum_grid(&basis);
    let mom = momentum_distribution(&g, &basis, &k_grid, None).unwrap();
    // |phi_hat(k)|^2 = 8 pi^{3/2} e^{-k^2} for phi = pi^{-3/4} e^{-r^2/2}
    for (kk, rho) in mom.density.iter().enumerate().step_by(97) {
        let k = k_grid.point(kk);
        let k2: f64 = k.iter().map(|x| x * x).sum();
        let exact = 8.0 * PI.powf(1.5) * (-k2).exp();
        assert!((rho - exact).abs() < 1e-10, "k = {k:?}: {rho} vs {exact}");
    }
    assert!((mom.mass - 1.0).abs() < 1e-9);
    // all particles in one mode: <(b*)^2 b^2> = N (N - 1)
    let mut c = vec![0.0; basis.len()];
    c[0] = 1.0;
    assert!((pair_moment(&g, &c) - 6.0 / 9.0).abs() < 1e-12);
}

#[test]
fn interacting_condensate_diagnostics_are_consistent() {
    let (trap, basis) = harmonic_basis(3);
    let a = 0.02;
    let n = 4;
    let g_coupling = 4.0 * PI * n as f64 * a;
    let v = bec_lab::scattering::soft_sphere_with_length(a, 1.0).unwrap();
    let tensor = interaction_tensor(&basis, &v).unwrap();
    let ground = ground_state(&basis, &tensor, n, &GroundOptions::default()).unwrap();
    let gp = minimize_gp(&trap, g_coupling, &basis.grid, 500, 1e-8).unwrap();
    let rep = condensate_metrics(&ground, &gp, &basis).unwrap();
    let coeffs = gp_coefficients(&basis, &gp).unwrap();
    assert!(coeffs.weight > 0.99);
    assert!(rep.gp_overlap <= rep.condensate_fraction + 1e-12);
    assert!(rep.condensate_fraction <= 1.0 + 1e-12);
    assert!(rep.momentum_l1 <= rep.trace_distance + 1e-6);
    assert!(rep.pair_moment <= 1.0 + 1e-12);
    assert!(rep.pair_moment >= rep.gp_overlap * rep.gp_overlap - 2.0 / n as f64);
    assert!(rep.momentum_coverage_ok);
    assert!((ground.gamma.trace() - n as f64).abs() < 1e-8);
}

#[test]
fn parity_sector_is_a_strict_subspace() {
    let (_, basis) = harmonic_basis(3);
    let par = basis
        .parities
        .as_ref()
        .expect("harmonic modes carry parities");
    let even = FockBasis::with_sector(3, par, 0, 1_000_000).unwrap();
    assert_eq!(even.len(), 217);
    assert_eq!(fock_dimension(3, basis.len()), 1540);
}
