mod common;

use std::f64::consts::PI;

use bec_lab::gp::{
    minimize_gp, predict_components, read_phi_dump, virial_defect, write_phi_dump, MONOTONE_SLACK,
};
use bec_lab::model::{Grid, TrapSpec};

fn harmonic(points: usize, g: f64, tol: f64) -> bec_lab::gp::GpState {
    let trap = TrapSpec::isotropic_harmonic(3).unwrap();
    let grid = Grid::centered_cube(3, 8.0, points).unwrap();
    minimize_gp(&trap, g, &grid, 500, tol).unwrap()
}

#[test]
fn radial_oracle_reproduces_the_oscillator() {
    let e = common::radial_gp_energy(0.0, 10.0, 2000);
    assert!((e - 3.0).abs() < 1e-7, "{e}");
}

#[test]
fn free_harmonic_ground_energy() {
    let st = harmonic(49, 0.0, 1e-8);
    assert!((st.energy_total - 3.0).abs() < 2e-3, "{}", st.energy_total);
    assert!((st.mu - 3.0).abs() < 2e-3);
    assert_eq!(st.energy_interaction, 0.0);
}

#[test]
fn unit_box_ground_energy() {
    let trap = TrapSpec::unit_box(3).unwrap();
    let grid = Grid::new(3, vec![[0.0, 1.0]; 3], vec![33; 3]).unwrap();
    let st = minimize_gp(&trap, 0.0, &grid, 500, 1e-8).unwrap();
    assert!(
        (st.energy_total - 3.0 * PI * PI).abs() < 0.05,
        "{}",
        st.energy_total
    );
}

#[test]
fn interacting_ground_matches_radial_oracle_and_converges_at_high_order() {
    let oracle = common::radial_gp_energy(10.0, 10.0, 4000);
    let coarse = harmonic(25, 10.0, 1e-6);
    let fine = harmonic(49, 10.0, 1e-8);
    let err_c = (coarse.energy_total - oracle).abs();
    let err_f = (fine.energy_total - oracle).abs();
    assert!(err_f / oracle < 1e-3, "{} vs {oracle}", fine.energy_total);
    // halving the spacing must cut the error by well over the second-order factor
    assert!(err_c / err_f > 8.0, "errors {err_c:.3e} -> {err_f:.3e}");
}

#[test]
fn interacting_ground_invariants() {
    let st = harmonic(49, 10.0, 1e-8);
    assert!((st.norm - 1.0).abs() < 1e-10);
    assert!(st.residual <= 1e-8);
    assert!(virial_defect(&st).abs() <= 5e-3 * st.energy_total);
    assert!(st.phi.iter().all(|&x| x >= 0.0));
    assert!(st
        .energy_history
        .windows(2)
        .all(|w| w[1] <= w[0] + MONOTONE_SLACK));
    let sum = st.energy_kinetic + st.energy_potential + st.energy_interaction;
    assert!((sum - st.energy_total).abs() < 1e-12);
    assert!((st.energy_interaction - st.g * st.quartic).abs() < 1e-12);
    // mu = E + g \int phi^4
    assert!((st.mu - st.energy_total - st.energy_interaction).abs() < 1e-6);
    // repulsion lowers the peak density and raises the energy
    let free = harmonic(49, 0.0, 1e-8);
    assert!(st.energy_total > free.energy_total);
    assert!(st.quartic < free.quartic);
}

#[test]
fn component_prediction_bookkeeping() {
    let st = harmonic(33, 10.0, 1e-7);
    let s = common::soft_sphere_s(10.0, 1.0);
    let p = predict_components(&st, s).unwrap();
    assert!((p.total() - st.energy_total).abs() < 1e-12);
    assert!((p.interaction_qm / (st.g * st.quartic) - (1.0 - s)).abs() < 1e-12);
    assert_eq!(p.potential_qm, st.energy_potential);
    assert!(predict_components(&st, 0.0).is_err());
    assert!(predict_components(&st, 1.5).is_err());
}

#[test]
fn dump_survives_a_roundtrip() {
    let st = harmonic(25, 1.0, 1e-7);
    let dir = tempfile::tempdir().unwrap();
    write_phi_dump(
        &st,
        &dir.path().join("phi.bin"),
        &dir.path().join("phi.json"),
    )
    .unwrap();
    let (grid, phi) = read_phi_dump(&dir.path().join("phi.json")).unwrap();
    assert_eq!(grid, st.grid);
    assert_eq!(phi, st.phi);
}

#[test]
fn two_dimensional_coupling_trap() {
    let trap = TrapSpec::isotropic_harmonic(2).unwrap();
    let grid = Grid::centered_cube(2, 9.0, 145).unwrap();
    let free = minimize_gp(&trap, 0.0, &grid, 500, 1e-9).unwrap();
    assert!((free.energy_total - 2.0).abs() < 1e-4);
    let g = bec_lab::gp::coupling_2d(100, 1e-3).unwrap();
    let st = minimize_gp(&trap, g, &grid, 500, 1e-8).unwrap();
    // 2K - 2P + 2I = 0 in two dimensions
    assert!(virial_defect(&st).abs() < 5e-3 * st.energy_total);
    let p = predict_components(&st, 1.0).unwrap();
    assert_eq!(p.interaction_qm, 0.0);
}
