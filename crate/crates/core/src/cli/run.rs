use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::config::{
    Experiment, ExperimentConfig, GpParams, ManybodyParams, PoincareParams, ScatteringParams,
    WeightSource,
};
use super::report::{
    GpResult, ManybodyResult, PoincareResult, Results, ScatteringResult, SweepResult,
    WeightedSummary,
};
use crate::error::{Error, Result};
use crate::gp::{
    coupling_2d, coupling_3d, minimize_gp_with, predict_components, read_phi_dump, virial_defect,
    write_phi_dump, GpOptions,
};
use crate::manybody::{
    build_mode_basis, condensate_metrics, energy_components, gp_coefficients, gp_limit_sweep,
    ground_state, hartree_energy_per_particle, interaction_tensor_with, localization_profile,
    manybody_potential, GroundOptions, SweepOptions, SWEEP_HEADER,
};
use crate::model::{PairPotential, ProblemDefinition};
use crate::poincare::{estimate_constant, estimate_weighted, Region};
use crate::scattering::solve_zero_energy;

pub const PHI_DATA: &str = "phi.bin";
pub const PHI_SIDECAR: &str = "phi.json";
pub const SWEEP_CSV: &str = "sweep.csv";

/// Matching radius used when none is configured.
fn default_matching_radius(v: &PairPotential) -> f64 {
    (4.0 * v.range()).max(1.0)
}

/// External files a run reads, resolved against `base`, with their digests.
pub fn external_inputs(cfg: &ExperimentConfig, base: &Path) -> Result<Vec<(PathBuf, String)>> {
    let mut out = Vec::new();
    if let Experiment::Poincare(PoincareParams {
        weight: WeightSource::GpDump { path },
        ..
    }) = &cfg.experiment
    {
        let sidecar = base.join(path);
        let header = fs::read(&sidecar).map_err(|e| Error::Config {
            path: "experiment.poincare.weight.gp_dump.path".into(),
            message: format!("{}: {e}", sidecar.display()),
        })?;
        let dir = sidecar.parent().unwrap_or(Path::new("."));
        let data_name = serde_json::from_slice::<crate::gp::PhiDumpHeader>(&header)
            .map_err(|e| Error::Integrity(format!("{}: {e}", sidecar.display())))?
            .data_file;
        let data = fs::read(dir.join(&data_name))?;
        let mut h = Sha256::new();
        h.update(&header);
        h.update(&data);
        out.push((sidecar, hex::encode(h.finalize())));
    }
    Ok(out)
}

/// Runs the experiment, writing any side files into `dir`.
pub fn execute(cfg: &ExperimentConfig, base: &Path, dir: &Path) -> Result<Results> {
    let problem = &cfg.problem;
    match &cfg.experiment {
        Experiment::Scattering(p) => scattering(problem, p).map(Results::Scattering),
        Experiment::Gp(p) => gp(problem, p, dir).map(Results::Gp),
        Experiment::Manybody(p) => manybody(problem, p, cfg.seed).map(Results::Manybody),
        Experiment::Sweep(p) => sweep(problem, p, cfg.seed, dir).map(Results::Sweep),
        Experiment::Poincare(p) => poincare(p, cfg.seed, base).map(Results::Poincare),
    }
}

fn scattering(problem: &ProblemDefinition, p: &ScatteringParams) -> Result<ScatteringResult> {
    let v = problem.pair_potential()?;
    let r_max = p.r_max.unwrap_or_else(|| default_matching_radius(v));
    let sol = solve_zero_energy(v, r_max, p.tol)?;
    Ok(ScatteringResult {
        potential: v.clone(),
        range: v.range(),
        a: sol.a,
        s: sol.s,
        r_max,
        tol: p.tol,
        refinement_change: sol.refinement_change,
    })
}

fn gp(problem: &ProblemDefinition, p: &GpParams, dir: &Path) -> Result<GpResult> {
    let trap = problem.trap()?;
    let grid = problem.grid()?;
    let dim = trap.dimension();
    let g = match (p.g, p.particles, p.scattering_length) {
        (Some(g), _, _) => g,
        (None, Some(n), Some(a)) if dim == 3 => coupling_3d(n, a)?,
        (None, Some(n), Some(a)) => coupling_2d(n, a)?,
        _ => unreachable!("validated on load"),
    };
    let opts = GpOptions {
        max_iter: p.max_iter,
        tol: p.tol,
        ..GpOptions::default()
    };
    let st = minimize_gp_with(trap, g, grid, &opts)?;
    // in two dimensions all of the interaction energy is kinetic in the limit
    let s = if dim == 2 {
        Some(1.0)
    } else {
        match problem.pair_potential.as_ref() {
            Some(v) => solve_zero_energy(v, default_matching_radius(v), 1e-10)?.s,
            None => None,
        }
    };
    let prediction = s.map(|s| predict_components(&st, s)).transpose()?;
    write_phi_dump(&st, &dir.join(PHI_DATA), &dir.join(PHI_SIDECAR))?;
    Ok(GpResult {
        dimension: dim,
        harmonic: trap.is_harmonic(),
        g,
        energy_total: st.energy_total,
        energy_kinetic: st.energy_kinetic,
        energy_potential: st.energy_potential,
        energy_interaction: st.energy_interaction,
        quartic: st.quartic,
        mu: st.mu,
        residual: st.residual,
        tol: p.tol,
        norm: st.norm,
        iterations: st.iterations,
        energy_history: st.energy_history.clone(),
        min_interior: st.min_interior,
        sign_defect: st.sign_defect,
        boundary_ratio: st.boundary_ratio,
        virial_defect: trap.is_harmonic().then(|| virial_defect(&st)),
        s,
        prediction,
        phi_dump: PHI_SIDECAR.into(),
    })
}

fn manybody(problem: &ProblemDefinition, p: &ManybodyParams, seed: u64) -> Result<ManybodyResult> {
    let trap = problem.trap()?;
    let grid = problem.grid()?;
    let base = problem.pair_potential()?;
    let n = p.particles;
    let a = p.g / (4.0 * PI * n as f64);
    let (v, s, substitution) = if p.g == 0.0 {
        let (_, s, _) = manybody_potential(base, 1.0, p.scattering_tol)?;
        (PairPotential::zero(), s, None)
    } else {
        manybody_potential(base, a, p.scattering_tol)?
    };
    let gp = minimize_gp_with(
        trap,
        p.g,
        grid,
        &GpOptions {
            max_iter: p.gp_max_iter,
            tol: p.gp_tol,
            ..GpOptions::default()
        },
    )?;
    let basis = build_mode_basis(trap, grid, p.truncation)?;
    let coeffs = gp_coefficients(&basis, &gp)?;
    let tensor = interaction_tensor_with(&basis, &v, &p.tensor)?;
    let ground_opts = GroundOptions { seed, ..p.ground };
    let ground = ground_state(&basis, &tensor, n, &ground_opts)?;
    let condensate = condensate_metrics(&ground, &gp, &basis)?;
    let components = energy_components(&ground, &basis, trap)?;
    let prediction = predict_components(&gp, s)?;
    let localization = match &p.localization {
        Some(opts) => {
            let mut opts = opts.clone();
            opts.seed = seed;
            Some(localization_profile(&ground, &gp, &basis, &opts)?)
        }
        None => None,
    };
    Ok(ManybodyResult {
        particles: n,
        a,
        g: p.g,
        s,
        substitution,
        modes: basis.len(),
        fock_dimension: ground.dimension(),
        full_dimension: ground.full_dimension,
        energy: ground.energy,
        energy_per_particle: ground.energy / n as f64,
        e_gp: gp.energy_total,
        hartree_per_particle: hartree_energy_per_particle(&basis, &tensor, n, &coeffs.coefficients),
        gamma_trace: ground.gamma.trace(),
        residual: ground.residual,
        tol: ground_opts.tol,
        matvecs: ground.matvecs,
        condensate,
        components,
        prediction,
        localization,
    })
}

fn sweep(
    problem: &ProblemDefinition,
    p: &SweepOptions,
    seed: u64,
    dir: &Path,
) -> Result<SweepResult> {
    let mut opts = p.clone();
    opts.ground.seed = seed;
    let (gp, rows) = gp_limit_sweep(
        problem.trap()?,
        problem.pair_potential()?,
        problem.grid()?,
        &opts,
    )?;
    let mut w = csv::Writer::from_path(dir.join(SWEEP_CSV))?;
    w.write_record(SWEEP_HEADER)?;
    for row in &rows {
        w.write_record(row.csv_record())?;
    }
    w.flush()?;
    Ok(SweepResult {
        g: p.g,
        e_gp: gp.energy_total,
        gp_residual: gp.residual,
        tol: opts.ground.tol,
        csv: SWEEP_CSV.into(),
        rows,
    })
}

fn poincare(p: &PoincareParams, seed: u64, base: &Path) -> Result<PoincareResult> {
    let region = Region::new(p.region, p.dimension, p.cells)?;
    let est = estimate_constant(&region, &region.uniform_weight(), p.trials, seed)?;
    let weighted = match &p.weight {
        WeightSource::Uniform => None,
        WeightSource::GpDump { path } => {
            let (grid, phi) = read_phi_dump(&base.join(path))?;
            if grid.dimension() != p.dimension {
                return Err(Error::Config {
                    path: "experiment.poincare.weight".into(),
                    message: "the dump and the region differ in dimension".into(),
                });
            }
            let w: Vec<f64> = (0..region.len())
                .map(|c| {
                    grid.interpolate(&phi, region.center(c))
                        .map_or(0.0, |v| v * v)
                })
                .collect();
            let we = estimate_weighted(&region, &w, p.trials, seed)?;
            Some(WeightedSummary {
                source: path.clone(),
                c_star_plain: we.c_star_plain,
                c_prime: we.c_prime,
                c_star_weighted: we.c_star_weighted,
                weight_ratio: we.weight_ratio,
                worst_trial: we.worst_trial,
                holds_all: we.holds_all,
            })
        }
    };
    Ok(PoincareResult {
        region: p.region,
        dimension: p.dimension,
        cells: p.cells,
        cell_count: region.len(),
        volume: region.volume(),
        trials: p.trials,
        c_star: est.c_star,
        c_tilde: est.c_tilde,
        constructed: est.constructed,
        worst_trial: est.worst_trial,
        holds_all: est.holds_all,
        holds_constructed: est.holds_constructed,
        weighted,
    })
}
