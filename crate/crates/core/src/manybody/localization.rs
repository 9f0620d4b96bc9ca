use nalgebra::{DMatrix, SymmetricEigen};
use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::modes::ModeBasis;
use super::ManyBodyGround;
use crate::error::{Error, Result};
use crate::gp::GpState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizationOptions {
    /// Ball radii `delta`.
    pub radii: Vec<f64>,
    /// Number of second-particle positions drawn from the one-particle density.
    pub samples: usize,
    pub seed: u64,
    /// `phi_GP` below this value is not divided by.
    pub guard: f64,
}

impl Default for LocalizationOptions {
    fn default() -> Self {
        LocalizationOptions {
            radii: vec![0.25, 0.5, 1.0, 1.5, 2.0],
            samples: 64,
            seed: 7,
            guard: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationProfile {
    /// Sorted radii.
    pub radii: Vec<f64>,
    /// Mean share of `\int phi_GP^2 |grad f_X|^2` inside `|r - r_2| <= delta`;
    /// `None` for a product state, where `f_X` carries no correlation.
    pub fractions: Option<Vec<f64>>,
    pub samples: usize,
    pub seed: u64,
    /// Grid nodes left out because `phi_GP` fell below the guard.
    pub excluded_points: usize,
    /// The exclusion radius `N^{-7/17}` used to label the set `Omega_X`.
    pub exclusion_radius: f64,
}

/// Where the weighted gradient energy of `f_X(r) = Psi(r, r_2) / phi_GP(r)` sits
/// relative to the second particle, for `N = 2`.
pub fn localization_profile(
    ground: &ManyBodyGround,
    gp: &GpState,
    basis: &ModeBasis,
    opts: &LocalizationOptions,
) -> Result<LocalizationProfile> {
    if ground.n_particles != 2 {
        return Err(Error::invalid(
            "the localization profile is defined for two particles",
        ));
    }
    if !basis.grid.is_compatible(&gp.grid) {
        return Err(Error::invalid(
            "the GP state and the modes live on different grids",
        ));
    }
    if opts.samples == 0 || opts.radii.is_empty() || opts.radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::invalid(
            "need at least one sample and positive radii",
        ));
    }
    let mut radii = opts.radii.clone();
    radii.sort_by(f64::total_cmp);
    let exclusion_radius = 2f64.powf(-7.0 / 17.0);
    let m = basis.len();
    let grid = &basis.grid;

    let mut profile = LocalizationProfile {
        radii: radii.clone(),
        fractions: None,
        samples: opts.samples,
        seed: opts.seed,
        excluded_points: 0,
        exclusion_radius,
    };
    let top = SymmetricEigen::new(&ground.gamma / 2.0).eigenvalues.max();
    if top >= 1.0 - 1e-12 {
        return Ok(profile);
    }

    // Psi(r, r') = sum_ij A_ij phi_i(r) phi_j(r')
    let mut amp = DMatrix::<f64>::zeros(m, m);
    for (occ, &c) in ground.fock.states().iter().zip(&ground.coefficients) {
        let occupied: Vec<usize> = (0..m).filter(|&i| occ[i] > 0).collect();
        match occupied.as_slice() {
            [i] => amp[(*i, *i)] = c,
            [i, j] => {
                amp[(*i, *j)] = c / 2f64.sqrt();
                amp[(*j, *i)] = c / 2f64.sqrt();
            }
            _ => unreachable!("two-particle states occupy one or two modes"),
        }
    }

    let n_nodes = grid.len();
    let weights = grid.weights();
    let gamma = &ground.gamma;
    let mut density = vec![0.0; n_nodes];
    for (node, d) in density.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..m {
            let pi = basis.values[i][node];
            if pi == 0.0 {
                continue;
            }
            for j in 0..m {
                acc += gamma[(i, j)] * pi * basis.values[j][node];
            }
        }
        *d = (acc * weights[node]).max(0.0);
    }
    let dist = WeightedIndex::new(&density)
        .map_err(|e| Error::invalid(format!("one-particle density: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let dim = grid.dimension();
    let strides = grid.strides();
    let pts = grid.points().to_vec();
    let h = grid.spacing().to_vec();
    let valid: Vec<bool> = gp.phi.iter().map(|&p| p > opts.guard).collect();
    let mut idx = vec![0; dim];
    let mut usable = vec![false; n_nodes];
    for (node, u) in usable.iter_mut().enumerate() {
        grid.unravel(node, &mut idx);
        let inside = idx.iter().zip(&pts).all(|(&i, &n)| i >= 1 && i + 1 < n);
        *u = inside
            && valid[node]
            && (0..dim).all(|a| valid[node - strides[a]] && valid[node + strides[a]]);
    }
    profile.excluded_points = (0..n_nodes)
        .filter(|&node| {
            grid.unravel(node, &mut idx);
            idx.iter().zip(&pts).all(|(&i, &n)| i >= 1 && i + 1 < n) && !usable[node]
        })
        .count();

    let mut sums = vec![0.0; radii.len()];
    let mut used = 0usize;
    let mut f = vec![0.0; n_nodes];
    for _ in 0..opts.samples {
        let anchor = dist.sample(&mut rng);
        let r2 = grid.point(anchor);
        let b: Vec<f64> = (0..m)
            .map(|i| (0..m).map(|j| amp[(i, j)] * basis.values[j][anchor]).sum())
            .collect();
        for node in 0..n_nodes {
            f[node] = if valid[node] {
                let psi: f64 = (0..m).map(|i| b[i] * basis.values[i][node]).sum();
                psi / gp.phi[node]
            } else {
                0.0
            };
        }
        let mut bins = vec![0.0; radii.len() + 1];
        for node in 0..n_nodes {
            if !usable[node] {
                continue;
            }
            let mut g2 = 0.0;
            for a in 0..dim {
                let d = (f[node + strides[a]] - f[node - strides[a]]) / (2.0 * h[a]);
                g2 += d * d;
            }
            let e = gp.phi[node] * gp.phi[node] * g2 * weights[node];
            grid.unravel(node, &mut idx);
            let r: f64 = (0..dim)
                .map(|a| (grid.coordinate(a, idx[a]) - r2[a]).powi(2))
                .sum::<f64>()
                .sqrt();
            let bin = radii.iter().position(|&d| r <= d).unwrap_or(radii.len());
            bins[bin] += e;
        }
        let mut cumulative = Vec::with_capacity(bins.len());
        let mut acc = 0.0;
        for b in &bins {
            acc += b;
            cumulative.push(acc);
        }
        let total = acc;
        if total <= 0.0 {
            continue;
        }
        used += 1;
        for (s, c) in sums.iter_mut().zip(&cumulative) {
            *s += c / total;
        }
    }
    if used == 0 {
        return Ok(profile);
    }
    // rounding is monotone, so cumulative ratios and their means stay ordered
    profile.fractions = Some(sums.iter().map(|s| s / used as f64).collect());
    profile.samples = used;
    Ok(profile)
}
