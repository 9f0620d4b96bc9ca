use std::f64::consts::PI;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::modes::{ModeBasis, ModeFamily};
use crate::error::{Error, Result};
use crate::model::PairPotential;
use crate::numerics::{dot, factorial, gauss_hermite, laguerre};

/// How the matrix elements are integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorRoute {
    /// Spectral for Hermite modes, grid convolution otherwise.
    #[default]
    Auto,
    /// Momentum-space quadrature against the closed-form pair densities of
    /// Hermite modes; exact up to the Gauss-Hermite rule.
    Spectral,
    /// Real-space convolution `v * (phi_j phi_l)` on the mode grid by FFT.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TensorOptions {
    pub route: TensorRoute,
    /// Gauss-Hermite nodes per momentum axis (even; only the positive half is used).
    pub quadrature_nodes: usize,
}

impl Default for TensorOptions {
    fn default() -> Self {
        TensorOptions {
            route: TensorRoute::Auto,
            quadrature_nodes: 64,
        }
    }
}

/// `V[i,j,k,l] = \int\int phi_i(r) phi_j(r') v(r - r') phi_k(r) phi_l(r')`,
/// stored as a symmetric matrix over unordered pairs `{i,k}` x `{j,l}`, which
/// carries every bosonic symmetry of real modes by construction.
#[derive(Debug, Clone)]
pub struct InteractionTensor {
    n_modes: usize,
    pairs: DMatrix<f64>,
    pub route: TensorRoute,
}

pub fn pair_index(i: usize, k: usize) -> usize {
    let (lo, hi) = if i <= k { (i, k) } else { (k, i) };
    hi * (hi + 1) / 2 + lo
}

impl InteractionTensor {
    pub fn zeros(n_modes: usize) -> Self {
        let p = n_modes * (n_modes + 1) / 2;
        InteractionTensor {
            n_modes,
            pairs: DMatrix::zeros(p, p),
            route: TensorRoute::Auto,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.pairs[(pair_index(i, k), pair_index(j, l))]
    }

    pub fn pair_matrix(&self) -> &DMatrix<f64> {
        &self.pairs
    }

    /// Builds a tensor from a pair matrix, symmetrizing it.
    pub fn from_pair_matrix(
        n_modes: usize,
        pairs: DMatrix<f64>,
        route: TensorRoute,
    ) -> Result<Self> {
        let p = n_modes * (n_modes + 1) / 2;
        if pairs.nrows() != p || pairs.ncols() != p {
            return Err(Error::invalid("pair matrix has the wrong size"));
        }
        let pairs = 0.5 * (&pairs + pairs.transpose());
        Ok(InteractionTensor {
            n_modes,
            pairs,
            route,
        })
    }

    /// Largest violation of `V[i,j,k,l] = V[j,i,l,k] = V[k,l,i,j]`.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.n_modes;
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let v = self.get(i, j, k, l);
                        worst = worst
                            .max((v - self.get(j, i, l, k)).abs())
                            .max((v - self.get(k, l, i, j)).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Interaction tensor with default options.
pub fn interaction_tensor(basis: &ModeBasis, v: &PairPotential) -> Result<InteractionTensor> {
    interaction_tensor_with(basis, v, &TensorOptions::default())
}

pub fn interaction_tensor_with(
    basis: &ModeBasis,
    v: &PairPotential,
    opts: &TensorOptions,
) -> Result<InteractionTensor> {
    if basis.dimension() != 3 {
        return Err(Error::invalid(
            "pair matrix elements are implemented for three dimensions",
        ));
    }
    if let PairPotential::HardSphere { .. } = v {
        return Err(Error::invalid(
            "a hard core cannot enter a finite mode expansion; substitute a tall soft sphere",
        ));
    }
    if v.is_zero() {
        return Ok(InteractionTensor::zeros(basis.len()));
    }
    let harmonic = matches!(basis.family, ModeFamily::Harmonic { .. });
    match (opts.route, harmonic) {
        (TensorRoute::Spectral, false) => {
            Err(Error::invalid("the spectral route needs Hermite modes"))
        }
        (TensorRoute::Spectral, true) | (TensorRoute::Auto, true) => {
            spectral(basis, v, opts.quadrature_nodes)
        }
        (TensorRoute::Grid, _) | (TensorRoute::Auto, false) => grid_convolution(basis, v),
    }
}

/// Closed-form transform of a Hermite pair density without its Gaussian factor:
/// `\int psi_m psi_n e^{-ipx} dx = (-i)^{|m-n|} R_mn(p) e^{-p^2/4}`.
fn hermite_pair_poly(m: usize, n: usize, p: f64) -> f64 {
    let (lo, hi) = (m.min(n), m.max(n));
    let d = hi - lo;
    let x = 0.5 * p * p;
    (factorial(lo) / factorial(hi)).sqrt()
        * (p / 2f64.sqrt()).powi(d as i32)
        * laguerre(lo, d as f64, x)
}

fn spectral(basis: &ModeBasis, v: &PairPotential, nodes: usize) -> Result<InteractionTensor> {
    let ModeFamily::Harmonic { omega } = &basis.family else {
        unreachable!()
    };
    if nodes < 2 || nodes % 2 == 1 {
        return Err(Error::invalid(
            "quadrature node count must be even and at least 2",
        ));
    }
    let m = basis.len();
    let (t_all, w_all) = gauss_hermite(nodes);
    let half: Vec<(f64, f64)> = t_all
        .iter()
        .zip(&w_all)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, w)| (*t, *w))
        .collect();
    let nh = half.len();
    let max_n = basis.quanta.iter().flatten().cloned().max().unwrap_or(0);

    // per axis, per node: R_mn(p) with p = sqrt(2) t
    let tables: Vec<Vec<f64>> = (0..nh)
        .map(|ti| {
            let p = 2f64.sqrt() * half[ti].0;
            let mut tab = vec![0.0; (max_n + 1) * (max_n + 1)];
            for a in 0..=max_n {
                for b in 0..=max_n {
                    tab[a * (max_n + 1) + b] = hermite_pair_poly(a, b, p);
                }
            }
            tab
        })
        .collect();

    let jac: f64 =
        omega.iter().map(|w| (2.0 * w).sqrt()).product::<f64>() * 8.0 / (2.0 * PI).powi(3);
    let npts = nh * nh * nh;
    let mut weights = Vec::with_capacity(npts);
    for a in 0..nh {
        for b in 0..nh {
            for c in 0..nh {
                let t = [half[a].0, half[b].0, half[c].0];
                let q2: f64 = t.iter().zip(omega).map(|(t, w)| 2.0 * w * t * t).sum();
                weights.push(jac * half[a].1 * half[b].1 * half[c].1 * v.fourier(q2.sqrt())?);
            }
        }
    }

    // unordered pairs grouped by per-axis parity of the quantum differences
    let p_count = m * (m + 1) / 2;
    let mut classes: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); 8];
    for k in 0..m {
        for i in 0..=k {
            let (qi, qk) = (&basis.quanta[i], &basis.quanta[k]);
            let class = (0..3).fold(0usize, |acc, a| acc | (((qi[a] + qk[a]) % 2) << a));
            classes[class].push((i, k, pair_index(i, k)));
        }
    }
    let mut pairs = DMatrix::zeros(p_count, p_count);
    let chunk = 4096;
    for members in classes.iter().filter(|c| !c.is_empty()) {
        let rows = members.len();
        let mut acc = DMatrix::<f64>::zeros(rows, rows);
        let mut start = 0;
        while start < npts {
            let end = (start + chunk).min(npts);
            let cols = end - start;
            let mut r = DMatrix::<f64>::zeros(rows, cols);
            let mut rw = DMatrix::<f64>::zeros(rows, cols);
            for (col, pt) in (start..end).enumerate() {
                let idx = [pt / (nh * nh), (pt / nh) % nh, pt % nh];
                for (row, &(i, k, _)) in members.iter().enumerate() {
                    let (qi, qk) = (&basis.quanta[i], &basis.quanta[k]);
                    let mut val = 1.0;
                    for a in 0..3 {
                        val *= tables[idx[a]][qi[a] * (max_n + 1) + qk[a]];
                    }
                    r[(row, col)] = val;
                    rw[(row, col)] = val * weights[pt];
                }
            }
            acc.gemm(1.0, &r, &rw.transpose(), 1.0);
            start = end;
        }
        for (x, &(i1, k1, p1)) in members.iter().enumerate() {
            let d1: usize = (0..3)
                .map(|a| basis.quanta[i1][a].abs_diff(basis.quanta[k1][a]))
                .sum();
            for (y, &(i2, k2, p2)) in members.iter().enumerate() {
                let d2: usize = (0..3)
                    .map(|a| basis.quanta[i2][a].abs_diff(basis.quanta[k2][a]))
                    .sum();
                // (-i)^{d1} conj((-i)^{d2}) = i^{3 d1 + d2}, real because d1 + d2 is even
                let sign = if (3 * d1 + d2) % 4 == 0 { 1.0 } else { -1.0 };
                pairs[(p1, p2)] = sign * acc[(x, y)];
            }
        }
    }
    InteractionTensor::from_pair_matrix(m, pairs, TensorRoute::Spectral)
}

/// In-place multidimensional FFT over a row-major array.
fn fft_nd(data: &mut [Complex64], shape: &[usize], planner: &mut FftPlanner<f64>, inverse: bool) {
    let total: usize = shape.iter().product();
    for axis in 0..shape.len() {
        let n = shape[axis];
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let inner: usize = shape[axis + 1..].iter().product();
        let outer = total / (n * inner);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for o in 0..outer {
            for t in 0..inner {
                let base = o * n * inner + t;
                for (i, c) in line.iter_mut().enumerate() {
                    *c = data[base + i * inner];
                }
                fft.process(&mut line);
                for (i, c) in line.iter().enumerate() {
                    data[base + i * inner] = *c;
                }
            }
        }
    }
}

fn grid_convolution(basis: &ModeBasis, v: &PairPotential) -> Result<InteractionTensor> {
    let grid = &basis.grid;
    let spacing = grid.max_spacing();
    let range = v.range();
    if range < 2.0 * spacing {
        return Err(Error::UnderResolvedInteraction { range, spacing });
    }
    let dim = grid.dimension();
    let pts = grid.points().to_vec();
    let padded: Vec<usize> = pts.iter().map(|n| 2 * n).collect();
    let total: usize = padded.iter().product();
    let h = grid.spacing().to_vec();

    // kernel v(|r|) at every circular offset
    let mut kernel = vec![Complex64::new(0.0, 0.0); total];
    let mut idx = vec![0usize; dim];
    for (flat, kv) in kernel.iter_mut().enumerate() {
        let mut rem = flat;
        for a in (0..dim).rev() {
            idx[a] = rem % padded[a];
            rem /= padded[a];
        }
        let r2: f64 = (0..dim)
            .map(|a| {
                let off = if idx[a] < pts[a] {
                    idx[a] as f64
                } else {
                    idx[a] as f64 - padded[a] as f64
                };
                (off * h[a]).powi(2)
            })
            .sum();
        *kv = Complex64::new(v.evaluate(r2.sqrt()), 0.0);
    }
    let mut planner = FftPlanner::new();
    fft_nd(&mut kernel, &padded, &mut planner, false);

    let weights = grid.weights();
    let m = basis.len();
    let embed = |flat: usize| -> usize {
        let mut rem = flat;
        let mut out = 0;
        let mut stride = 1;
        for a in (0..dim).rev() {
            let i = rem % pts[a];
            rem /= pts[a];
            out += i * stride;
            stride *= padded[a];
        }
        out
    };
    let positions: Vec<usize> = (0..grid.len()).map(embed).collect();
    let densities: Vec<(usize, Vec<f64>)> = (0..m)
        .flat_map(|k| (0..=k).map(move |i| (i, k)))
        .map(|(i, k)| {
            let rho: Vec<f64> = basis.values[i]
                .iter()
                .zip(&basis.values[k])
                .map(|(a, b)| a * b)
                .collect();
            (pair_index(i, k), rho)
        })
        .collect();

    let p_count = m * (m + 1) / 2;
    let mut pairs = DMatrix::zeros(p_count, p_count);
    let mut buf = vec![Complex64::new(0.0, 0.0); total];
    let scale = 1.0 / total as f64;
    for (pj, rho) in &densities {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (flat, &pos) in positions.iter().enumerate() {
            buf[pos] = Complex64::new(rho[flat] * weights[flat], 0.0);
        }
        fft_nd(&mut buf, &padded, &mut planner, false);
        buf.iter_mut()
            .zip(&kernel)
            .for_each(|(b, k)| *b *= k * scale);
        fft_nd(&mut buf, &padded, &mut planner, true);
        let conv: Vec<f64> = positions
            .iter()
            .zip(&weights)
            .map(|(&pos, w)| buf[pos].re * w)
            .collect();
        for (pi, rho_i) in &densities {
            pairs[(*pi, *pj)] = dot(rho_i, &conv);
        }
    }
    InteractionTensor::from_pair_matrix(m, pairs, TensorRoute::Grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manybody::modes::{build_mode_basis, Truncation};
    use crate::model::{Grid, TrapSpec};

    #[test]
    fn pair_polynomial_matches_quadrature() {
        let (x, w) = crate::numerics::gauss_hermite(80);
        for (m, n) in [(0, 0), (0, 1), (1, 3), (2, 2), (3, 1)] {
            for p in [0.0, 0.7, 1.9] {
                // psi_m psi_n = H-weight e^{-x^2} times a polynomial
                let mut re = 0.0;
                let mut im = 0.0;
                for (xi, wi) in x.iter().zip(&w) {
                    let h = crate::numerics::hermite_functions(3, *xi);
                    let f = h[m] * h[n] * (xi * xi).exp() * wi;
                    re += f * (p * xi).cos();
                    im -= f * (p * xi).sin();
                }
                let d = m.abs_diff(n);
                let r = hermite_pair_poly(m, n, p) * (-p * p / 4.0).exp();
                let (er, ei) = match d % 4 {
                    0 => (r, 0.0),
                    1 => (0.0, -r),
                    2 => (-r, 0.0),
                    _ => (0.0, r),
                };
                assert!(
                    (re - er).abs() < 1e-12 && (im - ei).abs() < 1e-12,
                    "m={m} n={n} p={p}"
                );
            }
        }
    }

    #[test]
    fn spectral_and_grid_routes_agree() {
        let trap = TrapSpec::isotropic_harmonic(3).unwrap();
        let grid = Grid::centered_cube(3, 6.5, 40).unwrap();
        let basis = build_mode_basis(&trap, &grid, Truncation::MaxQuanta(1)).unwrap();
        // smooth tabulated bump so both routes converge quickly
        let r: Vec<f64> = (0..=300).map(|i| i as f64 * 0.01).collect();
        let vals: Vec<f64> = r.iter().map(|x| 2.0 * (-2.0 * x * x).exp()).collect();
        let v = PairPotential::tabulated(r, vals).unwrap();
        let spectral = interaction_tensor_with(
            &basis,
            &v,
            &TensorOptions {
                route: TensorRoute::Spectral,
                quadrature_nodes: 48,
            },
        )
        .unwrap();
        let grid_route = interaction_tensor_with(
            &basis,
            &v,
            &TensorOptions {
                route: TensorRoute::Grid,
                quadrature_nodes: 0,
            },
        )
        .unwrap();
        let scale = spectral.get(0, 0, 0, 0);
        assert!(scale > 0.0);
        let m = basis.len();
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let (a, b) = (spectral.get(i, j, k, l), grid_route.get(i, j, k, l));
                        assert!((a - b).abs() < 2e-3 * scale, "{i}{j}{k}{l}: {a} vs {b}");
                    }
                }
            }
        }
        assert!(spectral.symmetry_defect() < 1e-10);
    }

    #[test]
    fn zero_potential_and_under_resolution() {
        let trap = TrapSpec::isotropic_harmonic(3).unwrap();
        let grid = Grid::centered_cube(3, 6.0, 25).unwrap();
        let basis = build_mode_basis(&trap, &grid, Truncation::MaxQuanta(1)).unwrap();
        let t = interaction_tensor(&basis, &PairPotential::zero()).unwrap();
        assert!(t.pair_matrix().iter().all(|&x| x == 0.0));
        let narrow = PairPotential::soft_sphere(1.0, 0.1).unwrap();
        let opts = TensorOptions {
            route: TensorRoute::Grid,
            ..Default::default()
        };
        assert!(matches!(
            interaction_tensor_with(&basis, &narrow, &opts),
            Err(Error::UnderResolvedInteraction { .. })
        ));
        assert!(interaction_tensor(&basis, &PairPotential::hard_sphere(0.1).unwrap()).is_err());
    }
}
