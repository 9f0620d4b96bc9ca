use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{CgWorkspace, DirichletLaplacian, StencilOrder};
use crate::model::{Grid, TrapKind, TrapSpec};
use crate::numerics::{dot, hermite_functions};

/// Which single-particle modes to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Truncation {
    /// All modes with at most `q` quanta in total (excitations above the
    /// ground mode for boxes). Numeric bases read this as "modes below the
    /// `q`-th level", i.e. the lowest `C(q + d, d)` of them.
    MaxQuanta(usize),
    /// The lowest `m` modes.
    ModeCount(usize),
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::MaxQuanta(3)
    }
}

/// Closed-form description of the modes, when there is one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeFamily {
    /// Hermite products for `-Delta + sum_a omega_a^2 x_a^2`.
    Harmonic { omega: Vec<f64> },
    /// Sine products on `[0, side]^d`.
    Box { side: f64 },
    /// Grid eigenvectors of `-Delta + V`.
    Numeric,
}

/// Orthonormal single-particle eigenfunctions sampled on a grid.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub family: ModeFamily,
    pub truncation: Truncation,
    /// Per-axis quantum numbers (empty for numeric modes).
    pub quanta: Vec<Vec<usize>>,
    pub energies: Vec<f64>,
    /// Per-axis reflection parities packed as bits, when the modes carry them.
    pub parities: Option<Vec<u8>>,
    pub grid: Grid,
    pub values: Vec<Vec<f64>>,
}

impl ModeBasis {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.grid.dimension()
    }

    /// Gram matrix of the sampled modes under grid quadrature.
    pub fn gram(&self) -> DMatrix<f64> {
        let w = self.grid.weights();
        let m = self.len();
        let weighted: Vec<Vec<f64>> = self
            .values
            .iter()
            .map(|v| v.iter().zip(&w).map(|(a, b)| a * b).collect())
            .collect();
        DMatrix::from_fn(m, m, |i, j| dot(&weighted[i], &self.values[j]))
    }

    /// Expansion coefficients `\int f phi_i` of a function sampled on the same grid.
    pub fn project(&self, f: &[f64]) -> Vec<f64> {
        let w = self.grid.weights();
        let fw: Vec<f64> = f.iter().zip(&w).map(|(a, b)| a * b).collect();
        self.values.iter().map(|v| dot(v, &fw)).collect()
    }

    /// Kinetic and trap matrices `<phi_i|-Delta|phi_j>`, `<phi_i|V|phi_j>`.
    pub fn one_body_matrices(&self, trap: &TrapSpec) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let m = self.len();
        match &self.family {
            ModeFamily::Harmonic { omega } => {
                let mut kin = DMatrix::zeros(m, m);
                let mut pot = DMatrix::zeros(m, m);
                for i in 0..m {
                    for j in 0..m {
                        let (a, b) = (&self.quanta[i], &self.quanta[j]);
                        let differing: Vec<usize> =
                            (0..a.len()).filter(|&ax| a[ax] != b[ax]).collect();
                        match differing.as_slice() {
                            [] => {
                                let t: f64 = omega
                                    .iter()
                                    .zip(a)
                                    .map(|(w, &n)| w * (n as f64 + 0.5))
                                    .sum();
                                kin[(i, j)] = t;
                                pot[(i, j)] = t;
                            }
                            [ax] => {
                                let (lo, hi) = (a[*ax].min(b[*ax]), a[*ax].max(b[*ax]));
                                if hi == lo + 2 {
                                    let x2 =
                                        0.5 * (((lo + 1) * (lo + 2)) as f64).sqrt() * omega[*ax];
                                    kin[(i, j)] = -x2;
                                    pot[(i, j)] = x2;
                                }
                            }
                            _ => {}
                        }
                    }
                }
                Ok((kin, pot))
            }
            ModeFamily::Box { .. } => Ok((
                DMatrix::from_diagonal(&self.energies.clone().into()),
                DMatrix::zeros(m, m),
            )),
            ModeFamily::Numeric => {
                let lap = DirichletLaplacian::new(&self.grid, StencilOrder::Fourth);
                let v = trap.sample(&self.grid)?;
                let cell = self.grid.cell_volume();
                let mut kin = DMatrix::zeros(m, m);
                let mut pot = DMatrix::zeros(m, m);
                let mut scratch = vec![0.0; self.grid.len()];
                for j in 0..m {
                    lap.apply(&self.values[j], &mut scratch);
                    let vphi: Vec<f64> =
                        self.values[j].iter().zip(&v).map(|(a, b)| a * b).collect();
                    for i in 0..m {
                        kin[(i, j)] = cell * dot(&self.values[i], &scratch);
                        pot[(i, j)] = cell * dot(&self.values[i], &vphi);
                    }
                }
                let kin = 0.5 * (&kin + kin.transpose());
                let pot = 0.5 * (&pot + pot.transpose());
                Ok((kin, pot))
            }
        }
    }

    /// Fourier transforms `\int phi_i(r) e^{-i k.r} d^dr` at every node of `k_grid`.
    pub fn fourier(&self, k_grid: &Grid) -> Result<Vec<Vec<Complex64>>> {
        if k_grid.dimension() != self.dimension() {
            return Err(Error::invalid(
                "momentum grid dimension differs from the modes",
            ));
        }
        let dim = self.dimension();
        let axes: Vec<Vec<f64>> = (0..dim).map(|a| k_grid.axis_nodes(a)).collect();
        match &self.family {
            ModeFamily::Harmonic { omega } => {
                let max_n = self.quanta.iter().flatten().cloned().max().unwrap_or(0);
                let tables: Vec<Vec<Vec<Complex64>>> = (0..dim)
                    .map(|a| {
                        let w = omega[a];
                        axes[a]
                            .iter()
                            .map(|&k| {
                                let h = hermite_functions(max_n, k / w.sqrt());
                                let scale = (2.0 * PI).sqrt() * w.powf(-0.25);
                                h.iter()
                                    .enumerate()
                                    .map(|(n, v)| minus_i_pow(n) * (scale * v))
                                    .collect()
                            })
                            .collect()
                    })
                    .collect();
                Ok(self.separable(k_grid, |axis, ki, n| tables[axis][ki][n]))
            }
            ModeFamily::Box { side } => {
                let l = *side;
                Ok(self.separable(k_grid, |axis, ki, n| sine_transform(n, l, axes[axis][ki])))
            }
            ModeFamily::Numeric => Ok(self
                .values
                .iter()
                .map(|v| axis_dft(&self.grid, v, k_grid))
                .collect()),
        }
    }

    fn separable(
        &self,
        k_grid: &Grid,
        f: impl Fn(usize, usize, usize) -> Complex64,
    ) -> Vec<Vec<Complex64>> {
        let dim = self.dimension();
        let mut idx = vec![0; dim];
        self.quanta
            .iter()
            .map(|q| {
                (0..k_grid.len())
                    .map(|flat| {
                        k_grid.unravel(flat, &mut idx);
                        (0..dim).fold(Complex64::new(1.0, 0.0), |acc, a| acc * f(a, idx[a], q[a]))
                    })
                    .collect()
            })
            .collect()
    }
}

fn minus_i_pow(n: usize) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// `\int_0^L sqrt(2/L) sin(n pi x / L) e^{-i k x} dx`.
fn sine_transform(n: usize, l: f64, k: f64) -> Complex64 {
    let p = n as f64 * PI / l;
    let norm = (2.0 / l).sqrt();
    if (k.abs() - p).abs() < 1e-9 * p {
        // resonant term: the integral of sin(px) e^{-ipx} over the box
        let s = k.signum();
        return Complex64::new(0.0, -s * l / 2.0) * norm;
    }
    // \int_0^L sin(px) e^{-ikx} dx = p (1 - (-1)^n e^{-ikL}) / (p^2 - k^2)
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let phase = Complex64::new((k * l).cos(), -(k * l).sin());
    (Complex64::new(1.0, 0.0) - phase * sign) * (norm * p / (p * p - k * k))
}

/// Axis-by-axis trapezoid transform of a grid function onto a momentum grid.
fn axis_dft(grid: &Grid, values: &[f64], k_grid: &Grid) -> Vec<Complex64> {
    let dim = grid.dimension();
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut shape: Vec<usize> = grid.points().to_vec();
    for axis in 0..dim {
        let nodes = grid.axis_nodes(axis);
        let w = grid.axis_weights(axis);
        let ks = k_grid.axis_nodes(axis);
        let kernel: Vec<Vec<Complex64>> = ks
            .iter()
            .map(|&k| {
                nodes
                    .iter()
                    .zip(&w)
                    .map(|(&x, &wt)| Complex64::new((k * x).cos(), -(k * x).sin()) * wt)
                    .collect()
            })
            .collect();
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let n_in = shape[axis];
        let n_out = ks.len();
        let mut next = vec![Complex64::new(0.0, 0.0); outer * n_out * inner];
        for o in 0..outer {
            for (ko, row) in kernel.iter().enumerate() {
                let dst = (o * n_out + ko) * inner;
                for (xi, kv) in row.iter().enumerate() {
                    let src = (o * n_in + xi) * inner;
                    for t in 0..inner {
                        next[dst + t] += kv * data[src + t];
                    }
                }
            }
        }
        data = next;
        shape[axis] = n_out;
    }
    data
}

/// Builds the lowest trap eigenmodes on `grid`.
pub fn build_mode_basis(trap: &TrapSpec, grid: &Grid, truncation: Truncation) -> Result<ModeBasis> {
    let dim = trap.dimension();
    if grid.dimension() != dim {
        return Err(Error::invalid("grid and trap dimensions differ"));
    }
    match truncation {
        Truncation::MaxQuanta(_) => {}
        Truncation::ModeCount(0) => return Err(Error::invalid("mode count must be positive")),
        Truncation::ModeCount(_) => {}
    }
    let basis = match trap.kind() {
        TrapKind::Harmonic { stiffness } => {
            let omega: Vec<f64> = stiffness.iter().map(|k| k.sqrt()).collect();
            let energy = |q: &[usize]| -> f64 {
                q.iter()
                    .zip(&omega)
                    .map(|(&n, w)| w * (2 * n + 1) as f64)
                    .sum()
            };
            let quanta = select_quanta(dim, truncation, 0, &energy);
            let energies = quanta.iter().map(|q| energy(q)).collect();
            let values = quanta
                .iter()
                .map(|q| {
                    sample_separable(grid, |axis, x| {
                        let w = omega[axis];
                        w.powf(0.25) * hermite_functions(q[axis], w.sqrt() * x)[q[axis]]
                    })
                })
                .collect();
            let parities = Some(quanta.iter().map(|q| parity_bits(q, 0)).collect());
            ModeBasis {
                family: ModeFamily::Harmonic { omega },
                truncation,
                quanta,
                energies,
                parities,
                grid: grid.clone(),
                values,
            }
        }
        TrapKind::Box { side } => {
            trap.sample(grid)?;
            let l = *side;
            let energy =
                |q: &[usize]| -> f64 { q.iter().map(|&n| (n as f64 * PI / l).powi(2)).sum() };
            let quanta = select_quanta(dim, truncation, 1, &energy);
            let energies = quanta.iter().map(|q| energy(q)).collect();
            let values = quanta
                .iter()
                .map(|q| {
                    sample_separable(grid, |axis, x| {
                        (2.0 / l).sqrt() * (q[axis] as f64 * PI * x / l).sin()
                    })
                })
                .collect();
            let parities = Some(quanta.iter().map(|q| parity_bits(q, 1)).collect());
            ModeBasis {
                family: ModeFamily::Box { side: l },
                truncation,
                quanta,
                energies,
                parities,
                grid: grid.clone(),
                values,
            }
        }
        TrapKind::Tabulated { .. } => {
            let m = match truncation {
                Truncation::MaxQuanta(q) => crate::numerics::binomial(q + dim, dim),
                Truncation::ModeCount(m) => m,
            };
            let (energies, values) = numeric_modes(trap, grid, m)?;
            let basis = ModeBasis {
                family: ModeFamily::Numeric,
                truncation,
                quanta: Vec::new(),
                energies,
                parities: None,
                grid: grid.clone(),
                values,
            };
            check_numeric_resolution(trap, &basis)?;
            return Ok(basis);
        }
    };
    check_analytic_resolution(trap, &basis)?;
    Ok(basis)
}

/// Quantum-number tuples sorted by energy, ties by lexicographic order.
fn select_quanta(
    dim: usize,
    truncation: Truncation,
    offset: usize,
    energy: &dyn Fn(&[usize]) -> f64,
) -> Vec<Vec<usize>> {
    let budget = match truncation {
        Truncation::MaxQuanta(q) => q,
        // the lowest m modes always have fewer than m excitations in total
        Truncation::ModeCount(m) => m,
    };
    let mut all = Vec::new();
    let mut cur = vec![0; dim];
    loop {
        all.push(cur.iter().map(|n| n + offset).collect::<Vec<usize>>());
        // odometer over tuples with sum <= budget
        let mut axis = dim;
        loop {
            if axis == 0 {
                let mut out = all;
                out.sort_by(|a, b| energy(a).total_cmp(&energy(b)).then_with(|| a.cmp(b)));
                if let Truncation::ModeCount(m) = truncation {
                    out.truncate(m);
                }
                return out;
            }
            axis -= 1;
            cur[axis] += 1;
            if cur.iter().sum::<usize>() <= budget {
                break;
            }
            cur[axis] = 0;
        }
    }
}

fn parity_bits(q: &[usize], offset: usize) -> u8 {
    q.iter().enumerate().fold(0u8, |acc, (axis, &n)| {
        acc | ((((n - offset) % 2) as u8) << axis)
    })
}

fn sample_separable(grid: &Grid, f: impl Fn(usize, f64) -> f64) -> Vec<f64> {
    let dim = grid.dimension();
    let tables: Vec<Vec<f64>> = (0..dim)
        .map(|a| grid.axis_nodes(a).iter().map(|&x| f(a, x)).collect())
        .collect();
    let mut idx = vec![0; dim];
    (0..grid.len())
        .map(|flat| {
            grid.unravel(flat, &mut idx);
            (0..dim).map(|a| tables[a][idx[a]]).product()
        })
        .collect()
}

/// Discrete Rayleigh quotient of every analytic mode against its exact energy.
fn check_analytic_resolution(trap: &TrapSpec, basis: &ModeBasis) -> Result<()> {
    let grid = &basis.grid;
    let lap = DirichletLaplacian::new(grid, StencilOrder::Fourth);
    let mut v = trap.sample(grid)?;
    let mut scratch = vec![0.0; grid.len()];
    let interior = lap.interior().to_vec();
    for (x, &inside) in v.iter_mut().zip(&interior) {
        if !inside {
            *x = 0.0;
        }
    }
    for (mode, (phi, exact)) in basis.values.iter().zip(&basis.energies).enumerate() {
        let clipped: Vec<f64> = phi
            .iter()
            .zip(&interior)
            .map(|(p, &i)| if i { *p } else { 0.0 })
            .collect();
        lap.apply(&clipped, &mut scratch);
        let num: f64 = clipped
            .iter()
            .zip(&scratch)
            .zip(&v)
            .map(|((p, l), vv)| p * (l + vv * p))
            .sum();
        let den = dot(&clipped, &clipped);
        let relative_error = if den > 0.0 {
            (num / den - exact).abs() / exact.abs()
        } else {
            f64::INFINITY
        };
        if !(relative_error <= 0.01) {
            return Err(Error::Resolution {
                mode,
                relative_error,
            });
        }
    }
    Ok(())
}

/// Numeric modes: the second-order stencil must agree with the fourth-order one to 1%.
fn check_numeric_resolution(trap: &TrapSpec, basis: &ModeBasis) -> Result<()> {
    let grid = &basis.grid;
    let lap = DirichletLaplacian::new(grid, StencilOrder::Second);
    let v = trap.sample(grid)?;
    let mut scratch = vec![0.0; grid.len()];
    for (mode, (phi, e4)) in basis.values.iter().zip(&basis.energies).enumerate() {
        lap.apply(phi, &mut scratch);
        let num: f64 = phi
            .iter()
            .zip(&scratch)
            .zip(&v)
            .map(|((p, l), vv)| p * (l + vv * p))
            .sum();
        let e2 = num / dot(phi, phi);
        let relative_error = (e2 - e4).abs() / e4.abs().max(1e-300);
        if !(relative_error <= 0.01) {
            return Err(Error::Resolution {
                mode,
                relative_error,
            });
        }
    }
    Ok(())
}

/// Lowest `m` eigenpairs of the fourth-order `-Delta + V` by block inverse
/// iteration with Rayleigh-Ritz, normalized under grid quadrature.
fn numeric_modes(trap: &TrapSpec, grid: &Grid, m: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let lap = DirichletLaplacian::new(grid, StencilOrder::Fourth);
    let interior = lap.interior().to_vec();
    let mut v = trap.sample(grid)?;
    for (x, &inside) in v.iter_mut().zip(&interior) {
        if !inside {
            *x = 0.0;
        }
    }
    let n_interior = interior.iter().filter(|&&b| b).count();
    let block = (m + m / 2 + 2).min(n_interior);
    if m > block {
        return Err(Error::invalid(
            "more modes requested than interior grid points",
        ));
    }
    let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = 1.0 - vmin.min(0.0);
    let diag: Vec<f64> = v.iter().map(|x| x + shift).collect();
    let cell = grid.cell_volume();
    let n = grid.len();

    // deterministic start: products of low grid sine modes
    let ext = grid.extent().to_vec();
    let dim = grid.dimension();
    let starts = select_quanta(dim, Truncation::ModeCount(block), 1, &|q: &[usize]| {
        q.iter().map(|&k| (k * k) as f64).sum()
    });
    let mut x: Vec<Vec<f64>> = starts
        .iter()
        .map(|q| {
            grid.sample(|p| {
                p.iter()
                    .zip(&ext)
                    .zip(q)
                    .map(|((xi, [lo, hi]), &k)| (k as f64 * PI * (xi - lo) / (hi - lo)).sin())
                    .product()
            })
        })
        .collect();
    for col in x.iter_mut() {
        for (c, &inside) in col.iter_mut().zip(&interior) {
            if !inside {
                *c = 0.0;
            }
        }
    }

    let mut cg = CgWorkspace::new(n);
    let mut scratch = vec![0.0; n];
    let mut previous: Option<Vec<f64>> = None;
    for iteration in 0..2000 {
        let mut y = Vec::with_capacity(block);
        for col in &x {
            let mut sol = col.clone();
            cg.solve(&lap, &diag, col, &mut sol, 1e-12, 20_000);
            y.push(sol);
        }
        orthonormalize(&mut y, cell);
        let mut hy = Vec::with_capacity(block);
        for col in &y {
            lap.apply(col, &mut scratch);
            hy.push(
                scratch
                    .iter()
                    .zip(col)
                    .zip(&v)
                    .map(|((l, c), vv)| l + vv * c)
                    .collect::<Vec<f64>>(),
            );
        }
        let proj = DMatrix::from_fn(block, block, |i, j| {
            cell * 0.5 * (dot(&y[i], &hy[j]) + dot(&y[j], &hy[i]))
        });
        let eig = SymmetricEigen::new(proj);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        x = order
            .iter()
            .map(|&k| {
                let mut out = vec![0.0; n];
                for (j, col) in y.iter().enumerate() {
                    let c = eig.eigenvectors[(j, k)];
                    out.iter_mut().zip(col).for_each(|(o, yv)| *o += c * yv);
                }
                out
            })
            .collect();
        let converged = previous
            .as_ref()
            .map(|p| (0..m).all(|i| (p[i] - values[i]).abs() <= 1e-12 * values[i].abs().max(1.0)))
            .unwrap_or(false);
        if converged {
            x.truncate(m);
            for col in x.iter_mut() {
                let s: f64 = col.iter().sum();
                if s < 0.0 {
                    col.iter_mut().for_each(|c| *c = -*c);
                }
            }
            return Ok((values[..m].to_vec(), x));
        }
        previous = Some(values);
        if iteration == 1999 {
            break;
        }
    }
    Err(Error::SolverFailure {
        message: "numeric mode iteration did not settle".into(),
        residual: f64::NAN,
        iterations: 2000,
    })
}

/// Modified Gram-Schmidt, twice, under the cell-volume inner product.
fn orthonormalize(cols: &mut [Vec<f64>], cell: f64) {
    for _ in 0..2 {
        for i in 0..cols.len() {
            for j in 0..i {
                let (head, tail) = cols.split_at_mut(i);
                let c = dot(&tail[0], &head[j]) * cell;
                tail[0]
                    .iter_mut()
                    .zip(&head[j])
                    .for_each(|(a, b)| *a -= c * b);
            }
            let nrm = (dot(&cols[i], &cols[i]) * cell).sqrt();
            cols[i].iter_mut().for_each(|a| *a /= nrm);
        }
    }
}
