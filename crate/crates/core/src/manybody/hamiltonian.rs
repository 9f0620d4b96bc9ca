use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fock::FockBasis;
use super::tensor::InteractionTensor;
use crate::error::{Error, Result};
use crate::numerics::{dot, norm};

/// Symmetric matrix in compressed sparse row form.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    dim: usize,
    row_start: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (row, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_start[row]..self.row_start[row + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *out = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for row in 0..self.dim {
            for k in self.row_start[row]..self.row_start[row + 1] {
                d[(row, self.cols[k] as usize)] += self.vals[k];
            }
        }
        d
    }
}

/// Pair operator grouped over unordered index pairs:
/// `1/2 sum V[i,j,k,l] a*_i a*_j a_l a_k = sum_{i<=j, k<=l} U a*_i a*_j a_l a_k`.
struct PairTerms {
    /// For every annihilation pair `(k, l)`, the creation pairs with nonzero `U`.
    by_annihilation: Vec<((usize, usize), Vec<(usize, usize, f64)>)>,
}

fn pair_terms(tensor: &InteractionTensor) -> PairTerms {
    let m = tensor.n_modes();
    let unordered: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let grouped = |i: usize, j: usize, k: usize, l: usize| -> f64 {
        let creators: &[(usize, usize)] = if i == j { &[(i, j)] } else { &[(i, j), (j, i)] };
        let annihilators: &[(usize, usize)] = if k == l { &[(k, l)] } else { &[(k, l), (l, k)] };
        let mut s = 0.0;
        for &(a, b) in creators {
            for &(c, d) in annihilators {
                s += tensor.get(a, b, c, d);
            }
        }
        0.5 * s
    };
    let by_annihilation = unordered
        .iter()
        .map(|&(k, l)| {
            let list = unordered
                .iter()
                .filter_map(|&(i, j)| {
                    let u = grouped(i, j, k, l);
                    (u != 0.0).then_some((i, j, u))
                })
                .collect();
            ((k, l), list)
        })
        .collect();
    PairTerms { by_annihilation }
}

/// Second-quantized `H = sum eps_i a*_i a_i + 1/2 sum V a*_i a*_j a_l a_k` on the
/// Fock basis. `one_body` may carry off-diagonal entries.
pub fn build_hamiltonian(
    fock: &FockBasis,
    one_body: &DMatrix<f64>,
    tensor: &InteractionTensor,
) -> Result<SparseMatrix> {
    let m = fock.n_modes();
    if one_body.nrows() != m || tensor.n_modes() != m {
        return Err(Error::invalid(
            "one-body matrix, tensor and Fock space disagree on the mode count",
        ));
    }
    let terms = pair_terms(tensor);
    let dim = fock.len();
    let mut row_start = Vec::with_capacity(dim + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_start.push(0);
    let mut entries: Vec<(u32, f64)> = Vec::new();
    let mut work = vec![0u8; m];
    for col in 0..dim {
        entries.clear();
        let occ = fock.state(col);
        // one-body part
        for i in 0..m {
            if occ[i] == 0 {
                continue;
            }
            for j in 0..m {
                let t = one_body[(j, i)];
                if t == 0.0 {
                    continue;
                }
                if i == j {
                    entries.push((col as u32, t * occ[i] as f64));
                } else {
                    work.copy_from_slice(occ);
                    let amp = (work[i] as f64).sqrt();
                    work[i] -= 1;
                    work[j] += 1;
                    let amp = amp * (work[j] as f64).sqrt();
                    if let Some(row) = fock.index_of(&work) {
                        entries.push((row as u32, t * amp));
                    }
                }
            }
        }
        // pair part
        for &((k, l), ref creators) in &terms.by_annihilation {
            let amp_annihilate = if k == l {
                let n = occ[k] as f64;
                if occ[k] < 2 {
                    continue;
                }
                (n * (n - 1.0)).sqrt()
            } else {
                if occ[k] == 0 || occ[l] == 0 {
                    continue;
                }
                (occ[k] as f64 * occ[l] as f64).sqrt()
            };
            work.copy_from_slice(occ);
            work[k] -= 1;
            work[l] -= 1;
            for &(i, j, u) in creators {
                let amp_create = if i == j {
                    let n = work[i] as f64;
                    ((n + 1.0) * (n + 2.0)).sqrt()
                } else {
                    ((work[i] as f64 + 1.0) * (work[j] as f64 + 1.0)).sqrt()
                };
                work[i] += 1;
                work[j] += 1;
                if let Some(row) = fock.index_of(&work) {
                    entries.push((row as u32, u * amp_annihilate * amp_create));
                }
                work[i] -= 1;
                work[j] -= 1;
            }
        }
        // the matrix is symmetric, so column `col` doubles as row `col`
        entries.sort_by_key(|e| e.0);
        let mut last: Option<u32> = None;
        for &(c, v) in &entries {
            if last == Some(c) {
                *vals.last_mut().expect("entry present") += v;
            } else {
                cols.push(c);
                vals.push(v);
                last = Some(c);
            }
        }
        row_start.push(vals.len());
    }
    Ok(SparseMatrix {
        dim,
        row_start,
        cols,
        vals,
    })
}

/// Lowest eigenpair of a symmetric operator.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub matvecs: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub krylov: usize,
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            krylov: 60,
            tol: 1e-9,
            max_restarts: 200,
            seed: 0x5eed,
        }
    }
}

/// Restarted Lanczos with full reorthogonalization; stops when
/// `||H x - E x|| <= tol ||x||` for the unit Ritz vector `x`.
pub fn lanczos_ground(h: &SparseMatrix, opts: &LanczosOptions) -> Result<Eigenpair> {
    let n = h.dim();
    if n == 0 {
        return Err(Error::invalid("empty Hamiltonian"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let mut matvecs = 0;
    let mut hx = vec![0.0; n];
    let mut last_residual = f64::INFINITY;
    for _ in 0..opts.max_restarts.max(1) {
        let s = norm(&start);
        start.iter_mut().for_each(|x| *x /= s);
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![0.0; n];
        let k_max = opts.krylov.min(n);
        for j in 0..k_max {
            h.apply(&basis[j], &mut w);
            matvecs += 1;
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            // full reorthogonalization, twice
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&w, b);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = norm(&w);
            if j + 1 == k_max || b <= 1e-13 * a.abs().max(1.0) {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (imin, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        let mut x = vec![0.0; n];
        for (j, b) in basis.iter().take(k).enumerate() {
            let c = eig.eigenvectors[(j, imin)];
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += c * bi);
        }
        let s = norm(&x);
        x.iter_mut().for_each(|v| *v /= s);
        h.apply(&x, &mut hx);
        matvecs += 1;
        let value = dot(&x, &hx);
        let residual = hx
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - value * b).powi(2))
            .sum::<f64>()
            .sqrt();
        last_residual = residual;
        if residual <= opts.tol {
            // fixed sign convention: largest-magnitude component positive
            let (_, &big) = x
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                .expect("nonempty");
            if big < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            return Ok(Eigenpair {
                value,
                vector: x,
                residual,
                matvecs,
            });
        }
        start = x;
    }
    Err(Error::SolverFailure {
        message: "Lanczos iteration stagnated".into(),
        residual: last_residual,
        iterations: matvecs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lanczos_matches_dense_on_random_symmetric() {
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut row_start = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                if i == j || rng.gen::<f64>() < 0.2 {
                    let v = rng.gen::<f64>() - 0.5 + if i == j { i as f64 * 0.1 } else { 0.0 };
                    dense[(i, j)] = v;
                    dense[(j, i)] = v;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if dense[(i, j)] != 0.0 {
                    cols.push(j as u32);
                    vals.push(dense[(i, j)]);
                }
            }
            row_start.push(vals.len());
        }
        let sp = SparseMatrix {
            dim: n,
            row_start,
            cols,
            vals,
        };
        let ground = lanczos_ground(&sp, &LanczosOptions::default()).unwrap();
        let exact = SymmetricEigen::new(dense).eigenvalues.min();
        assert!((ground.value - exact).abs() < 1e-10);
        assert!(ground.residual <= 1e-9);
    }
}
