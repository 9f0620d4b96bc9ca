use crate::model::Grid;

/// Accuracy order of the central-difference Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilOrder {
    Second,
    Fourth,
}

/// `-Delta` with homogeneous Dirichlet walls on the grid boundary.
///
/// The fourth-order stencil reaches one node past the wall; that ghost value is
/// the odd reflection of the first interior node, which keeps the operator
/// symmetric and diagonalized by sine modes. Boundary entries of the input are
/// assumed zero and boundary entries of the output are left at zero.
#[derive(Debug, Clone)]
pub struct DirichletLaplacian {
    order: StencilOrder,
    points: Vec<usize>,
    strides: Vec<usize>,
    inv_h2: Vec<f64>,
    /// For every axis, flat indices of line starts (axis coordinate 0, others interior).
    lines: Vec<Vec<usize>>,
    interior: Vec<bool>,
}

impl DirichletLaplacian {
    pub fn new(grid: &Grid, order: StencilOrder) -> Self {
        let dim = grid.dimension();
        let points = grid.points().to_vec();
        let strides = grid.strides();
        let inv_h2 = grid.spacing().iter().map(|h| 1.0 / (h * h)).collect();
        let mut idx = vec![0; dim];
        let mut lines = vec![Vec::new(); dim];
        let mut interior = vec![false; grid.len()];
        for flat in 0..grid.len() {
            grid.unravel(flat, &mut idx);
            let inside = |a: usize| idx[a] >= 1 && idx[a] + 1 < points[a];
            interior[flat] = (0..dim).all(inside);
            for (axis, axis_lines) in lines.iter_mut().enumerate() {
                if idx[axis] == 0 && (0..dim).filter(|&b| b != axis).all(inside) {
                    axis_lines.push(flat);
                }
            }
        }
        DirichletLaplacian {
            order,
            points,
            strides,
            inv_h2,
            lines,
            interior,
        }
    }

    pub fn interior(&self) -> &[bool] {
        &self.interior
    }

    /// Diagonal entry of the operator.
    pub fn diagonal(&self) -> f64 {
        let c = match self.order {
            StencilOrder::Second => 2.0,
            StencilOrder::Fourth => 30.0 / 12.0,
        };
        c * self.inv_h2.iter().sum::<f64>()
    }

    /// `out = -Delta x` on interior nodes.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for axis in 0..self.points.len() {
            let n = self.points[axis];
            let s = self.strides[axis];
            let c = self.inv_h2[axis];
            for &base in &self.lines[axis] {
                match self.order {
                    StencilOrder::Second => {
                        for i in 1..n - 1 {
                            let k = base + i * s;
                            out[k] += c * (2.0 * x[k] - x[k - s] - x[k + s]);
                        }
                    }
                    StencilOrder::Fourth => {
                        let c = c / 12.0;
                        for i in 1..n - 1 {
                            let k = base + i * s;
                            let xm2 = if i == 1 { -x[k] } else { x[k - 2 * s] };
                            let xp2 = if i == n - 2 { -x[k] } else { x[k + 2 * s] };
                            out[k] +=
                                c * (xm2 - 16.0 * x[k - s] + 30.0 * x[k] - 16.0 * x[k + s] + xp2);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine_mode(grid: &Grid, modes: &[usize]) -> Vec<f64> {
        let ext = grid.extent().to_vec();
        grid.sample(|x| {
            x.iter()
                .zip(&ext)
                .zip(modes)
                .map(|((xi, [lo, hi]), &m)| (m as f64 * PI * (xi - lo) / (hi - lo)).sin())
                .product()
        })
    }

    #[test]
    fn sine_modes_are_exact_eigenvectors() {
        let grid = Grid::new(2, vec![[0.0, 1.0], [0.0, 2.0]], vec![17, 25]).unwrap();
        for order in [StencilOrder::Second, StencilOrder::Fourth] {
            let lap = DirichletLaplacian::new(&grid, order);
            let v = sine_mode(&grid, &[2, 3]);
            let mut out = vec![0.0; v.len()];
            lap.apply(&v, &mut out);
            let mut lambda = 0.0;
            for axis in 0..2 {
                let h = grid.spacing()[axis];
                let n_int = (grid.points()[axis] - 1) as f64;
                let theta = [2.0, 3.0][axis] * PI / n_int;
                lambda += match order {
                    StencilOrder::Second => (2.0 - 2.0 * theta.cos()) / (h * h),
                    StencilOrder::Fourth => {
                        (30.0 - 32.0 * theta.cos() + 2.0 * (2.0 * theta).cos()) / (12.0 * h * h)
                    }
                };
            }
            for (o, x) in out.iter().zip(&v) {
                assert!((o - lambda * x).abs() < 1e-9 * lambda);
            }
        }
    }

    #[test]
    fn fourth_order_is_symmetric() {
        let grid = Grid::centered_cube(3, 1.0, 7).unwrap();
        let lap = DirichletLaplacian::new(&grid, StencilOrder::Fourth);
        let mask = lap.interior().to_vec();
        let a: Vec<f64> = (0..grid.len())
            .map(|i| {
                if mask[i] {
                    ((i * 7919) % 13) as f64 - 6.0
                } else {
                    0.0
                }
            })
            .collect();
        let b: Vec<f64> = (0..grid.len())
            .map(|i| {
                if mask[i] {
                    ((i * 104729) % 11) as f64 - 5.0
                } else {
                    0.0
                }
            })
            .collect();
        let (mut la, mut lb) = (vec![0.0; a.len()], vec![0.0; a.len()]);
        lap.apply(&a, &mut la);
        lap.apply(&b, &mut lb);
        let x: f64 = la.iter().zip(&b).map(|(p, q)| p * q).sum();
        let y: f64 = lb.iter().zip(&a).map(|(p, q)| p * q).sum();
        assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
    }
}
