use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "shape", deny_unknown_fields)]
pub enum RegionShape {
    /// `[-side/2, side/2]^m`.
    Cube { side: f64 },
    /// `|r| <= radius`.
    Ball { radius: f64 },
}

impl RegionShape {
    fn half_width(&self) -> f64 {
        match *self {
            RegionShape::Cube { side } => 0.5 * side,
            RegionShape::Ball { radius } => radius,
        }
    }
}

/// A cube or ball in `m = 2, 3` discretized into equal cells; a cell belongs
/// to the region when its center does.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    shape: RegionShape,
    dimension: usize,
    cells_per_axis: usize,
    spacing: f64,
    centers: Vec<Vec<f64>>,
    /// `neighbors[c][2 * axis + side]`, `side = 0` below and `1` above.
    neighbors: Vec<Vec<Option<usize>>>,
}

impl Region {
    /// `cells_per_axis` cells across the bounding cube of the shape.
    pub fn new(shape: RegionShape, dimension: usize, cells_per_axis: usize) -> Result<Self> {
        if !(dimension == 2 || dimension == 3) {
            return Err(Error::invalid(format!(
                "region dimension must be 2 or 3, got {dimension}"
            )));
        }
        let half = shape.half_width();
        if !(half.is_finite() && half > 0.0) {
            return Err(Error::invalid("region size must be positive"));
        }
        if cells_per_axis < 4 {
            return Err(Error::invalid("need at least 4 cells per axis"));
        }
        let spacing = 2.0 * half / cells_per_axis as f64;
        let total = cells_per_axis.pow(dimension as u32);
        let mut compact = vec![usize::MAX; total];
        let mut centers = Vec::new();
        let mut idx = vec![0usize; dimension];
        for (flat, slot) in compact.iter_mut().enumerate() {
            unravel(flat, cells_per_axis, &mut idx);
            let x: Vec<f64> = idx
                .iter()
                .map(|&i| -half + (i as f64 + 0.5) * spacing)
                .collect();
            let inside = match shape {
                RegionShape::Cube { .. } => true,
                RegionShape::Ball { radius } => {
                    x.iter().map(|v| v * v).sum::<f64>() <= radius * radius
                }
            };
            if inside {
                *slot = centers.len();
                centers.push(x);
            }
        }
        let mut neighbors = Vec::with_capacity(centers.len());
        for flat in 0..total {
            if compact[flat] == usize::MAX {
                continue;
            }
            unravel(flat, cells_per_axis, &mut idx);
            let mut nb = Vec::with_capacity(2 * dimension);
            let mut stride = 1;
            for axis in (0..dimension).rev() {
                let below = (idx[axis] > 0)
                    .then(|| compact[flat - stride])
                    .filter(|&c| c != usize::MAX);
                let above = (idx[axis] + 1 < cells_per_axis)
                    .then(|| compact[flat + stride])
                    .filter(|&c| c != usize::MAX);
                nb.push((axis, below, above));
                stride *= cells_per_axis;
            }
            nb.sort_by_key(|e| e.0);
            neighbors.push(nb.into_iter().flat_map(|(_, b, a)| [b, a]).collect());
        }
        Ok(Region {
            shape,
            dimension,
            cells_per_axis,
            spacing,
            centers,
            neighbors,
        })
    }

    pub fn cube(dimension: usize, side: f64, cells_per_axis: usize) -> Result<Self> {
        Region::new(RegionShape::Cube { side }, dimension, cells_per_axis)
    }

    pub fn ball(dimension: usize, radius: f64, cells_per_axis: usize) -> Result<Self> {
        Region::new(RegionShape::Ball { radius }, dimension, cells_per_axis)
    }

    pub fn shape(&self) -> RegionShape {
        self.shape
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dimension as i32)
    }

    /// Number of cells inside the region.
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Discrete volume `|K|`.
    pub fn volume(&self) -> f64 {
        self.len() as f64 * self.cell_volume()
    }

    /// Volume of the continuous shape.
    pub fn exact_volume(&self) -> f64 {
        match self.shape {
            RegionShape::Cube { side } => side.powi(self.dimension as i32),
            RegionShape::Ball { radius } => match self.dimension {
                2 => PI * radius * radius,
                _ => 4.0 / 3.0 * PI * radius.powi(3),
            },
        }
    }

    pub fn center(&self, cell: usize) -> &[f64] {
        &self.centers[cell]
    }

    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.centers.iter().map(|x| f(x)).collect()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.cell_volume() * f.iter().sum::<f64>()
    }

    /// The same cells with every length multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid("scale factor must be positive"));
        }
        let shape = match self.shape {
            RegionShape::Cube { side } => RegionShape::Cube {
                side: side * lambda,
            },
            RegionShape::Ball { radius } => RegionShape::Ball {
                radius: radius * lambda,
            },
        };
        Ok(Region {
            shape,
            spacing: self.spacing * lambda,
            centers: self
                .centers
                .iter()
                .map(|x| x.iter().map(|v| v * lambda).collect())
                .collect(),
            ..self.clone()
        })
    }

    /// Per-cell `|grad f|^2`: each face difference is shared equally by its two
    /// cells, faces on the region boundary carry nothing (Neumann closure), so
    /// the cell sum reproduces `sum_faces h^{m-2} (f_a - f_b)^2` exactly.
    pub fn gradient_density(&self, f: &[f64]) -> Vec<f64> {
        let inv_h2 = 1.0 / (self.spacing * self.spacing);
        self.neighbors
            .iter()
            .enumerate()
            .map(|(c, nb)| {
                let mut acc = 0.0;
                for n in nb.iter().flatten() {
                    let d = f[*n] - f[c];
                    acc += d * d;
                }
                0.5 * acc * inv_h2
            })
            .collect()
    }

    /// `h = 1 / |K|`.
    pub fn uniform_weight(&self) -> Vec<f64> {
        vec![1.0 / self.volume(); self.len()]
    }

    /// Rescales a bounded weight so that `\int_K h = 1`.
    pub fn normalize_weight(&self, h: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.len() {
            return Err(Error::invalid("weight does not match the region cells"));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("weight must be bounded"));
        }
        let total = self.integrate(h);
        if total.abs() < 1e-300 {
            return Err(Error::invalid("weight integrates to zero"));
        }
        Ok(h.iter().map(|v| v / total).collect())
    }
}

fn unravel(mut flat: usize, n: usize, idx: &mut [usize]) {
    for i in idx.iter_mut().rev() {
        *i = flat % n;
        flat /= n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volume_converges() {
        let b = Region::ball(3, 1.0, 40).unwrap();
        assert!((b.volume() / b.exact_volume() - 1.0).abs() < 0.02);
        let d = Region::ball(2, 2.0, 64).unwrap();
        assert!((d.volume() / d.exact_volume() - 1.0).abs() < 0.01);
    }

    #[test]
    fn gradient_density_of_linear_function() {
        let k = Region::cube(2, 1.0, 10).unwrap();
        let f = k.sample(|x| 3.0 * x[0]);
        let g = k.gradient_density(&f);
        // interior cells see the full slope, edge cells half of it along x
        let total = k.integrate(&g);
        let faces = 9.0 * 10.0;
        assert!((total - faces * (3.0 * 0.1f64).powi(2)).abs() < 1e-12);
        assert!(g.iter().all(|&v| v <= 9.0 + 1e-12));
    }
}
