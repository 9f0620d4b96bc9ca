use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform tensor-product grid that includes its boundary nodes.
///
/// Node `i` along an axis sits at `lower + i * h` with `h = (upper - lower) / (points - 1)`.
/// Values are stored row-major (last axis fastest). Integration uses the
/// trapezoidal rule, so integrating a constant returns the box volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    dimension: usize,
    extent: Vec<[f64; 2]>,
    points: Vec<usize>,
    spacing: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    dimension: usize,
    extent: Vec<[f64; 2]>,
    points: Vec<usize>,
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        Grid::new(spec.dimension, spec.extent, spec.points)
    }
}

impl From<Grid> for GridSpec {
    fn from(grid: Grid) -> Self {
        GridSpec {
            dimension: grid.dimension,
            extent: grid.extent,
            points: grid.points,
        }
    }
}

impl Grid {
    pub fn new(dimension: usize, extent: Vec<[f64; 2]>, points: Vec<usize>) -> Result<Self> {
        if !(1..=3).contains(&dimension) {
            return Err(Error::invalid(format!(
                "grid dimension {dimension} not in 1..=3"
            )));
        }
        if extent.len() != dimension || points.len() != dimension {
            return Err(Error::invalid(
                "grid extent/points length must equal the dimension",
            ));
        }
        let mut spacing = Vec::with_capacity(dimension);
        for (&[lo, hi], &n) in extent.iter().zip(&points) {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::invalid(format!("grid extent [{lo}, {hi}] is empty")));
            }
            if n < 3 {
                return Err(Error::invalid("a grid axis needs at least 3 points"));
            }
            spacing.push((hi - lo) / (n - 1) as f64);
        }
        Ok(Grid {
            dimension,
            extent,
            points,
            spacing,
        })
    }

    /// Cube `[-half, half]^dimension` with `n` nodes per axis.
    pub fn centered_cube(dimension: usize, half: f64, n: usize) -> Result<Self> {
        Grid::new(
            dimension,
            vec![[-half, half]; dimension],
            vec![n; dimension],
        )
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn extent(&self) -> &[[f64; 2]] {
        &self.extent
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Largest spacing over the axes.
    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn volume(&self) -> f64 {
        self.extent.iter().map(|[lo, hi]| hi - lo).product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dimension];
        for axis in (0..self.dimension.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * self.points[axis + 1];
        }
        strides
    }

    pub fn coordinate(&self, axis: usize, index: usize) -> f64 {
        self.extent[axis][0] + index as f64 * self.spacing[axis]
    }

    /// Node coordinates along one axis.
    pub fn axis_nodes(&self, axis: usize) -> Vec<f64> {
        (0..self.points[axis])
            .map(|i| self.coordinate(axis, i))
            .collect()
    }

    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for axis in (0..self.dimension).rev() {
            out[axis] = flat % self.points[axis];
            flat /= self.points[axis];
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dimension];
        self.unravel(flat, &mut idx);
        idx.iter()
            .enumerate()
            .map(|(axis, &i)| self.coordinate(axis, i))
            .collect()
    }

    /// True when the node touches the boundary along some axis.
    pub fn is_boundary(&self, flat: usize) -> bool {
        let mut idx = [0usize; 3];
        self.unravel(flat, &mut idx[..self.dimension]);
        idx[..self.dimension]
            .iter()
            .zip(&self.points)
            .any(|(&i, &n)| i == 0 || i + 1 == n)
    }

    /// One-dimensional trapezoid weights along an axis.
    pub fn axis_weights(&self, axis: usize) -> Vec<f64> {
        let n = self.points[axis];
        let h = self.spacing[axis];
        (0..n)
            .map(|i| if i == 0 || i + 1 == n { 0.5 * h } else { h })
            .collect()
    }

    /// Trapezoidal quadrature weight of every node.
    pub fn weights(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = (0..self.dimension).map(|a| self.axis_weights(a)).collect();
        let mut out = vec![1.0; self.len()];
        let mut idx = vec![0; self.dimension];
        for (flat, w) in out.iter_mut().enumerate() {
            self.unravel(flat, &mut idx);
            for (axis, &i) in idx.iter().enumerate() {
                *w *= per_axis[axis][i];
            }
        }
        out
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len());
        self.weights().iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Samples a function at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let mut x = vec![0.0; self.dimension];
        let mut idx = vec![0; self.dimension];
        (0..self.len())
            .map(|flat| {
                self.unravel(flat, &mut idx);
                for axis in 0..self.dimension {
                    x[axis] = self.coordinate(axis, idx[axis]);
                }
                f(&x)
            })
            .collect()
    }

    /// Same node layout, compared with a relative tolerance on the extents.
    pub fn is_compatible(&self, other: &Grid) -> bool {
        self.dimension == other.dimension
            && self.points == other.points
            && self.extent.iter().zip(&other.extent).all(|(a, b)| {
                (a[0] - b[0]).abs() <= 1e-12 * (1.0 + a[0].abs())
                    && (a[1] - b[1]).abs() <= 1e-12 * (1.0 + a[1].abs())
            })
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dimension
            && point
                .iter()
                .zip(&self.extent)
                .all(|(&x, &[lo, hi])| x >= lo && x <= hi)
    }

    /// Multilinear interpolation of node values; `None` outside the grid.
    pub fn interpolate(&self, values: &[f64], point: &[f64]) -> Option<f64> {
        if !self.contains(point) {
            return None;
        }
        let strides = self.strides();
        let mut base = 0;
        let mut frac = [0.0; 3];
        for axis in 0..self.dimension {
            let t = (point[axis] - self.extent[axis][0]) / self.spacing[axis];
            let i = (t.floor() as usize).min(self.points[axis] - 2);
            frac[axis] = t - i as f64;
            base += i * strides[axis];
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << self.dimension) {
            let mut w = 1.0;
            let mut offset = 0;
            for axis in 0..self.dimension {
                if corner >> axis & 1 == 1 {
                    w *= frac[axis];
                    offset += strides[axis];
                } else {
                    w *= 1.0 - frac[axis];
                }
            }
            if w != 0.0 {
                acc += w * values[base + offset];
            }
        }
        Some(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_integrates_to_volume() {
        let g = Grid::new(3, vec![[-1.0, 2.0], [0.0, 0.5], [3.0, 4.0]], vec![7, 11, 5]).unwrap();
        let ones = vec![1.0; g.len()];
        let vol = g.integrate(&ones);
        assert!((vol - g.volume()).abs() <= 1e-12 * g.volume());
        assert!((g.volume() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(4, vec![[0.0, 1.0]; 4], vec![5; 4]).is_err());
        assert!(Grid::new(2, vec![[1.0, 0.0]; 2], vec![5; 2]).is_err());
        assert!(Grid::new(2, vec![[0.0, 1.0]; 2], vec![2; 2]).is_err());
    }

    #[test]
    fn interpolation_is_exact_for_linear_functions() {
        let g = Grid::centered_cube(2, 1.0, 9).unwrap();
        let vals = g.sample(|x| 2.0 * x[0] - 0.5 * x[1] + 1.0);
        let v = g.interpolate(&vals, &[0.33, -0.71]).unwrap();
        assert!((v - (2.0 * 0.33 + 0.5 * 0.71 + 1.0)).abs() < 1e-12);
        assert!(g.interpolate(&vals, &[1.1, 0.0]).is_none());
    }

    #[test]
    fn strict_json() {
        let ok: Grid =
            serde_json::from_str(r#"{"dimension":2,"extent":[[0,1],[0,1]],"points":[5,5]}"#)
                .unwrap();
        assert_eq!(ok.len(), 25);
        assert!(serde_json::from_str::<Grid>(
            r#"{"dimension":2,"extent":[[0,1],[0,1]],"points":[5,5],"x":1}"#
        )
        .is_err());
    }
}
