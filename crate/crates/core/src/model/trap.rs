use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{Error, Result};

/// External trap potential `V(r)` in two or three dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrapRepr", into = "TrapRepr")]
pub struct TrapSpec {
    dimension: usize,
    kind: TrapKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TrapKind {
    /// `V(r) = sum_i k_i r_i^2`.
    Harmonic { stiffness: Vec<f64> },
    /// Zero inside `[0, side]^d`, infinite walls outside.
    Box { side: f64 },
    /// Samples on a grid, multilinear interpolation in between.
    Tabulated { grid: Grid, values: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrapRepr {
    dimension: usize,
    kind: TrapKind,
}

impl TryFrom<TrapRepr> for TrapSpec {
    type Error = Error;
    fn try_from(r: TrapRepr) -> Result<Self> {
        TrapSpec::new(r.dimension, r.kind)
    }
}

impl From<TrapSpec> for TrapRepr {
    fn from(t: TrapSpec) -> Self {
        TrapRepr {
            dimension: t.dimension,
            kind: t.kind,
        }
    }
}

impl TrapSpec {
    pub fn new(dimension: usize, kind: TrapKind) -> Result<Self> {
        if dimension != 2 && dimension != 3 {
            return Err(Error::invalid(format!(
                "trap dimension must be 2 or 3, got {dimension}"
            )));
        }
        match &kind {
            TrapKind::Harmonic { stiffness } => {
                if stiffness.len() != dimension {
                    return Err(Error::invalid(
                        "harmonic stiffness needs one entry per axis",
                    ));
                }
                if stiffness.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
                    return Err(Error::invalid(
                        "harmonic stiffness must be positive and finite",
                    ));
                }
            }
            TrapKind::Box { side } => {
                if !(side.is_finite() && *side > 0.0) {
                    return Err(Error::invalid("box side must be positive"));
                }
            }
            TrapKind::Tabulated { grid, values } => {
                if grid.dimension() != dimension {
                    return Err(Error::invalid("tabulated trap grid dimension mismatch"));
                }
                if values.len() != grid.len() {
                    return Err(Error::invalid(
                        "tabulated trap needs one value per grid node",
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("tabulated trap values must be finite"));
                }
            }
        }
        Ok(TrapSpec { dimension, kind })
    }

    pub fn harmonic(stiffness: Vec<f64>) -> Result<Self> {
        TrapSpec::new(stiffness.len(), TrapKind::Harmonic { stiffness })
    }

    /// Isotropic `V(r) = |r|^2`.
    pub fn isotropic_harmonic(dimension: usize) -> Result<Self> {
        TrapSpec::harmonic(vec![1.0; dimension])
    }

    pub fn unit_box(dimension: usize) -> Result<Self> {
        TrapSpec::new(dimension, TrapKind::Box { side: 1.0 })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn kind(&self) -> &TrapKind {
        &self.kind
    }

    pub fn is_harmonic(&self) -> bool {
        matches!(self.kind, TrapKind::Harmonic { .. })
    }

    /// `V(r)`; box walls return `+inf` outside the box.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dimension {
            return Err(Error::invalid("point dimension does not match the trap"));
        }
        match &self.kind {
            TrapKind::Harmonic { stiffness } => {
                Ok(stiffness.iter().zip(point).map(|(k, x)| k * x * x).sum())
            }
            TrapKind::Box { side } => {
                if point.iter().all(|&x| (0.0..=*side).contains(&x)) {
                    Ok(0.0)
                } else {
                    Ok(f64::INFINITY)
                }
            }
            TrapKind::Tabulated { grid, values } => {
                grid.interpolate(values, point)
                    .ok_or_else(|| Error::OutOfDomain {
                        point: point.to_vec(),
                    })
            }
        }
    }

    /// Samples `V` on every node of `grid`; box walls are mapped to the
    /// Dirichlet boundary, so the grid must coincide with the box.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        if grid.dimension() != self.dimension {
            return Err(Error::invalid("grid and trap dimensions differ"));
        }
        if let TrapKind::Box { side } = &self.kind {
            let matches = grid
                .extent()
                .iter()
                .all(|&[lo, hi]| lo.abs() <= 1e-12 && (hi - side).abs() <= 1e-12 * side);
            if !matches {
                return Err(Error::invalid(
                    "a box trap needs a grid spanning exactly [0, side] per axis",
                ));
            }
            return Ok(vec![0.0; grid.len()]);
        }
        let mut out = Vec::with_capacity(grid.len());
        for flat in 0..grid.len() {
            out.push(self.evaluate(&grid.point(flat))?);
        }
        Ok(out)
    }
}
