use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::gauss_legendre;

/// Repulsive, spherically symmetric pair potential `v(|r|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialRepr", into = "PotentialRepr")]
pub enum PairPotential {
    /// Infinite wall for `r < radius`; wave functions vanish inside the core.
    HardSphere { radius: f64 },
    /// `height` for `r < radius`, zero outside.
    SoftSphere { height: f64, radius: f64 },
    /// Linear interpolation of `values` on the increasing radii `r`; zero past the last radius,
    /// constant below the first.
    TabulatedRadial { r: Vec<f64>, values: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum PotentialRepr {
    HardSphere { radius: f64 },
    SoftSphere { height: f64, radius: f64 },
    TabulatedRadial { r: Vec<f64>, values: Vec<f64> },
}

impl TryFrom<PotentialRepr> for PairPotential {
    type Error = Error;
    fn try_from(r: PotentialRepr) -> Result<Self> {
        match r {
            PotentialRepr::HardSphere { radius } => PairPotential::hard_sphere(radius),
            PotentialRepr::SoftSphere { height, radius } => {
                PairPotential::soft_sphere(height, radius)
            }
            PotentialRepr::TabulatedRadial { r, values } => PairPotential::tabulated(r, values),
        }
    }
}

impl From<PairPotential> for PotentialRepr {
    fn from(p: PairPotential) -> Self {
        match p {
            PairPotential::HardSphere { radius } => PotentialRepr::HardSphere { radius },
            PairPotential::SoftSphere { height, radius } => {
                PotentialRepr::SoftSphere { height, radius }
            }
            PairPotential::TabulatedRadial { r, values } => {
                PotentialRepr::TabulatedRadial { r, values }
            }
        }
    }
}

impl PairPotential {
    pub fn hard_sphere(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("hard-sphere radius must be positive"));
        }
        Ok(PairPotential::HardSphere { radius })
    }

    pub fn soft_sphere(height: f64, radius: f64) -> Result<Self> {
        if !(height.is_finite() && height >= 0.0) {
            return Err(Error::invalid("soft-sphere height must be nonnegative"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("soft-sphere radius must be positive"));
        }
        Ok(PairPotential::SoftSphere { height, radius })
    }

    pub fn tabulated(r: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if r.len() < 2 || r.len() != values.len() {
            return Err(Error::invalid(
                "tabulated potential needs >= 2 matching samples",
            ));
        }
        if r[0] < 0.0 || r.windows(2).any(|w| !(w[1] > w[0])) || r.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(
                "tabulated radii must be nonnegative and strictly increasing",
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(
                "tabulated potential values must be finite and nonnegative",
            ));
        }
        Ok(PairPotential::TabulatedRadial { r, values })
    }

    /// The zero potential, written as an empty soft sphere.
    pub fn zero() -> Self {
        PairPotential::SoftSphere {
            height: 0.0,
            radius: 1.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            PairPotential::HardSphere { .. } => false,
            PairPotential::SoftSphere { height, .. } => *height == 0.0,
            PairPotential::TabulatedRadial { values, .. } => values.iter().all(|&v| v == 0.0),
        }
    }

    pub fn evaluate(&self, r: f64) -> f64 {
        match self {
            PairPotential::HardSphere { radius } => {
                if r < *radius {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            PairPotential::SoftSphere { height, radius } => {
                if r < *radius {
                    *height
                } else {
                    0.0
                }
            }
            PairPotential::TabulatedRadial { r: rs, values } => {
                let last = rs.len() - 1;
                if r > rs[last] {
                    0.0
                } else if r <= rs[0] {
                    values[0]
                } else {
                    let k = rs.partition_point(|&x| x <= r).min(last).max(1);
                    let t = (r - rs[k - 1]) / (rs[k] - rs[k - 1]);
                    values[k - 1] + t * (values[k] - values[k - 1])
                }
            }
        }
    }

    /// Radius beyond which the potential vanishes identically.
    pub fn range(&self) -> f64 {
        match self {
            PairPotential::HardSphere { radius } => *radius,
            PairPotential::SoftSphere { height, radius } => {
                if *height == 0.0 {
                    0.0
                } else {
                    *radius
                }
            }
            PairPotential::TabulatedRadial { r, values } => {
                match values.iter().rposition(|&v| v != 0.0) {
                    None => 0.0,
                    Some(i) if i + 1 < r.len() => r[i + 1],
                    Some(i) => r[i],
                }
            }
        }
    }

    /// Radii where the potential (or its slope) jumps; ODE steps must land on these.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            PairPotential::HardSphere { radius } => vec![*radius],
            PairPotential::SoftSphere { radius, .. } => vec![*radius],
            PairPotential::TabulatedRadial { r, .. } => {
                r.iter().cloned().filter(|&x| x > 0.0).collect()
            }
        }
    }

    /// `v(r) = v1(r / a) / a^2`.
    pub fn scale(&self, a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid(format!(
                "scale length must be positive, got {a}"
            )));
        }
        Ok(match self {
            PairPotential::HardSphere { radius } => {
                PairPotential::HardSphere { radius: radius * a }
            }
            PairPotential::SoftSphere { height, radius } => PairPotential::SoftSphere {
                height: height / (a * a),
                radius: radius * a,
            },
            PairPotential::TabulatedRadial { r, values } => PairPotential::TabulatedRadial {
                r: r.iter().map(|x| x * a).collect(),
                values: values.iter().map(|v| v / (a * a)).collect(),
            },
        })
    }

    /// Three-dimensional Fourier transform `\int v(r) e^{-i q.r} d^3r` at `|q|`.
    /// Not defined for a hard core.
    pub fn fourier(&self, q: f64) -> Result<f64> {
        match self {
            PairPotential::HardSphere { .. } => Err(Error::invalid(
                "a hard core has no Fourier transform; substitute a soft sphere",
            )),
            PairPotential::SoftSphere { height, radius } => {
                Ok(4.0 * PI * height * radius.powi(3) * sphere_form(q * radius))
            }
            PairPotential::TabulatedRadial { .. } => Ok(self.tabulated_fourier(q)),
        }
    }

    /// `\int v d^3r`.
    pub fn integral(&self) -> Result<f64> {
        self.fourier(0.0)
    }

    fn tabulated_fourier(&self, q: f64) -> f64 {
        let PairPotential::TabulatedRadial { r, .. } = self else {
            unreachable!()
        };
        let (nodes, weights) = gauss_legendre(16);
        let mut edges = vec![0.0];
        edges.extend(r.iter().cloned().filter(|&x| x > 0.0));
        let mut total = 0.0;
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, wt) in nodes.iter().zip(&weights) {
                let rr = mid + half * x;
                total += wt * half * self.evaluate(rr) * rr * rr * sinc(q * rr);
            }
        }
        4.0 * PI * total
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `(sin x - x cos x) / x^3`, the normalized transform of a unit ball.
fn sphere_form(x: f64) -> f64 {
    let x2 = x * x;
    if x.abs() < 1e-2 {
        1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0 - x2 * x2 * x2 / 45360.0
    } else {
        (x.sin() - x * x.cos()) / (x2 * x)
    }
}
