//! The generalized Poincaré inequality
//!
//! `\int_Omega |grad f|^2 + (|Omega^c| / |K|)^{2/m} \int_K |grad f|^2 >= (1/C) \int_K f^2`
//!
//! for every `Omega` inside `K` and every `f` with `\int_K f h = 0`, with `C`
//! depending on `K` and `h` only.

mod ensemble;
mod region;

pub use ensemble::{
    estimate_constant, estimate_weighted, ConstantEstimate, FunctionKind, OmegaKind, TrialRecord,
    WeightedEstimate,
};
pub use region::{Region, RegionShape};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on `lhs >= rhs`.
pub const HOLD_SLACK: f64 = 1e-12;

/// A function on the region, the set `Omega` and the weight `h` of the
/// mean-zero condition. `f` is projected on construction.
#[derive(Debug, Clone)]
pub struct PoincareInstance<'a> {
    region: &'a Region,
    h: Vec<f64>,
    omega: Vec<bool>,
    f: Vec<f64>,
}

impl<'a> PoincareInstance<'a> {
    pub fn new(region: &'a Region, h: &[f64], omega: Vec<bool>, f: Vec<f64>) -> Result<Self> {
        if omega.len() != region.len() || f.len() != region.len() {
            return Err(Error::invalid(
                "mask and function must have one entry per region cell",
            ));
        }
        let h = region.normalize_weight(h)?;
        let mut inst = PoincareInstance {
            region,
            h,
            omega,
            f,
        };
        inst.project();
        Ok(inst)
    }

    /// `f <- f - (\int f h) 1`, exact because `\int h = 1`; repeated once to
    /// clear the rounding left by the first pass.
    fn project(&mut self) {
        for _ in 0..2 {
            let mean = self.weighted_mean();
            self.f.iter_mut().for_each(|v| *v -= mean);
        }
    }

    /// `\int_K f h`.
    pub fn weighted_mean(&self) -> f64 {
        self.region.cell_volume() * self.f.iter().zip(&self.h).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn region(&self) -> &Region {
        self.region
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn omega(&self) -> &[bool] {
        &self.omega
    }

    pub fn weight(&self) -> &[f64] {
        &self.h
    }

    /// `|Omega^c| / |K|`.
    pub fn complement_fraction(&self) -> f64 {
        self.omega.iter().filter(|&&inside| !inside).count() as f64 / self.region.len() as f64
    }

    /// `\int_Omega |grad f|^2 + (|Omega^c|/|K|)^{2/m} \int_K |grad f|^2` and `\int_K f^2`,
    /// both under the cell measure scaled pointwise by `w` when given.
    fn parts(&self, w: Option<&[f64]>) -> (f64, f64) {
        let g = self.region.gradient_density(&self.f);
        let dv = self.region.cell_volume();
        let weight = |c: usize| w.map_or(1.0, |w| w[c]);
        let (mut inside, mut total, mut norm) = (0.0, 0.0, 0.0);
        for c in 0..self.region.len() {
            let e = weight(c) * g[c];
            total += e;
            if self.omega[c] {
                inside += e;
            }
            norm += weight(c) * self.f[c] * self.f[c];
        }
        let m = self.region.dimension() as f64;
        let coefficient = self.complement_fraction().powf(2.0 / m);
        (dv * (inside + coefficient * total), dv * norm)
    }
}

/// Both sides of the inequality for one constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `\int_K f^2`, the numerator of `rhs`.
    pub norm: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, norm: f64, c: f64) -> Self {
        let rhs = norm / c;
        InequalityCheck {
            lhs,
            rhs,
            norm,
            holds: lhs >= rhs - HOLD_SLACK,
        }
    }

    /// The smallest constant this instance alone would accept; zero for `f = 0`.
    pub fn ratio(&self) -> f64 {
        if self.norm == 0.0 {
            0.0
        } else {
            self.norm / self.lhs
        }
    }
}

pub fn check_inequality(inst: &PoincareInstance, c: f64) -> Result<InequalityCheck> {
    if !(c > 0.0) {
        return Err(Error::invalid("the constant must be positive"));
    }
    let (lhs, norm) = inst.parts(None);
    Ok(InequalityCheck::new(lhs, norm, c))
}

/// The same functional with every integral carrying `w`, rescaled to unit mean
/// over `K` so that a constant weight reproduces [`check_inequality`].
/// The instance should be built with `h` proportional to `w`.
pub fn weighted_check(inst: &PoincareInstance, w: &[f64], c: f64) -> Result<InequalityCheck> {
    if !(c > 0.0) {
        return Err(Error::invalid("the constant must be positive"));
    }
    let w = unit_mean_weight(inst.region(), w)?;
    let (lhs, norm) = inst.parts(Some(&w));
    Ok(InequalityCheck::new(lhs, norm, c))
}

pub(crate) fn unit_mean_weight(region: &Region, w: &[f64]) -> Result<Vec<f64>> {
    if w.len() != region.len() {
        return Err(Error::invalid("weight does not match the region cells"));
    }
    let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidWeight { min });
    }
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    Ok(w.iter().map(|v| v / mean).collect())
}

/// `C' = C (max w / min w)^2` for a weight bounded away from zero.
pub fn sandwich_constant(c: f64, w: &[f64]) -> Result<f64> {
    let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(min > 0.0) {
        return Err(Error::InvalidWeight { min });
    }
    Ok(c * (max / min).powi(2))
}

/// `C = 2 |K|^{2/m} C~` from a Poincaré-Sobolev constant `C~`.
pub fn constructed_constant(region: &Region, c_tilde: f64) -> f64 {
    2.0 * region.volume().powf(2.0 / region.dimension() as f64) * c_tilde
}

/// `\int_K f^2 / ||grad f||^2_{L^p}` with `p = 2m/(m+2)`: the smallest
/// Poincaré-Sobolev constant this (mean-zero) function would accept.
pub fn sobolev_ratio(region: &Region, f: &[f64]) -> f64 {
    let m = region.dimension() as f64;
    let p = 2.0 * m / (m + 2.0);
    let dv = region.cell_volume();
    let g = region.gradient_density(f);
    let lp = (dv * g.iter().map(|v| v.sqrt().powf(p)).sum::<f64>()).powf(1.0 / p);
    let norm = dv * f.iter().map(|v| v * v).sum::<f64>();
    if norm == 0.0 {
        0.0
    } else {
        norm / (lp * lp)
    }
}

/// Cells at distance at least `radius` from every point of `points`.
pub fn omega_x_mask(points: &[Vec<f64>], radius: f64, region: &Region) -> Result<Vec<bool>> {
    if !(radius > region.spacing()) {
        return Err(Error::invalid(format!(
            "exclusion radius {radius:.3e} must exceed the cell size {:.3e}",
            region.spacing()
        )));
    }
    if points.iter().any(|p| p.len() != region.dimension()) {
        return Err(Error::invalid("point dimension differs from the region"));
    }
    let r2 = radius * radius;
    Ok((0..region.len())
        .map(|c| {
            let x = region.center(c);
            points
                .iter()
                .all(|p| p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() >= r2)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_function_holds_trivially() {
        let k = Region::cube(2, 1.0, 8).unwrap();
        let inst = PoincareInstance::new(
            &k,
            &k.uniform_weight(),
            vec![true; k.len()],
            vec![0.0; k.len()],
        )
        .unwrap();
        let chk = check_inequality(&inst, 1.0).unwrap();
        assert_eq!((chk.lhs, chk.rhs, chk.holds), (0.0, 0.0, true));
    }

    #[test]
    fn full_and_empty_omega_reduce_to_classical() {
        let k = Region::cube(2, 1.0, 16).unwrap();
        let f = k.sample(|x| (PI * x[0]).sin() + x[1] * x[1]);
        let full =
            PoincareInstance::new(&k, &k.uniform_weight(), vec![true; k.len()], f.clone()).unwrap();
        let empty =
            PoincareInstance::new(&k, &k.uniform_weight(), vec![false; k.len()], f).unwrap();
        let total = k.integrate(&k.gradient_density(full.f()));
        assert!((check_inequality(&full, 1.0).unwrap().lhs - total).abs() < 1e-12 * total);
        assert!((check_inequality(&empty, 1.0).unwrap().lhs - total).abs() < 1e-12 * total);
    }

    #[test]
    fn neumann_mode_ratio() {
        let l = 2.0;
        let k = Region::cube(2, l, 64).unwrap();
        let f = k.sample(|x| (PI * (x[0] + 0.5 * l) / l).cos());
        let inst = PoincareInstance::new(&k, &k.uniform_weight(), vec![true; k.len()], f).unwrap();
        let ratio = check_inequality(&inst, 1.0).unwrap().ratio();
        let oracle = l * l / (PI * PI);
        assert!((ratio / oracle - 1.0).abs() < 1e-3);
    }

    #[test]
    fn constant_weight_matches_plain_check() {
        let k = Region::ball(3, 1.0, 14).unwrap();
        let f = k.sample(|x| x[0] * x[1] + x[2]);
        let omega: Vec<bool> = (0..k.len()).map(|c| c % 3 != 0).collect();
        let inst = PoincareInstance::new(&k, &k.uniform_weight(), omega, f).unwrap();
        let w = vec![1.0 / k.volume(); k.len()];
        let a = check_inequality(&inst, 0.3).unwrap();
        let b = weighted_check(&inst, &w, 0.3).unwrap();
        assert!((a.lhs - b.lhs).abs() <= 1e-12 * a.lhs);
        assert!((a.rhs - b.rhs).abs() <= 1e-12 * a.rhs);
        assert!(matches!(
            weighted_check(&inst, &vec![0.0; k.len()], 1.0),
            Err(Error::InvalidWeight { .. })
        ));
    }

    #[test]
    fn mask_geometry() {
        let k = Region::cube(3, 2.0, 40).unwrap();
        assert!(omega_x_mask(&[], 0.2, &k).unwrap().iter().all(|&b| b));
        let mask = omega_x_mask(&[vec![0.0; 3]], 0.5, &k).unwrap();
        let excluded = mask.iter().filter(|&&b| !b).count() as f64 * k.cell_volume();
        let ball = 4.0 / 3.0 * PI * 0.125;
        let layer = 4.0 * PI * 0.25 * k.spacing();
        assert!((excluded - ball).abs() <= layer);
        assert!(omega_x_mask(&[vec![0.0; 3]], 0.01, &k).is_err());
    }
}
