//! Zero-energy two-body scattering: scattering length `a` and the kinetic
//! fraction `s` of the scattering solution.
//!
//! The radial function `u(r) = r phi1(r)` solves `u'' = v(r) u / 2` (reduced
//! mass, `hbar^2/2m = 1`) from the regular start `u(0) = 0, u'(0) = 1`. Past the
//! range of the potential `u` is linear, `u = C (r - a)`, and `phi1 = u / (C r)`
//! tends to one. The kinetic fraction is reported scale-free,
//! `s = \int |grad phi1|^2 d^3r / (4 pi a)`, which is the plain integral over
//! `4 pi` whenever the potential has unit scattering length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PairPotential;

const INITIAL_STEPS: usize = 64;
const MAX_STEPS: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringSolution {
    pub r_grid: Vec<f64>,
    pub phi1: Vec<f64>,
    pub a: f64,
    /// `None` when `a = 0` (no interaction), where the ratio is undefined.
    pub s: Option<f64>,
    pub r_max: f64,
    pub tol: f64,
    /// Change of `a` under the last step halving.
    pub refinement_change: f64,
}

/// Solves the zero-energy equation with matching radius `r_max`.
pub fn solve_zero_energy(
    potential: &PairPotential,
    r_max: f64,
    tol: f64,
) -> Result<ScatteringSolution> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid("scattering tolerance must be positive"));
    }
    let range = potential.range();
    if !(r_max.is_finite() && r_max > range) {
        return Err(Error::Config {
            path: "r_max".into(),
            message: format!("matching radius {r_max} must exceed the potential range {range}"),
        });
    }
    match potential {
        PairPotential::HardSphere { radius } => Ok(hard_sphere(*radius, r_max, tol)),
        _ if range == 0.0 => Ok(free(r_max, tol)),
        _ => integrate_refined(potential, range, r_max, tol),
    }
}

fn sample_radii(r_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| r_max * i as f64 / n as f64).collect()
}

fn free(r_max: f64, tol: f64) -> ScatteringSolution {
    let r_grid = sample_radii(r_max, 100);
    ScatteringSolution {
        phi1: vec![1.0; r_grid.len()],
        r_grid,
        a: 0.0,
        s: None,
        r_max,
        tol,
        refinement_change: 0.0,
    }
}

fn hard_sphere(c: f64, r_max: f64, tol: f64) -> ScatteringSolution {
    let r_grid = sample_radii(r_max, 400);
    let phi1 = r_grid
        .iter()
        .map(|&r| if r <= c { 0.0 } else { 1.0 - c / r })
        .collect();
    // \int_c^inf (c/r^2)^2 r^2 dr = c, so the ratio is exactly one
    ScatteringSolution {
        r_grid,
        phi1,
        a: c,
        s: Some(1.0),
        r_max,
        tol,
        refinement_change: 0.0,
    }
}

struct Trajectory {
    r: Vec<f64>,
    u: Vec<f64>,
    slope: f64,
    u_end: f64,
    kinetic: f64,
}

fn integrate_refined(
    potential: &PairPotential,
    range: f64,
    r_max: f64,
    tol: f64,
) -> Result<ScatteringSolution> {
    let mut steps = INITIAL_STEPS;
    let mut a_coarse = scattering_length(&integrate(potential, range, steps), range);
    loop {
        steps *= 2;
        let fine = integrate(potential, range, steps);
        let a_fine = scattering_length(&fine, range);
        let change = (a_fine - a_coarse).abs();
        if !a_fine.is_finite() || !fine.slope.is_finite() {
            return Err(Error::SolverFailure {
                message: "radial integration overflowed".into(),
                residual: change,
                iterations: steps,
            });
        }
        if change < tol {
            return Ok(assemble(&fine, range, r_max, tol, change));
        }
        if steps >= MAX_STEPS {
            return Err(Error::SolverFailure {
                message: format!("scattering length did not settle below tol {tol:.1e}"),
                residual: change,
                iterations: steps,
            });
        }
        a_coarse = a_fine;
    }
}

/// Two-point linear fit of the (exactly linear) exterior solution.
fn scattering_length(t: &Trajectory, range: f64) -> f64 {
    let u_at = |r: f64| t.u_end + t.slope * (r - range);
    let r_outer = 2.0 * range.max(1e-300);
    let r_inner = range;
    let slope = (u_at(r_outer) - u_at(r_inner)) / (r_outer - r_inner);
    r_outer - u_at(r_outer) / slope
}

fn assemble(t: &Trajectory, range: f64, r_max: f64, tol: f64, change: f64) -> ScatteringSolution {
    // fit at r_max/2 and r_max, falling back to the range when it is larger
    let inner = (0.5 * r_max).max(range);
    let u_at = |r: f64| t.u_end + t.slope * (r - range);
    let slope = (u_at(r_max) - u_at(inner)) / (r_max - inner);
    let a = r_max - u_at(r_max) / slope;
    let c = slope;

    let stride = (t.r.len() / 400).max(1);
    let mut r_grid = Vec::new();
    let mut phi1 = Vec::new();
    for i in (0..t.r.len()).step_by(stride) {
        let r = t.r[i];
        r_grid.push(r);
        phi1.push(if r == 0.0 { 1.0 / c } else { t.u[i] / (c * r) });
    }
    let n_out = 100;
    for k in 1..=n_out {
        let r = range + (r_max - range) * k as f64 / n_out as f64;
        r_grid.push(r);
        phi1.push(u_at(r) / (c * r));
    }
    let kinetic = (t.kinetic + c * c * a * a / range) / (c * c);
    let s = if a > 0.0 { Some(kinetic / a) } else { None };
    ScatteringSolution {
        r_grid,
        phi1,
        a,
        s,
        r_max,
        tol,
        refinement_change: change,
    }
}

/// Fixed-step RK4 for `(u, u', \int (u' r - u)^2 / r^2)` out to the range, with
/// step boundaries on every breakpoint of the potential.
fn integrate(potential: &PairPotential, range: f64, steps_per_range: usize) -> Trajectory {
    let mut edges = vec![0.0];
    edges.extend(
        potential
            .breakpoints()
            .into_iter()
            .filter(|&b| b > 0.0 && b < range),
    );
    edges.push(range);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let h_target = range / steps_per_range as f64;

    let mut r_out = vec![0.0];
    let mut u_out = vec![0.0];
    let mut y = [0.0, 1.0, 0.0];
    for seg in edges.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let n = ((hi - lo) / h_target).ceil().max(1.0) as usize;
        let h = (hi - lo) / n as f64;
        let guard = 1e-12 * (hi - lo);
        let v = |r: f64| potential.evaluate(r.clamp(lo + guard, hi - guard));
        let rhs = |r: f64, y: [f64; 3]| -> [f64; 3] {
            let kin = if r > 0.0 {
                let w = y[1] * r - y[0];
                w * w / (r * r)
            } else {
                0.0
            };
            [y[1], 0.5 * v(r) * y[0], kin]
        };
        for step in 0..n {
            let r = lo + step as f64 * h;
            let k1 = rhs(r, y);
            let k2 = rhs(r + 0.5 * h, add(y, k1, 0.5 * h));
            let k3 = rhs(r + 0.5 * h, add(y, k2, 0.5 * h));
            let k4 = rhs(r + h, add(y, k3, h));
            for i in 0..3 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            r_out.push(if step + 1 == n { hi } else { r + h });
            u_out.push(y[0]);
        }
    }
    Trajectory {
        r: r_out,
        u: u_out,
        slope: y[1],
        u_end: y[0],
        kinetic: y[2],
    }
}

fn add(y: [f64; 3], k: [f64; 3], h: f64) -> [f64; 3] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}

/// Soft sphere of the given radius with scattering length `a < radius`, from
/// `a = R (1 - tanh(kappa R) / (kappa R))` with `kappa = sqrt(V0 / 2)`.
pub fn soft_sphere_with_length(a: f64, radius: f64) -> Result<PairPotential> {
    if !(a > 0.0 && radius > a && radius.is_finite()) {
        return Err(Error::invalid(format!(
            "need 0 < a < radius, got a = {a}, radius = {radius}"
        )));
    }
    let target = a / radius;
    let ratio = |x: f64| 1.0 - x.tanh() / x;
    let (mut lo, mut hi) = (1e-8, 1.0);
    while ratio(hi) < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::invalid("scattering length too close to the radius"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    PairPotential::soft_sphere(2.0 * x * x / (radius * radius), radius)
}

/// Soft sphere of radius `radius` whose scattering length is `a` and whose
/// kinetic fraction is at least `min_s`; used where a hard core cannot enter.
pub fn tall_soft_sphere(a: f64, min_s: f64) -> Result<PairPotential> {
    if !(a > 0.0) || !(0.0 < min_s && min_s < 1.0) {
        return Err(Error::invalid(
            "tall soft sphere needs a > 0 and 0 < min_s < 1",
        ));
    }
    // unit-radius family parametrized by x = kappa R; s grows with x
    let build = |x: f64| -> Result<(PairPotential, f64)> {
        let ratio = 1.0 - x.tanh() / x;
        let radius = a / ratio;
        let height = 2.0 * x * x / (radius * radius);
        let v = PairPotential::soft_sphere(height, radius)?;
        let sol = solve_zero_energy(&v, 4.0 * radius, 1e-10 * a)?;
        Ok((v, sol.s.unwrap_or(0.0)))
    };
    let mut x = 2.0;
    loop {
        let (v, s) = build(x)?;
        if s >= min_s {
            return Ok(v);
        }
        x *= 1.5;
        if x > 1e4 {
            return Err(Error::SolverFailure {
                message: "could not reach the requested kinetic fraction".into(),
                residual: s,
                iterations: 0,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hard_sphere_is_exact() {
        let sol =
            solve_zero_energy(&PairPotential::hard_sphere(1.0).unwrap(), 50.0, 1e-10).unwrap();
        assert_eq!(sol.a, 1.0);
        assert_eq!(sol.s, Some(1.0));
        for (r, p) in sol.r_grid.iter().zip(&sol.phi1) {
            assert!(*p >= 0.0);
            if *r >= 1.0 {
                assert!((p - (1.0 - 1.0 / r)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_potential_has_no_kinetic_fraction() {
        let sol = solve_zero_energy(&PairPotential::zero(), 10.0, 1e-10).unwrap();
        assert_eq!(sol.a, 0.0);
        assert!(sol.s.is_none());
        assert!(sol.phi1.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn range_must_fit_inside_matching_radius() {
        let v = PairPotential::soft_sphere(1.0, 5.0).unwrap();
        assert!(matches!(
            solve_zero_energy(&v, 5.0, 1e-8),
            Err(Error::Config { .. })
        ));
        assert!(solve_zero_energy(&v, 6.0, 0.0).is_err());
    }

    #[test]
    fn solution_tends_to_one() {
        let v = PairPotential::soft_sphere(10.0, 1.0).unwrap();
        let sol = solve_zero_energy(&v, 200.0, 1e-10).unwrap();
        let last = *sol.phi1.last().unwrap();
        assert!((last - (1.0 - sol.a / 200.0)).abs() < 1e-12);
        assert!(sol.phi1.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn tall_soft_sphere_reaches_target() {
        let v = tall_soft_sphere(0.3, 0.99).unwrap();
        let sol = solve_zero_energy(&v, 10.0, 1e-12).unwrap();
        assert!((sol.a - 0.3).abs() < 1e-8);
        assert!(sol.s.unwrap() >= 0.99);
    }
}
