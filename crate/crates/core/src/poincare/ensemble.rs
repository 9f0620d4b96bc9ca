use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::region::Region;
use super::{
    check_inequality, constructed_constant, sandwich_constant, sobolev_ratio, unit_mean_weight,
    weighted_check, PoincareInstance,
};
use crate::error::{Error, Result};

/// Shape of a random trial function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FunctionKind {
    /// Random combination of low Neumann cosines of the bounding cube.
    Modes { max_wave: usize },
    /// Sum of Gaussian bumps.
    Bumps { count: usize, width: f64 },
    /// A smoothed step across a random plane.
    Front { width: f64 },
    /// A plane wave, up to a quarter of the grid cutoff.
    Oscillation { wavenumber: f64 },
    /// `cos(pi (x_a + L/2) / L)` along one axis of the bounding cube.
    LowestMode { axis: usize },
}

/// How a trial picks `Omega`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OmegaKind {
    Full,
    Empty,
    RandomCells {
        keep: f64,
    },
    Stripes {
        axis: usize,
        period: usize,
    },
    Checkerboard {
        period: usize,
    },
    /// Complement of many small balls, the shape of the exclusion set around particles.
    TinyBallComplement {
        count: usize,
        radius: f64,
    },
    /// `particles` random points with exclusion radius `particles^{-7/17}`
    /// in units of the half width of the bounding cube.
    ExclusionBalls {
        particles: usize,
        radius: f64,
    },
    CantorDust {
        level: u32,
        complement: bool,
    },
    /// The cells with the largest `|grad f|^2` removed, a share `removed` of `K`.
    GradientAvoiding {
        removed: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub function: FunctionKind,
    pub omega: OmegaKind,
    pub complement_fraction: f64,
    /// `\int f^2 / lhs`: the smallest constant this trial accepts.
    pub ratio: f64,
    /// `\int f^2 / ||grad f||^2_{L^{2m/(m+2)}}`.
    pub sobolev_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantEstimate {
    /// Largest trial ratio: the smallest constant validating every trial.
    pub c_star: f64,
    /// Largest Poincaré-Sobolev ratio over the same functions.
    pub c_tilde: f64,
    /// `2 |K|^{2/m} c_tilde`.
    pub constructed: f64,
    pub trials: usize,
    pub seed: u64,
    pub worst_trial: TrialRecord,
    /// Every trial holds at `c_star`.
    pub holds_all: bool,
    /// Every trial holds at `constructed`.
    pub holds_constructed: bool,
    pub records: Vec<TrialRecord>,
}

/// Largest ratio over `trials` random `(f, Omega)` pairs with `\int f h = 0`.
/// Trial `i` draws from its own stream of the seeded generator, so a longer
/// run repeats every trial of a shorter one.
pub fn estimate_constant(
    region: &Region,
    h: &[f64],
    trials: usize,
    seed: u64,
) -> Result<ConstantEstimate> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let h = region.normalize_weight(h)?;
    let records = run_parallel(trials, |i| {
        let (function, omega_kind, f, omega) = draw_trial(region, seed, i);
        let inst = PoincareInstance::new(region, &h, omega, f)?;
        let chk = check_inequality(&inst, 1.0)?;
        Ok(TrialRecord {
            index: i,
            function,
            omega: omega_kind,
            complement_fraction: inst.complement_fraction(),
            ratio: chk.ratio(),
            sobolev_ratio: sobolev_ratio(region, inst.f()),
        })
    })?;
    let worst = argmax(&records, |r| r.ratio);
    let c_star = records[worst].ratio;
    let c_tilde = records.iter().map(|r| r.sobolev_ratio).fold(0.0, f64::max);
    let constructed = constructed_constant(region, c_tilde);
    // recheck every trial at both constants
    let (holds_all, holds_constructed) = if c_star > 0.0 {
        let mut ok = (true, true);
        for i in 0..trials {
            let (_, _, f, omega) = draw_trial(region, seed, i);
            let inst = PoincareInstance::new(region, &h, omega, f)?;
            ok.0 &= check_inequality(&inst, c_star)?.holds;
            ok.1 &= check_inequality(&inst, constructed)?.holds;
        }
        ok
    } else {
        (true, true)
    };
    Ok(ConstantEstimate {
        c_star,
        c_tilde,
        constructed,
        trials,
        seed,
        worst_trial: records[worst].clone(),
        holds_all,
        holds_constructed,
        records,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedEstimate {
    /// Unweighted constant over the same `(f, Omega)` with `h = 1/|K|`.
    pub c_star_plain: f64,
    /// `c_star_plain (max w / min w)^2`.
    pub c_prime: f64,
    /// Largest weighted ratio, for reference.
    pub c_star_weighted: f64,
    pub weight_ratio: f64,
    pub trials: usize,
    pub seed: u64,
    pub worst_trial: TrialRecord,
    /// Every weighted trial holds at `c_prime`.
    pub holds_all: bool,
}

/// Weighted trials with `h = w / \int_K w`, checked against the constant
/// obtained by sandwiching the unweighted one between the extremes of `w`.
pub fn estimate_weighted(
    region: &Region,
    w: &[f64],
    trials: usize,
    seed: u64,
) -> Result<WeightedEstimate> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let w = unit_mean_weight(region, w)?;
    let uniform = region.uniform_weight();
    let pairs = run_parallel(trials, |i| {
        let (function, omega_kind, f, omega) = draw_trial(region, seed, i);
        let plain = PoincareInstance::new(region, &uniform, omega.clone(), f.clone())?;
        let weighted = PoincareInstance::new(region, &w, omega, f)?;
        let p = check_inequality(&plain, 1.0)?.ratio();
        let q = weighted_check(&weighted, &w, 1.0)?.ratio();
        Ok((
            p,
            TrialRecord {
                index: i,
                function,
                omega: omega_kind,
                complement_fraction: weighted.complement_fraction(),
                ratio: q,
                sobolev_ratio: sobolev_ratio(region, weighted.f()),
            },
        ))
    })?;
    let c_star_plain = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let records: Vec<TrialRecord> = pairs.into_iter().map(|p| p.1).collect();
    let worst = argmax(&records, |r| r.ratio);
    let c_prime = sandwich_constant(c_star_plain.max(f64::MIN_POSITIVE), &w)?;
    let max = w.iter().cloned().fold(0.0, f64::max);
    let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut holds_all = true;
    for i in 0..trials {
        let (_, _, f, omega) = draw_trial(region, seed, i);
        let inst = PoincareInstance::new(region, &w, omega, f)?;
        holds_all &= weighted_check(&inst, &w, c_prime)?.holds;
    }
    Ok(WeightedEstimate {
        c_star_plain,
        c_prime,
        c_star_weighted: records[worst].ratio,
        weight_ratio: max / min,
        trials,
        seed,
        worst_trial: records[worst].clone(),
        holds_all,
    })
}

fn argmax<T>(items: &[T], key: impl Fn(&T) -> f64) -> usize {
    // ties go to the lowest index, independent of thread scheduling
    let mut best = 0;
    for (i, it) in items.iter().enumerate().skip(1) {
        if key(it) > key(&items[best]) {
            best = i;
        }
    }
    best
}

fn run_parallel<T: Send>(trials: usize, job: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let threads = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(trials);
    let chunk = trials.div_ceil(threads);
    let job = &job;
    let parts: Vec<Result<Vec<T>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                s.spawn(move || {
                    (t * chunk..((t + 1) * chunk).min(trials))
                        .map(job)
                        .collect::<Result<Vec<T>>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("trial thread panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(trials);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Trial `index` of the ensemble seeded by `seed`: function, mask and their
/// samples. `f` is normalized to `\int f^2 = 1` before projection.
pub(crate) fn draw_trial(
    region: &Region,
    seed: u64,
    index: usize,
) -> (FunctionKind, OmegaKind, Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let (kind, f) = draw_function(region, &mut rng);
    let (okind, omega) = draw_omega(region, &f, &mut rng);
    (kind, okind, f, omega)
}

fn half_width(region: &Region) -> f64 {
    0.5 * region.spacing() * region.cells_per_axis() as f64
}

fn draw_function(region: &Region, rng: &mut ChaCha8Rng) -> (FunctionKind, Vec<f64>) {
    let m = region.dimension();
    let half = half_width(region);
    let h = region.spacing();
    let kind = match rng.gen_range(0..5) {
        0 => FunctionKind::Modes {
            max_wave: rng.gen_range(1..=3),
        },
        1 => FunctionKind::Bumps {
            count: rng.gen_range(1..=6),
            width: rng.gen_range(2.0 * h..=half),
        },
        2 => FunctionKind::Front {
            width: rng.gen_range(h..=half),
        },
        3 => FunctionKind::Oscillation {
            wavenumber: rng.gen_range(PI / (2.0 * half)..=PI / (4.0 * h)),
        },
        _ => FunctionKind::LowestMode {
            axis: rng.gen_range(0..m),
        },
    };
    let f = match &kind {
        FunctionKind::Modes { max_wave } => {
            let waves = max_wave + 1;
            let count = waves.pow(m as u32);
            let amps: Vec<f64> = (0..count).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            region.sample(|x| {
                let mut acc = 0.0;
                for (j, a) in amps.iter().enumerate() {
                    let mut rest = j;
                    let mut term = *a;
                    let mut k2 = 0usize;
                    for xi in x {
                        let k = rest % waves;
                        rest /= waves;
                        k2 += k * k;
                        term *= (k as f64 * PI * (xi + half) / (2.0 * half)).cos();
                    }
                    acc += term / (1.0 + k2 as f64);
                }
                acc
            })
        }
        FunctionKind::Bumps { count, width } => {
            let bumps: Vec<(Vec<f64>, f64)> = (0..*count)
                .map(|_| {
                    (
                        (0..m).map(|_| rng.gen_range(-half..=half)).collect(),
                        rng.gen_range(-1.0..=1.0),
                    )
                })
                .collect();
            region.sample(|x| {
                bumps
                    .iter()
                    .map(|(c, a)| {
                        let r2: f64 = c.iter().zip(x).map(|(u, v)| (u - v).powi(2)).sum();
                        a * (-r2 / (width * width)).exp()
                    })
                    .sum()
            })
        }
        FunctionKind::Front { width } => {
            let n = random_direction(m, rng);
            let offset = rng.gen_range(-0.5 * half..=0.5 * half);
            region.sample(|x| ((dot(&n, x) - offset) / width).tanh())
        }
        FunctionKind::Oscillation { wavenumber } => {
            let n = random_direction(m, rng);
            let phase = rng.gen_range(0.0..2.0 * PI);
            region.sample(|x| (wavenumber * dot(&n, x) + phase).sin())
        }
        FunctionKind::LowestMode { axis } => {
            region.sample(|x| (PI * (x[*axis] + half) / (2.0 * half)).cos())
        }
    };
    let norm = region
        .integrate(&f.iter().map(|v| v * v).collect::<Vec<_>>())
        .sqrt();
    let f = if norm > 0.0 {
        f.iter().map(|v| v / norm).collect()
    } else {
        f
    };
    (kind, f)
}

fn draw_omega(region: &Region, f: &[f64], rng: &mut ChaCha8Rng) -> (OmegaKind, Vec<bool>) {
    let m = region.dimension();
    let n = region.len();
    let half = half_width(region);
    let h = region.spacing();
    let cells = region.cells_per_axis();
    let kind = match rng.gen_range(0..9) {
        0 => OmegaKind::Full,
        1 => OmegaKind::Empty,
        2 => OmegaKind::RandomCells {
            keep: rng.gen_range(0.0..=1.0),
        },
        3 => OmegaKind::Stripes {
            axis: rng.gen_range(0..m),
            period: rng.gen_range(2..=cells / 2),
        },
        4 => OmegaKind::Checkerboard {
            period: rng.gen_range(1..=cells / 4),
        },
        5 => OmegaKind::TinyBallComplement {
            count: rng.gen_range(1..=100),
            radius: rng.gen_range(1.5 * h..=(4.0 * h).max(0.15 * half)),
        },
        8 => {
            // largest particle count whose radius still spans more than one cell
            let max_n = (((h / half).powf(-17.0 / 7.0) * (1.0 - 1e-9)) as usize).min(1000);
            if max_n < 2 {
                OmegaKind::Full
            } else {
                let particles = rng.gen_range(2..=max_n);
                OmegaKind::ExclusionBalls {
                    particles,
                    radius: half * (particles as f64).powf(-7.0 / 17.0),
                }
            }
        }
        6 => OmegaKind::CantorDust {
            level: rng.gen_range(1..=3),
            complement: rng.gen(),
        },
        _ => OmegaKind::GradientAvoiding {
            removed: rng.gen_range(0.0..=0.5),
        },
    };
    let index = |x: &[f64], axis: usize| (((x[axis] + half) / h).floor() as usize).min(cells - 1);
    let omega: Vec<bool> = match &kind {
        OmegaKind::Full => vec![true; n],
        OmegaKind::Empty => vec![false; n],
        OmegaKind::RandomCells { keep } => (0..n).map(|_| rng.gen::<f64>() < *keep).collect(),
        OmegaKind::Stripes { axis, period } => (0..n)
            .map(|c| (index(region.center(c), *axis) / period) % 2 == 0)
            .collect(),
        OmegaKind::Checkerboard { period } => (0..n)
            .map(|c| {
                let x = region.center(c);
                (0..m).map(|a| index(x, a) / period).sum::<usize>() % 2 == 0
            })
            .collect(),
        OmegaKind::TinyBallComplement { count, radius } => {
            let centers: Vec<Vec<f64>> = (0..*count)
                .map(|_| region.center(rng.gen_range(0..n)).to_vec())
                .collect();
            super::omega_x_mask(&centers, *radius, region).expect("radius exceeds the cell size")
        }
        OmegaKind::ExclusionBalls { particles, radius } => {
            let points: Vec<Vec<f64>> = (0..*particles)
                .map(|_| region.center(rng.gen_range(0..n)).to_vec())
                .collect();
            super::omega_x_mask(&points, *radius, region).expect("radius exceeds the cell size")
        }
        OmegaKind::CantorDust { level, complement } => (0..n)
            .map(|c| {
                let x = region.center(c);
                let dust = (0..m).all(|a| in_cantor((x[a] + half) / (2.0 * half), *level));
                dust != *complement
            })
            .collect(),
        OmegaKind::GradientAvoiding { removed } => {
            let g = region.gradient_density(f);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| g[b].total_cmp(&g[a]).then(a.cmp(&b)));
            let cut = (removed * n as f64).round() as usize;
            let mut mask = vec![true; n];
            for &c in &order[..cut] {
                mask[c] = false;
            }
            mask
        }
    };
    (kind, omega)
}

fn in_cantor(mut t: f64, level: u32) -> bool {
    for _ in 0..level {
        t *= 3.0;
        let digit = t.floor();
        if digit == 1.0 {
            return false;
        }
        t -= digit;
    }
    true
}

fn random_direction(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let n = dot(&v, &v).sqrt();
        if n > 0.1 && n <= 1.0 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
