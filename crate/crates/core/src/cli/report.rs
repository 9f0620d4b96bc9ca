use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::gp::{EnergyComponentPrediction, MONOTONE_SLACK};
use crate::manybody::{
    CondensateReport, LocalizationProfile, ManyBodyComponents, SweepRow, MIN_TRUNCATION_WEIGHT,
};
use crate::model::PairPotential;
use crate::poincare::{RegionShape, TrialRecord};

pub const ARTIFACT: &str = "bec-lab";
pub const REPORT_SCHEMA: u32 = 1;

/// Tolerance on the upper-bound and trace-norm comparisons.
const BOUND_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub artifact: String,
    pub version: String,
    pub schema: u32,
    pub config_hash: String,
    pub seed: u64,
    pub results: Results,
    /// What each reported quantity measures.
    pub relations: BTreeMap<String, String>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Results {
    Scattering(ScatteringResult),
    Gp(GpResult),
    Manybody(ManybodyResult),
    Sweep(SweepResult),
    Poincare(PoincareResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringResult {
    pub potential: PairPotential,
    pub range: f64,
    pub a: f64,
    pub s: Option<f64>,
    pub r_max: f64,
    pub tol: f64,
    pub refinement_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpResult {
    pub dimension: usize,
    pub harmonic: bool,
    pub g: f64,
    pub energy_total: f64,
    pub energy_kinetic: f64,
    pub energy_potential: f64,
    pub energy_interaction: f64,
    pub quartic: f64,
    pub mu: f64,
    pub residual: f64,
    pub tol: f64,
    pub norm: f64,
    pub iterations: usize,
    pub energy_history: Vec<f64>,
    pub min_interior: f64,
    pub sign_defect: f64,
    pub boundary_ratio: f64,
    /// `2K - 2P + d I`, reported for harmonic traps.
    pub virial_defect: Option<f64>,
    pub s: Option<f64>,
    pub prediction: Option<EnergyComponentPrediction>,
    pub phi_dump: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManybodyResult {
    pub particles: usize,
    pub a: f64,
    pub g: f64,
    pub s: f64,
    pub substitution: Option<String>,
    pub modes: usize,
    pub fock_dimension: usize,
    pub full_dimension: usize,
    pub energy: f64,
    pub energy_per_particle: f64,
    pub e_gp: f64,
    pub hartree_per_particle: f64,
    pub gamma_trace: f64,
    pub residual: f64,
    pub tol: f64,
    pub matvecs: usize,
    pub condensate: CondensateReport,
    pub components: ManyBodyComponents,
    pub prediction: EnergyComponentPrediction,
    pub localization: Option<LocalizationProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepResult {
    pub g: f64,
    pub e_gp: f64,
    pub gp_residual: f64,
    pub tol: f64,
    pub csv: String,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareResult {
    pub region: RegionShape,
    pub dimension: usize,
    pub cells: usize,
    pub cell_count: usize,
    pub volume: f64,
    pub trials: usize,
    #[serde(rename = "C_star")]
    pub c_star: f64,
    pub c_tilde: f64,
    pub constructed: f64,
    pub worst_trial: TrialRecord,
    pub holds_all: bool,
    pub holds_constructed: bool,
    pub weighted: Option<WeightedSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedSummary {
    pub source: String,
    pub c_star_plain: f64,
    pub c_prime: f64,
    pub c_star_weighted: f64,
    pub weight_ratio: f64,
    pub worst_trial: TrialRecord,
    pub holds_all: bool,
}

impl Results {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Results::Scattering(_) => "scattering",
            Results::Gp(_) => "gp",
            Results::Manybody(_) => "manybody",
            Results::Sweep(_) => "sweep",
            Results::Poincare(_) => "poincare",
        }
    }

    /// Every identity and inequality the stored numbers must satisfy.
    pub fn checks(&self) -> Vec<Check> {
        let mut out = Checks::default();
        match self {
            Results::Scattering(r) => scattering_checks(r, &mut out),
            Results::Gp(r) => gp_checks(r, &mut out),
            Results::Manybody(r) => manybody_checks(r, &mut out),
            Results::Sweep(r) => sweep_checks(r, &mut out),
            Results::Poincare(r) => poincare_checks(r, &mut out),
        }
        out.0
    }

    pub fn relations(&self) -> BTreeMap<String, String> {
        let pairs: &[(&str, &str)] = match self {
            Results::Scattering(_) => &[
                ("a", "scattering length: the zero-energy solution behaves as 1 - a/r outside the range"),
                ("s", "kinetic fraction of the scattering energy, \\int |grad phi_1|^2 / (4 pi a)"),
            ],
            Results::Gp(_) => &[
                ("energy_total", "minimum of \\int |grad phi|^2 + V phi^2 + g phi^4 at unit norm"),
                ("mu", "chemical potential, equal to energy_total + energy_interaction"),
                ("virial_defect", "2K - 2P + dI, zero at the minimizer of a harmonic trap"),
                ("prediction", "large-N limits of the per-particle kinetic, trap and pair energies"),
            ],
            Results::Manybody(_) => &[
                ("energy_per_particle", "lowest eigenvalue of the truncated N-body Hamiltonian over N"),
                ("condensate.gp_overlap", "<phi_GP|gamma|phi_GP>/N, tends to 1 in the dilute limit"),
                ("condensate.trace_distance", "Tr|gamma/N - |phi_GP><phi_GP||, tends to 0"),
                ("condensate.momentum_l1", "L1 distance of the momentum densities, bounded by trace_distance"),
                ("condensate.pair_moment", "two-particle condensate occupation <(b*)^2 b^2>/N^2"),
                ("hartree_per_particle", "energy of the product state of phi_GP, an upper bound"),
                ("localization", "share of the weighted gradient energy of f_X near the second particle"),
            ],
            Results::Sweep(_) => &[
                ("rows.E_qm_per_N", "exact ground-state energy per particle at fixed g"),
                ("rows.E_gp", "GP energy at the same g, the large-N limit of E_qm_per_N"),
                ("rows.trace_distance", "distance of gamma/N from the GP projector"),
                ("rows.kin_pred", "predicted kinetic energy per particle including the share s of g \\int phi^4"),
            ],
            Results::Poincare(_) => &[
                ("C_star", "smallest constant validating every sampled (f, Omega) pair"),
                ("constructed", "2 |K|^{2/m} times the largest Poincaré-Sobolev ratio of the sampled f"),
                ("weighted.c_prime", "C_star of the unweighted run times (max w / min w)^2"),
            ],
        };
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, name: impl Into<String>, passed: bool, detail: String) {
        self.0.push(Check {
            name: name.into(),
            passed,
            detail,
        });
    }

    fn finite(&mut self, name: &str, values: &[f64]) {
        let ok = values.iter().all(|v| v.is_finite());
        self.push(
            format!("{name}_finite"),
            ok,
            format!("{} values", values.len()),
        );
    }
}

fn scattering_checks(r: &ScatteringResult, c: &mut Checks) {
    c.finite("scattering", &[r.a, r.range, r.r_max]);
    c.push("a_nonnegative", r.a >= 0.0, format!("a = {:e}", r.a));
    if matches!(
        r.potential,
        PairPotential::HardSphere { .. } | PairPotential::SoftSphere { .. }
    ) {
        c.push(
            "a_within_range",
            r.a <= r.range * (1.0 + 1e-9),
            format!("a = {:e}, range = {:e}", r.a, r.range),
        );
    }
    match r.s {
        Some(s) => c.push(
            "s_in_unit_interval",
            s > 0.0 && s <= 1.0 + 1e-12,
            format!("s = {s:e}"),
        ),
        None => c.push(
            "s_absent_only_without_scattering",
            r.a == 0.0,
            format!("a = {:e}", r.a),
        ),
    }
}

fn gp_checks(r: &GpResult, c: &mut Checks) {
    c.finite(
        "gp",
        &[
            r.energy_total,
            r.energy_kinetic,
            r.energy_potential,
            r.energy_interaction,
            r.mu,
            r.norm,
        ],
    );
    c.push(
        "normalization",
        (r.norm - 1.0).abs() <= 1e-10,
        format!("norm = {:.15}", r.norm),
    );
    let sum = r.energy_kinetic + r.energy_potential + r.energy_interaction;
    c.push(
        "component_sum",
        (sum - r.energy_total).abs() <= 1e-12 * r.energy_total.abs().max(1.0),
        format!("K + P + I = {sum:.15e}, E = {:.15e}", r.energy_total),
    );
    c.push(
        "interaction_identity",
        (r.energy_interaction - r.g * r.quartic).abs()
            <= 1e-12 * r.energy_interaction.abs().max(1.0),
        format!(
            "I = {:e}, g \\int phi^4 = {:e}",
            r.energy_interaction,
            r.g * r.quartic
        ),
    );
    c.push(
        "chemical_potential",
        (r.mu - r.energy_total - r.energy_interaction).abs() <= 1e-6 * r.mu.abs().max(1.0),
        format!(
            "mu = {:.12e}, E + I = {:.12e}",
            r.mu,
            r.energy_total + r.energy_interaction
        ),
    );
    c.push(
        "residual",
        r.residual <= r.tol,
        format!("residual = {:e}, tol = {:e}", r.residual, r.tol),
    );
    if let Some(v) = r.virial_defect {
        c.push(
            "virial",
            v.abs() <= 5e-3 * r.energy_total.abs(),
            format!("|2K - 2P + dI| = {:e}, E = {:e}", v.abs(), r.energy_total),
        );
    }
    let monotone = r
        .energy_history
        .windows(2)
        .all(|w| w[1] <= w[0] + MONOTONE_SLACK);
    c.push(
        "energy_monotone",
        monotone,
        format!(
            "{} accepted steps",
            r.energy_history.len().saturating_sub(1)
        ),
    );
    c.push(
        "nonnegative",
        r.min_interior >= 0.0,
        format!("min = {:e}", r.min_interior),
    );
    if let Some(p) = &r.prediction {
        c.push(
            "prediction_sum",
            (p.total() - r.energy_total).abs() <= 1e-12 * r.energy_total.abs().max(1.0),
            format!("sum = {:.15e}, E = {:.15e}", p.total(), r.energy_total),
        );
        let q = r.g * r.quartic;
        if q > 0.0 {
            c.push(
                "interaction_share",
                (p.interaction_qm / q - (1.0 - p.s)).abs() <= 1e-12,
                format!(
                    "ratio = {:.15}, 1 - s = {:.15}",
                    p.interaction_qm / q,
                    1.0 - p.s
                ),
            );
        }
    }
}

struct RowView {
    label: String,
    n: usize,
    condensate_fraction: f64,
    gp_overlap: f64,
    trace_distance: f64,
    momentum_l1: f64,
    pair_moment: f64,
    e_per_n: f64,
    hartree: f64,
    truncation_weight: f64,
    residual: f64,
    prediction_total: Option<(f64, f64)>,
}

fn row_checks(v: &RowView, tol: f64, c: &mut Checks) {
    let l = &v.label;
    c.finite(
        &format!("{l}values"),
        &[
            v.condensate_fraction,
            v.gp_overlap,
            v.trace_distance,
            v.momentum_l1,
            v.pair_moment,
            v.e_per_n,
            v.hartree,
        ],
    );
    c.push(
        format!("{l}condensate_fraction_range"),
        (0.0..=1.0 + 1e-12).contains(&v.condensate_fraction),
        format!("condensate_fraction = {:.15}", v.condensate_fraction),
    );
    c.push(
        format!("{l}gp_overlap_range"),
        v.gp_overlap >= -1e-12 && v.gp_overlap <= v.condensate_fraction + 1e-12,
        format!(
            "gp_overlap = {:.15}, condensate_fraction = {:.15}",
            v.gp_overlap, v.condensate_fraction
        ),
    );
    c.push(
        format!("{l}trace_distance_range"),
        (0.0..=2.0).contains(&v.trace_distance),
        format!("trace_distance = {:e}", v.trace_distance),
    );
    c.push(
        format!("{l}momentum_l1_bound"),
        v.momentum_l1 <= v.trace_distance + BOUND_SLACK,
        format!(
            "momentum_l1 = {:e}, trace_distance = {:e}",
            v.momentum_l1, v.trace_distance
        ),
    );
    let floor = v.gp_overlap * v.gp_overlap - 2.0 / v.n as f64;
    c.push(
        format!("{l}pair_moment_chain"),
        v.pair_moment <= 1.0 + 1e-12 && v.pair_moment >= floor - 1e-12,
        format!("1 >= {:.12} >= {:.12}", v.pair_moment, floor),
    );
    c.push(
        format!("{l}hartree_upper_bound"),
        v.e_per_n <= v.hartree + 1e-9 * v.hartree.abs().max(1.0),
        format!("E/N = {:.12e}, Hartree = {:.12e}", v.e_per_n, v.hartree),
    );
    c.push(
        format!("{l}truncation_weight"),
        v.truncation_weight >= MIN_TRUNCATION_WEIGHT,
        format!("weight = {:.8}", v.truncation_weight),
    );
    c.push(
        format!("{l}residual"),
        v.residual <= tol,
        format!("residual = {:e}, tol = {:e}", v.residual, tol),
    );
    if let Some((sum, e)) = v.prediction_total {
        c.push(
            format!("{l}prediction_sum"),
            (sum - e).abs() <= 1e-12 * e.abs().max(1.0),
            format!("sum = {sum:.15e}, E_gp = {e:.15e}"),
        );
    }
}

fn manybody_checks(r: &ManybodyResult, c: &mut Checks) {
    let k = &r.condensate;
    row_checks(
        &RowView {
            label: String::new(),
            n: r.particles,
            condensate_fraction: k.condensate_fraction,
            gp_overlap: k.gp_overlap,
            trace_distance: k.trace_distance,
            momentum_l1: k.momentum_l1,
            pair_moment: k.pair_moment,
            e_per_n: r.energy_per_particle,
            hartree: r.hartree_per_particle,
            truncation_weight: k.truncation_weight,
            residual: r.residual,
            prediction_total: Some((r.prediction.total(), r.e_gp)),
        },
        r.tol,
        c,
    );
    c.push(
        "gamma_trace",
        (r.gamma_trace - r.particles as f64).abs() <= 1e-9 * r.particles as f64,
        format!("Tr gamma = {:.15}", r.gamma_trace),
    );
    c.push(
        "energy_per_particle",
        (r.energy / r.particles as f64 - r.energy_per_particle).abs()
            <= 1e-14 * r.energy.abs().max(1.0),
        format!("E = {:e}, E/N = {:e}", r.energy, r.energy_per_particle),
    );
    if let Some(loc) = &r.localization {
        if let Some(fr) = &loc.fractions {
            let monotone = fr.windows(2).all(|w| w[1] >= w[0]);
            let bounded = fr.iter().all(|f| (0.0..=1.0 + 1e-12).contains(f));
            c.push(
                "localization_monotone",
                monotone && bounded,
                format!("fractions = {fr:?}"),
            );
        }
    }
}

fn sweep_checks(r: &SweepResult, c: &mut Checks) {
    for row in &r.rows {
        row_checks(
            &RowView {
                label: format!("N={}:", row.n),
                n: row.n,
                condensate_fraction: row.condensate_fraction,
                gp_overlap: row.gp_overlap,
                trace_distance: row.trace_distance,
                momentum_l1: row.momentum_l1,
                pair_moment: row.pair_moment,
                e_per_n: row.e_qm_per_n,
                hartree: row.hartree_per_n,
                truncation_weight: row.truncation_weight,
                residual: row.residual,
                prediction_total: Some((row.kin_pred + row.pot_pred + row.int_pred, row.e_gp)),
            },
            r.tol,
            c,
        );
    }
    let mut rows: Vec<&SweepRow> = r.rows.iter().collect();
    rows.sort_by_key(|row| row.n);
    let td: Vec<f64> = rows.iter().map(|row| row.trace_distance).collect();
    let gap: Vec<f64> = rows
        .iter()
        .map(|row| (row.e_qm_per_n - row.e_gp).abs())
        .collect();
    c.push(
        "trace_distance_nonincreasing",
        td.windows(2).all(|w| w[1] <= w[0]),
        format!("{td:?}"),
    );
    c.push(
        "energy_gap_nonincreasing",
        gap.windows(2).all(|w| w[1] <= w[0]),
        format!("{gap:?}"),
    );
    if let Some(last) = rows.last() {
        c.push(
            "gp_overlap_at_largest_n",
            last.gp_overlap > 0.9,
            format!("N = {}: gp_overlap = {:.12}", last.n, last.gp_overlap),
        );
    }
}

fn poincare_checks(r: &PoincareResult, c: &mut Checks) {
    c.finite("poincare", &[r.c_star, r.c_tilde, r.constructed]);
    c.push(
        "c_star_positive",
        r.c_star > 0.0,
        format!("C_star = {:e}", r.c_star),
    );
    c.push(
        "worst_trial_attains_c_star",
        r.worst_trial.ratio == r.c_star,
        format!("worst ratio = {:e}", r.worst_trial.ratio),
    );
    c.push("holds_all", r.holds_all, format!("{} trials", r.trials));
    c.push(
        "constructed_constant",
        r.holds_constructed && r.constructed >= r.c_star,
        format!("constructed = {:e}, C_star = {:e}", r.constructed, r.c_star),
    );
    if let Some(w) = &r.weighted {
        c.push(
            "weighted_sandwich",
            w.holds_all && w.c_star_weighted <= w.c_prime,
            format!(
                "weighted C* = {:e}, C' = {:e}",
                w.c_star_weighted, w.c_prime
            ),
        );
    }
}
