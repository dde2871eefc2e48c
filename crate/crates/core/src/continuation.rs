//! Descending sweeps `ρ_n → 0⁺`: levels, recentered distances to the
//! `ρ = 0` state and a fitted decay rate of `|c_ρ − c₀|`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::energy::Functional;
use crate::error::{Error, Result};
use crate::format::sig17;
use crate::lattice::{translate, Field, Site};
use crate::linalg::norm;
use crate::solver::{solve_from, solve_ground_state, GroundStateResult, SolverConfig};

/// Translates `u` so that its largest `|u|` sits at the origin. Among equal
/// maxima the lexicographically smallest site wins.
pub fn recenter(u: &Field) -> Result<(Field, Site)> {
    let Some(idx) = u.argmax_abs() else {
        return Err(Error::InvalidInput("cannot recenter an empty field".into()));
    };
    if u.values()[idx] == 0.0 {
        return Err(Error::InvalidInput("cannot recenter the zero field".into()));
    }
    let shift = u.domain().site(idx);
    Ok((translate(u, &shift)?, shift))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    /// Distinct, descending, non-negative; the last entry is 0.
    pub rhos: Vec<f64>,
    /// Start each solve from the previous solution.
    pub warm_start: bool,
}

impl SweepPlan {
    pub fn new(rhos: Vec<f64>) -> Result<Self> {
        let p = Self { rhos, warm_start: true };
        p.validate()?;
        Ok(p)
    }

    /// `fractions · ρ_max` followed by 0.
    pub fn from_fractions(fractions: &[f64], rho_max: f64) -> Result<Self> {
        let mut rhos: Vec<f64> = fractions.iter().map(|f| f * rho_max).collect();
        if rhos.last() != Some(&0.0) {
            rhos.push(0.0);
        }
        Self::new(rhos)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rhos.is_empty() {
            return Err(Error::Config("sweep needs at least one ρ".into()));
        }
        if self.rhos.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::Config("sweep ρ values must be finite and non-negative".into()));
        }
        if self.rhos.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("sweep ρ values must be distinct and descending".into()));
        }
        if *self.rhos.last().unwrap() != 0.0 {
            return Err(Error::Config("sweep must end at ρ = 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRecord {
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub rho: f64,
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub level: f64,
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub residual: f64,
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub residual_minus: f64,
    pub shift: Vec<i64>,
    /// Equivalent-norm distance between the recentered field and the
    /// recentered `ρ = 0` field.
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub d_norm: f64,
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub d_l2: f64,
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub sum_g: f64,
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub l2_norm: f64,
    /// Equivalent norm of the field.
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub norm: f64,
    #[serde(skip)]
    pub field: Field,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    /// Set when a solve failed; `records` then holds what was finished.
    pub failure: Option<String>,
    #[serde(skip)]
    pub results: Vec<GroundStateResult>,
}

impl SweepOutcome {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    /// `ρ = 0` record.
    pub fn baseline(&self) -> Option<&SweepRecord> {
        self.records.last().filter(|r| r.rho == 0.0)
    }
}

/// Runs the plan in order. The first point is solved with the full
/// multistart, later points from the previous solution when the plan asks
/// for warm starts. Distances are filled in once the `ρ = 0` state is known.
pub fn sweep_rho(plan: &SweepPlan, f: &Functional, cfg: &SolverConfig) -> Result<SweepOutcome> {
    plan.validate()?;
    let split = f.split();
    let mut results: Vec<GroundStateResult> = Vec::new();
    let mut failure = None;
    for &rho in &plan.rhos {
        let fr = f.at_rho(rho)?;
        let r = match results.last() {
            Some(prev) if plan.warm_start => solve_from(&fr, &prev.field, cfg),
            _ => solve_ground_state(&fr, cfg),
        };
        match r {
            Ok(r) => results.push(r),
            Err(e) => {
                failure = Some(format!("ρ = {}: {e}", sig17(rho)));
                break;
            }
        }
    }
    let base = if failure.is_none() {
        Some(recenter(&results.last().expect("plan is non-empty").field)?.0)
    } else {
        None
    };
    let mut records = Vec::with_capacity(results.len());
    for r in &results {
        let (centered, shift) = recenter(&r.field)?;
        let (d_norm, d_l2) = match &base {
            Some(b) => {
                let diff: Vec<f64> = centered.values().iter().zip(b.values()).map(|(a, b)| a - b).collect();
                (split.norm_sq_raw(&diff).sqrt(), norm(&diff))
            }
            None => (f64::NAN, f64::NAN),
        };
        let fr = f.at_rho(r.rho)?;
        records.push(SweepRecord {
            rho: r.rho,
            level: r.level,
            residual: r.residual,
            residual_minus: r.residual_minus,
            shift: shift.0,
            d_norm,
            d_l2,
            sum_g: fr.sum_g(r.field.values()),
            l2_norm: r.l2_norm,
            norm: split.norm_sq_raw(r.field.values()).sqrt(),
            field: r.field.clone(),
        });
    }
    Ok(SweepOutcome {
        records,
        failure,
        results,
    })
}

/// Header `rho,c_rho,residual,shift_x1..shift_xN,d_to_baseline,sum_G`, then
/// one line per record.
pub fn write_sweep_csv(records: &[SweepRecord], dim: usize, mut out: impl Write) -> Result<()> {
    write!(out, "rho,c_rho,residual")?;
    for k in 1..=dim {
        write!(out, ",shift_x{k}")?;
    }
    writeln!(out, ",d_to_baseline,sum_G")?;
    for r in records {
        write!(out, "{},{},{}", sig17(r.rho), sig17(r.level), sig17(r.residual))?;
        for s in &r.shift {
            write!(out, ",{s}")?;
        }
        writeln!(out, ",{},{}", sig17(r.d_norm), sig17(r.sum_g))?;
    }
    Ok(())
}

/// Pass thresholds for the sweep checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepThresholds {
    /// Final `|c_ρ − c₀| ≤ gap_fraction · c₀`.
    pub gap_fraction: f64,
    /// Final `d ≤ distance_fraction · ‖u₀‖`.
    pub distance_fraction: f64,
    /// Slack for `c_ρ ≤ c₀` and for the `Σ G` identity.
    pub level_tol: f64,
    /// Gaps below `floor · c₀` carry no rate information.
    pub floor: f64,
    /// Slopes below this are flagged.
    pub min_slope: f64,
}

impl Default for SweepThresholds {
    fn default() -> Self {
        Self {
            gap_fraction: 0.02,
            distance_fraction: 0.05,
            level_tol: 1e-8,
            floor: 1e-12,
            min_slope: 0.5,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeStatus {
    Ok,
    Suspicious,
    Indeterminate,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub c0: f64,
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub u0_norm: f64,
    #[serde(serialize_with = "crate::format::ser_vec_f64")]
    pub rho: Vec<f64>,
    #[serde(serialize_with = "crate::format::ser_vec_f64")]
    pub gap: Vec<f64>,
    #[serde(serialize_with = "crate::format::ser_vec_f64")]
    pub distance: Vec<f64>,
    #[serde(serialize_with = "crate::format::ser_vec_f64")]
    pub sum_g: Vec<f64>,
    /// Least-squares slope of `log|c_ρ − c₀|` against `log ρ`.
    #[serde(serialize_with = "crate::format::ser_opt_f64")]
    pub slope: Option<f64>,
    pub slope_status: SlopeStatus,
    /// Largest `|shift|∞` over the records, and whether it reaches the box face.
    pub max_shift: i64,
    pub shift_at_boundary: bool,
    pub checks: Vec<Check>,
    pub all_passed: bool,
}

/// Tabulates the sweep against the `ρ = 0` record. Needs at least three
/// records with `ρ > 0`.
pub fn convergence_report(
    records: &[SweepRecord],
    baseline: &SweepRecord,
    radius: Option<usize>,
    th: &SweepThresholds,
) -> Result<ConvergenceReport> {
    let pos: Vec<&SweepRecord> = records.iter().filter(|r| r.rho > 0.0).collect();
    if pos.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "convergence report needs at least 3 records with ρ > 0, got {}",
            pos.len()
        )));
    }
    let c0 = baseline.level;
    let u0_norm = baseline.norm;
    let rho: Vec<f64> = pos.iter().map(|r| r.rho).collect();
    let gap: Vec<f64> = pos.iter().map(|r| (r.level - c0).abs()).collect();
    let distance: Vec<f64> = pos.iter().map(|r| r.d_norm).collect();
    let sum_g: Vec<f64> = pos.iter().map(|r| r.sum_g).collect();

    let usable: Vec<(f64, f64)> = rho
        .iter()
        .zip(&gap)
        .filter(|(_, g)| **g > th.floor * c0.abs().max(1.0))
        .map(|(r, g)| (r.ln(), g.ln()))
        .collect();
    let slope = (usable.len() >= 2).then(|| least_squares_slope(&usable)).flatten();
    let slope_status = match slope {
        None => SlopeStatus::Indeterminate,
        Some(s) if s < th.min_slope => SlopeStatus::Suspicious,
        Some(_) => SlopeStatus::Ok,
    };

    let mut checks = Vec::new();
    let worst_order = pos.iter().map(|r| r.level - c0).fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check {
        name: "level_ordering",
        passed: worst_order <= th.level_tol,
        detail: format!("max(c_ρ − c₀) = {}", sig17(worst_order)),
    });
    let gaps_monotone = gap.windows(2).all(|w| w[1] <= w[0] + th.level_tol);
    checks.push(Check {
        name: "gap_non_increasing",
        passed: gaps_monotone,
        detail: format!("|c_ρ − c₀| = {:?}", gap.iter().map(|g| sig17(*g)).collect::<Vec<_>>()),
    });
    let final_gap = *gap.last().unwrap();
    checks.push(Check {
        name: "final_gap",
        passed: final_gap <= th.gap_fraction * c0,
        detail: format!("{} ≤ {}·c₀", sig17(final_gap), th.gap_fraction),
    });
    checks.push(Check {
        name: "distance_non_increasing",
        passed: distance.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12),
        detail: format!("d = {:?}", distance.iter().map(|d| sig17(*d)).collect::<Vec<_>>()),
    });
    let final_d = *distance.last().unwrap();
    checks.push(Check {
        name: "final_distance",
        passed: final_d <= th.distance_fraction * u0_norm,
        detail: format!("{} ≤ {}·‖u₀‖", sig17(final_d), th.distance_fraction),
    });
    let worst_identity = records
        .iter()
        .map(|r| (r.level - r.sum_g).abs())
        .fold(0.0f64, f64::max);
    checks.push(Check {
        name: "level_identity",
        passed: worst_identity <= th.level_tol,
        detail: format!("max |c_ρ − ΣG| = {}", sig17(worst_identity)),
    });
    let max_shift = records
        .iter()
        .flat_map(|r| r.shift.iter().map(|s| s.abs()))
        .max()
        .unwrap_or(0);
    let shift_at_boundary = radius.is_some_and(|r| max_shift as usize >= r);
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(ConvergenceReport {
        c0,
        u0_norm,
        rho,
        gap,
        distance,
        sum_g,
        slope,
        slope_status,
        max_shift,
        shift_at_boundary,
        checks,
        all_passed,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
