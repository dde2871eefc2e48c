//! Ground states by the reduction `c = inf_{w ∈ X⁺, ‖w‖=1} max J(tw + v)`.
//!
//! Each start runs the outer descent (with exact inner maximization) and is
//! then polished by Newton's method on `J'(u) = 0`. The least level wins.

mod config;
mod inner;
mod newton;
mod outer;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

pub use config::SolverConfig;
pub use inner::{inner_maximize, InnerMaxState};
pub use newton::{polish_newton, PolishOutcome};
pub use outer::{outer_minimize, LogRecord, OuterRun, StartKind};

use crate::energy::{Functional, NehariResidual};
use crate::error::{Error, Result};
use crate::lattice::{Field, Site};
use crate::linalg::{mat_vec, norm};
use inner::Reduced;

/// Two levels closer than this are considered tied.
const LEVEL_TIE: f64 = 1e-10;

pub(crate) fn start_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sampled check that `J(u) ≥ J(tu + v)` for `t ≥ 0`, `v ∈ X⁻`.
#[derive(Clone, Debug, Serialize)]
pub struct MaximalityCertificate {
    pub samples: usize,
    /// Largest `J(tu+v) − J(u)` among the samples.
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub worst_excess: f64,
    pub passed: bool,
}

/// Per-start summary.
#[derive(Clone, Debug, Serialize)]
pub struct CandidateSummary {
    pub start: StartKind,
    #[serde(serialize_with = "crate::format::ser_opt_f64")]
    pub level: Option<f64>,
    #[serde(serialize_with = "crate::format::ser_opt_f64")]
    pub residual: Option<f64>,
    pub peak: Option<String>,
    pub outer_iterations: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundStateResult {
    #[serde(skip)]
    pub field: Field,
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub level: f64,
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub rho: f64,
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub residual: f64,
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub residual_minus: f64,
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub l2_norm: f64,
    /// Largest-modulus site, ties broken lexicographically.
    pub peak: String,
    /// `t` in `u = tw + v` after polishing.
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub t: f64,
    /// `‖u⁺‖₂`.
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub plus_norm: f64,
    pub start: StartKind,
    pub outer_iterations: usize,
    pub outer_converged: bool,
    #[serde(skip)]
    pub log: Vec<LogRecord>,
    /// `ψ` at accepted outer iterates of the winning start.
    #[serde(serialize_with = "crate::format::ser_vec_f64")]
    pub outer_trace: Vec<f64>,
    pub polish: PolishOutcome,
    pub certificate: MaximalityCertificate,
    /// Lower estimate of the level from small spheres in `X⁺`.
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub floor: f64,
    pub candidates: Vec<CandidateSummary>,
    /// Some start converged to a level differing from the winner by more
    /// than `1e-6` relative.
    pub distinct_levels: bool,
    /// Largest recentered `ℓ²` distance (up to sign) between the winner and
    /// the starts that reached the same level.
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub translation_spread: f64,
}

impl GroundStateResult {
    /// One JSON object per outer iteration of the winning start.
    pub fn write_log(&self, mut out: impl Write) -> Result<()> {
        for r in &self.log {
            serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn peak_site(&self) -> Site {
        let idx = self.field.argmax_abs().unwrap_or(0);
        self.field.domain().site(idx)
    }
}

struct Candidate {
    start: StartKind,
    run: OuterRun,
    polish: PolishOutcome,
    level: f64,
    l2: f64,
}

fn run_start(red: &Reduced, cfg: &SolverConfig, kind: StartKind, c: Vec<f64>, warm: Option<(f64, Vec<f64>)>, stream: u64) -> Result<Candidate> {
    let mut rng = start_rng(cfg.seed, 1000 + stream);
    let run = outer::descend(red, c, warm, cfg, &mut rng)?;
    let u0 = run.field(red.f)?;
    let polish = polish_newton(red.f, &u0, cfg)?;
    let level = red.f.value(polish.field.values());
    let l2 = polish.field.norm2();
    Ok(Candidate {
        start: kind,
        run,
        polish,
        level,
        l2,
    })
}

fn check_rho(f: &Functional) -> Result<()> {
    let rho = f.rho();
    if rho == 0.0 {
        return Ok(());
    }
    if f.split().domain().is_periodic() {
        return Err(Error::InvalidInput("ρ ≠ 0 is not supported on a torus".into()));
    }
    let Some(max) = f.rho_max() else {
        return Err(Error::InvalidInput(
            "ρ ≠ 0 needs the inequality constants (Functional::with_constants)".into(),
        ));
    };
    let limit = 0.9 * max;
    if !(rho >= 0.0 && rho <= limit) {
        return Err(Error::RhoOutOfRange { rho, limit });
    }
    Ok(())
}

/// Least-energy critical point of `J_ρ` over all starts.
pub fn solve_ground_state(f: &Functional, cfg: &SolverConfig) -> Result<GroundStateResult> {
    cfg.validate()?;
    check_rho(f)?;
    if f.split().n_plus() == 0 {
        return Err(Error::NoSpectralGap("X⁺ is trivial on this box".into()));
    }
    let red = Reduced::new(f);
    let starts = outer::starts(&red, cfg);
    let results: Vec<(StartKind, Result<Candidate>)> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, (kind, c))| {
            let r = run_start(&red, cfg, kind.clone(), c, None, i as u64);
            (kind, r)
        })
        .collect();
    finish(&red, cfg, results)
}

/// Single run from a given field, as used along a continuation in `ρ`.
pub fn solve_from(f: &Functional, start: &Field, cfg: &SolverConfig) -> Result<GroundStateResult> {
    cfg.validate()?;
    check_rho(f)?;
    f.check(start)?;
    let red = Reduced::new(f);
    let (c, warm) = outer::warm_coordinates(&red, start.values())?;
    let r = run_start(&red, cfg, StartKind::Warm, c, warm, 0);
    finish(&red, cfg, vec![(StartKind::Warm, r)])
}

fn finish(red: &Reduced, cfg: &SolverConfig, results: Vec<(StartKind, Result<Candidate>)>) -> Result<GroundStateResult> {
    let f = red.f;
    let mut summaries = Vec::new();
    let mut best: Option<Candidate> = None;
    let mut first_err = None;
    let mut reached: Vec<(f64, Field)> = Vec::new();
    for (kind, r) in results {
        match r {
            Ok(c) => {
                let peak = c.polish.field.argmax_abs();
                summaries.push(CandidateSummary {
                    start: kind,
                    level: Some(c.level),
                    residual: Some(c.polish.residual()),
                    peak: peak.map(|i| f.split().domain().site(i).to_string()),
                    outer_iterations: Some(c.run.iterations),
                    error: None,
                });
                reached.push((c.level, c.polish.field.clone()));
                let better = match &best {
                    None => true,
                    Some(b) => {
                        c.level < b.level - LEVEL_TIE || ((c.level - b.level).abs() <= LEVEL_TIE && c.l2 < b.l2)
                    }
                };
                if better {
                    best = Some(c);
                }
            }
            Err(e) => {
                summaries.push(CandidateSummary {
                    start: kind,
                    level: None,
                    residual: None,
                    peak: None,
                    outer_iterations: None,
                    error: Some(e.to_string()),
                });
                first_err.get_or_insert(e);
            }
        }
    }
    let Some(best) = best else {
        return Err(first_err.unwrap_or_else(|| Error::Numerical("no starts".into())));
    };
    let split = f.split();
    let u = best.polish.field.clone();
    let nehari: NehariResidual = f.nehari_raw(u.values());
    let l2 = u.norm2();
    let cp = split.plus_coefficients(u.values());
    let plus_norm = norm(&split.synthesize_plus(&cp));
    let t = red.plus_inner(&cp, &cp).sqrt();
    if !nehari.satisfied(cfg.polish_tol, l2) {
        return Err(Error::NotNehari(format!("residual {:.3e}", nehari.full)));
    }
    if !(best.level > 0.0) || !(plus_norm > 0.0) {
        return Err(Error::NotNehari(format!("level {} with ‖u⁺‖ = {plus_norm}", best.level)));
    }
    let best_peak = u.argmax_abs().unwrap_or(0);
    let same = |lv: f64| (lv - best.level).abs() <= 1e-6 * best.level.abs().max(1.0);
    let distinct_levels = reached.iter().any(|(lv, _)| !same(*lv));
    let centered = crate::continuation::recenter(&u)?.0;
    let mut translation_spread = 0.0f64;
    for (lv, field) in &reached {
        if same(*lv) {
            let other = crate::continuation::recenter(field)?.0;
            let minus = centered.combine(1.0, &other, -1.0)?.norm2();
            let plus = centered.combine(1.0, &other, 1.0)?.norm2();
            translation_spread = translation_spread.max(minus.min(plus));
        }
    }
    let mut rng = start_rng(cfg.seed, 1 << 40);
    let certificate = maximality_certificate_with(red, &u, best.level, cfg, &mut rng);
    let floor = level_floor(red, &mut rng);
    if best.level < 0.5 * floor {
        return Err(Error::Numerical(format!(
            "level {} lies below half the small-sphere floor {}",
            best.level, floor
        )));
    }
    Ok(GroundStateResult {
        level: best.level,
        rho: f.rho(),
        residual: nehari.full,
        residual_minus: nehari.along_minus,
        l2_norm: l2,
        peak: split.domain().site(best_peak).to_string(),
        t,
        plus_norm,
        start: best.start,
        outer_iterations: best.run.iterations,
        outer_converged: best.run.converged,
        log: best.run.log,
        outer_trace: best.run.trace,
        polish: best.polish,
        certificate,
        floor,
        candidates: summaries,
        distinct_levels,
        translation_spread,
        field: u,
    })
}

fn maximality_certificate_with<R: Rng>(
    red: &Reduced,
    u: &Field,
    level: f64,
    cfg: &SolverConfig,
    rng: &mut R,
) -> MaximalityCertificate {
    let f = red.f;
    let split = f.split();
    let scale = split.norm_sq_raw(u.values()).sqrt();
    let nm = split.n_minus();
    let em = split.minus_basis();
    let mut worst = f64::NEG_INFINITY;
    for k in 0..cfg.certificate_samples {
        // half near (1, 0), half spread out
        let (t, s) = if k % 2 == 0 {
            (1.0 + 0.2 * (rng.gen::<f64>() - 0.5), 0.1 * rng.gen::<f64>())
        } else {
            (3.0 * rng.gen::<f64>(), 1.5 * rng.gen::<f64>())
        };
        let mut x: Vec<f64> = u.values().iter().map(|v| t * v).collect();
        if nm > 0 {
            let a: Vec<f64> = red.mu.iter().map(|m| rng.sample::<f64, _>(StandardNormal) / m.sqrt()).collect();
            let an = a.iter().zip(&red.mu).map(|(a, m)| m * a * a).sum::<f64>().sqrt();
            let v = mat_vec(em, &a);
            let c = s * scale / an;
            x.iter_mut().zip(&v).for_each(|(x, v)| *x += c * v);
        }
        worst = worst.max(f.value(&x) - level);
    }
    MaximalityCertificate {
        samples: cfg.certificate_samples,
        worst_excess: worst,
        passed: worst <= cfg.certificate_tol,
    }
}

/// Samples `J(tu+v)` around `u` and reports the largest excess over `J(u)`.
pub fn maximality_certificate(f: &Functional, u: &Field, cfg: &SolverConfig) -> Result<MaximalityCertificate> {
    f.check(u)?;
    let red = Reduced::new(f);
    let level = f.value(u.values());
    let mut rng = start_rng(cfg.seed, 1 << 40);
    Ok(maximality_certificate_with(&red, u, level, cfg, &mut rng))
}

/// `max_r min_w J(rw)` over a few small radii and random unit `w ∈ X⁺`;
/// the level can not lie far below it.
fn level_floor<R: Rng>(red: &Reduced, rng: &mut R) -> f64 {
    let split = red.split();
    let np = split.n_plus();
    let dirs: Vec<Vec<f64>> = (0..32)
        .map(|k| {
            let mut c: Vec<f64> = if k == 0 {
                let mut e = vec![0.0; np];
                e[0] = 1.0;
                e
            } else {
                (0..np).map(|_| rng.sample(StandardNormal)).collect()
            };
            let n = red.plus_inner(&c, &c).sqrt();
            c.iter_mut().for_each(|x| *x /= n);
            split.synthesize_plus(&c)
        })
        .collect();
    [0.02, 0.05, 0.1]
        .iter()
        .map(|&r| {
            dirs.iter()
                .map(|w| {
                    let u: Vec<f64> = w.iter().map(|x| r * x).collect();
                    red.f.value(&u)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardy::{compute_constants, HardyWeight};
    use crate::lattice::BoxDomain;
    use crate::nonlinearity::{Power, Zero};
    use crate::spectral::{split_box, PeriodicPotential, Sign, SpectralSplit};
    use rand::Rng;

    fn split(r: usize) -> SpectralSplit {
        let d = BoxDomain::new(3, r).unwrap();
        split_box(&d, &PeriodicPotential::default_checkerboard(3, 1.0).unwrap(), None).unwrap()
    }

    #[test]
    fn small_box_ground_state() {
        let s = split(2);
        let p = Power::new(3.0).unwrap();
        let f = Functional::new(&s, &p, 0.0).unwrap();
        let r = solve_ground_state(&f, &SolverConfig::default()).unwrap();
        assert!(r.residual <= 1e-8 * (1.0 + r.l2_norm));
        assert!(r.certificate.passed, "{:?}", r.certificate);
        assert!(r.level > 0.0);
        // accepted outer steps never increase ψ
        assert!(r.outer_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    fn unit_plus(s: &SpectralSplit, k: usize) -> Field {
        let mut c = vec![0.0; s.n_plus()];
        c[k] = 1.0 / s.plus_eigenvalues()[k].sqrt();
        Field::new(s.domain().clone(), s.synthesize_plus(&c)).unwrap()
    }

    #[test]
    fn inner_scalar_problem_without_minus_space() {
        // A = −Δ + 1 > 0, so X⁻ = {0} and the inner problem is one-dimensional:
        // max ½t² − ¼t⁴Σw⁴ at t* = (Σw⁴)^{-1/2}
        let d = BoxDomain::new(3, 2).unwrap();
        let s = split_box(&d, &PeriodicPotential::constant(3, 1.0).unwrap(), None).unwrap();
        assert_eq!(s.n_minus(), 0);
        let p = Power::new(4.0).unwrap();
        let f = Functional::new(&s, &p, 0.0).unwrap();
        let w = unit_plus(&s, 0);
        let st = inner_maximize(&f, &w, None, &SolverConfig::default()).unwrap();
        let s4: f64 = w.values().iter().map(|x| x.powi(4)).sum();
        assert!((st.t - s4.powf(-0.5)).abs() <= 1e-10 * st.t);
        assert!((st.value - 0.25 / s4).abs() <= 1e-12 * st.value, "{} vs {}", st.value, 0.25 / s4);
    }

    #[test]
    fn inner_warm_start_is_a_fixed_point() {
        let s = split(2);
        let p = Power::new(4.0).unwrap();
        let f = Functional::new(&s, &p, 0.0).unwrap();
        let w = unit_plus(&s, 3);
        let cfg = SolverConfig::default();
        let cold = inner_maximize(&f, &w, None, &cfg).unwrap();
        assert!(cold.grad_norm <= cfg.inner_tol);
        assert!(cold.certificate.unwrap() <= 1e-9);
        // the maximum over ℝ⁺w ⊕ X⁻ is at least the maximum along ℝ⁺w
        let line = (1..4000)
            .map(|k| f.value(&w.scaled(k as f64 * 1e-3).unwrap().into_values()))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(cold.value >= line - 1e-12);
        let warm = inner_maximize(&f, &w, Some(&cold), &cfg).unwrap();
        assert!(warm.iterations <= 2);
        assert!((warm.t - cold.t).abs() <= 1e-10);
        assert!(warm.a.iter().zip(&cold.a).all(|(x, y)| (x - y).abs() <= 1e-10));
        // v stays in X⁻
        let v = cold.minus_part(&s).unwrap();
        let leak = s.project(&v, Sign::Plus).unwrap().norm2();
        assert!(leak <= 1e-10);
    }

    #[test]
    fn inner_rejects_non_unit_or_mixed_directions() {
        let s = split(2);
        let p = Power::new(4.0).unwrap();
        let f = Functional::new(&s, &p, 0.0).unwrap();
        let cfg = SolverConfig::default();
        let w = unit_plus(&s, 0).scaled(2.0).unwrap();
        assert!(matches!(inner_maximize(&f, &w, None, &cfg), Err(Error::InvalidInput(_))));
        let minus: Vec<f64> = s.minus_basis().col(0).iter().copied().collect();
        let mixed = unit_plus(&s, 0)
            .combine(1.0, &Field::new(s.domain().clone(), minus).unwrap(), 0.1)
            .unwrap();
        assert!(matches!(inner_maximize(&f, &mixed, None, &cfg), Err(Error::NotInPositiveSubspace(_))));
    }

    #[test]
    fn polish_is_idle_at_a_solution_and_quadratic_nearby() {
        let s = split(2);
        let p = Power::new(4.0).unwrap();
        let f = Functional::new(&s, &p, 0.0).unwrap();
        let cfg = SolverConfig::default();
        let r = solve_ground_state(&f, &cfg).unwrap();
        let again = polish_newton(&f, &r.field, &cfg).unwrap();
        assert_eq!(again.iterations, 0);
        assert_eq!(again.field, r.field);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bumped = Field::from_fn(s.domain(), |x| r.field.at(x) + 1e-2 * (rng.gen::<f64>() - 0.5)).unwrap();
        let loose = SolverConfig {
            polish_entry: 1.0,
            ..cfg
        };
        let out = polish_newton(&f, &bumped, &loose).unwrap();
        let h = &out.history;
        assert!(h.len() >= 3, "{h:?}");
        // r_{k+1} ≤ C r_k² while r_k is well above rounding level
        for w in h.windows(2).filter(|w| w[0] > 1e-7) {
            assert!(w[1] <= 100.0 * w[0] * w[0], "{h:?}");
        }
        assert!((f.value(out.field.values()) - r.level).abs() <= 1e-10);
    }

    #[test]
    fn power_level_identity() {
        let s = split(2);
        let p = Power::new(4.0).unwrap();
        let f = Functional::new(&s, &p, 0.0).unwrap();
        let r = solve_ground_state(&f, &SolverConfig::default()).unwrap();
        let lp = crate::lattice::lp_norm(&r.field, 4.0).unwrap().powi(4);
        assert!((r.level - 0.25 * lp).abs() <= 1e-8);
        let n = f.nehari(&r.field).unwrap();
        assert!(n.along_u.abs() <= 1e-8 * (1.0 + r.l2_norm * r.l2_norm));
        assert!(n.along_minus <= 1e-8);
        assert!(r.floor > 0.0 && r.level >= 0.5 * r.floor);
    }

    #[test]
    fn multistart_flags_distinct_levels() {
        let s = split(4);
        let p = Power::new(4.0).unwrap();
        let f = Functional::new(&s, &p, 0.0).unwrap();
        let cfg = SolverConfig {
            multistart: 5,
            localized_starts: false,
            ..Default::default()
        };
        let r = solve_ground_state(&f, &cfg).unwrap();
        let levels: Vec<f64> = r.candidates.iter().filter_map(|c| c.level).collect();
        assert_eq!(levels.len(), 6);
        let agree = levels.iter().all(|l| (l - r.level).abs() <= 1e-6 * r.level);
        assert_eq!(r.distinct_levels, !agree);
        assert!(levels.iter().all(|l| *l >= r.level - LEVEL_TIE));
        assert!(r.translation_spread.is_finite());
    }

    #[test]
    fn same_seed_same_answer() {
        let s = split(2);
        let p = Power::new(4.0).unwrap();
        let f = Functional::new(&s, &p, 0.0).unwrap();
        let cfg = SolverConfig {
            seed: 11,
            ..Default::default()
        };
        let a = solve_ground_state(&f, &cfg).unwrap();
        let b = solve_ground_state(&f, &cfg).unwrap();
        assert_eq!(a.field, b.field);
        assert_eq!(a.level.to_bits(), b.level.to_bits());
    }

    #[test]
    fn torus_refuses_hardy_term() {
        let d = BoxDomain::torus(3, 4).unwrap();
        let s = split_box(&d, &PeriodicPotential::default_checkerboard(3, 1.0).unwrap(), None).unwrap();
        let p = Power::new(4.0).unwrap();
        let f = Functional::new(&s, &p, 0.01).unwrap();
        assert!(matches!(solve_ground_state(&f, &SolverConfig::default()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn zero_nonlinearity_is_degenerate() {
        let s = split(2);
        let f = Functional::new(&s, &Zero, 0.0).unwrap();
        let e = solve_ground_state(&f, &SolverConfig::default()).unwrap_err();
        assert!(matches!(e, Error::Degenerate(_)), "{e}");
    }

    #[test]
    fn rho_range_is_enforced() {
        let s = split(2);
        let p = Power::new(3.0).unwrap();
        let f = Functional::new(&s, &p, 0.05).unwrap();
        assert!(matches!(solve_ground_state(&f, &SolverConfig::default()), Err(Error::InvalidInput(_))));
        let k = compute_constants(&s, HardyWeight::Euclidean).unwrap();
        let max = k.constants.rho_max;
        let f = Functional::new(&s, &p, 0.95 * max).unwrap().with_constants(&k.constants);
        assert!(matches!(
            solve_ground_state(&f, &SolverConfig::default()),
            Err(Error::RhoOutOfRange { .. })
        ));
    }
}
