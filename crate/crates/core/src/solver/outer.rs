//! Outer problem: minimize `ψ(w) = max J(tw + v)` over unit `w ∈ X⁺`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::config::SolverConfig;
use super::inner::{InnerMaxState, Reduced};
use crate::energy::Functional;
use crate::error::{Error, Result};
use crate::lattice::{Field, Site};
use crate::linalg::{mat_t_vec, norm};

/// One line of the iteration log.
#[derive(Clone, Debug, Serialize)]
pub struct LogRecord {
    pub iter: usize,
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub level: f64,
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub residual_full: f64,
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub residual_minus: f64,
    #[serde(serialize_with = "crate::format::ser_f64")]
    pub t: f64,
}

#[derive(Clone, Debug)]
pub struct OuterRun {
    pub state: InnerMaxState,
    /// `ψ` at the accepted iterates.
    pub trace: Vec<f64>,
    pub log: Vec<LogRecord>,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

impl OuterRun {
    pub fn field(&self, f: &Functional) -> Result<Field> {
        self.state.field(f.split())
    }
}

/// Where a multistart run begins.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum StartKind {
    LowestEigenvector,
    Random(u64),
    Localized(String),
    Warm,
}

/// Riemannian descent on the unit sphere of `X⁺` (equivalent norm), with
/// Barzilai–Borwein steps and Armijo backtracking.
pub(crate) fn descend<R: Rng>(
    red: &Reduced,
    c0: Vec<f64>,
    warm: Option<(f64, Vec<f64>)>,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<OuterRun> {
    let f = red.f;
    let split = red.split();
    let ep = split.plus_basis();
    let em = split.minus_basis();
    let mut c = c0;
    red.normalize_plus(&mut c)?;
    let mut st = red.maximize(&c, warm.as_ref().map(|(t, a)| (*t, a.as_slice())), cfg)?;
    let mut trace = vec![st.value];
    let mut log = Vec::new();
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut alpha_prev = f64::NAN;
    let mut converged = false;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut certified = false;

    for k in 0..=cfg.max_outer {
        iterations = k;
        let u = st.field(split)?;
        let g = f.gradient_raw(u.values());
        residual = norm(&g);
        let minus = if em.ncols() == 0 { 0.0 } else { norm(&mat_t_vec(em, &g)) };
        log.push(LogRecord {
            iter: k,
            level: st.value,
            residual_full: residual,
            residual_minus: minus,
            t: st.t,
        });
        if residual <= cfg.outer_tol {
            if !certified {
                // confirm the inner maximum before stopping
                st = red.maximize_certified(&c, Some((st.t, &st.a)), cfg, rng)?;
                certified = true;
                if st.value < *trace.last().unwrap() - 1e-12 * (1.0 + st.value.abs()) {
                    trace.push(st.value);
                    continue;
                }
            }
            converged = true;
            break;
        }
        if k == cfg.max_outer {
            break;
        }
        // Riemannian gradient in the equivalent metric
        let gp = mat_t_vec(ep, &g);
        let mut gamma: Vec<f64> = gp
            .iter()
            .zip(red.lp.iter())
            .map(|(g, l)| st.t * g / l)
            .collect();
        let along = red.plus_inner(&gamma, &c);
        gamma.iter_mut().zip(&c).for_each(|(g, c)| *g -= along * c);
        let gn = red.plus_inner(&gamma, &gamma).sqrt();
        if !(gn > 0.0) {
            break;
        }
        let mut alpha = match &prev {
            Some((cp, gp)) => {
                let s: Vec<f64> = c.iter().zip(cp).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = gamma.iter().zip(gp).map(|(a, b)| a - b).collect();
                let sy = red.plus_inner(&s, &y);
                let ss = red.plus_inner(&s, &s);
                if sy > 0.0 && (ss / sy).is_finite() {
                    ss / sy
                } else {
                    2.0 * alpha_prev
                }
            }
            None => 0.2 / gn,
        };
        alpha = alpha.min(0.5 / gn);
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let mut trial: Vec<f64> = c.iter().zip(&gamma).map(|(c, g)| c - alpha * g).collect();
            red.normalize_plus(&mut trial)?;
            match red.maximize(&trial, Some((st.t, &st.a)), cfg) {
                Ok(next) if next.value <= st.value - cfg.armijo * alpha * gn * gn => {
                    accepted = Some((trial, next));
                    break;
                }
                Ok(_) | Err(Error::IterationCap { .. }) => alpha *= cfg.backtrack,
                Err(e) => return Err(e),
            }
        }
        let Some((trial, next)) = accepted else {
            // ψ cannot be decreased at this precision
            break;
        };
        prev = Some((c, gamma));
        alpha_prev = alpha;
        c = trial;
        st = next;
        certified = false;
        trace.push(st.value);
    }
    if !certified {
        st = red.maximize_certified(&c, Some((st.t, &st.a)), cfg, rng)?;
        let g = f.gradient_raw(st.field(split)?.values());
        residual = norm(&g);
    }
    if !converged && residual > cfg.polish_entry {
        return Err(Error::IterationCap {
            stage: "outer minimization",
            cap: cfg.max_outer,
            residual,
        });
    }
    Ok(OuterRun {
        state: st,
        trace,
        log,
        iterations,
        converged,
        residual,
    })
}

/// Runs the descent from a given field: its `X⁺` part fixes `w`, its `X⁻`
/// part seeds `v`.
pub fn outer_minimize(f: &Functional, start: &Field, cfg: &SolverConfig) -> Result<OuterRun> {
    f.check(start)?;
    cfg.validate()?;
    let red = Reduced::new(f);
    let (c, warm) = warm_coordinates(&red, start.values())?;
    let mut rng = super::start_rng(cfg.seed, 0);
    descend(&red, c, warm, cfg, &mut rng)
}

type WarmInner = Option<(f64, Vec<f64>)>;

/// `(w, (t, a))` with `u = tw + E₋a`.
pub(crate) fn warm_coordinates(red: &Reduced, u: &[f64]) -> Result<(Vec<f64>, WarmInner)> {
    let split = red.split();
    let mut c = split.plus_coefficients(u);
    let t = red.plus_inner(&c, &c).sqrt();
    if !(t > 1e-300) {
        return Err(Error::Degenerate("start has no positive component".into()));
    }
    c.iter_mut().for_each(|x| *x /= t);
    let a = split.minus_coefficients(u);
    Ok((c, Some((t, a))))
}

/// Starting coefficient vectors for the multistart.
pub(crate) fn starts(red: &Reduced, cfg: &SolverConfig) -> Vec<(StartKind, Vec<f64>)> {
    let split = red.split();
    let np = split.n_plus();
    let mut out = Vec::new();
    let mut lowest = vec![0.0; np];
    lowest[0] = 1.0;
    out.push((StartKind::LowestEigenvector, lowest));
    for k in 0..cfg.multistart {
        let mut rng = super::start_rng(cfg.seed, k as u64 + 1);
        let c: Vec<f64> = (0..np).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        out.push((StartKind::Random(k as u64), c));
    }
    if cfg.localized_starts {
        let domain = split.domain();
        if !domain.is_periodic() {
            let n = domain.dim();
            let r = domain.upper();
            let mut seen: Vec<Vec<i64>> = Vec::new();
            for k in 0..=n {
                let mut x = vec![0i64; n];
                x[..k].iter_mut().for_each(|v| *v = r);
                let mut partner = x.clone();
                partner[n - 1] = if partner[n - 1] == 0 { 1 } else { partner[n - 1] - 1 };
                for site in [x, partner] {
                    if seen.contains(&site) {
                        continue;
                    }
                    seen.push(site.clone());
                    let idx = domain.index_of(&site).expect("site inside the box");
                    let mut delta = vec![0.0; domain.len()];
                    delta[idx] = 1.0;
                    let c = split.plus_coefficients(&delta);
                    if norm(&c) > 1e-8 {
                        out.push((StartKind::Localized(Site(site).to_string()), c));
                    }
                }
            }
        }
    }
    out
}
