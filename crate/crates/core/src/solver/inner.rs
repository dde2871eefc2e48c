//! Inner problem: for a unit direction `w ∈ X⁺`, maximize
//! `J(tw + v)` over `t ≥ 0` and `v ∈ X⁻`.
//!
//! Coordinates are `(t, a)` with `v = E₋a`. Since `‖w‖ = 1` and `w ⊥ X⁻`,
//!
//! ```text
//! J(t, a) = ½t² − ½ Σ |λ₋| a² − H(tw + E₋a),   H(u) = ½ρΣwu² + ΣF(u)
//! ```

use faer::MatRef;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::config::SolverConfig;
use crate::energy::Functional;
use crate::error::{Error, Result};
use crate::lattice::Field;
use crate::linalg::{axpy, cg, dot, mat_t_vec, mat_vec, norm};
use crate::spectral::{Sign, SpectralSplit};

/// Result of the inner maximization.
#[derive(Clone, Debug, Serialize)]
pub struct InnerMaxState {
    /// Coefficients of `w` in the positive eigenbasis; `Σ λᵢ wᵢ² = 1`.
    #[serde(skip)]
    pub w: Vec<f64>,
    pub t: f64,
    /// Coefficients of `v` in the negative eigenbasis.
    #[serde(skip)]
    pub a: Vec<f64>,
    pub value: f64,
    /// Dual-metric norm of `(∂J/∂t, ∂J/∂a)`.
    pub grad_norm: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    /// Largest `J(t'w+v') − J(tw+v)` seen by the perturbation check, if run.
    pub certificate: Option<f64>,
}

impl InnerMaxState {
    pub fn direction(&self, split: &SpectralSplit) -> Result<Field> {
        Field::new(split.domain().clone(), split.synthesize_plus(&self.w))
    }

    pub fn minus_part(&self, split: &SpectralSplit) -> Result<Field> {
        Field::new(split.domain().clone(), split.synthesize_minus(&self.a))
    }

    /// `tw + v`.
    pub fn field(&self, split: &SpectralSplit) -> Result<Field> {
        let mut u = split.synthesize_plus(&self.w);
        u.iter_mut().for_each(|x| *x *= self.t);
        axpy(1.0, &split.synthesize_minus(&self.a), &mut u);
        Field::new(split.domain().clone(), u)
    }
}

/// Precomputed pieces of the reduced problem.
pub(crate) struct Reduced<'f, 'a> {
    pub f: &'f Functional<'a>,
    /// `|λ|` on `X⁻`.
    pub mu: Vec<f64>,
    /// `λ` on `X⁺`.
    pub lp: Vec<f64>,
}

impl<'f, 'a> Reduced<'f, 'a> {
    pub fn new(f: &'f Functional<'a>) -> Self {
        let s = f.split();
        Self {
            f,
            mu: s.minus_eigenvalues().iter().map(|l| -l).collect(),
            lp: s.plus_eigenvalues().to_vec(),
        }
    }

    pub fn split(&self) -> &'a SpectralSplit {
        self.f.split()
    }

    fn em(&self) -> MatRef<'a, f64> {
        self.split().minus_basis()
    }

    /// `Σ λᵢ xᵢ yᵢ` on `X⁺` coefficients.
    pub fn plus_inner(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).zip(&self.lp).map(|((a, b), l)| l * a * b).sum()
    }

    pub fn normalize_plus(&self, c: &mut [f64]) -> Result<()> {
        let n = self.plus_inner(c, c).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Degenerate("direction has no positive component".into()));
        }
        c.iter_mut().for_each(|x| *x /= n);
        Ok(())
    }

    fn compose(&self, wf: &[f64], t: f64, a: &[f64]) -> Vec<f64> {
        let mut u = if a.is_empty() {
            vec![0.0; wf.len()]
        } else {
            mat_vec(self.em(), a)
        };
        axpy(t, wf, &mut u);
        u
    }

    fn value(&self, wf: &[f64], t: f64, a: &[f64]) -> (f64, Vec<f64>) {
        let u = self.compose(wf, t, a);
        let quad = 0.5 * t * t - 0.5 * a.iter().zip(&self.mu).map(|(x, m)| m * x * x).sum::<f64>();
        let v = quad - self.f.hardy_energy(&u) - self.f.nonlinear_energy(&u);
        (v, u)
    }

    fn gradient(&self, u: &[f64], wf: &[f64], t: f64, a: &[f64]) -> (f64, Vec<f64>, f64) {
        let r = self.f.reaction(u);
        let gt = t - dot(&r, wf);
        let er = if a.is_empty() { Vec::new() } else { mat_t_vec(self.em(), &r) };
        let ga: Vec<f64> = a
            .iter()
            .zip(&self.mu)
            .zip(&er)
            .map(|((x, m), e)| -m * x - e)
            .collect();
        let gn = (gt * gt + ga.iter().zip(&self.mu).map(|(g, m)| g * g / m).sum::<f64>()).sqrt();
        (gt, ga, gn)
    }

    /// Newton direction from the Schur complement of the Hessian
    /// `[[1 − wᵀDw, bᵀ], [b, −K]]`, `K = diag|λ₋| + E₋ᵀDE₋`. `None` when the
    /// Hessian is not negative definite or the `K` solves fail.
    fn newton_direction(&self, u: &[f64], wf: &[f64], gt: f64, ga: &[f64]) -> Option<(f64, Vec<f64>)> {
        let f = self.f;
        let w = f.weights();
        let df = f.df_values(u);
        let d: Vec<f64> = df.iter().zip(w).map(|(df, w)| f.rho() * w + df).collect();
        let dw: Vec<f64> = d.iter().zip(wf).map(|(d, w)| d * w).collect();
        let h = 1.0 - dot(wf, &dw);
        if self.mu.is_empty() {
            return (h < 0.0).then(|| (-gt / h, Vec::new()));
        }
        let em = self.em();
        let b: Vec<f64> = mat_t_vec(em, &dw).iter().map(|x| -x).collect();
        let mut diag = self.mu.clone();
        for (j, dj) in diag.iter_mut().enumerate() {
            let col = em.col(j);
            let mut acc = 0.0;
            for (i, di) in d.iter().enumerate() {
                let e = col[i];
                acc += e * e * di;
            }
            *dj += acc;
        }
        if diag.iter().any(|x| !(*x > 0.0)) {
            return None;
        }
        let apply = |x: &[f64], y: &mut [f64]| {
            let ex = mat_vec(em, x);
            let dex: Vec<f64> = ex.iter().zip(&d).map(|(a, b)| a * b).collect();
            let back = mat_t_vec(em, &dex);
            for i in 0..x.len() {
                y[i] = self.mu[i] * x[i] + back[i];
            }
        };
        let cap = 10 * self.mu.len() + 50;
        let z1 = cg(apply, ga, None, Some(&diag), 1e-13, cap);
        let z2 = cg(apply, &b, None, Some(&diag), 1e-13, cap);
        if z1.residual > 1e-9 || z2.residual > 1e-9 {
            return None;
        }
        let s = h + dot(&b, &z2.x);
        if !(s < 0.0) {
            return None;
        }
        let dt = -(gt + dot(&b, &z1.x)) / s;
        let mut da = z1.x;
        axpy(dt, &z2.x, &mut da);
        Some((dt, da))
    }

    /// Maximizer of `t ↦ J(tw)` for `t > 0`.
    fn line_max(&self, wf: &[f64]) -> Result<f64> {
        let dphi = |t: f64| {
            let u: Vec<f64> = wf.iter().map(|x| t * x).collect();
            t - dot(&self.f.reaction(&u), wf)
        };
        let small = 1e-6;
        if dphi(small) <= 0.0 {
            return Err(Error::Degenerate(
                "no nontrivial critical point: t collapses to 0 along this direction".into(),
            ));
        }
        let mut lo = small;
        let mut hi = 1.0;
        while dphi(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Degenerate(
                    "no nontrivial critical point: the energy is unbounded along ℝ⁺w".into(),
                ));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dphi(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Maximizes over `(t, a)` for the direction with coefficients `c`
    /// (already unit). `warm` supplies a starting `(t, a)`.
    pub fn maximize(
        &self,
        c: &[f64],
        warm: Option<(f64, &[f64])>,
        cfg: &SolverConfig,
    ) -> Result<InnerMaxState> {
        let wf = self.split().synthesize_plus(c);
        let (mut t, mut a) = match warm {
            Some((t, a)) if t > 0.0 && a.len() == self.mu.len() => (t, a.to_vec()),
            _ => (self.line_max(&wf)?, vec![0.0; self.mu.len()]),
        };
        let (mut val, mut u) = self.value(&wf, t, &a);
        let mut delta = cfg.trust_radius;
        let mut newton_steps = 0;
        for it in 0..cfg.max_inner {
            let (gt, ga, gn) = self.gradient(&u, &wf, t, &a);
            if gn <= cfg.inner_tol {
                return Ok(InnerMaxState {
                    w: c.to_vec(),
                    t,
                    a,
                    value: val,
                    grad_norm: gn,
                    iterations: it,
                    newton_steps,
                    certificate: None,
                });
            }
            let mut accepted = false;
            if gn <= cfg.newton_switch {
                if let Some((dt, da)) = self.newton_direction(&u, &wf, gt, &ga) {
                    let len = (dt * dt + da.iter().zip(&self.mu).map(|(x, m)| m * x * x).sum::<f64>()).sqrt();
                    let mut s = 1.0;
                    let mut hit = false;
                    if len > delta {
                        s = delta / len;
                        hit = true;
                    }
                    if t + s * dt <= 0.5 * t {
                        s = 0.5 * t / dt.abs();
                    }
                    let nt = t + s * dt;
                    let mut na = a.clone();
                    axpy(s, &da, &mut na);
                    let (nval, nu) = self.value(&wf, nt, &na);
                    if nval >= val - 1e-14 * (1.0 + val.abs()) {
                        t = nt;
                        a = na;
                        val = nval;
                        u = nu;
                        accepted = true;
                        newton_steps += 1;
                        if hit {
                            delta *= 2.0;
                        }
                    } else {
                        delta = (0.25 * delta).max(1e-8);
                    }
                }
            }
            if !accepted {
                // ascent along the metric gradient (∂t, ∂a/|λ₋|)
                let da: Vec<f64> = ga.iter().zip(&self.mu).map(|(g, m)| g / m).collect();
                let mut alpha = (delta / gn).min(1.0);
                for _ in 0..cfg.max_backtracks {
                    let nt = t + alpha * gt;
                    if nt > 0.0 {
                        let mut na = a.clone();
                        axpy(alpha, &da, &mut na);
                        let (nval, nu) = self.value(&wf, nt, &na);
                        if nval >= val + cfg.armijo * alpha * gn * gn {
                            t = nt;
                            a = na;
                            val = nval;
                            u = nu;
                            accepted = true;
                            if alpha * gn >= 0.99 * delta {
                                delta *= 2.0;
                            }
                            break;
                        }
                    }
                    alpha *= cfg.backtrack;
                }
            }
            if !accepted {
                // no representable ascent left; accept if close to tolerance
                if gn <= 1e3 * cfg.inner_tol {
                    return Ok(InnerMaxState {
                        w: c.to_vec(),
                        t,
                        a,
                        value: val,
                        grad_norm: gn,
                        iterations: it,
                        newton_steps,
                        certificate: None,
                    });
                }
                return Err(Error::IterationCap {
                    stage: "inner line search",
                    cap: cfg.max_backtracks,
                    residual: gn,
                });
            }
            if delta > 1e8 || t > 1e12 {
                return Err(Error::Degenerate(
                    "no nontrivial critical point: the inner maximization is unbounded".into(),
                ));
            }
        }
        let (_, _, gn) = self.gradient(&u, &wf, t, &a);
        Err(Error::IterationCap {
            stage: "inner maximization",
            cap: cfg.max_inner,
            residual: gn,
        })
    }

    /// Random perturbations of `(t, a)` inside a metric ball of radius 2;
    /// returns the largest gain over the current value together with the
    /// perturbation achieving it.
    pub fn perturbation_check<R: Rng>(
        &self,
        st: &InnerMaxState,
        samples: usize,
        rng: &mut R,
    ) -> (f64, Option<(f64, Vec<f64>)>) {
        let wf = self.split().synthesize_plus(&st.w);
        let mut worst = f64::NEG_INFINITY;
        let mut arg = None;
        for _ in 0..samples {
            let xt: f64 = rng.sample(StandardNormal);
            let xa: Vec<f64> = self.mu.iter().map(|_| rng.sample(StandardNormal)).collect();
            let n = (xt * xt + xa.iter().map(|x| x * x).sum::<f64>()).sqrt();
            let r = 2.0 * rng.gen::<f64>();
            let nt = (st.t + r * xt / n).max(0.0);
            let na: Vec<f64> = st
                .a
                .iter()
                .zip(&xa)
                .zip(&self.mu)
                .map(|((a, x), m)| a + r * x / (n * m.sqrt()))
                .collect();
            let (v, _) = self.value(&wf, nt, &na);
            let gain = v - st.value;
            if gain > worst {
                worst = gain;
                arg = Some((nt, na));
            }
        }
        (worst, arg)
    }

    /// [`Self::maximize`] followed by the perturbation check; a perturbation
    /// that beats the incumbent restarts the ascent from it.
    pub fn maximize_certified<R: Rng>(
        &self,
        c: &[f64],
        warm: Option<(f64, &[f64])>,
        cfg: &SolverConfig,
        rng: &mut R,
    ) -> Result<InnerMaxState> {
        let mut st = self.maximize(c, warm, cfg)?;
        for _ in 0..3 {
            let (gain, arg) = self.perturbation_check(&st, cfg.inner_certificate_samples, rng);
            st.certificate = Some(gain);
            if gain <= 1e-9 * (1.0 + st.value.abs()) {
                return Ok(st);
            }
            let (t, a) = arg.expect("positive gain has a witness");
            st = self.maximize(c, Some((t, &a)), cfg)?;
        }
        let (gain, _) = self.perturbation_check(&st, cfg.inner_certificate_samples, rng);
        st.certificate = Some(gain);
        Ok(st)
    }
}

/// Maximizes `J(tw + v)` over `t ≥ 0`, `v ∈ X⁻` for a unit `w ∈ X⁺`,
/// optionally warm-started, and runs the perturbation check at the result.
pub fn inner_maximize(
    f: &Functional,
    w: &Field,
    warm: Option<&InnerMaxState>,
    cfg: &SolverConfig,
) -> Result<InnerMaxState> {
    f.check(w)?;
    let split = f.split();
    let leak = norm(&split.project_raw(w.values(), Sign::Minus));
    if leak > 1e-8 * w.norm2().max(1.0) {
        return Err(Error::NotInPositiveSubspace(leak));
    }
    let red = Reduced::new(f);
    let c = split.plus_coefficients(w.values());
    let unit = red.plus_inner(&c, &c).sqrt();
    if (unit - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidInput(format!(
            "direction must have unit equivalent norm, got {unit}"
        )));
    }
    let warm = warm.map(|s| (s.t, s.a.as_slice()));
    let mut rng = super::start_rng(cfg.seed, u64::MAX);
    red.maximize_certified(&c, warm, cfg, &mut rng)
}
