use faer::linalg::solvers::Solve;
use faer::Col;
use serde::Serialize;

use super::config::SolverConfig;
use crate::energy::Functional;
use crate::error::{Error, Result};
use crate::lattice::Field;
use crate::linalg::{mat_vec, norm};

/// Consecutive steps without residual decrease before giving up.
const MAX_STALLS: usize = 10;

#[derive(Clone, Debug, Serialize)]
pub struct PolishOutcome {
    #[serde(skip)]
    pub field: Field,
    pub iterations: usize,
    /// `‖J'(u)‖₂` before each step and at the end.
    #[serde(serialize_with = "crate::format::ser_vec_f64")]
    pub history: Vec<f64>,
}

impl PolishOutcome {
    pub fn residual(&self) -> f64 {
        *self.history.last().expect("history is never empty")
    }
}

/// Damped Newton on `J'(u) = 0` with the dense Jacobian
/// `A − diag(ρw + ∂ᵤf)`.
pub fn polish_newton(f: &Functional, u0: &Field, cfg: &SolverConfig) -> Result<PolishOutcome> {
    f.check(u0)?;
    let a = f.split().operator().to_dense();
    let w = f.weights();
    let mut u = u0.values().to_vec();
    let mut g = f.gradient_raw(&u);
    let mut r = norm(&g);
    let mut history = vec![r];
    if !r.is_finite() || r > cfg.polish_entry {
        return Err(Error::Numerical(format!(
            "polishing needs a residual below {:.3e}, got {r:.3e}",
            cfg.polish_entry
        )));
    }
    let mut stalls = 0;
    for it in 0..cfg.max_polish {
        if r <= cfg.polish_tol * (1.0 + norm(&u)) {
            return Ok(PolishOutcome {
                field: Field::new(u0.domain().clone(), u)?,
                iterations: it,
                history,
            });
        }
        let df = f.df_values(&u);
        let mut jac = a.clone();
        for i in 0..u.len() {
            jac[(i, i)] -= f.rho() * w[i] + df[i];
        }
        let rhs = Col::from_fn(g.len(), |i| -g[i]);
        let step = jac.partial_piv_lu().solve(&rhs);
        let step: Vec<f64> = step.iter().copied().collect();
        let check = {
            let mut j = mat_vec(jac.as_ref(), &step);
            j.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            norm(&j)
        };
        if step.iter().any(|x| !x.is_finite()) || check > 1e-6 * r {
            return Err(Error::Singular {
                what: "Newton Jacobian",
                detail: format!("linear residual {check:.3e} at ‖J'‖ = {r:.3e}"),
            });
        }
        let mut alpha = 1.0;
        let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
        for _ in 0..30 {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(u, s)| u + alpha * s).collect();
            let gt = f.gradient_raw(&trial);
            let rt = norm(&gt);
            if rt < r {
                best = Some((trial, gt, rt));
                break;
            }
            if best.as_ref().is_none_or(|b| rt < b.2) {
                best = Some((trial, gt, rt));
            }
            alpha *= 0.5;
        }
        let (nu, ng, nr) = best.expect("at least one trial");
        if nr < r {
            stalls = 0;
        } else {
            stalls += 1;
            if stalls >= MAX_STALLS {
                return Err(Error::Divergence(MAX_STALLS));
            }
        }
        u = nu;
        g = ng;
        r = nr;
        history.push(r);
    }
    if r <= cfg.polish_tol * (1.0 + norm(&u)) {
        return Ok(PolishOutcome {
            field: Field::new(u0.domain().clone(), u)?,
            iterations: cfg.max_polish,
            history,
        });
    }
    Err(Error::IterationCap {
        stage: "Newton polishing",
        cap: cfg.max_polish,
        residual: r,
    })
}
