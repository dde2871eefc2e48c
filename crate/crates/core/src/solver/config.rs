use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Inner stop: dual-metric norm of the `(t, v)` gradient.
    pub inner_tol: f64,
    /// Outer stop: `‖J'(tw+v)‖₂`.
    pub outer_tol: f64,
    /// Final stop: `‖J'(u)‖₂ ≤ polish_tol·(1+‖u‖₂)`.
    pub polish_tol: f64,
    /// Largest `‖J'(u₀)‖₂` from which polishing is attempted.
    pub polish_entry: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub max_polish: usize,
    /// Sufficient-decrease constant of the backtracking line searches.
    pub armijo: f64,
    /// Step shrink factor on a rejected trial.
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Inner gradient norm below which Newton steps are tried.
    pub newton_switch: f64,
    /// Initial inner trust radius in the equivalent norm.
    pub trust_radius: f64,
    /// Number of random unit starts in `X⁺`.
    pub multistart: usize,
    /// Also start from fields concentrated at the centre, faces, edges and
    /// corners of the box.
    pub localized_starts: bool,
    pub seed: u64,
    /// Random perturbations used by the inner optimality check.
    pub inner_certificate_samples: usize,
    /// Random `(t, v)` used by the maximality check at the ground state.
    pub certificate_samples: usize,
    /// Accepted excess `J(tu+v) − J(u)` in the maximality check.
    pub certificate_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            inner_tol: 1e-10,
            outer_tol: 1e-6,
            polish_tol: 1e-8,
            polish_entry: 1e-2,
            max_inner: 500,
            max_outer: 300,
            max_polish: 30,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            newton_switch: 1e-3,
            trust_radius: 10.0,
            multistart: 4,
            localized_starts: true,
            seed: 0,
            inner_certificate_samples: 50,
            certificate_samples: 200,
            certificate_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("inner_tol", self.inner_tol),
            ("outer_tol", self.outer_tol),
            ("polish_tol", self.polish_tol),
            ("polish_entry", self.polish_entry),
            ("armijo", self.armijo),
            ("newton_switch", self.newton_switch),
            ("trust_radius", self.trust_radius),
            ("certificate_tol", self.certificate_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("solver.{name} must be positive, got {v}")));
            }
        }
        if self.inner_tol > self.outer_tol {
            return Err(Error::Config(format!(
                "solver.inner_tol ({}) must not exceed solver.outer_tol ({})",
                self.inner_tol, self.outer_tol
            )));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::Config("solver.backtrack must lie in (0, 1)".into()));
        }
        if self.armijo >= 0.5 {
            return Err(Error::Config("solver.armijo must be below 0.5".into()));
        }
        if self.max_inner == 0 || self.max_outer == 0 || self.max_polish == 0 {
            return Err(Error::Config("iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}
