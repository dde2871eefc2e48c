//! TOML run configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::continuation::SweepThresholds;
use crate::error::{Error, Result};
use crate::hardy::HardyWeight;
use crate::lattice::{Boundary, BoxDomain};
use crate::nonlinearity::{Nonlinearity, Power, Saturable};
use crate::solver::SolverConfig;
use crate::spectral::{PeriodicPotential, DENSE_SITE_BUDGET};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    /// `c(−1)^{x₁+…+x_N} + shift`.
    Checkerboard,
    /// `amplitude + shift`.
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: PotentialKind,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Defaults to `−2N` for the checkerboard and 0 for a constant.
    pub shift: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NonlinearityKind {
    Power,
    Saturable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub kind: NonlinearityKind,
    pub p: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardyConfig {
    pub weight: HardyWeight,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RhoConfig {
    /// Absolute `ρ` for `solve`.
    pub solve: Option<f64>,
    /// `ρ` for `solve` as a fraction of `ρ_max`.
    pub solve_fraction: Option<f64>,
    /// Absolute descending sweep values (a trailing 0 is added).
    pub sweep: Option<Vec<f64>>,
    /// Sweep values as fractions of `ρ_max`, used when `sweep` is absent.
    pub sweep_fractions: Vec<f64>,
}

impl Default for RhoConfig {
    fn default() -> Self {
        Self {
            solve: None,
            solve_fraction: None,
            sweep: None,
            sweep_fractions: vec![0.4, 0.2, 0.1, 0.05],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlochConfig {
    /// k-points per axis.
    pub grid: usize,
}

impl Default for BlochConfig {
    fn default() -> Self {
        Self { grid: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub radius: usize,
    #[serde(default = "dirichlet")]
    pub boundary: Boundary,
    /// Torus side length, required for periodic boundaries.
    pub side: Option<usize>,
    pub potential: PotentialConfig,
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub hardy: HardyConfig,
    #[serde(default)]
    pub rho: RhoConfig,
    #[serde(default)]
    pub bloch: BlochConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sweep: SweepThresholds,
    /// Output directory; `--out` takes precedence.
    pub output: Option<PathBuf>,
    /// Worker threads; `--threads` takes precedence.
    pub threads: Option<usize>,
}

fn dirichlet() -> Boundary {
    Boundary::Dirichlet
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        let sites = match self.boundary {
            Boundary::Dirichlet => {
                if self.radius < 2 {
                    return Err(Error::Config(format!("radius must be at least 2, got {}", self.radius)));
                }
                if self.side.is_some() {
                    return Err(Error::Config("side applies to periodic boundaries only".into()));
                }
                (2 * self.radius + 1) as f64
            }
            Boundary::Periodic => match self.side {
                Some(s) if s >= 2 => s as f64,
                _ => return Err(Error::Config("periodic boundaries need side ≥ 2".into())),
            },
        };
        let total = sites.powi(self.dimension as i32);
        if total > DENSE_SITE_BUDGET as f64 {
            return Err(Error::TooLarge {
                sites: total.min(usize::MAX as f64) as usize,
                budget: DENSE_SITE_BUDGET,
            });
        }
        if !self.potential.amplitude.is_finite() || self.potential.shift.is_some_and(|s| !s.is_finite()) {
            return Err(Error::Config("potential parameters must be finite".into()));
        }
        match (self.nonlinearity.kind, self.nonlinearity.p) {
            (NonlinearityKind::Power, None) => {
                return Err(Error::Config("nonlinearity.p is required for kind = \"power\"".into()))
            }
            (NonlinearityKind::Saturable, Some(_)) => {
                return Err(Error::Config("nonlinearity.p does not apply to kind = \"saturable\"".into()))
            }
            _ => {}
        }
        if self.rho.solve.is_some() && self.rho.solve_fraction.is_some() {
            return Err(Error::Config("give at most one of rho.solve and rho.solve_fraction".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        self.solver.validate()
    }

    pub fn domain(&self) -> Result<BoxDomain> {
        match self.boundary {
            Boundary::Dirichlet => BoxDomain::new(self.dimension, self.radius),
            Boundary::Periodic => BoxDomain::torus(self.dimension, self.side.unwrap_or(0)),
        }
    }

    pub fn potential(&self) -> Result<PeriodicPotential> {
        let p = &self.potential;
        match p.kind {
            PotentialKind::Checkerboard => match p.shift {
                Some(s) => PeriodicPotential::checkerboard(self.dimension, p.amplitude, s),
                None => PeriodicPotential::default_checkerboard(self.dimension, p.amplitude),
            },
            PotentialKind::Constant => {
                PeriodicPotential::constant(self.dimension, p.amplitude + p.shift.unwrap_or(0.0))
            }
        }
    }

    pub fn model(&self) -> Result<Box<dyn Nonlinearity>> {
        Ok(match self.nonlinearity.kind {
            NonlinearityKind::Power => Box::new(Power::new(self.nonlinearity.p.unwrap_or(f64::NAN))?),
            NonlinearityKind::Saturable => Box::new(Saturable),
        })
    }

    /// Identifies everything the Bloch certificate depends on.
    pub fn gap_fingerprint(&self) -> String {
        format!(
            "N={};potential={:?};amplitude={};shift={:?};grid={}",
            self.dimension, self.potential.kind, self.potential.amplitude, self.potential.shift, self.bloch.grid
        )
    }

    /// Hardy-dependent commands need `N ≥ 3`.
    pub fn require_hardy(&self) -> Result<()> {
        if self.dimension < 3 {
            return Err(Error::HardyDimension(self.dimension));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
dimension = 3
radius = 2

[potential]
kind = "checkerboard"
amplitude = 1.0

[nonlinearity]
kind = "power"
p = 4.0
"#;

    #[test]
    fn minimal_config() {
        let c = RunConfig::from_toml(BASE).unwrap();
        assert_eq!(c.boundary, Boundary::Dirichlet);
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.domain().unwrap().len(), 125);
        assert_eq!(c.potential().unwrap().value(&[0, 0, 0]), 1.0 - 6.0);
        assert_eq!(c.rho.sweep_fractions, vec![0.4, 0.2, 0.1, 0.05]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for extra in ["colour = 1", "[solver]\ninner_tol = 1e-10\nouter_toll = 1e-6", "[bloch]\ngird = 8"] {
            let text = format!("{BASE}\n{extra}\n");
            let e = RunConfig::from_toml(&text).unwrap_err();
            assert!(matches!(e, Error::Config(_)), "{extra}: {e}");
        }
        let text = BASE.replace("[potential]", "[potential]\nperiod = 2");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn invariants() {
        let small = BASE.replace("radius = 2", "radius = 1");
        assert!(RunConfig::from_toml(&small).is_err());
        let big = BASE.replace("radius = 2", "radius = 9");
        assert!(matches!(RunConfig::from_toml(&big), Err(Error::TooLarge { .. })));
        let no_p = BASE.replace("p = 4.0", "");
        assert!(RunConfig::from_toml(&no_p).is_err());
        let two_rho = format!("{BASE}\n[rho]\nsolve = 0.0\nsolve_fraction = 0.1\n");
        assert!(RunConfig::from_toml(&two_rho).is_err());
        let flat = BASE.replace("dimension = 3", "dimension = 2");
        let c = RunConfig::from_toml(&flat).unwrap();
        assert!(matches!(c.require_hardy(), Err(Error::HardyDimension(2))));
    }

    #[test]
    fn periodic_needs_side() {
        let t = BASE.replace("radius = 2", "radius = 2\nboundary = \"periodic\"");
        assert!(RunConfig::from_toml(&t).is_err());
        let t = BASE.replace("radius = 2", "radius = 2\nboundary = \"periodic\"\nside = 8");
        assert_eq!(RunConfig::from_toml(&t).unwrap().domain().unwrap().len(), 512);
    }
}
