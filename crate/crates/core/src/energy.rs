//! The energy
//!
//! ```text
//! J_ρ(u) = ½‖u⁺‖² − ½‖u⁻‖² − ½ ρ Σ w u² − Σ F(x, u)
//! ```
//!
//! its ℓ² gradient `Au − ρwu − f(·,u)`, and the Nehari–Pankov residuals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::ser_f64;
use crate::hardy::{HardyWeight, InequalityConstants};
use crate::lattice::Field;
use crate::linalg::{dot, norm};
use crate::nonlinearity::Nonlinearity;
use crate::spectral::{Sign, SpectralSplit};

/// A fixed `(split, model, ρ, weight)` with the per-site data cached.
#[derive(Clone, Debug)]
pub struct Functional<'a> {
    split: &'a SpectralSplit,
    model: &'a dyn Nonlinearity,
    rho: f64,
    weight: HardyWeight,
    w: Vec<f64>,
    coords: Vec<i64>,
    rho_max: Option<f64>,
}

impl<'a> Functional<'a> {
    pub fn new(split: &'a SpectralSplit, model: &'a dyn Nonlinearity, rho: f64) -> Result<Self> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::InvalidInput(format!("ρ must be finite and ≥ 0, got {rho}")));
        }
        let d = split.domain();
        Ok(Self {
            split,
            model,
            rho,
            weight: HardyWeight::Euclidean,
            w: HardyWeight::Euclidean.weights(d),
            coords: d.coordinate_table(),
            rho_max: None,
        })
    }

    pub fn with_weight(mut self, weight: HardyWeight) -> Self {
        self.weight = weight;
        self.w = weight.weights(self.split.domain());
        self
    }

    /// Records `ρ_max` so the solver can enforce the admissible range.
    pub fn with_constants(mut self, c: &InequalityConstants) -> Self {
        self.rho_max = Some(c.rho_max);
        self
    }

    pub fn split(&self) -> &'a SpectralSplit {
        self.split
    }

    pub fn model(&self) -> &'a dyn Nonlinearity {
        self.model
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn rho_max(&self) -> Option<f64> {
        self.rho_max
    }

    pub fn weight(&self) -> HardyWeight {
        self.weight
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// The same functional at another `ρ`.
    pub fn at_rho(&self, rho: f64) -> Result<Self> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::InvalidInput(format!("ρ must be finite and ≥ 0, got {rho}")));
        }
        let mut f = self.clone();
        f.rho = rho;
        Ok(f)
    }

    #[inline]
    fn site(&self, i: usize) -> &[i64] {
        let n = self.split.domain().dim();
        &self.coords[i * n..(i + 1) * n]
    }

    pub(crate) fn check(&self, u: &Field) -> Result<()> {
        if u.domain() != self.split.domain() {
            Err(Error::DomainMismatch)
        } else {
            Ok(())
        }
    }

    /// `Σ F(x, u(x))`.
    pub fn nonlinear_energy(&self, u: &[f64]) -> f64 {
        u.iter()
            .enumerate()
            .map(|(i, &v)| self.model.primitive(self.site(i), v))
            .sum()
    }

    /// `½ ρ Σ w u²`.
    pub fn hardy_energy(&self, u: &[f64]) -> f64 {
        if self.rho == 0.0 {
            return 0.0;
        }
        0.5 * self.rho * u.iter().zip(&self.w).map(|(v, w)| w * v * v).sum::<f64>()
    }

    pub fn f_values(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &v)| self.model.f(self.site(i), v))
            .collect()
    }

    pub fn df_values(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &v)| self.model.df(self.site(i), v))
            .collect()
    }

    /// `J_ρ(u)` using the sparse operator for the quadratic part.
    pub fn value(&self, u: &[f64]) -> f64 {
        0.5 * self.split.operator().quadratic(u) - self.hardy_energy(u) - self.nonlinear_energy(u)
    }

    /// `ρ w u + f(·, u)`, the part of the gradient that is not `Au`.
    pub fn reaction(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &v)| self.rho * self.w[i] * v + self.model.f(self.site(i), v))
            .collect()
    }

    /// `ℓ²` gradient `Au − ρwu − f(·,u)`.
    pub fn gradient_raw(&self, u: &[f64]) -> Vec<f64> {
        let mut g = self.split.operator().apply(u);
        for (gi, r) in g.iter_mut().zip(self.reaction(u)) {
            *gi -= r;
        }
        g
    }

    /// `Σ G(x,u)`, `G = ½ f u − F`.
    pub fn sum_g(&self, u: &[f64]) -> f64 {
        u.iter()
            .enumerate()
            .map(|(i, &v)| {
                let x = self.site(i);
                0.5 * self.model.f(x, v) * v - self.model.primitive(x, v)
            })
            .sum()
    }

    pub fn report(&self, u: &Field) -> Result<EnergyReport> {
        self.check(u)?;
        let v = u.values();
        let c = self.split.coefficients(v);
        let quadratic = 0.5
            * c.iter()
                .zip(self.split.eigenvalues())
                .map(|(c, l)| l * c * c)
                .sum::<f64>();
        let hardy = self.hardy_energy(v);
        let nonlinear = self.nonlinear_energy(v);
        Ok(EnergyReport {
            value: quadratic - hardy - nonlinear,
            quadratic,
            hardy,
            nonlinear,
        })
    }

    pub fn gradient(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        Field::new(u.domain().clone(), self.gradient_raw(u.values()))
    }

    pub fn nehari(&self, u: &Field) -> Result<NehariResidual> {
        self.check(u)?;
        Ok(self.nehari_raw(u.values()))
    }

    pub(crate) fn nehari_raw(&self, u: &[f64]) -> NehariResidual {
        let g = self.gradient_raw(u);
        let pg = self.split.minus_coefficients(&g);
        NehariResidual {
            along_u: dot(&g, u),
            along_minus: norm(&pg),
            full: norm(&g),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    #[serde(serialize_with = "ser_f64")]
    pub value: f64,
    /// `½‖u⁺‖² − ½‖u⁻‖²`.
    #[serde(serialize_with = "ser_f64")]
    pub quadratic: f64,
    /// `½ ρ Σ w u²`.
    #[serde(serialize_with = "ser_f64")]
    pub hardy: f64,
    /// `Σ F(x,u)`.
    #[serde(serialize_with = "ser_f64")]
    pub nonlinear: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NehariResidual {
    /// `⟨J'(u), u⟩`.
    #[serde(serialize_with = "ser_f64")]
    pub along_u: f64,
    /// `‖P J'(u)‖₂`.
    #[serde(serialize_with = "ser_f64")]
    pub along_minus: f64,
    /// `‖J'(u)‖₂`.
    #[serde(serialize_with = "ser_f64")]
    pub full: f64,
}

impl NehariResidual {
    /// Membership test with the tolerance convention `≤ tol·(1+‖u‖₂²)` for
    /// the pairing with `u` and `≤ tol` for the `X⁻` component.
    pub fn satisfied(&self, tol: f64, u_l2: f64) -> bool {
        self.along_u.abs() <= tol * (1.0 + u_l2 * u_l2) && self.along_minus <= tol
    }
}

pub fn evaluate_energy(
    split: &SpectralSplit,
    model: &dyn Nonlinearity,
    u: &Field,
    rho: f64,
) -> Result<EnergyReport> {
    Functional::new(split, model, rho)?.report(u)
}

pub fn gradient(split: &SpectralSplit, model: &dyn Nonlinearity, u: &Field, rho: f64) -> Result<Field> {
    Functional::new(split, model, rho)?.gradient(u)
}

pub fn nehari_residual(
    split: &SpectralSplit,
    model: &dyn Nonlinearity,
    u: &Field,
    rho: f64,
) -> Result<NehariResidual> {
    Functional::new(split, model, rho)?.nehari(u)
}

/// `‖u‖²_ρ = ‖u‖² − ρ Σ w u²` for `u ∈ X⁺` and `0 ≤ ρ < ρ⁺/κ`.
pub fn rho_norm_plus(
    split: &SpectralSplit,
    u_plus: &Field,
    rho: f64,
    constants: &InequalityConstants,
) -> Result<f64> {
    if u_plus.domain() != split.domain() {
        return Err(Error::DomainMismatch);
    }
    let limit = constants.rho_plus / constants.kappa;
    if !(rho >= 0.0) || rho >= limit {
        return Err(Error::RhoOutOfRange { rho, limit });
    }
    let leak = split.project(u_plus, Sign::Minus)?.norm2();
    if leak > 1e-10 * u_plus.norm2().max(1.0) {
        return Err(Error::NotInPositiveSubspace(leak));
    }
    Ok(split.norm_sq(u_plus)? - crate::hardy::weighted_mass(u_plus, rho)?)
}
