//! Nonlinear terms `f(x, u)` with primitive `F` and derivative `∂f/∂u`, plus a
//! sampled check of the growth and superquadraticity hypotheses.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::{ser_f64, ser_opt_f64};
use crate::spectral::PeriodicPotential;

/// Constants in the growth and superquadraticity bounds
/// `|f| ≤ a(1 + |u|^{p−1})` and `f·u − 2F ≥ b|u|^q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthConstants {
    #[serde(serialize_with = "ser_f64")]
    pub a: f64,
    #[serde(serialize_with = "ser_f64")]
    pub p: f64,
    #[serde(serialize_with = "ser_f64")]
    pub b: f64,
    #[serde(serialize_with = "ser_f64")]
    pub q: f64,
}

pub trait Nonlinearity: Send + Sync + fmt::Debug {
    fn f(&self, x: &[i64], u: f64) -> f64;
    /// `F(x,u) = ∫₀^u f(x,s) ds`.
    fn primitive(&self, x: &[i64], u: f64) -> f64;
    /// `∂f/∂u`.
    fn df(&self, x: &[i64], u: f64) -> f64;
    fn constants(&self) -> GrowthConstants;
    /// Spatial period, `None` when `f` does not depend on `x`.
    fn period(&self) -> Option<&[usize]> {
        None
    }
    fn name(&self) -> String;
    /// True when `f ≡ 0`.
    fn is_zero(&self) -> bool {
        false
    }
}

/// `(f, F, ∂f/∂u)` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub f: f64,
    pub primitive: f64,
    pub df: f64,
}

pub fn evaluate(model: &dyn Nonlinearity, x: &[i64], u: f64) -> Result<Evaluation> {
    if !u.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite field value {u}")));
    }
    let e = Evaluation {
        f: model.f(x, u),
        primitive: model.primitive(x, u),
        df: model.df(x, u),
    };
    if !(e.f.is_finite() && e.primitive.is_finite() && e.df.is_finite()) {
        return Err(Error::Numerical(format!(
            "{} is not finite at u = {u}",
            model.name()
        )));
    }
    Ok(e)
}

/// `f = m(x)|u|^{p−2}u`, `F = m(x)|u|^p/p`, with an optional positive periodic
/// coefficient `m` (constant 1 by default).
#[derive(Clone, Debug)]
pub struct Power {
    p: f64,
    coefficient: Option<PeriodicPotential>,
}

impl Power {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 2.0) || !p.is_finite() {
            return Err(Error::InvalidInput(format!("power exponent must exceed 2, got {p}")));
        }
        Ok(Self { p, coefficient: None })
    }

    pub fn with_coefficient(p: f64, m: PeriodicPotential) -> Result<Self> {
        if m.cell().iter().any(|&c| !(c > 0.0)) {
            return Err(Error::InvalidInput("power coefficient must be positive".into()));
        }
        let mut s = Self::new(p)?;
        s.coefficient = Some(m);
        Ok(s)
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    fn m(&self, x: &[i64]) -> f64 {
        self.coefficient.as_ref().map_or(1.0, |c| c.value(x))
    }

    fn m_range(&self) -> (f64, f64) {
        match &self.coefficient {
            None => (1.0, 1.0),
            Some(c) => c
                .cell()
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        }
    }
}

impl Nonlinearity for Power {
    fn f(&self, x: &[i64], u: f64) -> f64 {
        self.m(x) * u.abs().powf(self.p - 2.0) * u
    }

    fn primitive(&self, x: &[i64], u: f64) -> f64 {
        self.m(x) * u.abs().powf(self.p) / self.p
    }

    fn df(&self, x: &[i64], u: f64) -> f64 {
        if u == 0.0 {
            // limit for p ≥ 3; for 2 < p < 3 the derivative blows up and 0 is the convention
            return 0.0;
        }
        self.m(x) * (self.p - 1.0) * u.abs().powf(self.p - 2.0)
    }

    fn constants(&self) -> GrowthConstants {
        let (lo, hi) = self.m_range();
        GrowthConstants {
            a: hi,
            p: self.p,
            b: lo * (self.p - 2.0) / self.p,
            q: self.p,
        }
    }

    fn period(&self) -> Option<&[usize]> {
        self.coefficient.as_ref().map(|c| c.period())
    }

    fn name(&self) -> String {
        format!("power(p={})", self.p)
    }
}

/// `f ≡ 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Zero;

impl Nonlinearity for Zero {
    fn f(&self, _: &[i64], _: f64) -> f64 {
        0.0
    }
    fn primitive(&self, _: &[i64], _: f64) -> f64 {
        0.0
    }
    fn df(&self, _: &[i64], _: f64) -> f64 {
        0.0
    }
    fn constants(&self) -> GrowthConstants {
        GrowthConstants { a: 1.0, p: 4.0, b: 1.0, q: 4.0 }
    }
    fn name(&self) -> String {
        "zero".into()
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// `f(u) = u`. Violates `f = o(u)` at 0 and superquadraticity.
#[derive(Clone, Copy, Debug, Default)]
pub struct Linear;

impl Nonlinearity for Linear {
    fn f(&self, _: &[i64], u: f64) -> f64 {
        u
    }
    fn primitive(&self, _: &[i64], u: f64) -> f64 {
        0.5 * u * u
    }
    fn df(&self, _: &[i64], _: f64) -> f64 {
        1.0
    }
    fn constants(&self) -> GrowthConstants {
        GrowthConstants { a: 1.0, p: 4.0, b: 1.0, q: 4.0 }
    }
    fn name(&self) -> String {
        "linear".into()
    }
}

/// `f(u) = u³/(1+u²)`, asymptotically linear.
#[derive(Clone, Copy, Debug, Default)]
pub struct Saturable;

impl Nonlinearity for Saturable {
    fn f(&self, _: &[i64], u: f64) -> f64 {
        u * u * u / (1.0 + u * u)
    }
    fn primitive(&self, _: &[i64], u: f64) -> f64 {
        let s = u * u;
        0.5 * (s - s.ln_1p())
    }
    fn df(&self, _: &[i64], u: f64) -> f64 {
        let s = u * u;
        s * (3.0 + s) / ((1.0 + s) * (1.0 + s))
    }
    fn constants(&self) -> GrowthConstants {
        GrowthConstants { a: 1.0, p: 4.0, b: 0.1, q: 4.0 }
    }
    fn name(&self) -> String {
        "saturable".into()
    }
}

type ScalarFn = Arc<dyn Fn(&[i64], f64) -> f64 + Send + Sync>;

/// User-supplied `f` and `∂f/∂u`. Without a closed-form primitive, `F` is
/// computed by composite Simpson quadrature.
#[derive(Clone)]
pub struct Custom {
    name: String,
    f: ScalarFn,
    df: ScalarFn,
    primitive: Option<ScalarFn>,
    constants: GrowthConstants,
}

impl fmt::Debug for Custom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Custom").field("name", &self.name).finish_non_exhaustive()
    }
}

impl Custom {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&[i64], f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(&[i64], f64) -> f64 + Send + Sync + 'static,
        constants: GrowthConstants,
    ) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            df: Arc::new(df),
            primitive: None,
            constants,
        }
    }

    pub fn with_primitive(
        mut self,
        primitive: impl Fn(&[i64], f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.primitive = Some(Arc::new(primitive));
        self
    }
}

const QUADRATURE_PANELS: usize = 2000;

/// `∫₀^u f(x,s) ds` by composite Simpson.
pub fn simpson_primitive(f: impl Fn(f64) -> f64, u: f64, panels: usize) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    let n = panels + panels % 2;
    let h = u / n as f64;
    let mut acc = f(0.0) + f(u);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0
}

impl Nonlinearity for Custom {
    fn f(&self, x: &[i64], u: f64) -> f64 {
        (self.f)(x, u)
    }
    fn primitive(&self, x: &[i64], u: f64) -> f64 {
        match &self.primitive {
            Some(p) => p(x, u),
            None => simpson_primitive(|s| (self.f)(x, s), u, QUADRATURE_PANELS),
        }
    }
    fn df(&self, x: &[i64], u: f64) -> f64 {
        (self.df)(x, u)
    }
    fn constants(&self) -> GrowthConstants {
        self.constants
    }
    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Sample points for [`validate_hypotheses`]: `0`, and `±` a grid that is
/// logarithmic from `10⁻⁸` to `1` and linear from `1` to `U`.
#[derive(Clone, Debug)]
pub struct SampleGrid {
    pub points: Vec<f64>,
    pub u_max: f64,
}

impl SampleGrid {
    pub fn new(u_max: f64, per_side: usize) -> Result<Self> {
        if !(u_max >= 10.0) || per_side < 500 {
            return Err(Error::InvalidInput(
                "sample grid needs U ≥ 10 and at least 500 points per side".into(),
            ));
        }
        let half = per_side / 2;
        let mut pos = Vec::with_capacity(per_side);
        for i in 0..half {
            pos.push(10f64.powf(-8.0 + 8.0 * i as f64 / half as f64));
        }
        let rest = per_side - half;
        for i in 0..rest {
            pos.push(1.0 + (u_max - 1.0) * i as f64 / (rest - 1) as f64);
        }
        let mut points: Vec<f64> = pos.iter().rev().map(|v| -v).collect();
        points.push(0.0);
        points.extend(pos);
        Ok(Self { points, u_max })
    }
}

impl Default for SampleGrid {
    fn default() -> Self {
        Self::new(10.0, 1000).expect("valid default grid")
    }
}

/// Finite thresholds standing in for the asymptotic hypotheses.
#[derive(Clone, Copy, Debug)]
pub struct ValidationTolerances {
    /// `|f(u)/u|` bound for `|u| ≤ u_small`.
    pub small_ratio: f64,
    pub u_small: f64,
    /// Required `F(u)/u²` at `|u| = U`.
    pub growth_threshold: f64,
    /// Slack on pointwise inequalities.
    pub slack: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        Self {
            small_ratio: 0.1,
            u_small: 1e-3,
            growth_threshold: 10.0,
            slack: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub description: &'static str,
    pub passed: bool,
    /// Sample with the worst margin.
    #[serde(serialize_with = "ser_opt_f64")]
    pub worst_u: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub worst_margin: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub model: String,
    pub constants: GrowthConstants,
    pub samples: usize,
    pub checks: Vec<HypothesisCheck>,
    pub all_passed: bool,
}

impl HypothesisReport {
    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tracks the minimum margin of a pointwise condition `margin ≥ 0`.
struct Worst {
    margin: f64,
    u: Option<f64>,
}

impl Worst {
    fn new() -> Self {
        Self { margin: f64::INFINITY, u: None }
    }
    fn see(&mut self, u: f64, margin: f64) {
        if margin < self.margin || margin.is_nan() {
            self.margin = margin;
            self.u = Some(u);
        }
    }
    fn finish(self, name: &'static str, description: &'static str, slack: f64) -> HypothesisCheck {
        HypothesisCheck {
            name,
            description,
            passed: self.margin >= -slack,
            worst_u: self.u,
            worst_margin: self.u.map(|_| self.margin),
        }
    }
}

/// Checks the hypotheses on a sample grid. Each check reports the sample
/// with the smallest margin; a negative margin beyond the slack fails it.
pub fn validate_hypotheses(
    model: &dyn Nonlinearity,
    grid: &SampleGrid,
    tol: &ValidationTolerances,
) -> HypothesisReport {
    let k = model.constants();
    let origin = vec![0i64; model.period().map_or(1, |p| p.len())];
    let sites: Vec<Vec<i64>> = match model.period() {
        None => vec![origin.clone()],
        Some(per) => {
            let n: usize = per.iter().product();
            (0..n)
                .map(|mut i| {
                    let mut c = vec![0i64; per.len()];
                    for axis in (0..per.len()).rev() {
                        c[axis] = (i % per[axis]) as i64;
                        i /= per[axis];
                    }
                    c
                })
                .collect()
        }
    };

    let mut f1 = Worst::new();
    let mut f2 = Worst::new();
    let mut f3 = Worst::new();
    let mut f4 = Worst::new();
    let mut f5 = Worst::new();
    let mut f6 = Worst::new();
    let mut sign = Worst::new();
    let mut zero = Worst::new();

    for x in &sites {
        let f0 = model.f(x, 0.0);
        let p0 = model.primitive(x, 0.0);
        zero.see(0.0, -(f0.abs() + p0.abs()));
        let mut prev: Option<(f64, f64)> = None;
        for &u in &grid.points {
            let f = model.f(x, u);
            let big_f = model.primitive(x, u);
            let scale = 1.0 + f.abs() + big_f.abs();
            if let Some(per) = model.period() {
                for (axis, &t) in per.iter().enumerate() {
                    let mut y = x.clone();
                    y[axis] += t as i64;
                    f1.see(u, -(model.f(&y, u) - f).abs() / scale);
                }
            }
            let env = k.a * (1.0 + u.abs().powf(k.p - 1.0));
            f2.see(u, (env - f.abs()) / (1.0 + env));
            if u != 0.0 && u.abs() <= tol.u_small {
                f3.see(u, tol.small_ratio - (f / u).abs());
            }
            if u.abs() >= grid.u_max * (1.0 - 1e-12) {
                f4.see(u, big_f / (u * u) - tol.growth_threshold);
            }
            if u != 0.0 {
                let ratio = f / u.abs();
                if let Some((pu, pr)) = prev {
                    if pu.signum() == u.signum() {
                        f5.see(u, (ratio - pr) / (1.0 + ratio.abs()));
                    }
                }
                prev = Some((u, ratio));
            }
            let sq = f * u - 2.0 * big_f;
            f6.see(u, (sq - k.b * u.abs().powf(k.q)) / scale);
            sign.see(u, sq.min(big_f) / scale);
        }
    }

    let slack = tol.slack;
    let mut checks = vec![
        zero.finish("F0", "f(x,0) = 0 and F(x,0) = 0", slack),
        f1.finish("F1", "f is periodic in x", slack),
        f2.finish("F2", "|f(x,u)| ≤ a(1 + |u|^(p−1))", slack),
        f3.finish("F3", "|f(x,u)/u| ≤ tol for |u| ≤ u_small", slack),
        f4.finish("F4", "F(x,u)/u² ≥ threshold at |u| = U", slack),
        f5.finish("F5", "u ↦ f(x,u)/|u| non-decreasing on each half-line", slack),
        f6.finish("F6", "f(x,u)u − 2F(x,u) ≥ b|u|^q", slack),
        sign.finish("sign", "f(x,u)u ≥ 2F(x,u) ≥ 0", slack),
    ];
    if model.period().is_none() {
        checks[1].passed = true;
    }
    let all_passed = checks.iter().all(|c| c.passed);
    HypothesisReport {
        model: model.name(),
        constants: k,
        samples: grid.points.len() * sites.len(),
        checks,
        all_passed,
    }
}
