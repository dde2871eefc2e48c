//! The Hardy weight `w(x) = 1/(|x|²+1)` and the constants that bound the
//! admissible coupling `ρ`: the best box Hardy constant `κ`, the form
//! constant `ρ⁺`, and `ρ_max = min(ρ⁺, 1)/κ`.

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::ser_f64;
use crate::lattice::{BoxDomain, Field};
use crate::linalg::{axpy, cg, dot, lanczos_max, norm, scale, sym_eig};
use crate::spectral::{assemble_operator, Operator, PeriodicPotential, SpectralSplit};

/// How `|x|` is measured in the weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HardyWeight {
    /// `|x|² = Σ xᵢ²`.
    #[default]
    Euclidean,
    /// `|x| = Σ |xᵢ|`, the graph distance to the origin.
    Graph,
}

impl HardyWeight {
    pub fn value(&self, x: &[i64]) -> f64 {
        let r2 = match self {
            HardyWeight::Euclidean => x.iter().map(|c| (c * c) as f64).sum::<f64>(),
            HardyWeight::Graph => {
                let l1: i64 = x.iter().map(|c| c.abs()).sum();
                (l1 * l1) as f64
            }
        };
        1.0 / (r2 + 1.0)
    }

    /// `w` at every site of the box (minimal-image coordinates on a torus).
    pub fn weights(&self, domain: &BoxDomain) -> Vec<f64> {
        let mut c = vec![0i64; domain.dim()];
        (0..domain.len())
            .map(|i| {
                domain.coords_into(i, &mut c);
                for x in c.iter_mut() {
                    *x = domain.minimal_image(*x);
                }
                self.value(&c)
            })
            .collect()
    }
}

/// `ρ Σ_x w(x) u(x)²` with the Euclidean weight.
pub fn weighted_mass(u: &Field, rho: f64) -> Result<f64> {
    weighted_mass_with(u, rho, HardyWeight::Euclidean)
}

pub fn weighted_mass_with(u: &Field, rho: f64, weight: HardyWeight) -> Result<f64> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidInput(format!("ρ must be finite and ≥ 0, got {rho}")));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let w = weight.weights(u.domain());
    Ok(rho * u.values().iter().zip(&w).map(|(v, w)| w * v * v).sum::<f64>())
}

/// `−Δ` on the box as an [`Operator`].
pub fn laplacian_operator(domain: &BoxDomain) -> Result<Operator> {
    assemble_operator(domain, &PeriodicPotential::constant(domain.dim(), 0.0)?)
}

#[derive(Clone, Debug)]
pub struct HardyConstant {
    pub kappa: f64,
    /// Extremal field, `‖·‖₂ = 1`, positive.
    pub witness: Field,
    pub iterations: usize,
}

/// The smallest `κ` with `Σ w u² ≤ κ Σ Γ(u)` for all fields on the box.
pub fn best_hardy_constant(domain: &BoxDomain) -> Result<HardyConstant> {
    best_hardy_constant_with(domain, HardyWeight::Euclidean)
}

/// `κ` is the top eigenvalue of `W^{1/2} L⁻¹ W^{1/2}`, found by Lanczos with
/// conjugate-gradient solves on `L = −Δ`.
pub fn best_hardy_constant_with(domain: &BoxDomain, weight: HardyWeight) -> Result<HardyConstant> {
    if domain.dim() < 3 {
        return Err(Error::HardyDimension(domain.dim()));
    }
    if domain.is_periodic() {
        return Err(Error::InvalidInput(
            "the Hardy constant is defined on Dirichlet boxes only (constants have zero energy on a torus)".into(),
        ));
    }
    let l = laplacian_operator(domain)?;
    let sw: Vec<f64> = weight.weights(domain).iter().map(|w| w.sqrt()).collect();
    let solve = |b: &[f64], x0: Option<&[f64]>| -> Result<Vec<f64>> {
        let out = cg(|x, y| l.apply_into(x, y), b, x0, None, 1e-14, 20 * b.len() + 100);
        if out.residual > 1e-11 {
            return Err(Error::IterationCap {
                stage: "hardy conjugate gradients",
                cap: 20 * b.len() + 100,
                residual: out.residual,
            });
        }
        Ok(out.x)
    };
    let mut failure: Option<Error> = None;
    let lz = lanczos_max(
        |x| {
            let b: Vec<f64> = x.iter().zip(&sw).map(|(a, s)| a * s).collect();
            match solve(&b, None) {
                Ok(y) => y.iter().zip(&sw).map(|(a, s)| a * s).collect(),
                Err(e) => {
                    failure.get_or_insert(e);
                    vec![0.0; x.len()]
                }
            }
        },
        &sw,
        1e-13,
        400,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let b: Vec<f64> = lz.vector.iter().zip(&sw).map(|(a, s)| a * s).collect();
    let mut u = solve(&b, None)?;
    normalize_positive(&mut u);
    Ok(HardyConstant {
        kappa: lz.value,
        witness: Field::new(domain.clone(), u)?,
        iterations: lz.iterations,
    })
}

/// Scales to unit ℓ² norm with a positive largest-magnitude entry.
fn normalize_positive(u: &mut [f64]) {
    let n = norm(u);
    let peak = u.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
    let s = if peak < 0.0 { -1.0 / n } else { 1.0 / n };
    scale(s, u);
}

#[derive(Clone, Debug)]
pub struct RhoPlus {
    pub value: f64,
    /// Minimizer of `(Au,u)₂ / Σ Γ(u)` over `X⁺`.
    pub witness: Field,
    /// Ratio of extreme eigenvalues of the reduced pencil.
    pub condition: f64,
}

/// `ρ⁺ = inf_{u ∈ X⁺} (Au,u)₂ / Σ Γ(u)`. With `u = E₊c` this is
/// `1/λ_max(D^{-1/2} B D^{-1/2})`, `B = E₊ᵀ L E₊`, `D = diag(λ₊)`.
pub fn rho_plus(split: &SpectralSplit) -> Result<RhoPlus> {
    let l = laplacian_operator(split.domain())?;
    let e = split.plus_basis();
    let (m, np) = (e.nrows(), e.ncols());
    if np == 0 {
        return Err(Error::Degenerate("the positive subspace is empty".into()));
    }
    let mut le = Mat::<f64>::zeros(m, np);
    let mut col = vec![0.0; m];
    let mut out = vec![0.0; m];
    for j in 0..np {
        for (i, c) in col.iter_mut().enumerate() {
            *c = e[(i, j)];
        }
        l.apply_into(&col, &mut out);
        for (i, o) in out.iter().enumerate() {
            le[(i, j)] = *o;
        }
    }
    let b = e.transpose() * &le;
    let dm: Vec<f64> = split.plus_eigenvalues().iter().map(|l| 1.0 / l.sqrt()).collect();
    let c = Mat::from_fn(np, np, |i, j| dm[i] * dm[j] * 0.5 * (b[(i, j)] + b[(j, i)]));
    let (vals, vecs) = sym_eig(c.as_ref())?;
    let top = vals[np - 1];
    let bottom = vals[0];
    let condition = if bottom > 0.0 { top / bottom } else { f64::INFINITY };
    if !(top > 0.0) || !top.is_finite() {
        return Err(Error::Singular {
            what: "reduced pencil",
            detail: format!("largest eigenvalue {top:e}, smallest {bottom:e}"),
        });
    }
    let coeffs: Vec<f64> = (0..np).map(|i| vecs[(i, np - 1)] * dm[i]).collect();
    let mut u = split.synthesize_plus(&coeffs);
    normalize_positive(&mut u);
    Ok(RhoPlus {
        value: 1.0 / top,
        witness: Field::new(split.domain().clone(), u)?,
        condition,
    })
}

#[derive(Clone, Debug)]
pub struct RhoPlusDescent {
    pub value: f64,
    pub witness: Field,
    /// Converged quotient from each start.
    pub per_start: Vec<f64>,
    pub iterations: Vec<usize>,
}

/// Independent estimate of `ρ⁺`: minimizes `(Au,u)₂ / (Lu,u)₂` over `X⁺` by
/// locally optimal preconditioned descent (a three-term Rayleigh–Ritz on the
/// iterate, its preconditioned projected gradient, and the previous step)
/// from `starts` random initial fields.
pub fn rho_plus_descent(split: &SpectralSplit, starts: usize, seed: u64) -> Result<RhoPlusDescent> {
    let l = laplacian_operator(split.domain())?;
    let a = split.operator();
    let m = split.len();
    let inv_plus: Vec<f64> = split.plus_eigenvalues().iter().map(|l| 1.0 / l).collect();
    let mut per_start = Vec::with_capacity(starts);
    let mut iterations = Vec::with_capacity(starts);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in 0..starts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(s as u64 + 1)));
        let raw: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (q, x, its) = lobpcg_min(split, a, &l, &inv_plus, split.project_raw(&raw, crate::spectral::Sign::Plus))?;
        per_start.push(q);
        iterations.push(its);
        if best.as_ref().is_none_or(|b| q < b.0) {
            best = Some((q, x));
        }
    }
    let (value, mut x) = best.expect("at least one start");
    normalize_positive(&mut x);
    Ok(RhoPlusDescent {
        value,
        witness: Field::new(split.domain().clone(), x)?,
        per_start,
        iterations,
    })
}

fn lobpcg_min(
    split: &SpectralSplit,
    a: &Operator,
    l: &Operator,
    inv_plus: &[f64],
    mut x: Vec<f64>,
) -> Result<(f64, Vec<f64>, usize)> {
    const MAX_ITER: usize = 3000;
    const TOL: f64 = 1e-11;
    let l_norm = |v: &[f64]| dot(&l.apply(v), v).max(0.0).sqrt();
    let n0 = l_norm(&x);
    if n0 == 0.0 {
        return Err(Error::Degenerate("random start has no positive component".into()));
    }
    scale(1.0 / n0, &mut x);
    let mut p: Option<Vec<f64>> = None;
    let mut q = a.quadratic(&x);
    for it in 0..MAX_ITER {
        if it % 25 == 24 {
            x = split.project_raw(&x, crate::spectral::Sign::Plus);
            let n = l_norm(&x);
            scale(1.0 / n, &mut x);
        }
        let ax = a.apply(&x);
        let lx = l.apply(&x);
        q = dot(&ax, &x) / dot(&lx, &x);
        let mut r = ax.clone();
        axpy(-q, &lx, &mut r);
        let rc = split.plus_coefficients(&r);
        let rnorm = rc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= TOL * norm(&ax) {
            return Ok((q, x, it));
        }
        let w = split.synthesize_plus(&rc.iter().zip(inv_plus).map(|(r, d)| r * d).collect::<Vec<_>>());
        // L-orthonormal basis of span{x, w, p}
        let mut basis: Vec<Vec<f64>> = vec![x.clone()];
        for cand in std::iter::once(w).chain(p.take()) {
            let mut v = cand;
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&l.apply(b), &v);
                    axpy(-c, b, &mut v);
                }
            }
            let nv = l_norm(&v);
            if nv > 1e-12 * l_norm(&basis[0]).max(1.0) {
                scale(1.0 / nv, &mut v);
                basis.push(v);
            }
        }
        let k = basis.len();
        let abasis: Vec<Vec<f64>> = basis.iter().map(|b| a.apply(b)).collect();
        let small = Mat::from_fn(k, k, |i, j| 0.5 * (dot(&abasis[i], &basis[j]) + dot(&abasis[j], &basis[i])));
        let (_, vecs) = sym_eig(small.as_ref())?;
        let y: Vec<f64> = (0..k).map(|i| vecs[(i, 0)]).collect();
        let mut xn = vec![0.0; x.len()];
        let mut pn = vec![0.0; x.len()];
        for (i, b) in basis.iter().enumerate() {
            axpy(y[i], b, &mut xn);
            if i > 0 {
                axpy(y[i], b, &mut pn);
            }
        }
        let n = l_norm(&xn);
        scale(1.0 / n, &mut xn);
        x = xn;
        p = (k > 1).then_some(pn);
    }
    Err(Error::IterationCap {
        stage: "rho_plus descent",
        cap: MAX_ITER,
        residual: q,
    })
}

/// `κ`, `ρ⁺`, `ρ̃⁺ = min(ρ⁺, 1)` and `ρ_max = ρ̃⁺/κ` on one box.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityConstants {
    #[serde(rename = "N")]
    pub dim: usize,
    #[serde(rename = "R")]
    pub radius: usize,
    #[serde(serialize_with = "ser_f64")]
    pub kappa: f64,
    #[serde(serialize_with = "ser_f64")]
    pub rho_plus: f64,
    #[serde(serialize_with = "ser_f64")]
    pub rho_tilde_plus: f64,
    #[serde(serialize_with = "ser_f64")]
    pub rho_max: f64,
}

impl InequalityConstants {
    pub fn from_parts(dim: usize, radius: usize, kappa: f64, rho_plus: f64) -> Result<Self> {
        if !(kappa > 0.0 && rho_plus > 0.0) || !kappa.is_finite() || !rho_plus.is_finite() {
            return Err(Error::InvalidInput(format!(
                "constants must be positive and finite (κ = {kappa}, ρ⁺ = {rho_plus})"
            )));
        }
        let mut c = Self {
            dim,
            radius,
            kappa,
            rho_plus,
            rho_tilde_plus: rho_plus.min(1.0),
            rho_max: 0.0,
        };
        c.rho_max = admissible_rho_max(&c);
        Ok(c)
    }
}

/// `min(ρ⁺, 1)/κ`.
pub fn admissible_rho_max(c: &InequalityConstants) -> f64 {
    c.rho_plus.min(1.0) / c.kappa
}

/// Both constants on the split's box, with their witnesses.
#[derive(Clone, Debug)]
pub struct ConstantsBundle {
    pub constants: InequalityConstants,
    pub hardy: HardyConstant,
    pub rho_plus: RhoPlus,
}

pub fn compute_constants(split: &SpectralSplit, weight: HardyWeight) -> Result<ConstantsBundle> {
    let d = split.domain();
    let hardy = best_hardy_constant_with(d, weight)?;
    let rp = rho_plus(split)?;
    let constants = InequalityConstants::from_parts(d.dim(), d.radius(), hardy.kappa, rp.value)?;
    Ok(ConstantsBundle {
        constants,
        hardy,
        rho_plus: rp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{dirichlet_energy, Site};
    use approx::assert_relative_eq;
    use faer::linalg::solvers::DenseSolveCore;

    #[test]
    fn weight_values() {
        let w = HardyWeight::Euclidean;
        assert_eq!(w.value(&[0, 0, 0]), 1.0);
        assert_eq!(w.value(&[1, 0, 0]), 0.5);
        assert_eq!(w.value(&[1, 1, 1]), 0.25);
        assert_eq!(HardyWeight::Graph.value(&[1, 1, 1]), 0.1);
    }

    #[test]
    fn weighted_mass_examples() {
        let d = BoxDomain::new(3, 1).unwrap();
        let u = Field::delta(&d, &Site::origin(3)).unwrap();
        assert_eq!(weighted_mass(&u, 1.0).unwrap(), 1.0);
        let e = Field::delta(&d, &Site::unit(3, 0)).unwrap();
        assert_eq!(weighted_mass(&e, 2.0).unwrap(), 1.0);
        assert_eq!(weighted_mass(&e, 0.0).unwrap(), 0.0);
        assert!(weighted_mass(&e, -1.0).is_err());
    }

    #[test]
    fn kappa_single_site() {
        let d = BoxDomain::new(3, 0).unwrap();
        let h = best_hardy_constant(&d).unwrap();
        assert_eq!(h.kappa, 1.0 / 6.0);
    }

    #[test]
    fn kappa_refuses_low_dimension() {
        let d = BoxDomain::new(2, 2).unwrap();
        let err = best_hardy_constant(&d).unwrap_err();
        assert!(err.to_string().contains("Hardy requires N ≥ 3"));
    }

    #[test]
    fn kappa_matches_dense_oracle_and_is_tight() {
        for r in 1..=2 {
            let d = BoxDomain::new(3, r).unwrap();
            let h = best_hardy_constant(&d).unwrap();
            // dense oracle: largest eigenvalue of W^{1/2} L^{-1} W^{1/2}
            let l = laplacian_operator(&d).unwrap().to_dense();
            let linv = l.partial_piv_lu().inverse();
            let sw: Vec<f64> = HardyWeight::Euclidean.weights(&d).iter().map(|w| w.sqrt()).collect();
            let n = d.len();
            let s = Mat::from_fn(n, n, |i, j| sw[i] * linv[(i, j)] * sw[j]);
            let s = Mat::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
            let (vals, _) = sym_eig(s.as_ref()).unwrap();
            assert_relative_eq!(h.kappa, vals[n - 1], max_relative = 1e-11);
            let u = &h.witness;
            let lhs = weighted_mass(u, 1.0).unwrap();
            let rhs = h.kappa * dirichlet_energy(u);
            assert!((lhs / rhs - 1.0).abs() < 1e-9);
        }
    }

    fn checker_split(r: usize) -> SpectralSplit {
        let d = BoxDomain::new(3, r).unwrap();
        let v = PeriodicPotential::default_checkerboard(3, 1.0).unwrap();
        crate::spectral::split_box(&d, &v, None).unwrap()
    }

    #[test]
    fn rho_plus_two_methods_agree() {
        let s = checker_split(3);
        let dense = rho_plus(&s).unwrap();
        let desc = rho_plus_descent(&s, 10, 7).unwrap();
        assert!(dense.value > 0.0);
        assert!((dense.value - desc.value).abs() <= 1e-6, "{} vs {}", dense.value, desc.value);
        let w = &dense.witness;
        let q = s.operator().quadratic(w.values()) / dirichlet_energy(w);
        assert_relative_eq!(q, dense.value, max_relative = 1e-9);
        assert!(s.project(w, crate::spectral::Sign::Minus).unwrap().norm2() < 1e-10);
    }

    #[test]
    fn rho_plus_scales_with_operator() {
        let s = checker_split(2);
        let s2 = crate::spectral::spectral_split(&s.operator().scaled(2.0), None).unwrap();
        let a = rho_plus(&s).unwrap().value;
        let b = rho_plus(&s2).unwrap().value;
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-12);
    }

    #[test]
    fn admissible_examples() {
        let c = InequalityConstants::from_parts(3, 6, 0.5, 2.0).unwrap();
        assert_eq!(c.rho_max, 2.0);
        assert_eq!(c.rho_tilde_plus, 1.0);
        let c = InequalityConstants::from_parts(3, 6, 0.2, 0.3).unwrap();
        assert_relative_eq!(c.rho_max, 1.5, max_relative = 1e-15);
        assert!(InequalityConstants::from_parts(3, 6, 0.0, 0.3).is_err());
    }
}
