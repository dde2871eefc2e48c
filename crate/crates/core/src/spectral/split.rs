use faer::{Mat, MatRef};
use serde::Serialize;

use super::potential::PeriodicPotential;
use crate::error::{Error, Result};
use crate::format::{ser_f64, ser_vec_f64};
use crate::lattice::{BoxDomain, Field};
use crate::linalg::{dot, mat_t_vec, mat_vec, sym_eig};

/// Largest box the dense eigensolver accepts.
pub const DENSE_SITE_BUDGET: usize = 5000;

/// Eigenvalues closer to 0 than this make the splitting undefined.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-10;

/// Slack used when deciding whether a box eigenvalue lies inside the gap.
const INTRUSION_TOL: f64 = 1e-9;

/// `A = −Δ + V` restricted to a box: `diag(2N + V(x))` plus `hop` times the
/// adjacency of the box (`hop = −1` unless rescaled).
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    domain: BoxDomain,
    diag: Vec<f64>,
    hop: f64,
}

/// Matrix of `u ↦ −Δu + Vu` on the box with zero extension (or wrap-around
/// on a torus).
pub fn assemble_operator(domain: &BoxDomain, v: &PeriodicPotential) -> Result<Operator> {
    if v.dim() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            found: v.dim(),
        });
    }
    if domain.is_periodic() {
        if let Some(t) = v.period().iter().find(|&&t| domain.side() % t != 0) {
            return Err(Error::InvalidInput(format!(
                "torus side {} is not a multiple of the potential period {t}",
                domain.side()
            )));
        }
    }
    let n = domain.dim() as f64;
    let mut c = vec![0i64; domain.dim()];
    let diag = (0..domain.len())
        .map(|i| {
            domain.coords_into(i, &mut c);
            2.0 * n + v.value(&c)
        })
        .collect();
    Ok(Operator {
        domain: domain.clone(),
        diag,
        hop: -1.0,
    })
}

impl Operator {
    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `a·A`.
    pub fn scaled(&self, a: f64) -> Operator {
        Operator {
            domain: self.domain.clone(),
            diag: self.diag.iter().map(|d| a * d).collect(),
            hop: a * self.hop,
        }
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let d = &self.domain;
        for i in 0..d.len() {
            let mut acc = self.diag[i] * x[i];
            d.for_each_neighbor(i, |j| {
                if let Some(j) = j {
                    acc += self.hop * x[j];
                }
            });
            y[i] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_field(&self, u: &Field) -> Result<Field> {
        if u.domain() != &self.domain {
            return Err(Error::DomainMismatch);
        }
        Field::new(self.domain.clone(), self.apply(u.values()))
    }

    /// `(Ax, x)₂`.
    pub fn quadratic(&self, x: &[f64]) -> f64 {
        dot(&self.apply(x), x)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.len();
        let mut m = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] += self.diag[i];
            self.domain.for_each_neighbor(i, |j| {
                if let Some(j) = j {
                    m[(i, j)] += self.hop;
                }
            });
        }
        m
    }
}

/// Which spectral subspace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    /// `X⁺`, the range of `Q`.
    Plus,
    /// `X⁻`, the range of `P`.
    Minus,
}

/// Gap endpoints of the infinite-lattice operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapEdges {
    #[serde(serialize_with = "ser_f64")]
    pub sigma_minus: f64,
    #[serde(serialize_with = "ser_f64")]
    pub sigma_plus: f64,
}

/// The gap certificate written by `certify-gap`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    #[serde(serialize_with = "ser_f64")]
    pub sigma_minus: f64,
    #[serde(serialize_with = "ser_f64")]
    pub sigma_plus: f64,
    /// Box eigenvalues strictly inside `(σ⁻, σ⁺)`.
    #[serde(serialize_with = "ser_vec_f64")]
    pub intrusions: Vec<f64>,
    /// Smallest `|λ|` over the box spectrum.
    #[serde(serialize_with = "ser_f64")]
    pub box_epsilon: f64,
    pub sites: usize,
    pub negative_count: usize,
}

/// Full eigendecomposition of `A` on a box, split at 0 into `X⁻ ⊕ X⁺`.
#[derive(Clone, Debug)]
pub struct SpectralSplit {
    operator: Operator,
    eigenvalues: Vec<f64>,
    vectors: Mat<f64>,
    n_minus: usize,
    gap: Option<GapEdges>,
    intrusions: Vec<f64>,
}

pub fn spectral_split(op: &Operator, gap: Option<GapEdges>) -> Result<SpectralSplit> {
    let m = op.len();
    if m > DENSE_SITE_BUDGET {
        return Err(Error::TooLarge {
            sites: m,
            budget: DENSE_SITE_BUDGET,
        });
    }
    let (eigenvalues, vectors) = sym_eig(op.to_dense().as_ref())?;
    if let Some(l) = eigenvalues
        .iter()
        .copied()
        .filter(|l| l.abs() < ZERO_EIGENVALUE_TOL)
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
    {
        return Err(Error::ZeroEigenvalue(l));
    }
    let n_minus = eigenvalues.iter().filter(|&&l| l < 0.0).count();
    let intrusions = match gap {
        Some(g) => eigenvalues
            .iter()
            .copied()
            .filter(|&l| l > g.sigma_minus + INTRUSION_TOL && l < g.sigma_plus - INTRUSION_TOL)
            .collect(),
        None => Vec::new(),
    };
    Ok(SpectralSplit {
        operator: op.clone(),
        eigenvalues,
        vectors,
        n_minus,
        gap,
        intrusions,
    })
}

impl SpectralSplit {
    pub fn domain(&self) -> &BoxDomain {
        self.operator.domain()
    }

    pub fn operator(&self) -> &Operator {
        &self.operator
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, matching [`Self::eigenvalues`].
    pub fn vectors(&self) -> MatRef<'_, f64> {
        self.vectors.as_ref()
    }

    pub fn n_minus(&self) -> usize {
        self.n_minus
    }

    pub fn n_plus(&self) -> usize {
        self.len() - self.n_minus
    }

    /// Columns spanning `X⁻`.
    pub fn minus_basis(&self) -> MatRef<'_, f64> {
        self.vectors.as_ref().subcols(0, self.n_minus)
    }

    /// Columns spanning `X⁺`.
    pub fn plus_basis(&self) -> MatRef<'_, f64> {
        self.vectors.as_ref().subcols(self.n_minus, self.n_plus())
    }

    pub fn minus_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues[..self.n_minus]
    }

    pub fn plus_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues[self.n_minus..]
    }

    /// Smallest `|λ|`.
    pub fn epsilon(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, l| m.min(l.abs()))
    }

    /// Smallest positive box eigenvalue.
    pub fn sigma_plus_box(&self) -> Option<f64> {
        self.plus_eigenvalues().first().copied()
    }

    /// Largest negative box eigenvalue.
    pub fn sigma_minus_box(&self) -> Option<f64> {
        self.minus_eigenvalues().last().copied()
    }

    pub fn gap(&self) -> Option<GapEdges> {
        self.gap
    }

    pub fn intrusions(&self) -> &[f64] {
        &self.intrusions
    }

    pub fn gap_report(&self) -> Option<GapReport> {
        self.gap.map(|g| GapReport {
            sigma_minus: g.sigma_minus,
            sigma_plus: g.sigma_plus,
            intrusions: self.intrusions.clone(),
            box_epsilon: self.epsilon(),
            sites: self.len(),
            negative_count: self.n_minus,
        })
    }

    /// Eigen-coefficients `Eᵀu`.
    pub fn coefficients(&self, u: &[f64]) -> Vec<f64> {
        mat_t_vec(self.vectors.as_ref(), u)
    }

    pub fn plus_coefficients(&self, u: &[f64]) -> Vec<f64> {
        mat_t_vec(self.plus_basis(), u)
    }

    pub fn minus_coefficients(&self, u: &[f64]) -> Vec<f64> {
        mat_t_vec(self.minus_basis(), u)
    }

    /// `Σ cᵢ eᵢ` over all eigenvectors.
    pub fn synthesize(&self, c: &[f64]) -> Vec<f64> {
        mat_vec(self.vectors.as_ref(), c)
    }

    pub fn synthesize_plus(&self, c: &[f64]) -> Vec<f64> {
        mat_vec(self.plus_basis(), c)
    }

    pub fn synthesize_minus(&self, c: &[f64]) -> Vec<f64> {
        mat_vec(self.minus_basis(), c)
    }

    pub(crate) fn project_raw(&self, u: &[f64], sign: Sign) -> Vec<f64> {
        match sign {
            Sign::Plus => self.synthesize_plus(&self.plus_coefficients(u)),
            Sign::Minus => self.synthesize_minus(&self.minus_coefficients(u)),
        }
    }

    fn check(&self, u: &Field) -> Result<()> {
        if u.domain() != self.domain() {
            Err(Error::DomainMismatch)
        } else {
            Ok(())
        }
    }

    /// `Qu` (plus) or `Pu` (minus).
    pub fn project(&self, u: &Field, sign: Sign) -> Result<Field> {
        self.check(u)?;
        Field::new(self.domain().clone(), self.project_raw(u.values(), sign))
    }

    /// `(u, v) = (Au⁺, v⁺)₂ − (Au⁻, v⁻)₂ = Σ |λᵢ| ⟨u,eᵢ⟩⟨v,eᵢ⟩`.
    pub fn split_inner(&self, u: &Field, v: &Field) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let cu = self.coefficients(u.values());
        let cv = self.coefficients(v.values());
        Ok(self.inner_coeffs(&cu, &cv))
    }

    pub(crate) fn inner_coeffs(&self, cu: &[f64], cv: &[f64]) -> f64 {
        cu.iter()
            .zip(cv)
            .zip(&self.eigenvalues)
            .map(|((a, b), l)| l.abs() * a * b)
            .sum()
    }

    /// `‖u‖²` in the equivalent norm.
    pub fn norm_sq(&self, u: &Field) -> Result<f64> {
        self.split_inner(u, u)
    }

    pub(crate) fn norm_sq_raw(&self, u: &[f64]) -> f64 {
        let c = self.coefficients(u);
        self.inner_coeffs(&c, &c)
    }

    /// Dense matrix of `Q` (plus) or `P` (minus).
    pub fn projector_matrix(&self, sign: Sign) -> Mat<f64> {
        let e = match sign {
            Sign::Plus => self.plus_basis(),
            Sign::Minus => self.minus_basis(),
        };
        e * e.transpose()
    }
}

/// Assemble, split and attach the gap in one call.
pub fn split_box(
    domain: &BoxDomain,
    v: &PeriodicPotential,
    gap: Option<GapEdges>,
) -> Result<SpectralSplit> {
    spectral_split(&assemble_operator(domain, v)?, gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Site;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn checker_split(r: usize) -> SpectralSplit {
        let d = BoxDomain::new(3, r).unwrap();
        let v = PeriodicPotential::default_checkerboard(3, 1.0).unwrap();
        split_box(
            &d,
            &v,
            Some(GapEdges {
                sigma_minus: -1.0,
                sigma_plus: 1.0,
            }),
        )
        .unwrap()
    }

    fn random_field(d: &BoxDomain, rng: &mut ChaCha8Rng) -> Field {
        Field::new(d.clone(), (0..d.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn operator_entries() {
        let d = BoxDomain::new(3, 2).unwrap();
        let zero = PeriodicPotential::constant(3, 0.0).unwrap();
        let a = assemble_operator(&d, &zero).unwrap();
        let u = Field::delta(&d, &Site::origin(3)).unwrap();
        assert_eq!(a.apply_field(&u).unwrap().at(&Site::origin(3)), 6.0);
        let m = a.to_dense();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                assert_eq!(m[(i, j)], m[(j, i)]);
            }
        }
        let v = PeriodicPotential::default_checkerboard(3, 1.0).unwrap();
        let a = assemble_operator(&d, &v).unwrap();
        let i = d.index(&Site::from([1, 0, 0])).unwrap();
        assert_eq!(a.diagonal()[i], 6.0 - 1.0 - 6.0);
        assert!(assemble_operator(&BoxDomain::new(2, 2).unwrap(), &v).is_err());
    }

    #[test]
    fn free_dirichlet_ground_energy() {
        let d = BoxDomain::new(3, 1).unwrap();
        let zero = PeriodicPotential::constant(3, 0.0).unwrap();
        let s = split_box(&d, &zero, None).unwrap();
        let path = 2.0 - 2.0 * (std::f64::consts::PI / 4.0).cos();
        assert_relative_eq!(s.eigenvalues()[0], 3.0 * path, epsilon = 1e-12);
        assert_eq!(s.n_minus(), 0);
    }

    #[test]
    fn checkerboard_box_spectrum_avoids_gap() {
        let s = checker_split(2);
        assert!(s.intrusions().is_empty());
        assert!(s.epsilon() >= 1.0 - 1e-10);
        // 62 odd-parity sites, 63 even ones on the 5³ box
        assert_eq!(s.n_minus() + s.n_plus(), 125);
        assert!(s.n_minus().abs_diff(s.n_plus()) <= 1);
    }

    #[test]
    fn projectors_complete_and_orthogonal() {
        let s = checker_split(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let u = random_field(s.domain(), &mut rng);
            let p = s.project(&u, Sign::Minus).unwrap();
            let q = s.project(&u, Sign::Plus).unwrap();
            let sum = p.combine(1.0, &q, 1.0).unwrap();
            assert!(sum.combine(1.0, &u, -1.0).unwrap().norm2() <= 1e-10);
            assert!(s.project(&q, Sign::Minus).unwrap().norm2() <= 1e-10);
            let qq = s.project(&q, Sign::Plus).unwrap();
            assert!(qq.combine(1.0, &q, -1.0).unwrap().norm2() <= 1e-12);
            assert!(p.dot(&q).unwrap().abs() <= 1e-10);
        }
    }

    #[test]
    fn split_norm_identities() {
        let s = checker_split(2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let u = random_field(s.domain(), &mut rng);
            let up = s.project(&u, Sign::Plus).unwrap();
            let um = s.project(&u, Sign::Minus).unwrap();
            let n = s.norm_sq(&u).unwrap();
            let np = s.norm_sq(&up).unwrap();
            let nm = s.norm_sq(&um).unwrap();
            assert_relative_eq!(n, np + nm, max_relative = 1e-10);
            let au = s.operator().quadratic(u.values());
            assert_relative_eq!(au, np - nm, epsilon = 1e-10 * (1.0 + n));
        }
        let m = s.n_minus();
        let e: Vec<f64> = s.vectors().col(m).iter().copied().collect();
        let e = Field::new(s.domain().clone(), e).unwrap();
        assert_relative_eq!(s.norm_sq(&e).unwrap(), s.eigenvalues()[m].abs(), epsilon = 1e-12);
        let pe = s.project(&e, Sign::Plus).unwrap();
        assert!(pe.combine(1.0, &e, -1.0).unwrap().norm2() < 1e-12);
        assert!(s.project(&e, Sign::Minus).unwrap().norm2() < 1e-12);
    }

    #[test]
    fn zero_eigenvalue_is_refused() {
        // 3-site path: −Δ has eigenvalue 2 at the middle mode, V ≡ −2 moves it to 0
        let d = BoxDomain::new(1, 1).unwrap();
        let v = PeriodicPotential::constant(1, -2.0).unwrap();
        let err = split_box(&d, &v, None).unwrap_err();
        assert!(matches!(err, Error::ZeroEigenvalue(_)));
    }

    #[test]
    fn budget_enforced() {
        let d = BoxDomain::new(3, 9).unwrap();
        let v = PeriodicPotential::default_checkerboard(3, 1.0).unwrap();
        assert!(matches!(split_box(&d, &v, None), Err(Error::TooLarge { .. })));
    }
}
