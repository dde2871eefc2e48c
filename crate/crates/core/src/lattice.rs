//! Finite pieces of the integer lattice ℤ^N and the discrete calculus on them.
//!
//! A [`BoxDomain`] is either the ℓ∞ box `{‖x‖∞ ≤ R}` with zero extension
//! outside (the default) or a periodic torus. Sites are enumerated
//! lexicographically with the first coordinate most significant, which fixes
//! the layout of every vector and matrix in the crate.
//!
//! With zero extension the Laplacian, carré du champ and Dirichlet energy see
//! the box as embedded in ℤ^N: an edge leaving the box still contributes,
//! with the outside endpoint held at 0.

use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::format::sig17;

/// How the box closes off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Zero extension outside the box.
    Dirichlet,
    /// Opposite faces glued together.
    Periodic,
}

/// A lattice point.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site(pub Vec<i64>);

impl Site {
    pub fn origin(dim: usize) -> Self {
        Site(vec![0; dim])
    }

    /// The unit vector `e_axis` (zero-based axis).
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut c = vec![0; dim];
        c[axis] = 1;
        Site(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

impl From<Vec<i64>> for Site {
    fn from(c: Vec<i64>) -> Self {
        Site(c)
    }
}

impl<const N: usize> From<[i64; N]> for Site {
    fn from(c: [i64; N]) -> Self {
        Site(c.to_vec())
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A finite box of ℤ^N with a fixed site enumeration.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BoxDomain {
    dim: usize,
    lower: i64,
    side: usize,
    boundary: Boundary,
}

impl BoxDomain {
    /// The ℓ∞ box `[-R, R]^N` with zero extension.
    pub fn new(dim: usize, radius: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("lattice dimension must be ≥ 1".into()));
        }
        Ok(Self {
            dim,
            lower: -(radius as i64),
            side: 2 * radius + 1,
            boundary: Boundary::Dirichlet,
        })
    }

    /// The periodic torus `(ℤ/side)^N` with coordinates `-⌊side/2⌋ ..`.
    pub fn torus(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 || side == 0 {
            return Err(Error::InvalidInput("torus needs dim ≥ 1 and side ≥ 1".into()));
        }
        Ok(Self {
            dim,
            lower: -((side / 2) as i64),
            side,
            boundary: Boundary::Periodic,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// `R` for a Dirichlet box, `⌊side/2⌋` for a torus.
    pub fn radius(&self) -> usize {
        (-self.lower) as usize
    }

    pub fn lower(&self) -> i64 {
        self.lower
    }

    pub fn upper(&self) -> i64 {
        self.lower + self.side as i64 - 1
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    /// Number of sites, `side^N`.
    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn stride(&self, axis: usize) -> usize {
        self.side.pow((self.dim - 1 - axis) as u32)
    }

    fn wrap(&self, c: i64) -> i64 {
        let s = self.side as i64;
        (c - self.lower).rem_euclid(s) + self.lower
    }

    /// Index of a coordinate tuple. Outside a Dirichlet box this is `None`;
    /// on a torus coordinates wrap.
    pub fn index_of(&self, coords: &[i64]) -> Option<usize> {
        if coords.len() != self.dim {
            return None;
        }
        let mut idx = 0usize;
        for &c in coords {
            let c = match self.boundary {
                Boundary::Dirichlet => c,
                Boundary::Periodic => self.wrap(c),
            };
            let off = c - self.lower;
            if off < 0 || off >= self.side as i64 {
                return None;
            }
            idx = idx * self.side + off as usize;
        }
        Some(idx)
    }

    pub fn index(&self, site: &Site) -> Option<usize> {
        self.index_of(&site.0)
    }

    pub fn contains(&self, site: &Site) -> bool {
        site.dim() == self.dim
            && site
                .0
                .iter()
                .all(|&c| c >= self.lower && c <= self.upper())
    }

    /// Writes the coordinates of site `idx` into `out`.
    pub fn coords_into(&self, mut idx: usize, out: &mut [i64]) {
        for axis in (0..self.dim).rev() {
            out[axis] = (idx % self.side) as i64 + self.lower;
            idx /= self.side;
        }
    }

    pub fn site(&self, idx: usize) -> Site {
        let mut c = vec![0; self.dim];
        self.coords_into(idx, &mut c);
        Site(c)
    }

    /// All sites in enumeration order.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.len()).map(move |i| self.site(i))
    }

    /// Flat row-major coordinate table, `len() * dim()` entries.
    pub fn coordinate_table(&self) -> Vec<i64> {
        let mut out = vec![0; self.len() * self.dim];
        for (i, chunk) in out.chunks_mut(self.dim).enumerate() {
            self.coords_into(i, chunk);
        }
        out
    }

    /// Neighbour of `idx` along `axis` in direction `+1` (`forward`) or `-1`.
    /// `None` when it falls outside a Dirichlet box.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> Option<usize> {
        let stride = self.stride(axis);
        let c = (idx / stride) % self.side;
        if forward {
            if c + 1 < self.side {
                Some(idx + stride)
            } else if self.is_periodic() {
                Some(idx + stride - self.side * stride)
            } else {
                None
            }
        } else if c > 0 {
            Some(idx - stride)
        } else if self.is_periodic() {
            Some(idx + (self.side - 1) * stride)
        } else {
            None
        }
    }

    /// Calls `f` once for each of the `2N` lattice neighbours of `idx`.
    #[inline]
    pub fn for_each_neighbor(&self, idx: usize, mut f: impl FnMut(Option<usize>)) {
        for axis in 0..self.dim {
            f(self.neighbor(idx, axis, true));
            f(self.neighbor(idx, axis, false));
        }
    }

    /// Coordinate representative closest to 0 (torus minimal image). The
    /// identity on a Dirichlet box.
    pub fn minimal_image(&self, c: i64) -> i64 {
        match self.boundary {
            Boundary::Dirichlet => c,
            Boundary::Periodic => {
                let s = self.side as i64;
                let r = c.rem_euclid(s);
                if r > s / 2 {
                    r - s
                } else {
                    r
                }
            }
        }
    }
}

impl fmt::Display for BoxDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.boundary {
            Boundary::Dirichlet => write!(f, "box N={} R={}", self.dim, self.radius()),
            Boundary::Periodic => write!(f, "torus N={} side={}", self.dim, self.side),
        }
    }
}

/// A real function on a box, implicitly zero outside it.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    domain: BoxDomain,
    values: Vec<f64>,
}

impl Field {
    pub fn new(domain: BoxDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DimensionMismatch {
                expected: domain.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at site {}",
                domain.site(i)
            )));
        }
        Ok(Self { domain, values })
    }

    /// Skips validation; callers guarantee length and finiteness.
    pub(crate) fn from_raw(domain: BoxDomain, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { domain, values }
    }

    pub fn zeros(domain: &BoxDomain) -> Self {
        Self {
            values: vec![0.0; domain.len()],
            domain: domain.clone(),
        }
    }

    pub fn constant(domain: &BoxDomain, c: f64) -> Result<Self> {
        Self::new(domain.clone(), vec![c; domain.len()])
    }

    /// Kronecker delta at `site`.
    pub fn delta(domain: &BoxDomain, site: &Site) -> Result<Self> {
        let idx = domain
            .index(site)
            .filter(|_| domain.contains(site))
            .ok_or_else(|| Error::InvalidInput(format!("site {site} is outside {domain}")))?;
        let mut f = Self::zeros(domain);
        f.values[idx] = 1.0;
        Ok(f)
    }

    pub fn from_fn(domain: &BoxDomain, mut f: impl FnMut(&Site) -> f64) -> Result<Self> {
        let values = domain.sites().map(|s| f(&s)).collect();
        Self::new(domain.clone(), values)
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at `site`, 0 outside a Dirichlet box.
    pub fn at(&self, site: &Site) -> f64 {
        self.domain
            .index(site)
            .map(|i| self.values[i])
            .unwrap_or(0.0)
    }

    pub fn same_domain(&self, other: &Field) -> Result<()> {
        if self.domain == other.domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.same_domain(other)?;
        Ok(crate::linalg::dot(&self.values, &other.values))
    }

    pub fn norm2(&self) -> f64 {
        crate::linalg::norm(&self.values)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.same_domain(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Field::new(self.domain.clone(), values)
    }

    pub fn scaled(&self, a: f64) -> Result<Field> {
        Field::new(self.domain.clone(), self.values.iter().map(|x| a * x).collect())
    }

    /// Index of the largest `|u(x)|`; ties go to the earliest site, i.e. the
    /// lexicographically smallest one.
    pub fn argmax_abs(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.values.iter().enumerate() {
            let a = v.abs();
            if best.is_none_or(|(_, b)| a > b) {
                best = Some((i, a));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// `Δu(x) = Σ_{y∼x} (u(y) − u(x))` with zero extension (or wrap-around).
pub fn laplacian(u: &Field) -> Field {
    let d = u.domain();
    let v = u.values();
    let out = (0..d.len())
        .map(|i| {
            let mut acc = 0.0;
            d.for_each_neighbor(i, |j| acc += j.map_or(0.0, |j| v[j]) - v[i]);
            acc
        })
        .collect();
    Field::from_raw(d.clone(), out)
}

/// Pointwise carré du champ `Γ(u,v)(x) = ½ Σ_{y∼x} (u(y)−u(x))(v(y)−v(x))`.
pub fn gamma(u: &Field, v: &Field, x: &Site) -> Result<f64> {
    u.same_domain(v)?;
    let d = u.domain();
    if x.dim() != d.dim() {
        return Err(Error::DimensionMismatch {
            expected: d.dim(),
            found: x.dim(),
        });
    }
    if !d.contains(x) {
        return Err(Error::InvalidInput(format!("site {x} is outside {d}")));
    }
    let i = d.index(x).expect("contained site has an index");
    let (uv, vv) = (u.values(), v.values());
    let mut acc = 0.0;
    d.for_each_neighbor(i, |j| {
        let du = j.map_or(0.0, |j| uv[j]) - uv[i];
        let dv = j.map_or(0.0, |j| vv[j]) - vv[i];
        acc += du * dv;
    });
    Ok(0.5 * acc)
}

/// `Γ(u)(x) = |∇u|²(x)`.
pub fn carre_du_champ(u: &Field, x: &Site) -> Result<f64> {
    gamma(u, u, x)
}

/// Bilinear Dirichlet form: the sum over undirected lattice edges touching the
/// box of `(u(y)−u(x))(v(y)−v(x))`. Equals `(−Δu, v)₂`.
pub fn dirichlet_form(u: &Field, v: &Field) -> Result<f64> {
    u.same_domain(v)?;
    Ok(dirichlet_form_raw(u.domain(), u.values(), v.values()))
}

pub(crate) fn dirichlet_form_raw(d: &BoxDomain, u: &[f64], v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..d.len() {
        for axis in 0..d.dim() {
            match d.neighbor(i, axis, true) {
                Some(j) => acc += (u[j] - u[i]) * (v[j] - v[i]),
                None => acc += u[i] * v[i],
            }
            if d.neighbor(i, axis, false).is_none() {
                acc += u[i] * v[i];
            }
        }
    }
    acc
}

/// `Σ_x Γ(u)(x)` over ℤ^N, i.e. the sum of squared edge differences.
pub fn dirichlet_energy(u: &Field) -> f64 {
    dirichlet_form_raw(u.domain(), u.values(), u.values())
}

/// Counting-measure ℓ^p norm; `p = f64::INFINITY` gives the max norm.
pub fn lp_norm(u: &Field, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidInput(format!("ℓ^p norm needs p ≥ 1, got {p}")));
    }
    let v = u.values();
    if p.is_infinite() {
        return Ok(v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    }
    if p == 2.0 {
        return Ok(crate::linalg::norm(v));
    }
    Ok(v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p))
}

/// `result(x) = u(x + shift)`; mass pushed out of a Dirichlet box is lost.
pub fn translate(u: &Field, shift: &Site) -> Result<Field> {
    let d = u.domain();
    if shift.dim() != d.dim() {
        return Err(Error::DimensionMismatch {
            expected: d.dim(),
            found: shift.dim(),
        });
    }
    let mut c = vec![0i64; d.dim()];
    let out = (0..d.len())
        .map(|i| {
            d.coords_into(i, &mut c);
            for (x, s) in c.iter_mut().zip(&shift.0) {
                *x += s;
            }
            d.index_of(&c).map_or(0.0, |j| u.values()[j])
        })
        .collect();
    Ok(Field::from_raw(d.clone(), out))
}

/// Writes one line per site, `x₁ … x_N value`, in enumeration order.
pub fn write_field<W: Write>(u: &Field, mut out: W) -> Result<()> {
    let d = u.domain();
    let mut c = vec![0i64; d.dim()];
    for (i, v) in u.values().iter().enumerate() {
        d.coords_into(i, &mut c);
        for x in &c {
            write!(out, "{x} ")?;
        }
        writeln!(out, "{}", sig17(*v))?;
    }
    Ok(())
}

/// Reads a dump produced by [`write_field`] back onto `domain`.
pub fn read_field<R: BufRead>(domain: &BoxDomain, input: R) -> Result<Field> {
    let mut values = Vec::with_capacity(domain.len());
    let mut c = vec![0i64; domain.dim()];
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            line: lineno + 1,
            msg,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != domain.dim() + 1 {
            return Err(err(format!(
                "expected {} columns, found {}",
                domain.dim() + 1,
                toks.len()
            )));
        }
        let idx = values.len();
        if idx >= domain.len() {
            return Err(err("more lines than sites".into()));
        }
        domain.coords_into(idx, &mut c);
        for (tok, want) in toks.iter().zip(&c) {
            let x: i64 = tok.parse().map_err(|e| err(format!("{e}")))?;
            if x != *want {
                return Err(err(format!("site out of order: got {x}, expected {want}")));
            }
        }
        let v: f64 = toks[domain.dim()].parse().map_err(|e| err(format!("{e}")))?;
        values.push(v);
    }
    Field::new(domain.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(d: &BoxDomain, rng: &mut ChaCha8Rng) -> Field {
        Field::new(d.clone(), (0..d.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn enumeration_is_a_bijection() {
        let d = BoxDomain::new(3, 2).unwrap();
        assert_eq!(d.len(), 125);
        for (i, s) in d.sites().enumerate() {
            assert_eq!(d.index(&s), Some(i));
        }
        assert_eq!(d.site(0), Site::from([-2, -2, -2]));
        assert_eq!(d.site(1), Site::from([-2, -2, -1]));
        assert_eq!(d.index(&Site::from([3, 0, 0])), None);
    }

    #[test]
    fn laplacian_of_delta() {
        let d = BoxDomain::new(3, 2).unwrap();
        let u = Field::delta(&d, &Site::origin(3)).unwrap();
        let lu = laplacian(&u);
        assert_eq!(lu.at(&Site::origin(3)), -6.0);
        for axis in 0..3 {
            let mut e = Site::unit(3, axis);
            assert_eq!(lu.at(&e), 1.0);
            e.0[axis] = -1;
            assert_eq!(lu.at(&e), 1.0);
        }
        assert_eq!(lu.at(&Site::from([1, 1, 0])), 0.0);
    }

    #[test]
    fn laplacian_of_constant_vanishes_inside() {
        let d = BoxDomain::new(3, 2).unwrap();
        let u = Field::constant(&d, 3.5).unwrap();
        let lu = laplacian(&u);
        assert_eq!(lu.at(&Site::from([1, -1, 0])), 0.0);
        // the face sees one zero neighbour
        assert_eq!(lu.at(&Site::from([2, 0, 0])), -3.5);
    }

    #[test]
    fn carre_du_champ_examples() {
        let d = BoxDomain::new(3, 1).unwrap();
        let u = Field::delta(&d, &Site::origin(3)).unwrap();
        assert_eq!(carre_du_champ(&u, &Site::origin(3)).unwrap(), 3.0);
        assert_eq!(carre_du_champ(&u, &Site::unit(3, 0)).unwrap(), 0.5);
        let c = Field::constant(&BoxDomain::new(3, 2).unwrap(), 2.0).unwrap();
        assert_eq!(carre_du_champ(&c, &Site::origin(3)).unwrap(), 0.0);
        assert!(carre_du_champ(&u, &Site::from([2, 0, 0])).is_err());
        assert!(carre_du_champ(&u, &Site::from([0, 0])).is_err());
    }

    #[test]
    fn dirichlet_energy_examples() {
        let d = BoxDomain::new(3, 2).unwrap();
        let u = Field::delta(&d, &Site::origin(3)).unwrap();
        assert_eq!(dirichlet_energy(&u), 6.0);
        assert_eq!(dirichlet_energy(&Field::zeros(&d)), 0.0);
        // a delta on a corner still has 2N edges, three of them leaving the box
        let corner = Field::delta(&d, &Site::from([2, 2, 2])).unwrap();
        assert_eq!(dirichlet_energy(&corner), 6.0);
    }

    #[test]
    fn dirichlet_energy_matches_enlarged_gamma_sum() {
        // Σ Γ(u) over the box grown by one layer, computed on the bigger box.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let small = BoxDomain::new(3, 2).unwrap();
        let big = BoxDomain::new(3, 3).unwrap();
        let u = random_field(&small, &mut rng);
        let ub = Field::from_fn(&big, |s| u.at(s)).unwrap();
        let total: f64 = big.sites().map(|s| carre_du_champ(&ub, &s).unwrap()).sum();
        assert_relative_eq!(dirichlet_energy(&u), total, max_relative = 1e-12);
    }

    #[test]
    fn summation_by_parts() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [BoxDomain::new(3, 2).unwrap(), BoxDomain::torus(3, 4).unwrap()] {
            let u = random_field(&d, &mut rng);
            let minus_lap_u = laplacian(&u).scaled(-1.0).unwrap();
            assert_relative_eq!(
                dirichlet_energy(&u),
                minus_lap_u.dot(&u).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn lp_norm_examples() {
        let d = BoxDomain::new(2, 2).unwrap();
        let u = Field::delta(&d, &Site::origin(2)).unwrap();
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_relative_eq!(lp_norm(&u, p).unwrap(), 1.0);
        }
        let k = 7;
        let ones = Field::new(
            d.clone(),
            (0..d.len()).map(|i| if i < k { 1.0 } else { 0.0 }).collect(),
        )
        .unwrap();
        for p in [1.0, 2.0, 3.0] {
            assert_relative_eq!(lp_norm(&ones, p).unwrap(), (k as f64).powf(1.0 / p), max_relative = 1e-14);
        }
        assert!(lp_norm(&u, 0.5).is_err());
        assert!(lp_norm(&u, f64::NAN).is_err());
    }

    #[test]
    fn translate_examples() {
        let d = BoxDomain::new(3, 2).unwrap();
        let u = Field::delta(&d, &Site::origin(3)).unwrap();
        assert_eq!(translate(&u, &Site::origin(3)).unwrap(), u);
        let t = translate(&u, &Site::unit(3, 0)).unwrap();
        assert_eq!(t.at(&Site::from([-1, 0, 0])), 1.0);
        assert_eq!(t.norm2(), 1.0);
        let lost = translate(&u, &Site::from([3, 0, 0])).unwrap();
        assert_eq!(lost.norm2(), 0.0);
        assert!(translate(&u, &Site::from([1, 0])).is_err());
    }

    #[test]
    fn torus_translation_is_an_isometry() {
        let d = BoxDomain::torus(3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_field(&d, &mut rng);
        let t = translate(&u, &Site::from([5, -1, 2])).unwrap();
        assert_relative_eq!(t.norm2(), u.norm2(), max_relative = 1e-14);
    }

    #[test]
    fn torus_neighbors_wrap() {
        let d = BoxDomain::torus(2, 4).unwrap();
        let i = d.index(&Site::from([1, 0])).unwrap();
        let j = d.neighbor(i, 0, true).unwrap();
        assert_eq!(d.site(j), Site::from([-2, 0]));
        assert_eq!(d.minimal_image(1), 1);
        assert_eq!(d.minimal_image(-2), 2);
        assert_eq!(d.minimal_image(3), -1);
    }

    #[test]
    fn nan_rejected() {
        let d = BoxDomain::new(1, 1).unwrap();
        assert!(Field::new(d.clone(), vec![0.0, f64::NAN, 0.0]).is_err());
        assert!(Field::new(d, vec![0.0; 2]).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let d = BoxDomain::new(2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_field(&d, &mut rng);
        let mut buf = Vec::new();
        write_field(&u, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("-1 -1 "));
        let back = read_field(&d, buf.as_slice()).unwrap();
        assert_eq!(back, u);
        let bad = "0 0 1.0\n";
        assert!(read_field(&d, bad.as_bytes()).is_err());
    }
}
