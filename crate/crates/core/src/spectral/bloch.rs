//! Floquet–Bloch reduction of `−Δ + V` for a periodic potential.
//!
//! For a quasi-momentum `k`, functions with `u(x + T_j e_j) = e^{i k_j} u(x)`
//! are determined by their values on one cell, and `−Δ + V` acts on them as a
//! Hermitian `|cell| × |cell|` matrix `H(k)`. The band functions are its
//! eigenvalues. `H(k)` is diagonalized through the real symmetric embedding
//! `[[Re H, −Im H], [Im H, Re H]]`, whose spectrum is that of `H(k)` with
//! every eigenvalue doubled.

use std::f64::consts::PI;
use std::io::Write;

use faer::Mat;
use rayon::prelude::*;

use super::potential::PeriodicPotential;
use crate::error::{Error, Result};
use crate::format::sig17;
use crate::linalg::sym_eig;

/// Below this the gap test treats a band value as touching 0.
const ZERO_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct BlochBandTable {
    pub grid: usize,
    pub kpoints: Vec<Vec<f64>>,
    /// `bands[k][b]`, ascending in `b`.
    pub bands: Vec<Vec<f64>>,
    /// `(min, max)` of band `b` over the grid.
    pub intervals: Vec<(f64, f64)>,
    pub sigma_minus: f64,
    pub sigma_plus: f64,
}

impl BlochBandTable {
    pub fn dim(&self) -> usize {
        self.kpoints.first().map_or(0, |k| k.len())
    }

    /// CSV with header `k1,…,kN,band_index,lambda`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.dim();
        let header: Vec<String> = (1..=n).map(|i| format!("k{i}")).collect();
        writeln!(out, "{},band_index,lambda", header.join(","))?;
        for (k, bands) in self.kpoints.iter().zip(&self.bands) {
            let kcols: Vec<String> = k.iter().map(|v| sig17(*v)).collect();
            let kcols = kcols.join(",");
            for (b, lambda) in bands.iter().enumerate() {
                writeln!(out, "{kcols},{b},{}", sig17(*lambda))?;
            }
        }
        Ok(())
    }
}

/// The Hermitian Bloch matrix at `k`, as (real part, imaginary part).
pub fn bloch_matrix(v: &PeriodicPotential, k: &[f64]) -> Result<(Mat<f64>, Mat<f64>)> {
    let dim = v.dim();
    if k.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: k.len(),
        });
    }
    let period = v.period();
    let n = v.cell_len();
    let mut re = Mat::<f64>::zeros(n, n);
    let mut im = Mat::<f64>::zeros(n, n);
    let mut y = vec![0i64; dim];
    for a in 0..n {
        // cell coordinates of a
        let mut rest = a;
        for axis in (0..dim).rev() {
            y[axis] = (rest % period[axis]) as i64;
            rest /= period[axis];
        }
        re[(a, a)] += 2.0 * dim as f64 + v.cell()[a];
        for axis in 0..dim {
            let t = period[axis] as i64;
            for step in [1i64, -1] {
                let c = y[axis] + step;
                let phase = if c >= t {
                    k[axis]
                } else if c < 0 {
                    -k[axis]
                } else {
                    0.0
                };
                let mut z = y.clone();
                z[axis] = c.rem_euclid(t);
                let b = v.cell_index(&z);
                re[(a, b)] -= phase.cos();
                im[(a, b)] -= phase.sin();
            }
        }
    }
    Ok((re, im))
}

/// Band values at a single quasi-momentum, ascending.
pub fn bands_at(v: &PeriodicPotential, k: &[f64]) -> Result<Vec<f64>> {
    let (re, im) = bloch_matrix(v, k)?;
    let n = re.nrows();
    let big = Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) => re[(i, j)],
        (true, false) => -im[(i, j - n)],
        (false, true) => im[(i - n, j)],
        (false, false) => re[(i - n, j - n)],
    });
    let (vals, _) = sym_eig(big.as_ref())?;
    let mut out = Vec::with_capacity(n);
    for pair in vals.chunks(2) {
        let (a, b) = (pair[0], pair[1]);
        if (a - b).abs() > 1e-8 * (1.0 + a.abs()) {
            return Err(Error::Numerical(format!(
                "Bloch matrix at k = {k:?} is not Hermitian to tolerance (unpaired eigenvalues {a}, {b})"
            )));
        }
        out.push(0.5 * (a + b));
    }
    Ok(out)
}

/// The uniform grid `k_j ∈ {2πl/m : l = 0, …, m−1}` in lexicographic order.
pub fn k_grid(dim: usize, m: usize) -> Vec<Vec<f64>> {
    let total = m.pow(dim as u32);
    (0..total)
        .map(|mut i| {
            let mut k = vec![0.0; dim];
            for axis in (0..dim).rev() {
                k[axis] = 2.0 * PI * (i % m) as f64 / m as f64;
                i /= m;
            }
            k
        })
        .collect()
}

/// Band functions on an `m^N` grid and the gap `(σ⁻, σ⁺)` around 0.
pub fn bloch_band_edges(v: &PeriodicPotential, grid: usize) -> Result<BlochBandTable> {
    if grid < 8 {
        return Err(Error::InvalidInput(format!(
            "Bloch grid resolution must be at least 8 per axis (got {grid})"
        )));
    }
    let kpoints = k_grid(v.dim(), grid);
    let bands: Vec<Vec<f64>> = kpoints
        .par_iter()
        .map(|k| bands_at(v, k))
        .collect::<Result<_>>()?;
    let nb = v.cell_len();
    let mut intervals = vec![(f64::INFINITY, f64::NEG_INFINITY); nb];
    for row in &bands {
        for (iv, &x) in intervals.iter_mut().zip(row) {
            iv.0 = iv.0.min(x);
            iv.1 = iv.1.max(x);
        }
    }
    for (b, &(lo, hi)) in intervals.iter().enumerate() {
        if lo <= ZERO_TOL && hi >= -ZERO_TOL {
            return Err(Error::NoSpectralGap(format!(
                "band {b} spans [{lo}, {hi}]"
            )));
        }
    }
    let sigma_minus = intervals
        .iter()
        .filter(|iv| iv.1 < 0.0)
        .map(|iv| iv.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let sigma_plus = intervals
        .iter()
        .filter(|iv| iv.0 > 0.0)
        .map(|iv| iv.0)
        .fold(f64::INFINITY, f64::min);
    if !sigma_minus.is_finite() {
        return Err(Error::NoSpectralGap(
            "the spectrum has no negative part, so the problem is not indefinite".into(),
        ));
    }
    if !sigma_plus.is_finite() {
        return Err(Error::NoSpectralGap("the spectrum has no positive part".into()));
    }
    Ok(BlochBandTable {
        grid,
        kpoints,
        bands,
        intervals,
        sigma_minus,
        sigma_plus,
    })
}
