use crate::error::{Error, Result};

/// A potential that repeats with period `T = (T₁, …, T_N)`. The fundamental
/// cell `[0,T₁) × … × [0,T_N)` is stored lexicographically.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicPotential {
    period: Vec<usize>,
    cell: Vec<f64>,
}

impl PeriodicPotential {
    pub fn new(period: Vec<usize>, cell: Vec<f64>) -> Result<Self> {
        if period.is_empty() || period.contains(&0) {
            return Err(Error::InvalidInput("period entries must be positive".into()));
        }
        let n: usize = period.iter().product();
        if cell.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: cell.len(),
            });
        }
        if cell.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("potential values must be finite".into()));
        }
        Ok(Self { period, cell })
    }

    /// `V(x) = c·(−1)^{x₁+…+x_N} + shift`, period 2 in every direction.
    pub fn checkerboard(dim: usize, amplitude: f64, shift: f64) -> Result<Self> {
        let period = vec![2; dim];
        let n = 1usize << dim;
        let cell = (0..n)
            .map(|i| {
                let parity = i.count_ones() % 2;
                if parity == 0 {
                    amplitude + shift
                } else {
                    -amplitude + shift
                }
            })
            .collect();
        Self::new(period, cell)
    }

    /// The default gapped potential: checkerboard with shift `−2N`.
    pub fn default_checkerboard(dim: usize, amplitude: f64) -> Result<Self> {
        Self::checkerboard(dim, amplitude, -2.0 * dim as f64)
    }

    pub fn constant(dim: usize, value: f64) -> Result<Self> {
        Self::new(vec![1; dim], vec![value])
    }

    pub fn dim(&self) -> usize {
        self.period.len()
    }

    pub fn period(&self) -> &[usize] {
        &self.period
    }

    pub fn cell(&self) -> &[f64] {
        &self.cell
    }

    pub fn cell_len(&self) -> usize {
        self.cell.len()
    }

    /// Index into the cell of `x mod T`.
    pub fn cell_index(&self, x: &[i64]) -> usize {
        let mut idx = 0;
        for (c, &t) in x.iter().zip(&self.period) {
            idx = idx * t + c.rem_euclid(t as i64) as usize;
        }
        idx
    }

    pub fn value(&self, x: &[i64]) -> f64 {
        self.cell[self.cell_index(x)]
    }
}
