//! The operator `A = −Δ + V`, its Floquet–Bloch bands, and the splitting of
//! a box into the negative and positive spectral subspaces `X⁻ ⊕ X⁺`.

mod bloch;
mod potential;
mod split;

pub use bloch::{bands_at, bloch_band_edges, bloch_matrix, k_grid, BlochBandTable};
pub use potential::PeriodicPotential;
pub use split::{
    assemble_operator, spectral_split, split_box, GapEdges, GapReport, Operator, Sign,
    SpectralSplit, DENSE_SITE_BUDGET, ZERO_EIGENVALUE_TOL,
};
