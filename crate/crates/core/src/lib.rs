//! Pseudospectral simulation of the one-dimensional Dirac-Klein-Gordon
//! system in half-wave form, plus a toolkit for the Fourier-Lebesgue and
//! Fourier restriction (Bourgain-type) norms used in its low-regularity
//! well-posedness theory.
//!
//! Module map:
//!
//! - [`spectral`]: periodic grids, transforms, multipliers, `Ĥ^{s,p}` norms.
//! - [`dkg`]: Dirac matrices, projections `P±`, the β-form and its null
//!   structure, diagonalization and reconstruction of data.
//! - [`evolution`]: free propagators, right-hand side, exponential
//!   integrators and the Picard iteration on the Duhamel system.
//! - [`bourgain`]: space-time spectra and `X^{l,b}_p` / `Y^{l,b}_p` norms.
//! - [`estimates`]: exact and statistical checks of the bilinear machinery.
//! - [`feasibility`]: the parameter-region logic for `(p, s, r)` and `(σ, ρ)`.
//! - [`io`]: CSV, JSON and binary field formats.

pub mod bourgain;
pub mod dkg;
pub mod error;
pub mod estimates;
pub mod evolution;
pub mod feasibility;
pub mod io;
pub mod presets;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;

use serde::{Deserialize, Serialize};

/// Orientation label shared by projections, propagators and phase functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    /// `+1.0` or `-1.0`.
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    #[inline]
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// Japanese bracket `⟨λ⟩ = (1 + λ²)^{1/2}`.
#[inline]
pub fn japanese(x: f64) -> f64 {
    x.hypot(1.0)
}
