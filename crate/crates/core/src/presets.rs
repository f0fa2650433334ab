//! Smooth periodic initial data.
//!
//! Every profile is built from the analytic bump `exp(κ(cos(2π(x - c)/L) - 1))`,
//! so spectra decay faster than any power and no periodization error occurs.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dkg::{diagonalize, HalfWaveState, SpinorField};
use crate::spectral::{ComplexScalarField, GridSpec};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothData {
    pub amplitude: f64,
    /// Bump concentration `κ`; spectral content reaches roughly `|k| ≲ 2κ^{1/2}`.
    pub concentration: f64,
    /// Integer carrier wavenumber of the upper spinor component.
    pub carrier: i64,
}

impl Default for SmoothData {
    fn default() -> Self {
        Self {
            amplitude: 0.5,
            concentration: 8.0,
            carrier: 3,
        }
    }
}

fn bump(grid: &GridSpec, kappa: f64, center: f64) -> impl Fn(f64) -> f64 {
    let w = 2.0 * PI / grid.length();
    move |x| (kappa * ((w * (x - center)).cos() - 1.0)).exp()
}

impl SmoothData {
    /// Physical data `(ψ₀, φ₀, φ₁)` with real `φ₀`, `φ₁`.
    pub fn fields(&self, grid: GridSpec) -> (SpinorField, ComplexScalarField, ComplexScalarField) {
        let l = grid.length();
        let a = self.amplitude;
        let b1 = bump(&grid, self.concentration, 0.35 * l);
        let b2 = bump(&grid, self.concentration, 0.6 * l);
        let b3 = bump(&grid, 0.5 * self.concentration, 0.5 * l);
        let w = 2.0 * PI / l;
        let k0 = self.carrier as f64;
        let psi = SpinorField::from_fn(grid, |x| {
            [
                Complex64::from_polar(a * b1(x), k0 * w * x),
                Complex64::new(0.5 * a * b2(x), -0.25 * a * b1(x)),
            ]
        });
        let phi0 = ComplexScalarField::from_fn(grid, |x| Complex64::new(a * b3(x), 0.0));
        let phi1 = ComplexScalarField::from_fn(grid, |x| {
            Complex64::new(0.5 * a * (w * x).sin() * b2(x), 0.0)
        });
        (psi, phi0, phi1)
    }

    pub fn state(&self, grid: GridSpec) -> Result<HalfWaveState> {
        let (psi, phi0, phi1) = self.fields(grid);
        diagonalize(&psi, &phi0, &phi1)
    }
}
