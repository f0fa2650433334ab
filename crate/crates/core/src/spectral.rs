//! Periodic grids, spectral transforms, Fourier multipliers and discrete
//! Fourier-Lebesgue norms.
//!
//! Layout: spectral coefficients are stored in monotone frequency order,
//! index `m` holding wavenumber `k = m - N/2`, so `k` runs over
//! `{-N/2, ..., N/2 - 1}` and `ξ_k = 2πk/L`. Sample `j` of the physical
//! representation sits at `x_j = j·L/N`.
//!
//! Normalization follows the unitary continuum transform
//! `f̂(ξ) = (2π)^{-1/2} ∫ f(x) e^{-ixξ} dx`, discretized as
//!
//! ```text
//! f̂_k = dx / sqrt(2π) · Σ_j f(x_j) e^{-iξ_k x_j}
//! f(x_j) = Δξ / sqrt(2π) · Σ_k f̂_k e^{iξ_k x_j}
//! ```
//!
//! with `Δξ = 2π/L`, so that `Σ_k |f̂_k|² Δξ = Σ_j |f(x_j)|² dx`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{japanese, Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn plan_forward(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

pub(crate) fn plan_inverse(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Periodic grid on `[0, L)` with `N` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    length: f64,
}

impl GridSpec {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::GridSize(n));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::GridLength(length));
        }
        Ok(Self { n, length })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Frequency spacing `2π/L`.
    #[inline]
    pub fn dxi(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Integer wavenumber stored at monotone index `m`.
    #[inline]
    pub fn wavenumber(&self, m: usize) -> i64 {
        m as i64 - (self.n / 2) as i64
    }

    /// Monotone index of wavenumber `k`, if it lies on the grid.
    pub fn index_of(&self, k: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        (-half..half).contains(&k).then(|| (k + half) as usize)
    }

    #[inline]
    pub fn xi(&self, m: usize) -> f64 {
        self.wavenumber(m) as f64 * self.dxi()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n).map(|m| self.xi(m)).collect()
    }

    pub fn points(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n).map(|j| j as f64 * dx).collect()
    }

    /// Monotone index of `-k` modulo `N` (the Nyquist mode maps to itself).
    #[inline]
    pub fn mirror(&self, m: usize) -> usize {
        (self.n - m) % self.n
    }

    /// Modes kept by the 2/3 rule: `3|k| < N`.
    pub fn dealias_mask(&self) -> Vec<bool> {
        (0..self.n)
            .map(|m| 3 * self.wavenumber(m).unsigned_abs() < self.n as u64)
            .collect()
    }

    /// Same grid, `factor` times as many points on the same domain.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.n * factor, self.length)
    }
}

/// In-place physical → spectral on raw monotone-ordered storage.
pub(crate) fn forward_in_place(grid: &GridSpec, buf: &mut [Complex64]) {
    let n = grid.n();
    debug_assert_eq!(buf.len(), n);
    plan_forward(n).process(buf);
    let scale = grid.dx() / (2.0 * PI).sqrt();
    buf.iter_mut().for_each(|c| *c *= scale);
    buf.rotate_left(n / 2);
}

/// In-place spectral → physical on raw monotone-ordered storage.
pub(crate) fn inverse_in_place(grid: &GridSpec, buf: &mut [Complex64]) {
    let n = grid.n();
    debug_assert_eq!(buf.len(), n);
    buf.rotate_left(n / 2);
    plan_inverse(n).process(buf);
    let scale = grid.dxi() / (2.0 * PI).sqrt();
    buf.iter_mut().for_each(|c| *c *= scale);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Spectral,
    Physical,
}

/// A complex scalar field on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexScalarField {
    grid: GridSpec,
    data: Vec<Complex64>,
    rep: Representation,
}

impl ComplexScalarField {
    pub fn from_spectral(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        Self::with_rep(grid, coeffs, Representation::Spectral)
    }

    pub fn from_physical(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        Self::with_rep(grid, values, Representation::Physical)
    }

    pub fn with_rep(grid: GridSpec, data: Vec<Complex64>, rep: Representation) -> Result<Self> {
        if data.len() != grid.n() {
            return Err(Error::Length {
                expected: grid.n(),
                got: data.len(),
            });
        }
        Ok(Self { grid, data, rep })
    }

    /// Samples `f` at the grid points.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> Complex64) -> Self {
        let data = grid.points().into_iter().map(f).collect();
        Self {
            grid,
            data,
            rep: Representation::Physical,
        }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            data: vec![Complex64::new(0.0, 0.0); grid.n()],
            rep: Representation::Spectral,
        }
    }

    /// A single spectral coefficient `value` at wavenumber `k`.
    pub fn single_mode(grid: GridSpec, k: i64, value: Complex64) -> Result<Self> {
        let m = grid
            .index_of(k)
            .ok_or_else(|| Error::Config(format!("wavenumber {k} is not on the grid")))?;
        let mut field = Self::zeros(grid);
        field.data[m] = value;
        Ok(field)
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn rep(&self) -> Representation {
        self.rep
    }

    /// Raw storage in the current representation.
    #[inline]
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn to_spectral(&self) -> Self {
        self.clone().into_spectral()
    }

    pub fn to_physical(&self) -> Self {
        self.clone().into_physical()
    }

    pub fn into_spectral(mut self) -> Self {
        if self.rep == Representation::Physical {
            forward_in_place(&self.grid, &mut self.data);
            self.rep = Representation::Spectral;
        }
        self
    }

    pub fn into_physical(mut self) -> Self {
        if self.rep == Representation::Spectral {
            inverse_in_place(&self.grid, &mut self.data);
            self.rep = Representation::Physical;
        }
        self
    }

    /// Spectral coefficients in monotone order, transforming if needed.
    pub fn coeffs(&self) -> Vec<Complex64> {
        match self.rep {
            Representation::Spectral => self.data.clone(),
            Representation::Physical => self.to_spectral().data,
        }
    }

    /// Physical samples, transforming if needed.
    pub fn values(&self) -> Vec<Complex64> {
        match self.rep {
            Representation::Physical => self.data.clone(),
            Representation::Spectral => self.to_physical().data,
        }
    }

    /// Multiplies coefficient `k` by `symbol(ξ_k)`; the representation of
    /// the result matches the input.
    pub fn apply_multiplier(&self, symbol: impl Fn(f64) -> Complex64) -> Result<Self> {
        let rep = self.rep;
        let mut out = self.to_spectral();
        for (m, c) in out.data.iter_mut().enumerate() {
            let xi = self.grid.xi(m);
            let w = symbol(xi);
            if !(w.re.is_finite() && w.im.is_finite()) {
                return Err(Error::NonFiniteSymbol { xi });
            }
            *c *= w;
        }
        Ok(match rep {
            Representation::Spectral => out,
            Representation::Physical => out.into_physical(),
        })
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `self + factor·other`, in the representation of `self`.
    pub fn add_scaled(&self, other: &Self, factor: Complex64) -> Result<Self> {
        self.check_grid(other)?;
        let rhs = match self.rep {
            Representation::Spectral => other.coeffs(),
            Representation::Physical => other.values(),
        };
        let data = self
            .data
            .iter()
            .zip(&rhs)
            .map(|(a, b)| a + factor * b)
            .collect();
        Ok(Self {
            grid: self.grid,
            data,
            rep: self.rep,
        })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|c| c * factor).collect(),
            rep: self.rep,
        }
    }

    /// Pointwise complex conjugate in physical space.
    pub fn conj(&self) -> Self {
        let values = self.values().into_iter().map(|c| c.conj()).collect();
        let out = Self {
            grid: self.grid,
            data: values,
            rep: Representation::Physical,
        };
        match self.rep {
            Representation::Physical => out,
            Representation::Spectral => out.into_spectral(),
        }
    }

    /// `(Σ_j |f(x_j)|² dx)^{1/2}`, computed from whichever representation is at hand.
    pub fn l2_norm(&self) -> f64 {
        let cell = match self.rep {
            Representation::Physical => self.grid.dx(),
            Representation::Spectral => self.grid.dxi(),
        };
        (self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * cell).sqrt()
    }

    /// Maximum modulus of the physical samples.
    pub fn sup_norm(&self) -> f64 {
        self.values().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Maximum modulus of the spectral coefficients.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Zeroes every mode outside the 2/3-rule band.
    pub fn dealiased(&self) -> Self {
        let rep = self.rep;
        let mut out = self.to_spectral();
        for (c, keep) in out.data.iter_mut().zip(self.grid.dealias_mask()) {
            if !keep {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        match rep {
            Representation::Spectral => out,
            Representation::Physical => out.into_physical(),
        }
    }

    /// Largest `|k|` carrying a coefficient above `tol` in modulus.
    pub fn bandwidth(&self, tol: f64) -> u64 {
        self.coeffs()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > tol)
            .map(|(m, _)| self.grid.wavenumber(m).unsigned_abs())
            .max()
            .unwrap_or(0)
    }
}

/// Regularity and Lebesgue index of an `Ĥ^{s,p}` norm, `1 < p ≤ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    s: f64,
    p: f64,
}

impl NormSpec {
    pub fn new(s: f64, p: f64) -> Result<Self> {
        if !(p > 1.0 && p <= 2.0) || !s.is_finite() {
            return Err(Error::LebesgueIndex(p));
        }
        Ok(Self { s, p })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Conjugate index `p' = p/(p-1)`.
    pub fn dual(&self) -> f64 {
        dual_index(self.p)
    }
}

/// `p/(p-1)`, with `∞ ↔ 1`.
pub fn dual_index(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

/// `(Σ v_i^q · cell)^{1/q}` for nonnegative `v_i`, rescaled by the maximum
/// to stay finite for large `q`. `q = ∞` gives the maximum.
pub fn weighted_lebesgue(values: impl IntoIterator<Item = f64>, q: f64, cell: f64) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    if q.is_infinite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v / max).powf(q)).sum();
    max * (sum * cell).powf(1.0 / q)
}

/// Discrete `Ĥ^{s,p}` norm: `(Σ_k ⟨ξ_k⟩^{s p'} |f̂_k|^{p'} Δξ)^{1/p'}`.
pub fn hsp_norm(f: &ComplexScalarField, spec: NormSpec) -> f64 {
    let grid = *f.grid();
    let coeffs = f.coeffs();
    weighted_lebesgue(
        coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| japanese(grid.xi(m)).powf(spec.s()) * c.norm()),
        spec.dual(),
        grid.dxi(),
    )
}
