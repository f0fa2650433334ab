//! Space-time spectra and discrete Fourier restriction norms.
//!
//! A [`SpaceTimeSpectrum`] holds `N × N_t` coefficients over `(ξ_k, τ_j)`
//! with `τ_j = 2πj/T_w`, `j ∈ {-⌊N_t/2⌋, …}`, monotone in both indices and
//! stored row-major in `ξ` (`[m·N_t + j]`). The transform is the discrete
//! analog of `(2π)^{-1} ∫∫ u(x,t) e^{-i(xξ + tτ)} dx dt` over the window
//! `[0, T_w)`, so `Σ |c|² ΔξΔτ = Σ |u|² dx dt`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::evolution::Trajectory;
use crate::spectral::{
    dual_index, forward_in_place, inverse_in_place, plan_forward, plan_inverse, weighted_lebesgue,
    GridSpec,
};
use crate::{japanese, Error, Result, Sign};

pub const MIN_TIME_SAMPLES: usize = 8;

/// Time window applied to the samples before transforming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Taper {
    None,
    /// `exp(1 - 1/(1 - u²))`, `u = 2t/T_w - 1`; equals 1 at the window centre.
    SmoothBump,
}

impl Taper {
    pub fn weight(&self, t: f64, window: f64) -> f64 {
        match self {
            Taper::None => 1.0,
            Taper::SmoothBump => {
                let u = 2.0 * t / window - 1.0;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - u * u)).exp()
                }
            }
        }
    }
}

impl std::str::FromStr for Taper {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Taper::None),
            "smooth-bump" | "bump" => Ok(Taper::SmoothBump),
            other => Err(Error::Config(format!("unknown taper `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeSpectrum {
    grid: GridSpec,
    n_t: usize,
    window: f64,
    taper: Taper,
    coeffs: Vec<Complex64>,
}

/// FFT output index `q` lands at monotone position `(q + ⌊N_t/2⌋) mod N_t`.
fn time_shift(n_t: usize) -> usize {
    n_t - n_t / 2
}

impl SpaceTimeSpectrum {
    pub fn new(
        grid: GridSpec,
        n_t: usize,
        window: f64,
        taper: Taper,
        coeffs: Vec<Complex64>,
    ) -> Result<Self> {
        if n_t < MIN_TIME_SAMPLES {
            return Err(Error::TooFewSamples {
                needed: MIN_TIME_SAMPLES,
                got: n_t,
            });
        }
        if !(window.is_finite() && window > 0.0) {
            return Err(Error::Config(format!(
                "window length must be positive, got {window}"
            )));
        }
        if coeffs.len() != grid.n() * n_t {
            return Err(Error::Length {
                expected: grid.n() * n_t,
                got: coeffs.len(),
            });
        }
        if coeffs
            .iter()
            .any(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            return Err(Error::Config(
                "space-time coefficients must be finite".into(),
            ));
        }
        Ok(Self {
            grid,
            n_t,
            window,
            taper,
            coeffs,
        })
    }

    pub fn zeros(grid: GridSpec, n_t: usize, window: f64) -> Result<Self> {
        Self::new(
            grid,
            n_t,
            window,
            Taper::None,
            vec![Complex64::new(0.0, 0.0); grid.n() * n_t],
        )
    }

    /// Transforms physical samples `samples[j][i] = u(x_i, j·T_w/N_t)`.
    pub fn from_samples(
        grid: GridSpec,
        window: f64,
        samples: &[Vec<Complex64>],
        taper: Taper,
    ) -> Result<Self> {
        let n_t = samples.len();
        if n_t < MIN_TIME_SAMPLES {
            return Err(Error::TooFewSamples {
                needed: MIN_TIME_SAMPLES,
                got: n_t,
            });
        }
        let n = grid.n();
        let dt = window / n_t as f64;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n * n_t];
        for (j, row) in samples.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Length {
                    expected: n,
                    got: row.len(),
                });
            }
            let w = taper.weight(j as f64 * dt, window);
            let mut buf: Vec<Complex64> = row.iter().map(|v| v * w).collect();
            forward_in_place(&grid, &mut buf);
            for (m, c) in buf.into_iter().enumerate() {
                coeffs[m * n_t + j] = c;
            }
        }
        let fft = plan_forward(n_t);
        let scale = dt / (2.0 * PI).sqrt();
        for row in coeffs.chunks_mut(n_t) {
            fft.process(row);
            row.iter_mut().for_each(|c| *c *= scale);
            row.rotate_left(time_shift(n_t));
        }
        Self::new(grid, n_t, window, taper, coeffs)
    }

    /// Samples `f(x, t)` on the space-time grid and transforms.
    pub fn from_fn(
        grid: GridSpec,
        n_t: usize,
        window: f64,
        taper: Taper,
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Result<Self> {
        let xs = grid.points();
        let dt = window / n_t as f64;
        let samples: Vec<Vec<Complex64>> = (0..n_t)
            .map(|j| xs.iter().map(|&x| f(x, j as f64 * dt)).collect())
            .collect();
        Self::from_samples(grid, window, &samples, taper)
    }

    /// Physical samples of the (tapered) field, `[j][i]` as in [`Self::from_samples`].
    pub fn samples(&self) -> Vec<Vec<Complex64>> {
        let n = self.grid.n();
        let n_t = self.n_t;
        let mut work = self.coeffs.clone();
        let ifft = plan_inverse(n_t);
        let scale = self.dtau() / (2.0 * PI).sqrt();
        for row in work.chunks_mut(n_t) {
            row.rotate_right(time_shift(n_t));
            ifft.process(row);
            row.iter_mut().for_each(|c| *c *= scale);
        }
        (0..n_t)
            .map(|j| {
                let mut buf: Vec<Complex64> = (0..n).map(|m| work[m * n_t + j]).collect();
                inverse_in_place(&self.grid, &mut buf);
                buf
            })
            .collect()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn taper(&self) -> Taper {
        self.taper
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    #[inline]
    pub fn get(&self, m: usize, j: usize) -> Complex64 {
        self.coeffs[m * self.n_t + j]
    }

    #[inline]
    pub fn set(&mut self, m: usize, j: usize, value: Complex64) {
        self.coeffs[m * self.n_t + j] = value;
    }

    pub fn dt(&self) -> f64 {
        self.window / self.n_t as f64
    }

    pub fn dtau(&self) -> f64 {
        2.0 * PI / self.window
    }

    /// Integer time-frequency label of monotone index `j`.
    #[inline]
    pub fn tau_index(&self, j: usize) -> i64 {
        j as i64 - (self.n_t / 2) as i64
    }

    #[inline]
    pub fn tau(&self, j: usize) -> f64 {
        self.tau_index(j) as f64 * self.dtau()
    }

    /// Monotone index of time-frequency label `q`, if it is on the grid.
    pub fn tau_position(&self, q: i64) -> Option<usize> {
        let j = q + (self.n_t / 2) as i64;
        (0..self.n_t as i64).contains(&j).then_some(j as usize)
    }

    /// `(Σ |c|² ΔξΔτ)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        let cell = self.grid.dxi() * self.dtau();
        (self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * cell).sqrt()
    }

    fn same_layout(&self, other: &Self) -> bool {
        self.grid == other.grid && self.n_t == other.n_t && self.window == other.window
    }
}

/// Which unknown of a trajectory to transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Component {
    PsiPlus,
    PsiMinus,
    PhiPlus,
    PhiMinus,
}

impl std::str::FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psi-plus" => Ok(Component::PsiPlus),
            "psi-minus" => Ok(Component::PsiMinus),
            "phi-plus" => Ok(Component::PhiPlus),
            "phi-minus" => Ok(Component::PhiMinus),
            other => Err(Error::Config(format!("unknown component `{other}`"))),
        }
    }
}

/// Space-time spectra of one unknown over the stored states: two spectra
/// (upper, lower) for spinors, one for scalars. The last state closes the
/// periodic window, so `N_t` is one less than the state count and
/// `T_w = N_t · sample_dt`.
pub fn spacetime_spectrum(
    traj: &Trajectory,
    component: Component,
    taper: Taper,
) -> Result<Vec<SpaceTimeSpectrum>> {
    let n_t = traj.states.len().saturating_sub(1);
    if n_t < MIN_TIME_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_TIME_SAMPLES,
            got: n_t,
        });
    }
    let grid = *traj.grid();
    let window = n_t as f64 * traj.sample_dt();
    let states = &traj.states[..n_t];
    let collect = |pick: &dyn Fn(&crate::dkg::HalfWaveState) -> Vec<Complex64>| {
        let samples: Vec<Vec<Complex64>> = states.iter().map(pick).collect();
        SpaceTimeSpectrum::from_samples(grid, window, &samples, taper)
    };
    match component {
        Component::PsiPlus | Component::PsiMinus => {
            let plus = component == Component::PsiPlus;
            let spinor = |s: &crate::dkg::HalfWaveState| {
                if plus {
                    s.psi_plus.clone()
                } else {
                    s.psi_minus.clone()
                }
            };
            Ok(vec![
                collect(&|s| spinor(s).upper().values())?,
                collect(&|s| spinor(s).lower().values())?,
            ])
        }
        Component::PhiPlus => Ok(vec![collect(&|s| s.phi_plus.values())?]),
        Component::PhiMinus => Ok(vec![collect(&|s| s.phi_minus.values())?]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    /// `τ ± ξ`, the transport characteristics.
    Line,
    /// `τ ± |ξ|`, the wave cone.
    Cone,
}

/// Weight data of an `X^{l,b}_{±p}` (line) or `Y^{l,b}_{±p}` (cone) norm.
/// The coefficients are summed in `ℓ^{p'}`. Indices above 2 arise as duals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub kind: PhaseKind,
    pub sign: Sign,
    pub l: f64,
    pub b: f64,
    pub p: f64,
}

impl PhaseSpec {
    pub fn new(kind: PhaseKind, sign: Sign, l: f64, b: f64, p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::LebesgueIndex(p));
        }
        if !(l.is_finite() && b.is_finite()) {
            return Err(Error::Config(format!(
                "non-finite weights l = {l}, b = {b}"
            )));
        }
        Ok(Self {
            kind,
            sign,
            l,
            b,
            p,
        })
    }

    pub fn x(sign: Sign, l: f64, b: f64, p: f64) -> Result<Self> {
        Self::new(PhaseKind::Line, sign, l, b, p)
    }

    pub fn y(sign: Sign, l: f64, b: f64, p: f64) -> Result<Self> {
        Self::new(PhaseKind::Cone, sign, l, b, p)
    }

    /// `±ξ` or `±|ξ|`.
    #[inline]
    pub fn phase(&self, xi: f64) -> f64 {
        let s = self.sign.value();
        match self.kind {
            PhaseKind::Line => s * xi,
            PhaseKind::Cone => s * xi.abs(),
        }
    }

    /// `⟨ξ⟩^l ⟨τ + phase(ξ)⟩^b`.
    #[inline]
    pub fn weight(&self, xi: f64, tau: f64) -> f64 {
        japanese(xi).powf(self.l) * japanese(tau + self.phase(xi)).powf(self.b)
    }
}

fn weighted_magnitudes<'a>(
    specs: &'a [&'a SpaceTimeSpectrum],
    phase: &'a PhaseSpec,
) -> impl Iterator<Item = f64> + 'a {
    let first = specs[0];
    let n_t = first.n_t;
    (0..first.coeffs.len()).map(move |idx| {
        let (m, j) = (idx / n_t, idx % n_t);
        let mag = specs
            .iter()
            .map(|s| s.coeffs[idx].norm_sqr())
            .sum::<f64>()
            .sqrt();
        mag * phase.weight(first.grid.xi(m), first.tau(j))
    })
}

/// `(Σ ⟨ξ⟩^{lp'} ⟨τ + phase(ξ)⟩^{bp'} |c|^{p'} ΔξΔτ)^{1/p'}`.
pub fn xsb_norm(spec: &SpaceTimeSpectrum, phase: &PhaseSpec) -> f64 {
    let cell = spec.grid.dxi() * spec.dtau();
    weighted_lebesgue(
        weighted_magnitudes(&[spec], phase),
        dual_index(phase.p),
        cell,
    )
}

/// [`xsb_norm`] of a vector-valued field, with the Euclidean modulus across
/// components.
pub fn xsb_norm_components(specs: &[&SpaceTimeSpectrum], phase: &PhaseSpec) -> Result<f64> {
    let first = specs
        .first()
        .ok_or_else(|| Error::Config("no components".into()))?;
    if specs.iter().any(|s| !s.same_layout(first)) {
        return Err(Error::GridMismatch);
    }
    let cell = first.grid.dxi() * first.dtau();
    Ok(weighted_lebesgue(
        weighted_magnitudes(specs, phase),
        dual_index(phase.p),
        cell,
    ))
}

/// Mixed norm `‖u‖_{L̂^{p}_x(L̂^{q}_t)} = ‖c‖_{ℓ^{p'}_ξ(ℓ^{q'}_τ)}`, with the
/// Euclidean modulus across components. `p`, `q` may be `∞`.
pub fn mixed_norm(specs: &[&SpaceTimeSpectrum], p: f64, q: f64) -> Result<f64> {
    let first = specs
        .first()
        .ok_or_else(|| Error::Config("no components".into()))?;
    if specs.iter().any(|s| !s.same_layout(first)) {
        return Err(Error::GridMismatch);
    }
    for idx in [p, q] {
        if !(idx > 1.0) {
            return Err(Error::LebesgueIndex(idx));
        }
    }
    let n_t = first.n_t;
    let inner: Vec<f64> = (0..first.grid.n())
        .map(|m| {
            weighted_lebesgue(
                (0..n_t).map(|j| {
                    specs
                        .iter()
                        .map(|s| s.get(m, j).norm_sqr())
                        .sum::<f64>()
                        .sqrt()
                }),
                dual_index(q),
                first.dtau(),
            )
        })
        .collect();
    Ok(weighted_lebesgue(inner, dual_index(p), first.grid.dxi()))
}

/// Modulation variables of a convolution pair `ξ = ξ₁ + ξ₂`, `τ = τ₁ + τ₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationTriple {
    /// `τ₁ + ξ₁`
    pub sigma1_plus: f64,
    /// `τ₂ - ξ₂`
    pub sigma2_minus: f64,
    /// `τ + |ξ|`
    pub sigma_plus: f64,
    /// `τ - |ξ|`
    pub sigma_minus: f64,
}

impl ModulationTriple {
    pub fn sigma(&self, sign: Sign) -> f64 {
        match sign {
            Sign::Plus => self.sigma_plus,
            Sign::Minus => self.sigma_minus,
        }
    }
}

pub fn modulation_triple(xi1: f64, tau1: f64, xi2: f64, tau2: f64) -> ModulationTriple {
    let xi = xi1 + xi2;
    let tau = tau1 + tau2;
    ModulationTriple {
        sigma1_plus: tau1 + xi1,
        sigma2_minus: tau2 - xi2,
        sigma_plus: tau + xi.abs(),
        sigma_minus: tau - xi.abs(),
    }
}

/// Serializable record of one norm evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub component: Component,
    pub phase: PhaseSpec,
    pub value: f64,
    pub n: usize,
    pub length: f64,
    pub n_t: usize,
    pub window: f64,
    pub taper: Taper,
}
