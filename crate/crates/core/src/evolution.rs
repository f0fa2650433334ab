//! Time evolution of the diagonalized system.
//!
//! With `ψ = ψ₊ + ψ₋` and `φ = ½(φ₊ + φ₋)` the half-wave equations read
//!
//! ```text
//! ∂_t ψ± = ∓∂_x ψ± - iM βψ∓ + ig P±(φ βψ)
//! ∂_t φ± = ∓iA^{1/2} φ± ± iA^{-1/2}(⟨βψ, ψ⟩ + c₀ φ)
//! ```
//!
//! The linear part `∓∂_x`, `∓iA^{1/2}` is diagonal in Fourier space and is
//! integrated exactly. Everything else, including the mass coupling, is the
//! "nonlinear" part `N(u)` handled by the time stepper or the Duhamel
//! quadrature.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dkg::{projection, DkgParams, HalfWaveState, SpinorField, BETA};
use crate::spectral::{forward_in_place, inverse_in_place, ComplexScalarField, GridSpec};
use crate::{japanese, Error, Result, Sign};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Lawson (integrating-factor) fourth-order Runge-Kutta.
    ExponentialRk4,
    /// Strang splitting with the exact linear flow and the exact flow of
    /// the remaining terms.
    Strang,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential-rk4" | "exp-rk4" | "rk4" => Ok(Scheme::ExponentialRk4),
            "strang" => Ok(Scheme::Strang),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub t_final: f64,
    pub dt: f64,
    pub scheme: Scheme,
    /// 2/3-rule truncation of every product; also applied to the initial state.
    pub dealias: bool,
    /// Keep every `record_every`-th state.
    pub record_every: usize,
}

impl SolveConfig {
    pub fn new(t_final: f64, dt: f64) -> Result<Self> {
        let cfg = Self {
            t_final,
            dt,
            scheme: Scheme::ExponentialRk4,
            dealias: true,
            record_every: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_dealias(mut self, dealias: bool) -> Self {
        self.dealias = dealias;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Result<Self> {
        self.record_every = every;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite()
            && self.t_final.is_finite()
            && self.dt > 0.0
            && self.dt <= self.t_final)
        {
            return Err(Error::Config(format!(
                "need 0 < dt <= T, got dt = {}, T = {}",
                self.dt, self.t_final
            )));
        }
        let ratio = self.t_final / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Config(format!("T/dt = {ratio} is not an integer")));
        }
        if self.record_every == 0 || self.steps() % self.record_every != 0 {
            return Err(Error::Config(format!(
                "record_every = {} must divide the step count {}",
                self.record_every,
                self.steps()
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Per-sample scalar diagnostics of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub charge: f64,
    pub phi_energy: f64,
    pub max_coeff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<HalfWaveState>,
    pub config: SolveConfig,
    pub params: DkgParams,
}

impl Trajectory {
    /// Spacing between stored states.
    pub fn sample_dt(&self) -> f64 {
        self.config.dt * self.config.record_every as f64
    }

    pub fn grid(&self) -> &GridSpec {
        self.states[0].grid()
    }

    pub fn last(&self) -> &HalfWaveState {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn diagnostics(&self) -> Vec<Diagnostics> {
        self.states
            .iter()
            .map(|s| Diagnostics {
                t: s.t,
                charge: s.charge(),
                phi_energy: s.phi_energy(),
                max_coeff: s.max_coeff(),
            })
            .collect()
    }

    /// `max_t |‖ψ(t)‖ - ‖ψ(0)‖| / ‖ψ(0)‖` in `L²`.
    pub fn charge_drift(&self) -> f64 {
        let norm0 = self.states[0].psi().l2_norm();
        self.states
            .iter()
            .map(|s| (s.psi().l2_norm() - norm0).abs() / norm0)
            .fold(0.0, f64::max)
    }

    pub fn max_projection_residual(&self) -> f64 {
        self.states
            .iter()
            .map(HalfWaveState::projection_residual)
            .fold(0.0, f64::max)
    }

    pub fn max_reality_residual(&self) -> f64 {
        self.states
            .iter()
            .map(HalfWaveState::reality_residual)
            .fold(0.0, f64::max)
    }
}

/// Free Dirac half-wave flow `U±(t)`: multiplier `e^{∓itξ}`, i.e. `u₀(x ∓ t)`.
pub fn free_dirac(psi: &SpinorField, t: f64, sign: Sign) -> Result<SpinorField> {
    let s = sign.value();
    psi.apply_multiplier(|xi| Complex64::from_polar(1.0, -s * t * xi))
}

/// Free Klein-Gordon half-wave flow `e^{∓itA^{1/2}}`.
pub fn free_kg(phi: &ComplexScalarField, t: f64, sign: Sign) -> Result<ComplexScalarField> {
    let s = sign.value();
    phi.apply_multiplier(|xi| Complex64::from_polar(1.0, -s * t * japanese(xi)))
}

/// Applies the free flow to all four unknowns.
pub fn free_state(state: &HalfWaveState, t: f64) -> Result<HalfWaveState> {
    Ok(HalfWaveState {
        t: state.t + t,
        psi_plus: free_dirac(&state.psi_plus, t, Sign::Plus)?,
        psi_minus: free_dirac(&state.psi_minus, t, Sign::Minus)?,
        phi_plus: free_kg(&state.phi_plus, t, Sign::Plus)?,
        phi_minus: free_kg(&state.phi_minus, t, Sign::Minus)?,
    })
}

/// Six spectral arrays: ψ₊ (upper, lower), ψ₋ (upper, lower), φ₊, φ₋.
#[derive(Debug, Clone, PartialEq)]
struct Packed(Vec<Vec<Complex64>>);

const PSI: [[usize; 2]; 2] = [[0, 1], [2, 3]];
const PHI: [usize; 2] = [4, 5];

fn slot(sign: Sign) -> usize {
    match sign {
        Sign::Plus => 0,
        Sign::Minus => 1,
    }
}

impl Packed {
    fn zeros(n: usize) -> Self {
        Packed(vec![vec![ZERO; n]; 6])
    }

    fn from_state(state: &HalfWaveState) -> Self {
        let s = state.to_spectral();
        let (pu, pl) = s.psi_plus.into_components();
        let (mu, ml) = s.psi_minus.into_components();
        Packed(vec![
            pu.into_data(),
            pl.into_data(),
            mu.into_data(),
            ml.into_data(),
            s.phi_plus.into_data(),
            s.phi_minus.into_data(),
        ])
    }

    fn to_state(&self, grid: GridSpec, t: f64) -> HalfWaveState {
        let f = |i: usize| {
            ComplexScalarField::from_spectral(grid, self.0[i].clone()).expect("grid length")
        };
        let spinor = |s: Sign| {
            let [u, l] = PSI[slot(s)];
            SpinorField::new(f(u), f(l)).expect("same grid")
        };
        HalfWaveState {
            t,
            psi_plus: spinor(Sign::Plus),
            psi_minus: spinor(Sign::Minus),
            phi_plus: f(PHI[0]),
            phi_minus: f(PHI[1]),
        }
    }

    /// `self + a·x`.
    fn plus(&self, a: f64, x: &Packed) -> Packed {
        Packed(
            self.0
                .iter()
                .zip(&x.0)
                .map(|(u, v)| u.iter().zip(v).map(|(p, q)| p + q * a).collect())
                .collect(),
        )
    }

    fn axpy(&mut self, a: f64, x: &Packed) {
        for (u, v) in self.0.iter_mut().zip(&x.0) {
            for (p, q) in u.iter_mut().zip(v) {
                *p += q * a;
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.0
            .iter()
            .flatten()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// `(Σ |c|² Δξ)^{1/2}` over all six components.
    fn l2_distance(&self, other: &Packed, dxi: f64) -> f64 {
        let sum: f64 = self
            .0
            .iter()
            .zip(&other.0)
            .flat_map(|(u, v)| u.iter().zip(v).map(|(p, q)| (p - q).norm_sqr()))
            .sum();
        (sum * dxi).sqrt()
    }
}

/// Precomputed symbols and buffers for one grid and parameter set.
struct System {
    grid: GridSpec,
    params: DkgParams,
    mask: Option<Vec<bool>>,
    /// Linear frequency `ω` per component and mode: `∂_t û = -iω û`.
    omega: [Vec<f64>; 6],
    inv_bracket: Vec<f64>,
}

impl System {
    fn new(grid: GridSpec, params: DkgParams, dealias: bool) -> Self {
        let xi = grid.frequencies();
        let bracket: Vec<f64> = xi.iter().map(|&x| japanese(x)).collect();
        let dirac = |s: f64| xi.iter().map(|&x| s * x).collect::<Vec<_>>();
        let kg = |s: f64| bracket.iter().map(|&b| s * b).collect::<Vec<_>>();
        Self {
            grid,
            params,
            mask: dealias.then(|| grid.dealias_mask()),
            omega: [
                dirac(1.0),
                dirac(1.0),
                dirac(-1.0),
                dirac(-1.0),
                kg(1.0),
                kg(-1.0),
            ],
            inv_bracket: bracket.iter().map(|b| 1.0 / b).collect(),
        }
    }

    fn n(&self) -> usize {
        self.grid.n()
    }

    fn filter(&self, v: &mut [Complex64]) {
        if let Some(mask) = &self.mask {
            for (c, &keep) in v.iter_mut().zip(mask) {
                if !keep {
                    *c = ZERO;
                }
            }
        }
    }

    fn filter_packed(&self, u: &mut Packed) {
        for comp in &mut u.0 {
            self.filter(comp);
        }
    }

    /// Exact linear flow over time `h` (negative `h` runs it backwards).
    fn propagate(&self, u: &mut Packed, h: f64) {
        for (comp, omega) in u.0.iter_mut().zip(&self.omega) {
            for (c, w) in comp.iter_mut().zip(omega) {
                *c *= Complex64::from_polar(1.0, -w * h);
            }
        }
    }

    fn propagated(&self, u: &Packed, h: f64) -> Packed {
        let mut v = u.clone();
        self.propagate(&mut v, h);
        v
    }

    fn linear(&self, u: &Packed) -> Packed {
        Packed(
            u.0.iter()
                .zip(&self.omega)
                .map(|(comp, omega)| {
                    comp.iter()
                        .zip(omega)
                        .map(|(c, w)| c * Complex64::new(0.0, -w))
                        .collect()
                })
                .collect(),
        )
    }

    /// Physical `ψ = ψ₊ + ψ₋` (upper, lower) and `φ = ½(φ₊ + φ₋)`.
    fn physical_fields(&self, u: &Packed) -> ([Vec<Complex64>; 2], Vec<Complex64>) {
        let sum = |a: usize, b: usize, f: f64| -> Vec<Complex64> {
            let mut v: Vec<Complex64> = u.0[a]
                .iter()
                .zip(&u.0[b])
                .map(|(x, y)| (x + y) * f)
                .collect();
            inverse_in_place(&self.grid, &mut v);
            v
        };
        let psi = [
            sum(PSI[0][0], PSI[1][0], 1.0),
            sum(PSI[0][1], PSI[1][1], 1.0),
        ];
        let phi = sum(PHI[0], PHI[1], 0.5);
        (psi, phi)
    }

    /// Spectral `⟨βψ, ψ⟩ + c₀φ`, the Klein-Gordon source.
    fn kg_source(&self, u: &Packed, psi: &[Vec<Complex64>; 2]) -> Vec<Complex64> {
        let mut src: Vec<Complex64> = psi[0]
            .iter()
            .zip(&psi[1])
            .map(|(a, b)| Complex64::new(a.norm_sqr() - b.norm_sqr(), 0.0))
            .collect();
        forward_in_place(&self.grid, &mut src);
        self.filter(&mut src);
        let c0 = self.params.c0();
        if c0 != 0.0 {
            for (m, s) in src.iter_mut().enumerate() {
                *s += (u.0[PHI[0]][m] + u.0[PHI[1]][m]) * (0.5 * c0);
            }
        }
        src
    }

    fn nonlinear(&self, u: &Packed) -> Packed {
        let n = self.n();
        let mut out = Packed::zeros(n);
        let (psi, phi) = self.physical_fields(u);
        let mass = self.params.dirac_mass;
        let g = self.params.coupling;

        if g != 0.0 {
            // w = φβψ, projected after transforming back
            let mut w = [
                psi[0]
                    .iter()
                    .zip(&phi)
                    .map(|(a, f)| a * f)
                    .collect::<Vec<_>>(),
                psi[1]
                    .iter()
                    .zip(&phi)
                    .map(|(a, f)| -a * f)
                    .collect::<Vec<_>>(),
            ];
            for comp in &mut w {
                forward_in_place(&self.grid, comp);
                self.filter(comp);
            }
            let ig = Complex64::new(0.0, g);
            for s in Sign::BOTH {
                let p = projection(s);
                let [iu, il] = PSI[slot(s)];
                for m in 0..n {
                    let v = p.apply([w[0][m], w[1][m]]);
                    out.0[iu][m] += ig * v[0];
                    out.0[il][m] += ig * v[1];
                }
            }
        }

        if mass != 0.0 {
            // -iM β P∓ψ∓
            let im = Complex64::new(0.0, -mass);
            for s in Sign::BOTH {
                let other = s.flip();
                let op = BETA.mul(&projection(other));
                let [iu, il] = PSI[slot(s)];
                let [ou, ol] = PSI[slot(other)];
                for m in 0..n {
                    let v = op.apply([u.0[ou][m], u.0[ol][m]]);
                    out.0[iu][m] += im * v[0];
                    out.0[il][m] += im * v[1];
                }
            }
        }

        let src = self.kg_source(u, &psi);
        for s in Sign::BOTH {
            let f = Complex64::new(0.0, s.value());
            let idx = PHI[slot(s)];
            for m in 0..n {
                out.0[idx][m] = f * self.inv_bracket[m] * src[m];
            }
        }
        out
    }

    /// Lawson RK4 step of size `h`.
    fn step_rk4(&self, u: &Packed, h: f64) -> Packed {
        let half = |x: &Packed| self.propagated(x, 0.5 * h);
        let full = |x: &Packed| self.propagated(x, h);
        let k1 = self.nonlinear(u);
        let k2 = self.nonlinear(&half(&u.plus(0.5 * h, &k1)));
        let eu_half = half(u);
        let k3 = self.nonlinear(&eu_half.plus(0.5 * h, &k2));
        let k4 = self.nonlinear(&full(u).plus(h, &half(&k3)));

        let mut next = full(&u.plus(h / 6.0, &k1));
        let mut mid = k2;
        mid.axpy(1.0, &k3);
        next.axpy(h / 3.0, &half(&mid));
        next.axpy(h / 6.0, &k4);
        next
    }

    /// Exact flow of the non-free terms over time `h`. Along this flow
    /// `φ` is constant and `⟨βψ, ψ⟩` is invariant, so `ψ` rotates pointwise
    /// by `exp(-i(M - gφ)βh)` and `φ±` move linearly in time.
    fn nonlinear_flow(&self, u: &Packed, h: f64) -> Packed {
        let n = self.n();
        let (mut psi, phi) = self.physical_fields(u);
        let src = self.kg_source(u, &psi);
        let mut out = u.clone();
        for s in Sign::BOTH {
            let f = Complex64::new(0.0, s.value() * h);
            let idx = PHI[slot(s)];
            for m in 0..n {
                out.0[idx][m] += f * self.inv_bracket[m] * src[m];
            }
        }

        let mass = self.params.dirac_mass;
        let g = self.params.coupling;
        for j in 0..n {
            let theta = (Complex64::new(mass, 0.0) - phi[j] * g) * h;
            let rot = (Complex64::new(0.0, -1.0) * theta).exp();
            let rot_inv = (Complex64::new(0.0, 1.0) * theta).exp();
            psi[0][j] *= rot;
            psi[1][j] *= rot_inv;
        }
        for comp in &mut psi {
            forward_in_place(&self.grid, comp);
            self.filter(comp);
        }
        for s in Sign::BOTH {
            let p = projection(s);
            let [iu, il] = PSI[slot(s)];
            for m in 0..n {
                let v = p.apply([psi[0][m], psi[1][m]]);
                out.0[iu][m] = v[0];
                out.0[il][m] = v[1];
            }
        }
        out
    }

    fn step_strang(&self, u: &Packed, h: f64) -> Packed {
        let a = self.propagated(u, 0.5 * h);
        let b = self.nonlinear_flow(&a, h);
        self.propagated(&b, 0.5 * h)
    }

    fn step(&self, u: &Packed, h: f64, scheme: Scheme) -> Packed {
        match scheme {
            Scheme::ExponentialRk4 => self.step_rk4(u, h),
            Scheme::Strang => self.step_strang(u, h),
        }
    }
}

/// Time derivative of the half-wave state (linear plus remaining terms).
/// With `dealias` set, products are truncated by the 2/3 rule.
pub fn rhs(state: &HalfWaveState, params: &DkgParams, dealias: bool) -> HalfWaveState {
    let system = System::new(*state.grid(), *params, dealias);
    let u = Packed::from_state(state);
    let mut d = system.linear(&u);
    d.axpy(1.0, &system.nonlinear(&u));
    d.to_state(system.grid, state.t)
}

fn prepare(
    initial: &HalfWaveState,
    params: &DkgParams,
    config: &SolveConfig,
) -> Result<(System, Packed)> {
    config.validate()?;
    let system = System::new(*initial.grid(), *params, config.dealias);
    let mut u = Packed::from_state(initial);
    system.filter_packed(&mut u);
    Ok((system, u))
}

/// Integrates from `initial.t` over `config.t_final`. The trajectory holds
/// `steps/record_every + 1` states; with dealiasing on, the first state is
/// the band-limited projection of `initial`.
pub fn solve(
    initial: &HalfWaveState,
    params: &DkgParams,
    config: &SolveConfig,
) -> Result<Trajectory> {
    let (system, mut u) = prepare(initial, params, config)?;
    let grid = system.grid;
    let t0 = initial.t;
    let steps = config.steps();
    let mut states = Vec::with_capacity(steps / config.record_every + 1);
    states.push(u.to_state(grid, t0));
    for i in 1..=steps {
        let next = system.step(&u, config.dt, config.scheme);
        if !next.is_finite() {
            let last_valid_time = t0 + (i - 1) as f64 * config.dt;
            return Err(Error::BlowUp {
                last_valid_time,
                partial: Box::new(Trajectory {
                    states,
                    config: *config,
                    params: *params,
                }),
            });
        }
        u = next;
        if i % config.record_every == 0 {
            states.push(u.to_state(grid, t0 + i as f64 * config.dt));
        }
    }
    Ok(Trajectory {
        states,
        config: *config,
        params: *params,
    })
}

#[derive(Debug, Clone)]
pub struct PicardResult {
    /// The last iterate, sampled like a [`solve`] trajectory.
    pub trajectory: Trajectory,
    /// `residuals[n]`: max over time of the `L²` distance between iterates
    /// `n` and `n + 1`.
    pub residuals: Vec<f64>,
    /// Set when the residual grew over three consecutive iterations.
    pub diverged: bool,
}

impl PicardResult {
    /// Successive residual ratios `r[n+1]/r[n]`.
    pub fn ratios(&self) -> Vec<f64> {
        self.residuals.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Running integrals `∫_0^{t_j} g(s) ds` on a uniform grid: composite
/// Simpson, closed with the 3/8 rule on odd nodes and a cubic start-up
/// rule at `j = 1`.
fn cumulative_integral(values: &[Packed], h: f64) -> Vec<Packed> {
    let n = values.len() - 1;
    let len = values[0].0[0].len();
    let mut out = vec![Packed::zeros(len); n + 1];
    let combo = |terms: &[(f64, usize)]| -> Packed {
        let mut acc = Packed::zeros(len);
        for &(w, i) in terms {
            acc.axpy(w, &values[i]);
        }
        acc
    };
    if n == 0 {
        return out;
    }
    out[1] = match n {
        1 => combo(&[(h / 2.0, 0), (h / 2.0, 1)]),
        2 => combo(&[(5.0 * h / 12.0, 0), (8.0 * h / 12.0, 1), (-h / 12.0, 2)]),
        _ => combo(&[
            (9.0 * h / 24.0, 0),
            (19.0 * h / 24.0, 1),
            (-5.0 * h / 24.0, 2),
            (h / 24.0, 3),
        ]),
    };
    for j in 2..=n {
        if j % 2 == 0 {
            let mut acc = out[j - 2].clone();
            acc.axpy(
                1.0,
                &combo(&[(h / 3.0, j - 2), (4.0 * h / 3.0, j - 1), (h / 3.0, j)]),
            );
            out[j] = acc;
        } else {
            let mut acc = out[j - 3].clone();
            let w = 3.0 * h / 8.0;
            acc.axpy(
                1.0,
                &combo(&[(w, j - 3), (3.0 * w, j - 2), (3.0 * w, j - 1), (w, j)]),
            );
            out[j] = acc;
        }
    }
    out
}

/// Picard iteration on the Duhamel system. Iterate 0 is the free
/// evolution of the data; iterate `n+1` is
/// `u(t) = E(t)u₀ + ∫_0^t E(t-s) N(uⁿ(s)) ds`, evaluated on the grid
/// `t_j = j·dt` as `E(t_j)[u₀ + ∫_0^{t_j} E(-s) N(uⁿ(s)) ds]`.
pub fn picard(
    initial: &HalfWaveState,
    params: &DkgParams,
    config: &SolveConfig,
    n_iter: usize,
) -> Result<PicardResult> {
    let (system, u0) = prepare(initial, params, config)?;
    let steps = config.steps();
    let h = config.dt;
    let times: Vec<f64> = (0..=steps).map(|j| j as f64 * h).collect();
    let mut iterate: Vec<Packed> = times.iter().map(|&t| system.propagated(&u0, t)).collect();
    let mut residuals = Vec::with_capacity(n_iter);
    let mut diverged = false;
    for _ in 0..n_iter {
        let pulled: Vec<Packed> = iterate
            .iter()
            .zip(&times)
            .map(|(u, &t)| system.propagated(&system.nonlinear(u), -t))
            .collect();
        let integrals = cumulative_integral(&pulled, h);
        let next: Vec<Packed> = integrals
            .iter()
            .zip(&times)
            .map(|(int, &t)| system.propagated(&u0.plus(1.0, int), t))
            .collect();
        if next.iter().any(|u| !u.is_finite()) {
            diverged = true;
            break;
        }
        let res = next
            .iter()
            .zip(&iterate)
            .map(|(a, b)| a.l2_distance(b, system.grid.dxi()))
            .fold(0.0, f64::max);
        residuals.push(res);
        iterate = next;
        let k = residuals.len();
        if k >= 4 && (k - 3..k).all(|i| residuals[i] > residuals[i - 1]) {
            diverged = true;
        }
    }
    let states = iterate
        .iter()
        .zip(&times)
        .enumerate()
        .filter(|(j, _)| j % config.record_every == 0)
        .map(|(_, (u, &t))| u.to_state(system.grid, initial.t + t))
        .collect();
    Ok(PicardResult {
        trajectory: Trajectory {
            states,
            config: *config,
            params: *params,
        },
        residuals,
        diverged,
    })
}

/// Largest coefficient-wise `L²` distance between two states on one grid.
pub fn state_distance(a: &HalfWaveState, b: &HalfWaveState) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(Packed::from_state(a).l2_distance(&Packed::from_state(b), a.grid().dxi()))
}

/// Spectral interpolation of `state` onto a grid with `factor` times as
/// many points (zero padding; the Nyquist coefficient is split evenly).
pub fn refine_state(state: &HalfWaveState, factor: usize) -> Result<HalfWaveState> {
    let grid = *state.grid();
    let fine = grid.refined(factor)?;
    let pad = |f: &ComplexScalarField| {
        let coeffs = f.coeffs();
        let mut out = vec![ZERO; fine.n()];
        for (m, c) in coeffs.iter().enumerate() {
            let k = grid.wavenumber(m);
            if m == 0 {
                out[fine.index_of(k).unwrap()] += c * 0.5;
                out[fine.index_of(-k).unwrap()] += c * 0.5;
            } else {
                out[fine.index_of(k).unwrap()] = *c;
            }
        }
        ComplexScalarField::from_spectral(fine, out)
    };
    let spinor = |s: &SpinorField| -> Result<SpinorField> {
        SpinorField::new(pad(s.upper())?, pad(s.lower())?)
    };
    Ok(HalfWaveState {
        t: state.t,
        psi_plus: spinor(&state.psi_plus)?,
        psi_minus: spinor(&state.psi_minus)?,
        phi_plus: pad(&state.phi_plus)?,
        phi_minus: pad(&state.phi_minus)?,
    })
}

/// Closed-form free Dirac dispersion `ω(ξ) = (ξ² + M²)^{1/2}`, for reference.
pub fn dirac_frequency(xi: f64, mass: f64) -> f64 {
    xi.hypot(mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dkg::{diagonalize, project};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n, 2.0 * PI).unwrap()
    }

    fn smooth_state(g: GridSpec, amp: f64) -> HalfWaveState {
        let psi0 = SpinorField::from_fn(g, |x| {
            [
                c(amp * (x.cos() + 0.3), amp * 0.2 * (2.0 * x).sin()),
                c(amp * 0.5 * x.sin(), -amp * 0.1 * (3.0 * x).cos()),
            ]
        });
        let phi0 = ComplexScalarField::from_fn(g, |x| c(amp * (0.4 + (x - 0.3).cos()), 0.0));
        let phi1 = ComplexScalarField::from_fn(g, |x| c(amp * 0.7 * (2.0 * x).sin(), 0.0));
        diagonalize(&psi0, &phi0, &phi1).unwrap()
    }

    fn max_diff(a: &ComplexScalarField, b: &ComplexScalarField) -> f64 {
        a.coeffs()
            .iter()
            .zip(b.coeffs())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn free_dirac_examples() {
        let g = GridSpec::new(32, 3.0).unwrap();
        let psi = smooth_state(grid(32), 1.0).psi_plus;
        let psi = SpinorField::new(
            ComplexScalarField::from_spectral(g, psi.upper().coeffs()).unwrap(),
            ComplexScalarField::from_spectral(g, psi.lower().coeffs()).unwrap(),
        )
        .unwrap();
        let same = free_dirac(&psi, 0.0, Sign::Plus).unwrap();
        assert_eq!(same, psi);
        let period = free_dirac(&psi, g.length(), Sign::Minus).unwrap();
        assert!(max_diff(period.upper(), psi.upper()) < 1e-12);

        let mode = ComplexScalarField::single_mode(grid(16), 3, c(1.0, 0.0)).unwrap();
        let sp = SpinorField::new(mode.clone(), mode).unwrap();
        let t = 0.37;
        let out = free_dirac(&sp, t, Sign::Plus).unwrap();
        let m = grid(16).index_of(3).unwrap();
        assert!((out.upper().data()[m] - Complex64::from_polar(1.0, -3.0 * t)).norm() < 1e-15);
    }

    #[test]
    fn free_dirac_is_translation() {
        let g = grid(64);
        let f = |x: f64| c((x).cos() + 0.5 * (3.0 * x).sin(), (2.0 * x).cos());
        let psi = SpinorField::from_fn(g, |x| [f(x), f(x) * 0.5]);
        let t = 0.8;
        let moved = free_dirac(&psi, t, Sign::Plus).unwrap().to_physical();
        let expect = SpinorField::from_fn(g, |x| [f(x - t), f(x - t) * 0.5]);
        for (a, b) in moved.upper().data().iter().zip(expect.upper().data()) {
            assert!((a - b).norm() < 1e-12);
        }
        let back = free_dirac(&psi, -t, Sign::Minus).unwrap().to_physical();
        for (a, b) in back.upper().data().iter().zip(expect.upper().data()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn free_kg_examples() {
        let g = grid(32);
        let st = smooth_state(g, 1.0);
        assert_eq!(
            free_kg(&st.phi_plus, 0.0, Sign::Plus).unwrap(),
            st.phi_plus.to_spectral()
        );
        let moved = free_kg(&st.phi_plus, 1.7, Sign::Minus).unwrap();
        assert!((moved.l2_norm() - st.phi_plus.l2_norm()).abs() < 1e-12 * st.phi_plus.l2_norm());
        let zero_mode = ComplexScalarField::single_mode(g, 0, c(1.0, 0.0)).unwrap();
        let out = free_kg(&zero_mode, PI, Sign::Plus).unwrap();
        let m = g.index_of(0).unwrap();
        assert!((out.data()[m] - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn free_flow_time_reversal() {
        let st = smooth_state(grid(64), 1.0);
        let back = free_state(&free_state(&st, 2.3).unwrap(), -2.3).unwrap();
        assert!(state_distance(&back, &st).unwrap() < 1e-12);
    }

    #[test]
    fn rhs_is_linear_when_source_vanishes() {
        let g = grid(32);
        let params = DkgParams::new(0.0, 1.0, 0.0).unwrap();
        let mut st = smooth_state(g, 1.0);
        st.psi_plus = SpinorField::zeros(g);
        st.psi_minus = SpinorField::zeros(g);
        let d = rhs(&st, &params, false);
        assert_eq!(d.psi_plus.max_coeff(), 0.0);
        assert_eq!(d.psi_minus.max_coeff(), 0.0);
        let expect = st
            .phi_plus
            .apply_multiplier(|xi| c(0.0, -japanese(xi)))
            .unwrap();
        assert!(max_diff(&d.phi_plus, &expect) < 1e-14);
    }

    #[test]
    fn rhs_dirac_vanishes_without_spinor() {
        let g = grid(32);
        let params = DkgParams::new(1.3, 1.0, 2.0).unwrap();
        let mut st = smooth_state(g, 1.0);
        st.psi_plus = SpinorField::zeros(g);
        st.psi_minus = SpinorField::zeros(g);
        let d = rhs(&st, &params, true);
        assert_eq!(d.psi_plus.max_coeff(), 0.0);
        assert_eq!(d.psi_minus.max_coeff(), 0.0);
    }

    /// First-principles oracle: the unmultiplied Dirac equation
    /// `ψ_t = iβ(gφψ - Mψ - iαβψ_x)` and `φ_tt = φ_xx - m²φ + ⟨βψ,ψ⟩`,
    /// evaluated on explicit three-mode data with hand-computed derivatives.
    #[test]
    fn rhs_matches_three_mode_oracle() {
        let g = grid(16);
        let (mass, kg_mass, coupling) = (0.7, 1.3, 1.0);
        let params = DkgParams::new(mass, kg_mass, coupling).unwrap();
        let (a, b, cc) = (c(0.4, 0.1), c(0.2, -0.3), c(-0.1, 0.25));
        let (d, e) = (0.6, -0.35);
        // ψ = (a e^{ix} + b, cc e^{-ix}), φ = d cos x, φ_t = e sin x
        let psi_u = |x: f64| a * Complex64::from_polar(1.0, x) + b;
        let psi_l = |x: f64| cc * Complex64::from_polar(1.0, -x);
        let psi_u_x = |x: f64| a * c(0.0, 1.0) * Complex64::from_polar(1.0, x);
        let psi_l_x = |x: f64| cc * c(0.0, -1.0) * Complex64::from_polar(1.0, -x);
        let phi = |x: f64| d * x.cos();

        let psi0 = SpinorField::from_fn(g, |x| [psi_u(x), psi_l(x)]);
        let phi0 = ComplexScalarField::from_fn(g, |x| c(phi(x), 0.0));
        let phi1 = ComplexScalarField::from_fn(g, |x| c(e * x.sin(), 0.0));
        let state = diagonalize(&psi0, &phi0, &phi1).unwrap();
        let deriv = rhs(&state, &params, false);

        // ψ_t = iβ(gφψ - Mψ - iαβψ_x); αβψ_x = (-ψ_l_x, ψ_u_x)
        let i = c(0.0, 1.0);
        let psi_t = |x: f64| {
            let inner_u = coupling * phi(x) * psi_u(x) - mass * psi_u(x) - i * (-psi_l_x(x));
            let inner_l = coupling * phi(x) * psi_l(x) - mass * psi_l(x) - i * psi_u_x(x);
            [i * inner_u, -i * inner_l]
        };
        let expect = SpinorField::from_fn(g, psi_t);
        for s in Sign::BOTH {
            let want = project(&expect, s);
            let got = if s == Sign::Plus {
                &deriv.psi_plus
            } else {
                &deriv.psi_minus
            };
            assert!(max_diff(got.upper(), want.upper()) < 1e-13, "sign {s}");
            assert!(max_diff(got.lower(), want.lower()) < 1e-13, "sign {s}");
        }

        // φ_tt = φ_xx - m²φ + |ψ_u|² - |ψ_l|²
        //      = -(1 + m²) d cos x + |a|² + |b|² - |cc|² + 2 Re(a b̄ e^{ix})
        // ∂_t φ± = φ_t ± iA^{-1/2} φ_tt with A^{-1/2} = 1 on k = 0, 2^{-1/2} on k = ±1.
        let ab = a * b.conj();
        let r2 = 2f64.sqrt();
        let a_inv_phi_tt = |x: f64| {
            let k0 = a.norm_sqr() + b.norm_sqr() - cc.norm_sqr();
            let k1 = -(1.0 + kg_mass * kg_mass) * d * x.cos()
                + 2.0 * (ab * Complex64::from_polar(1.0, x)).re;
            k0 + k1 / r2
        };
        for s in Sign::BOTH {
            let want =
                ComplexScalarField::from_fn(g, |x| c(e * x.sin(), s.value() * a_inv_phi_tt(x)));
            let got = if s == Sign::Plus {
                &deriv.phi_plus
            } else {
                &deriv.phi_minus
            };
            assert!(max_diff(got, &want) < 1e-13, "sign {s}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(SolveConfig::new(1.0, 0.0).is_err());
        assert!(SolveConfig::new(1.0, 2.0).is_err());
        assert!(SolveConfig::new(1.0, 0.3).is_err());
        assert_eq!(SolveConfig::new(1.0, 1e-3).unwrap().steps(), 1000);
        assert!(SolveConfig::new(1.0, 0.1)
            .unwrap()
            .with_record_every(3)
            .is_err());
        assert!(SolveConfig::new(1.0, 0.1)
            .unwrap()
            .with_record_every(5)
            .is_ok());
        assert_eq!("strang".parse::<Scheme>().unwrap(), Scheme::Strang);
        assert!("euler".parse::<Scheme>().is_err());
    }

    #[test]
    fn free_solve_matches_propagators() {
        let g = grid(64);
        let params = DkgParams::new(0.0, 1.0, 0.0).unwrap();
        let mut st = smooth_state(g, 1.0);
        // a single half-wave family makes the β-source vanish identically
        st.psi_minus = SpinorField::zeros(g);
        for scheme in [Scheme::ExponentialRk4, Scheme::Strang] {
            let cfg = SolveConfig::new(0.5, 0.01).unwrap().with_scheme(scheme);
            let traj = solve(&st, &params, &cfg).unwrap();
            assert_eq!(traj.states.len(), 51);
            for s in &traj.states {
                let free = free_state(&st, s.t).unwrap();
                assert!(
                    state_distance(s, &free).unwrap() < 1e-12,
                    "{scheme:?} t = {}",
                    s.t
                );
            }
        }
    }

    /// `g = 0`: per mode, `ψ₊ = a e₊`, `ψ₋ = b e₋` with `e± = (1, ±1)/√2`
    /// obey `(a, b)' = -i H (a, b)`, `H = [[ξ, M], [M, -ξ]]`, so
    /// `exp(-iHt) = cos(ωt) I - i sin(ωt) H/ω`, `ω = (ξ² + M²)^{1/2}`.
    #[test]
    fn massive_linear_dirac_matches_matrix_exponential() {
        let g = grid(32);
        let mass = 1.4;
        let params = DkgParams::new(mass, 1.0, 0.0).unwrap();
        let st = smooth_state(g, 1.0);
        let t_final = 1.0;
        let cfg = SolveConfig::new(t_final, 1e-3).unwrap().with_dealias(false);
        let out = solve(&st, &params, &cfg).unwrap();
        let end = out.last();
        let r2 = 2f64.sqrt();
        let a0 = st
            .psi_plus
            .upper()
            .coeffs()
            .iter()
            .map(|c| c * r2)
            .collect::<Vec<_>>();
        let b0 = st
            .psi_minus
            .upper()
            .coeffs()
            .iter()
            .map(|c| c * r2)
            .collect::<Vec<_>>();
        let mut err = 0.0f64;
        for m in 0..g.n() {
            let xi = g.xi(m);
            let w = dirac_frequency(xi, mass);
            let (cs, sn) = ((w * t_final).cos(), (w * t_final).sin());
            let i = c(0.0, 1.0);
            let a = a0[m] * (cs - i * sn * xi / w) - i * sn * mass / w * b0[m];
            let b = b0[m] * (cs + i * sn * xi / w) - i * sn * mass / w * a0[m];
            err = err
                .max((end.psi_plus.upper().data()[m] - a / r2).norm())
                .max((end.psi_plus.lower().data()[m] - a / r2).norm())
                .max((end.psi_minus.upper().data()[m] - b / r2).norm())
                .max((end.psi_minus.lower().data()[m] + b / r2).norm());
        }
        assert!(err < 1e-10, "err = {err}");
    }

    /// `ψ = 0`, `m ≠ 1`: each Klein-Gordon mode oscillates at `(ξ² + m²)^{1/2}`.
    #[test]
    fn klein_gordon_mass_through_c0() {
        let g = grid(32);
        let kg_mass = 1.7;
        let params = DkgParams::new(0.0, kg_mass, 1.0).unwrap();
        let k = 2.0;
        let phi0 = ComplexScalarField::from_fn(g, |x| c((k * x).cos(), 0.0));
        let phi1 = ComplexScalarField::from_fn(g, |x| c(0.5 * (k * x).sin(), 0.0));
        let st = diagonalize(&SpinorField::zeros(g), &phi0, &phi1).unwrap();
        let t_final = 2.0;
        let cfg = SolveConfig::new(t_final, 2e-3).unwrap();
        let end = solve(&st, &params, &cfg).unwrap();
        let rec = crate::dkg::reconstruct(end.last());
        let w = (k * k + kg_mass * kg_mass).sqrt();
        let want = ComplexScalarField::from_fn(g, |x| {
            c(
                (k * x).cos() * (w * t_final).cos() + 0.5 * (k * x).sin() * (w * t_final).sin() / w,
                0.0,
            )
        });
        assert!(max_diff(&rec.phi, &want) < 1e-10);
        let want_t = ComplexScalarField::from_fn(g, |x| {
            c(
                -(k * x).cos() * w * (w * t_final).sin()
                    + 0.5 * (k * x).sin() * (w * t_final).cos(),
                0.0,
            )
        });
        assert!(max_diff(&rec.phi_t, &want_t) < 1e-9);
    }

    #[test]
    fn rk4_is_fourth_order_and_strang_second() {
        let g = grid(32);
        let params = DkgParams::new(1.0, 1.0, 1.0).unwrap();
        let st = smooth_state(g, 0.5);
        let run = |dt: f64, scheme| {
            let cfg = SolveConfig::new(0.5, dt).unwrap().with_scheme(scheme);
            solve(&st, &params, &cfg).unwrap().last().clone()
        };
        for (scheme, order) in [(Scheme::ExponentialRk4, 4.0), (Scheme::Strang, 2.0)] {
            let reference = run(0.5 / 1024.0, scheme);
            let e1 = state_distance(&run(0.5 / 16.0, scheme), &reference).unwrap();
            let e2 = state_distance(&run(0.5 / 32.0, scheme), &reference).unwrap();
            let observed = (e1 / e2).log2();
            assert!(
                (observed - order).abs() < 0.3,
                "{scheme:?}: observed order {observed}"
            );
        }
    }

    #[test]
    fn strang_conserves_charge_to_roundoff() {
        let g = grid(64);
        let params = DkgParams::new(1.0, 1.0, 1.0).unwrap();
        let st = smooth_state(g, 0.5);
        let cfg = SolveConfig::new(1.0, 0.01)
            .unwrap()
            .with_scheme(Scheme::Strang)
            .with_dealias(false);
        let traj = solve(&st, &params, &cfg).unwrap();
        assert!(traj.charge_drift() < 1e-13);
        assert!(traj.max_projection_residual() < 1e-12);
    }

    #[test]
    fn blow_up_is_reported() {
        let g = grid(16);
        let params = DkgParams::new(0.0, 1.0, 1.0).unwrap();
        let mut st = smooth_state(g, 1.0);
        st.phi_plus = st.phi_plus.scale(c(f64::INFINITY, 0.0));
        let cfg = SolveConfig::new(0.1, 0.01).unwrap().with_dealias(false);
        match solve(&st, &params, &cfg) {
            Err(Error::BlowUp {
                last_valid_time,
                partial,
            }) => {
                assert_eq!(last_valid_time, 0.0);
                assert_eq!(partial.states.len(), 1);
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn cumulative_quadrature_is_exact_for_cubics() {
        let h = 0.1;
        let n = 9;
        let poly = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t + 3.0 * t * t * t;
        let integral = |t: f64| t - t * t + t.powi(3) / 6.0 + 0.75 * t.powi(4);
        let values: Vec<Packed> = (0..=n)
            .map(|j| {
                let mut p = Packed::zeros(1);
                p.0[0][0] = c(poly(j as f64 * h), 0.0);
                p
            })
            .collect();
        let out = cumulative_integral(&values, h);
        for (j, v) in out.iter().enumerate() {
            assert!(
                (v.0[0][0].re - integral(j as f64 * h)).abs() < 1e-14,
                "node {j}"
            );
        }
    }

    #[test]
    fn picard_zero_iterations_is_free() {
        let g = grid(32);
        let params = DkgParams::new(1.0, 1.0, 1.0).unwrap();
        let st = smooth_state(g, 0.1);
        let cfg = SolveConfig::new(0.1, 0.01).unwrap();
        let res = picard(&st, &params, &cfg, 0).unwrap();
        assert!(res.residuals.is_empty());
        for s in &res.trajectory.states {
            let free = free_state(&res.trajectory.states[0], s.t).unwrap();
            assert!(state_distance(s, &free).unwrap() < 1e-14);
        }
    }

    #[test]
    fn picard_contracts_and_agrees_with_solve() {
        let g = grid(32);
        let params = DkgParams::new(1.0, 1.0, 1.0).unwrap();
        let st = smooth_state(g, 0.1);
        let cfg = SolveConfig::new(0.1, 0.005).unwrap();
        let res = picard(&st, &params, &cfg, 10).unwrap();
        assert!(!res.diverged);
        for r in res.ratios().iter().take(5) {
            assert!(*r <= 0.5, "ratios {:?}", res.ratios());
        }
        let traj = solve(&st, &params, &cfg).unwrap();
        let d = state_distance(res.trajectory.last(), traj.last()).unwrap();
        assert!(d < 1e-9, "distance {d}");
    }

    #[test]
    fn refine_preserves_physical_samples() {
        let st = smooth_state(grid(16), 1.0);
        let fine = refine_state(&st, 2).unwrap();
        let a = st.phi_plus.values();
        let b = fine.phi_plus.values();
        for (j, v) in a.iter().enumerate() {
            assert!((v - b[2 * j]).norm() < 1e-12);
        }
    }
}
