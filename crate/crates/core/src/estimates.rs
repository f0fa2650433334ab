//! Exact and statistical checks of the bilinear machinery.
//!
//! Exact claims (matrix identities, the modulation inequality, the null
//! structure, the free-wave product formula) report violation counts with
//! a witness. Inequalities with unspecified constants are probed with
//! ratio sweeps: the supremum of `LHS/RHS` over a random ensemble is
//! recorded per resolution, and bounded growth under `N`-doubling is the
//! expected signature.
//!
//! Ratio sweeps use the torus `L = 2π`, window `T_w = 2π` and `N_t = N`
//! time samples, so `Δξ = Δτ = 1`. Fields entering a product are confined
//! to `|k|, |j| < N/4`, which keeps every discrete product alias-free.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bourgain::{
    mixed_norm, xsb_norm, xsb_norm_components, PhaseKind, PhaseSpec, SpaceTimeSpectrum, Taper,
};
use crate::dkg::{
    identity_residual, null_components, projection, Mat2, SpinorField, ALPHA, BETA, IDENTITY,
    P_MINUS, P_PLUS,
};
use crate::evolution::free_dirac;
use crate::feasibility::{check_main, working_conditions, FeasibilityProblem, STRICT_MARGIN};
use crate::spectral::{dual_index, hsp_norm, ComplexScalarField, GridSpec, NormSpec};
use crate::{japanese, Error, Result, Sign};

/// Torus length and window of every ratio sweep.
pub const SWEEP_LENGTH: f64 = 2.0 * PI;

/// Tolerance for exact identities, relative to the data scale.
pub const IDENTITY_TOL: f64 = 1e-15;
pub const NULL_TOL: f64 = 1e-12;
pub const FREE_WAVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    /// Complex Gaussian coefficients under a decaying envelope.
    GaussianModes,
    /// Complex Gaussian coefficients, flat inside the band.
    BandLimited,
    /// One random coefficient inside the band.
    SingleMode,
}

impl std::str::FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-modes" => Ok(Distribution::GaussianModes),
            "band-limited" => Ok(Distribution::BandLimited),
            "single-mode" => Ok(Distribution::SingleMode),
            other => Err(Error::Config(format!("unknown distribution `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub seed: u64,
    pub count: usize,
    pub distribution: Distribution,
    /// Largest `|k|` used; 0 selects the widest alias-free band.
    pub bandwidth: usize,
}

impl EnsembleSpec {
    pub fn new(
        seed: u64,
        count: usize,
        distribution: Distribution,
        bandwidth: usize,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("ensemble count must be at least 1".into()));
        }
        Ok(Self {
            seed,
            count,
            distribution,
            bandwidth,
        })
    }

    /// Independent generator for trial `trial` of sweep stage `stage`.
    pub fn rng(&self, stage: u64, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((stage << 32) | trial);
        rng
    }

    /// Strict band `|k| < band` given the alias-free limit `limit`.
    fn band(&self, limit: usize) -> usize {
        if self.bandwidth == 0 {
            limit
        } else {
            (self.bandwidth + 1).min(limit)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionEntry {
    pub n: usize,
    pub n_t: usize,
    pub trials: usize,
    pub sup_ratio: f64,
    pub mean_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub name: String,
    /// Exact claims must have zero violations.
    pub exact: bool,
    pub sup_ratio: f64,
    pub per_resolution: Vec<ResolutionEntry>,
    /// Quotients of successive per-resolution sup ratios.
    pub growth: Vec<f64>,
    /// Sup ratio increased at every doubling.
    pub growth_flag: bool,
    pub violations: u64,
    pub witness: Option<Vec<f64>>,
    pub min_slack: Option<f64>,
    pub max_slack: Option<f64>,
    /// `Some(false)` marks parameters outside the admissible region.
    pub admissible: Option<bool>,
    pub metadata: BTreeMap<String, Value>,
}

impl RatioReport {
    fn exact(name: &str) -> Self {
        Self {
            name: name.to_string(),
            exact: true,
            sup_ratio: 0.0,
            per_resolution: Vec::new(),
            growth: Vec::new(),
            growth_flag: false,
            violations: 0,
            witness: None,
            min_slack: None,
            max_slack: None,
            admissible: None,
            metadata: BTreeMap::new(),
        }
    }

    fn sweep(name: &str, per_resolution: Vec<ResolutionEntry>) -> Self {
        let growth: Vec<f64> = per_resolution
            .windows(2)
            .map(|w| {
                if w[0].sup_ratio > 0.0 {
                    w[1].sup_ratio / w[0].sup_ratio
                } else {
                    1.0
                }
            })
            .collect();
        Self {
            name: name.to_string(),
            exact: false,
            sup_ratio: per_resolution
                .iter()
                .map(|e| e.sup_ratio)
                .fold(0.0, f64::max),
            growth_flag: !growth.is_empty() && growth.iter().all(|&g| g > 1.0),
            growth,
            per_resolution,
            ..Self::exact(name)
        }
    }

    /// Largest quotient of successive sup ratios (1 when fewer than two
    /// resolutions were run).
    pub fn max_growth(&self) -> f64 {
        self.growth.iter().copied().fold(1.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn with_meta(mut self, key: &str, value: Value) -> Self {
        self.metadata.insert(key.to_string(), value);
        self
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

// ---------------------------------------------------------------- identities

/// The Dirac matrix identities applied to `count` random spinors; the ratio
/// is the largest residual relative to `max(|v₁|, |v₂|)`.
pub fn check_identities(seed: u64, count: usize) -> RatioReport {
    let zero = Mat2([[0.0; 2]; 2]);
    let pairs: [(&str, Mat2, Mat2); 9] = [
        ("alpha^2 = I", ALPHA.mul(&ALPHA), IDENTITY),
        ("beta^2 = I", BETA.mul(&BETA), IDENTITY),
        (
            "alpha beta + beta alpha = 0",
            ALPHA.mul(&BETA).add(&BETA.mul(&ALPHA)),
            zero,
        ),
        ("P+^2 = P+", P_PLUS.mul(&P_PLUS), P_PLUS),
        ("P-^2 = P-", P_MINUS.mul(&P_MINUS), P_MINUS),
        ("P+ P- = 0", P_PLUS.mul(&P_MINUS), zero),
        ("alpha = P+ - P-", ALPHA, P_PLUS.add(&P_MINUS.scaled(-1.0))),
        ("P+ beta = beta P-", P_PLUS.mul(&BETA), BETA.mul(&P_MINUS)),
        ("P- beta = beta P+", P_MINUS.mul(&BETA), BETA.mul(&P_PLUS)),
    ];
    // apply products factor by factor so rounding of the action is probed too
    let factors: [(&[Mat2], &[Mat2]); 9] = [
        (&[ALPHA, ALPHA], &[IDENTITY]),
        (&[BETA, BETA], &[IDENTITY]),
        (&[ALPHA, BETA], &[BETA, ALPHA]),
        (&[P_PLUS, P_PLUS], &[P_PLUS]),
        (&[P_MINUS, P_MINUS], &[P_MINUS]),
        (&[P_PLUS, P_MINUS], &[zero]),
        (&[ALPHA], &[P_PLUS]),
        (&[P_PLUS, BETA], &[BETA, P_MINUS]),
        (&[P_MINUS, BETA], &[BETA, P_PLUS]),
    ];
    let chunk = 4096usize;
    let chunks = count.div_ceil(chunk);
    let results: Vec<(f64, Option<Vec<f64>>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut worst = (0.0f64, None);
            for _ in 0..chunk.min(count - c * chunk) {
                let v = [gaussian(&mut rng) * 10.0, gaussian(&mut rng) * 10.0];
                let scale = v[0].norm().max(v[1].norm());
                let apply = |ms: &[Mat2]| ms.iter().rev().fold(v, |acc, m| m.apply(acc));
                for (i, (lhs, rhs)) in factors.iter().enumerate() {
                    let a = apply(lhs);
                    let b = apply(rhs);
                    let b = if i == 2 {
                        // anticommutator: compare αβv with -βαv
                        [-b[0], -b[1]]
                    } else if i == 6 {
                        let m = P_MINUS.apply(v);
                        [b[0] - m[0], b[1] - m[1]]
                    } else {
                        b
                    };
                    let res = ((a[0] - b[0]).norm().max((a[1] - b[1]).norm())) / scale;
                    if res > worst.0 {
                        worst = (
                            res,
                            Some(vec![v[0].re, v[0].im, v[1].re, v[1].im, i as f64]),
                        );
                    }
                }
                let res = identity_residual(v) / scale;
                if res > worst.0 {
                    worst = (res, Some(vec![v[0].re, v[0].im, v[1].re, v[1].im, -1.0]));
                }
            }
            worst
        })
        .collect();
    let matrix_exact = pairs.iter().all(|(_, a, b)| a == b);
    let mut report = RatioReport::exact("identities");
    for (res, witness) in results {
        if res > report.sup_ratio {
            report.sup_ratio = res;
            if res > IDENTITY_TOL {
                report.witness = witness;
            }
        }
        if res > IDENTITY_TOL {
            report.violations += 1;
        }
    }
    if !matrix_exact {
        report.violations += 1;
    }
    report
        .with_meta("count", json!(count))
        .with_meta("seed", json!(seed))
        .with_meta("tolerance", json!(IDENTITY_TOL))
        .with_meta(
            "identities",
            json!(pairs.iter().map(|p| p.0).collect::<Vec<_>>()),
        )
}

// ------------------------------------------------------------ modulation inequality

/// `½(|σ_sign| + |σ₁⁺| + |σ₂⁻|) - min(|ξ₁|, |ξ₂|)` for the convolution pair.
pub fn modulation_slack(xi1: f64, tau1: f64, xi2: f64, tau2: f64, sign: Sign) -> f64 {
    let m = crate::bourgain::modulation_triple(xi1, tau1, xi2, tau2);
    0.5 * (m.sigma(sign).abs() + m.sigma1_plus.abs() + m.sigma2_minus.abs())
        - xi1.abs().min(xi2.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModulationSampler {
    /// `count` uniform tuples in `[-range, range]⁴`.
    Uniform { seed: u64, count: usize, range: f64 },
    /// Every integer tuple in `[-radius, radius]⁴`.
    IntegerGrid { radius: i64 },
}

struct SlackStats {
    violations: u64,
    witness: Option<Vec<f64>>,
    min: f64,
    max: f64,
}

impl SlackStats {
    fn new() -> Self {
        Self {
            violations: 0,
            witness: None,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn record(&mut self, t: [f64; 4]) {
        let tol = 4.0 * f64::EPSILON * t.iter().map(|v| v.abs()).sum::<f64>();
        for sign in Sign::BOTH {
            let slack = modulation_slack(t[0], t[1], t[2], t[3], sign);
            self.min = self.min.min(slack);
            self.max = self.max.max(slack);
            if slack < -tol {
                self.violations += 1;
                if self.witness.is_none() {
                    self.witness = Some(vec![t[0], t[1], t[2], t[3], sign.value()]);
                }
            }
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.violations += other.violations;
        self.witness = self.witness.or(other.witness);
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
        self
    }
}

/// Checks `min(|ξ₁|,|ξ₂|) ≤ ½(|σ±| + |σ₁⁺| + |σ₂⁻|)` for both signs.
pub fn check_modulation_inequality(sampler: &ModulationSampler) -> RatioReport {
    let stats = match *sampler {
        ModulationSampler::Uniform { seed, count, range } => {
            let chunk = 1 << 16;
            (0..count.div_ceil(chunk))
                .into_par_iter()
                .map(|c| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(c as u64);
                    let mut st = SlackStats::new();
                    for _ in 0..chunk.min(count - c * chunk) {
                        let t: [f64; 4] = std::array::from_fn(|_| rng.random_range(-range..=range));
                        st.record(t);
                    }
                    st
                })
                .reduce(SlackStats::new, SlackStats::merge)
        }
        ModulationSampler::IntegerGrid { radius } => (-radius..=radius)
            .into_par_iter()
            .map(|a| {
                let mut st = SlackStats::new();
                for b in -radius..=radius {
                    for c in -radius..=radius {
                        for d in -radius..=radius {
                            st.record([a as f64, b as f64, c as f64, d as f64]);
                        }
                    }
                }
                st
            })
            .reduce(SlackStats::new, SlackStats::merge),
    };
    let mut report = RatioReport::exact("modulation-inequality");
    report.violations = stats.violations;
    report.witness = stats.witness;
    report.min_slack = Some(stats.min);
    report.max_slack = Some(stats.max);
    report.with_meta(
        "sampler",
        serde_json::to_value(sampler).expect("serializable"),
    )
}

// ------------------------------------------------------------ null structure

fn random_spinor(rng: &mut ChaCha8Rng, grid: GridSpec, band: usize) -> SpinorField {
    let mut comp = || {
        let coeffs = (0..grid.n())
            .map(|m| {
                if grid.wavenumber(m).unsigned_abs() < band as u64 {
                    gaussian(rng) / japanese(grid.xi(m))
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        ComplexScalarField::from_spectral(grid, coeffs).expect("grid length")
    };
    let upper = comp();
    let lower = comp();
    SpinorField::new(upper, lower).expect("same grid")
}

/// `max |⟨βP±ψ, P±ψ'⟩| / (‖ψ‖_∞ ‖ψ'‖_∞)` over random pairs on an `N`-point grid.
pub fn check_null_structure(ensemble: &EnsembleSpec, n: usize) -> Result<RatioReport> {
    let grid = GridSpec::new(n, SWEEP_LENGTH)?;
    let band = ensemble.band(n / 2);
    let results: Vec<f64> = (0..ensemble.count)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ensemble.rng(0, trial as u64);
            let a = random_spinor(&mut rng, grid, band);
            let b = random_spinor(&mut rng, grid, band);
            let comps = null_components(&a, &b).expect("same grid");
            let scale = a.sup_norm() * b.sup_norm();
            Sign::BOTH
                .iter()
                .map(|&s| comps.get(s, s).sup_norm() / scale)
                .fold(0.0, f64::max)
        })
        .collect();
    let mut report = RatioReport::exact("null-structure");
    for (trial, res) in results.into_iter().enumerate() {
        report.sup_ratio = report.sup_ratio.max(res);
        if res > NULL_TOL {
            report.violations += 1;
            report
                .witness
                .get_or_insert_with(|| vec![trial as f64, res]);
        }
    }
    Ok(report.with_meta("n", json!(n)).with_meta(
        "ensemble",
        serde_json::to_value(ensemble).expect("serializable"),
    ))
}

// ---------------------------------------------------- free-wave product

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeWaveReport {
    /// `max |c - formula| / max |formula|` over the space-time grid.
    pub max_rel_error: f64,
    /// `‖uv‖_{L̂^p_{xt}} / (‖f‖_{Ĥ^{0,p}} ‖g‖_{Ĥ^{0,p}})`, 0 for zero data.
    pub ratio: f64,
    /// `‖uv‖ / (‖u‖_{X^{0,b}_{+p}} ‖v‖_{X^{0,b}_{-p}})` (independent of `b`).
    pub transversal_ratio: f64,
    pub p: f64,
    pub window: f64,
    pub n_t: usize,
}

fn check_band(f: &ComplexScalarField, limit: usize) -> Result<()> {
    let coeffs = f.coeffs();
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let grid = f.grid();
    let outside = coeffs.iter().enumerate().any(|(m, c)| {
        grid.wavenumber(m).unsigned_abs() >= limit as u64 && c.norm() > 1e-13 * scale
    });
    if outside {
        Err(Error::NotBandLimited { limit })
    } else {
        Ok(())
    }
}

fn free_wave_samples(
    f: &ComplexScalarField,
    sign: Sign,
    n_t: usize,
    dt: f64,
) -> Result<Vec<Vec<Complex64>>> {
    let s = sign.value();
    (0..n_t)
        .map(|j| {
            let t = j as f64 * dt;
            Ok(
                f.apply_multiplier(|xi| Complex64::from_polar(1.0, -s * xi * t))?
                    .values(),
            )
        })
        .collect()
}

/// Builds `u = f(x - t)`, `v = g(x + t)` over a window `T_w = mL` with
/// `N_t = mN` samples and compares the space-time transform of `uv` with
/// `(T_w/L) f̂((ξ-τ)/2) ĝ((ξ+τ)/2)`, which vanishes unless `ξ ∓ τ` are even
/// multiples of `Δξ`.
pub fn check_free_wave_product(
    f: &ComplexScalarField,
    g: &ComplexScalarField,
    window: f64,
    p: f64,
) -> Result<FreeWaveReport> {
    let grid = *f.grid();
    if *g.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let spec = NormSpec::new(0.0, p)?;
    let ratio_m = window / grid.length();
    let periods = ratio_m.round();
    if !(periods >= 1.0 && (ratio_m - periods).abs() < 1e-9) {
        return Err(Error::Incommensurate {
            window,
            length: grid.length(),
        });
    }
    let periods = periods as usize;
    let n = grid.n();
    check_band(f, n / 4)?;
    check_band(g, n / 4)?;

    let n_t = periods * n;
    let dt = window / n_t as f64;
    let u = free_wave_samples(f, Sign::Plus, n_t, dt)?;
    let v = free_wave_samples(g, Sign::Minus, n_t, dt)?;
    let uv: Vec<Vec<Complex64>> = u
        .iter()
        .zip(&v)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).collect())
        .collect();
    let su = SpaceTimeSpectrum::from_samples(grid, window, &u, Taper::None)?;
    let sv = SpaceTimeSpectrum::from_samples(grid, window, &v, Taper::None)?;
    let suv = SpaceTimeSpectrum::from_samples(grid, window, &uv, Taper::None)?;

    let fc = f.coeffs();
    let gc = g.coeffs();
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for m in 0..n {
        let k = grid.wavenumber(m);
        for j in 0..n_t {
            let q = suv.tau_index(j);
            let expected = if q % periods as i64 == 0 && (k - q / periods as i64) % 2 == 0 {
                let qk = q / periods as i64;
                match (grid.index_of((k - qk) / 2), grid.index_of((k + qk) / 2)) {
                    (Some(a), Some(b)) => fc[a] * gc[b] * periods as f64,
                    _ => Complex64::new(0.0, 0.0),
                }
            } else {
                Complex64::new(0.0, 0.0)
            };
            err = err.max((suv.get(m, j) - expected).norm());
            scale = scale.max(expected.norm());
        }
    }
    let norm_uv = xsb_norm(&suv, &PhaseSpec::x(Sign::Plus, 0.0, 0.0, p)?);
    let denom = hsp_norm(f, spec) * hsp_norm(g, spec);
    let denom_x = xsb_norm(&su, &PhaseSpec::x(Sign::Plus, 0.0, 1.0, p)?)
        * xsb_norm(&sv, &PhaseSpec::x(Sign::Minus, 0.0, 1.0, p)?);
    let quotient = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    Ok(FreeWaveReport {
        max_rel_error: quotient(err, scale),
        ratio: quotient(norm_uv, denom),
        transversal_ratio: quotient(norm_uv, denom_x),
        p,
        window,
        n_t,
    })
}

/// [`check_free_wave_product`] over random band-limited pairs on `L = T_w = 2π`;
/// a pair violates the formula when its relative error exceeds
/// [`FREE_WAVE_TOL`]. `sup_ratio` holds the largest relative error.
pub fn check_free_wave_ensemble(ensemble: &EnsembleSpec, n: usize, p: f64) -> Result<RatioReport> {
    let grid = GridSpec::new(n, SWEEP_LENGTH)?;
    let reports: Vec<FreeWaveReport> = (0..ensemble.count)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ensemble.rng(0, trial as u64);
            let f = random_band_limited(grid, &mut rng);
            let g = random_band_limited(grid, &mut rng);
            check_free_wave_product(&f, &g, SWEEP_LENGTH, p)
        })
        .collect::<Result<_>>()?;
    let mut report = RatioReport::exact("free-wave-product");
    for (trial, rep) in reports.iter().enumerate() {
        report.sup_ratio = report.sup_ratio.max(rep.max_rel_error);
        if rep.max_rel_error > FREE_WAVE_TOL {
            report.violations += 1;
            report
                .witness
                .get_or_insert_with(|| vec![trial as f64, rep.max_rel_error]);
        }
    }
    let ratios: Vec<f64> = reports.iter().map(|r| r.ratio).collect();
    Ok(report
        .with_meta("n", json!(n))
        .with_meta("p", json!(p))
        .with_meta("product_ratios", json!(ratios))
        .with_meta("tolerance", json!(FREE_WAVE_TOL))
        .with_meta(
            "ensemble",
            serde_json::to_value(ensemble).expect("serializable"),
        ))
}

/// Random band-limited scalar field with `|k| < N/4`.
pub fn random_band_limited(grid: GridSpec, rng: &mut ChaCha8Rng) -> ComplexScalarField {
    let limit = (grid.n() / 4) as u64;
    let coeffs = (0..grid.n())
        .map(|m| {
            if grid.wavenumber(m).unsigned_abs() < limit {
                gaussian(rng)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    ComplexScalarField::from_spectral(grid, coeffs).expect("grid length")
}

// ------------------------------------------------------- random space-time

/// Random space-time spectrum centred on the characteristic `τ = -phase(ξ)`
/// of `phase`, confined to `|k| < band_x` and `|q| < band_t`.
fn random_spacetime(
    rng: &mut ChaCha8Rng,
    grid: GridSpec,
    n_t: usize,
    phase: Option<&PhaseSpec>,
    distribution: Distribution,
    band_x: usize,
    band_t: usize,
) -> SpaceTimeSpectrum {
    let mut spec = SpaceTimeSpectrum::zeros(grid, n_t, SWEEP_LENGTH).expect("valid layout");
    let inside = |spec: &SpaceTimeSpectrum, m: usize, j: usize| {
        grid.wavenumber(m).unsigned_abs() < band_x as u64
            && spec.tau_index(j).unsigned_abs() < band_t as u64
    };
    match distribution {
        Distribution::SingleMode => {
            let k = rng.random_range(-(band_x as i64) + 1..band_x as i64);
            let q = rng.random_range(-(band_t as i64) + 1..band_t as i64);
            let (m, j) = (grid.index_of(k).unwrap(), spec.tau_position(q).unwrap());
            spec.set(m, j, gaussian(rng));
        }
        Distribution::GaussianModes | Distribution::BandLimited => {
            for m in 0..grid.n() {
                let xi = grid.xi(m);
                let shift = phase.map_or(0.0, |p| p.phase(xi));
                for j in 0..n_t {
                    if !inside(&spec, m, j) {
                        continue;
                    }
                    let envelope = if distribution == Distribution::GaussianModes {
                        1.0 / (japanese(xi) * japanese(spec.tau(j) + shift))
                    } else {
                        1.0
                    };
                    spec.set(m, j, gaussian(rng) * envelope);
                }
            }
        }
    }
    spec
}

/// A spinor in the range of `P_sign`, centred on the line characteristic
/// of `sign`.
fn random_half_spinor(
    rng: &mut ChaCha8Rng,
    grid: GridSpec,
    range: Sign,
    phase: &PhaseSpec,
    ensemble: &EnsembleSpec,
    band: usize,
) -> [SpaceTimeSpectrum; 2] {
    let a = random_spacetime(
        rng,
        grid,
        grid.n(),
        Some(phase),
        ensemble.distribution,
        band,
        band,
    );
    let b = random_spacetime(
        rng,
        grid,
        grid.n(),
        Some(phase),
        ensemble.distribution,
        band,
        band,
    );
    // P_sign (a, b) = ½(a ± b)(1, ±1)
    let s = range.value();
    let mut upper = a.clone();
    for (c, d) in upper.coeffs_mut().iter_mut().zip(b.coeffs()) {
        *c = (*c + d * s) * 0.5;
    }
    let mut lower = upper.clone();
    lower.coeffs_mut().iter_mut().for_each(|c| *c *= s);
    [upper, lower]
}

/// Space-time spectrum of `⟨βP_a ψ, P_b ψ'⟩ = (P_b ψ')^† β P_a ψ`.
fn bilinear_form(
    psi: &[SpaceTimeSpectrum; 2],
    a: Sign,
    psi2: &[SpaceTimeSpectrum; 2],
    b: Sign,
) -> SpaceTimeSpectrum {
    let left = BETA.mul(&projection(a));
    let right = projection(b);
    let grid = *psi[0].grid();
    let ps = [psi[0].samples(), psi[1].samples()];
    let qs = [psi2[0].samples(), psi2[1].samples()];
    let samples: Vec<Vec<Complex64>> = (0..psi[0].n_t())
        .map(|j| {
            (0..grid.n())
                .map(|i| {
                    let x = left.apply([ps[0][j][i], ps[1][j][i]]);
                    let y = right.apply([qs[0][j][i], qs[1][j][i]]);
                    y[0].conj() * x[0] + y[1].conj() * x[1]
                })
                .collect()
        })
        .collect();
    SpaceTimeSpectrum::from_samples(grid, psi[0].window(), &samples, Taper::None)
        .expect("valid samples")
}

fn product(u: &SpaceTimeSpectrum, v: &SpaceTimeSpectrum) -> SpaceTimeSpectrum {
    let a = u.samples();
    let b = v.samples();
    let samples: Vec<Vec<Complex64>> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).collect())
        .collect();
    SpaceTimeSpectrum::from_samples(*u.grid(), u.window(), &samples, Taper::None)
        .expect("valid samples")
}

/// Runs `trial(rng, grid) -> ratio` over the ensemble at each resolution.
fn ratio_sweep<F>(
    ensemble: &EnsembleSpec,
    resolutions: &[usize],
    trial: F,
) -> Result<Vec<ResolutionEntry>>
where
    F: Fn(&mut ChaCha8Rng, GridSpec) -> Vec<f64> + Sync,
{
    let mut out = Vec::new();
    let mut per_slot: Vec<Vec<ResolutionEntry>> = Vec::new();
    for (stage, &n) in resolutions.iter().enumerate() {
        let grid = GridSpec::new(n, SWEEP_LENGTH)?;
        let ratios: Vec<Vec<f64>> = (0..ensemble.count)
            .into_par_iter()
            .map(|t| {
                let mut rng = ensemble.rng(stage as u64 + 1, t as u64);
                trial(&mut rng, grid)
            })
            .collect();
        let slots = ratios.first().map_or(0, Vec::len);
        per_slot.resize(slots, Vec::new());
        for (slot, entries) in per_slot.iter_mut().enumerate() {
            let vals: Vec<f64> = ratios.iter().map(|r| r[slot]).collect();
            entries.push(ResolutionEntry {
                n,
                n_t: n,
                trials: vals.len(),
                sup_ratio: vals.iter().copied().fold(0.0, f64::max),
                mean_ratio: vals.iter().sum::<f64>() / vals.len() as f64,
            });
        }
    }
    out.extend(per_slot.into_iter().flatten());
    Ok(out)
}

/// Splits the flat output of [`ratio_sweep`] back into one entry list per slot.
fn split_slots(entries: Vec<ResolutionEntry>, resolutions: usize) -> Vec<Vec<ResolutionEntry>> {
    entries
        .chunks(resolutions.max(1))
        .map(<[_]>::to_vec)
        .collect()
}

fn check_resolutions(resolutions: &[usize]) -> Result<()> {
    if resolutions.is_empty() {
        return Err(Error::Config("at least one resolution is required".into()));
    }
    for &n in resolutions {
        GridSpec::new(n, SWEEP_LENGTH)?;
        if n < 16 {
            return Err(Error::Config(format!("ratio sweeps need N >= 16, got {n}")));
        }
    }
    Ok(())
}

fn quotient(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

// ---------------------------------------------------- bilinear estimates

/// The four bilinear estimates behind the local theory. In each, the
/// left side is `⟨βP_a ψ, P_b ψ'⟩` with `a ≠ b`, measured in a cone space
/// of either sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bilinear {
    /// `‖⟨βP₊ψ, P₋ψ'⟩‖_{Y^{-r,-ρ}_{±p'}} ≲ ‖ψ‖_{X^{s,σ}_{+p}} ‖ψ'‖_{X^{-s,1-σ-ε}_{-p'}}`
    DiracPlusMinus,
    /// `‖⟨βP₋ψ, P₊ψ'⟩‖_{Y^{-r,-ρ}_{±p'}} ≲ ‖ψ‖_{X^{s,σ}_{-p}} ‖ψ'‖_{X^{-s,1-σ-ε}_{+p'}}`
    DiracMinusPlus,
    /// `‖⟨βP₊ψ, P₋ψ'⟩‖_{Y^{r-1,ρ-1+ε}_{±p}} ≲ ‖ψ‖_{X^{s,σ}_{+p}} ‖ψ'‖_{X^{s,σ}_{-p}}`
    SourcePlusMinus,
    /// `‖⟨βP₋ψ, P₊ψ'⟩‖_{Y^{r-1,ρ-1+ε}_{±p}} ≲ ‖ψ‖_{X^{s,σ}_{-p}} ‖ψ'‖_{X^{s,σ}_{+p}}`
    SourceMinusPlus,
}

impl Bilinear {
    pub const ALL: [Bilinear; 4] = [
        Bilinear::DiracPlusMinus,
        Bilinear::DiracMinusPlus,
        Bilinear::SourcePlusMinus,
        Bilinear::SourceMinusPlus,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Bilinear::DiracPlusMinus => "dirac-pm",
            Bilinear::DiracMinusPlus => "dirac-mp",
            Bilinear::SourcePlusMinus => "source-pm",
            Bilinear::SourceMinusPlus => "source-mp",
        }
    }

    /// Sign of the projection applied to `ψ` (the other slot gets the opposite).
    fn first(&self) -> Sign {
        match self {
            Bilinear::DiracPlusMinus | Bilinear::SourcePlusMinus => Sign::Plus,
            _ => Sign::Minus,
        }
    }

    /// `(ψ norm, ψ' norm, left-side norm for the given cone sign)`.
    fn norms(&self, b: &BilinearParams, cone: Sign) -> Result<(PhaseSpec, PhaseSpec, PhaseSpec)> {
        let a = self.first();
        let pd = dual_index(b.p);
        match self {
            Bilinear::DiracPlusMinus | Bilinear::DiracMinusPlus => Ok((
                PhaseSpec::x(a, b.s, b.sigma, b.p)?,
                PhaseSpec::x(a.flip(), -b.s, 1.0 - b.sigma - b.eps, pd)?,
                PhaseSpec::y(cone, -b.r, -b.rho, pd)?,
            )),
            Bilinear::SourcePlusMinus | Bilinear::SourceMinusPlus => Ok((
                PhaseSpec::x(a, b.s, b.sigma, b.p)?,
                PhaseSpec::x(a.flip(), b.s, b.sigma, b.p)?,
                PhaseSpec::y(cone, b.r - 1.0, b.rho - 1.0 + b.eps, b.p)?,
            )),
        }
    }
}

impl std::str::FromStr for Bilinear {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Bilinear::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown bilinear estimate `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilinearParams {
    pub p: f64,
    pub s: f64,
    pub r: f64,
    pub sigma: f64,
    pub rho: f64,
    pub eps: f64,
}

impl BilinearParams {
    /// Whether `(p, s, r)` lies in the region and `(σ, ρ)` meets every
    /// working condition with `1/p < σ, ρ < 1`.
    pub fn admissible(&self) -> bool {
        let Ok(prob) = FeasibilityProblem::new(self.p, self.s, self.r, self.eps) else {
            return false;
        };
        let inside = |v: f64| 1.0 / self.p < v && v < 1.0;
        check_main(&prob).all()
            && inside(self.sigma)
            && inside(self.rho)
            && working_conditions(&prob, self.sigma, self.rho, STRICT_MARGIN)
                .iter()
                .all(|&b| b)
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.p, self.s, self.r, self.sigma, self.rho, self.eps]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.p > 1.0) || !(self.eps >= 0.0) {
            return Err(Error::Inadmissible(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Sup ratio sweeps for one bilinear estimate, one report per cone sign.
/// Parameters outside the admissible set are still evaluated and marked.
pub fn estimate_bilinear_constant(
    which: Bilinear,
    params: &BilinearParams,
    ensemble: &EnsembleSpec,
    resolutions: &[usize],
) -> Result<Vec<RatioReport>> {
    params.validate()?;
    check_resolutions(resolutions)?;
    let specs: Vec<(PhaseSpec, PhaseSpec, PhaseSpec)> = Sign::BOTH
        .iter()
        .map(|&c| which.norms(params, c))
        .collect::<Result<_>>()?;
    let a = which.first();
    let entries = ratio_sweep(ensemble, resolutions, |rng, grid| {
        let band = ensemble.band(grid.n() / 4);
        let (x1, x2, _) = &specs[0];
        let psi = random_half_spinor(rng, grid, a, x1, ensemble, band);
        let psi2 = random_half_spinor(rng, grid, a.flip(), x2, ensemble, band);
        let lhs = bilinear_form(&psi, a, &psi2, a.flip());
        let rhs = xsb_norm_components(&[&psi[0], &psi[1]], x1).expect("same layout")
            * xsb_norm_components(&[&psi2[0], &psi2[1]], x2).expect("same layout");
        specs
            .iter()
            .map(|(_, _, y)| quotient(xsb_norm(&lhs, y), rhs))
            .collect()
    })?;
    let admissible = params.admissible();
    Ok(split_slots(entries, resolutions.len())
        .into_iter()
        .zip(Sign::BOTH)
        .map(|(entries, cone)| {
            let mut r = RatioReport::sweep(&format!("{}{}", which.name(), cone), entries)
                .with_meta(
                    "params",
                    serde_json::to_value(params).expect("serializable"),
                )
                .with_meta("cone", json!(cone))
                .with_meta(
                    "ensemble",
                    serde_json::to_value(ensemble).expect("serializable"),
                )
                .with_meta("length", json!(SWEEP_LENGTH))
                .with_meta("window", json!(SWEEP_LENGTH));
            r.admissible = Some(admissible);
            if !admissible {
                r = r.with_meta("note", json!("outside admissible region"));
            }
            r
        })
        .collect())
}

// ------------------------------------------------------------- embeddings

/// The four embeddings into mixed Fourier-Lebesgue spaces, for index `r`
/// and slack `ε`; the last uses `w₁ = w₂ = 2r`, `w₃ = r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Embedding {
    /// `X^{1/r+ε,0}_r ⊂ L̂^∞_x(L̂^r_t)`
    SpaceInfinity,
    /// `X^{0,1/r+ε}_r ⊂ L̂^r_x(L̂^∞_t)`
    TimeInfinity,
    /// `X^{1/r+ε,1/r+ε}_r ⊂ L̂^∞_x(L̂^∞_t)`
    BothInfinity,
    /// `X^{1/(2r)+ε,1/(2r)+ε}_r ⊂ L̂^{2r}_x(L̂^{2r}_t)`
    Interpolated,
}

impl Embedding {
    pub const ALL: [Embedding; 4] = [
        Embedding::SpaceInfinity,
        Embedding::TimeInfinity,
        Embedding::BothInfinity,
        Embedding::Interpolated,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Embedding::SpaceInfinity => "embed-linf-lr",
            Embedding::TimeInfinity => "embed-lr-linf",
            Embedding::BothInfinity => "embed-linf-linf",
            Embedding::Interpolated => "embed-l2r-l2r",
        }
    }

    /// `(l, b, x index, t index)` for index `r` and slack `eps`.
    pub fn exponents(&self, r: f64, eps: f64) -> (f64, f64, f64, f64) {
        let inf = f64::INFINITY;
        match self {
            Embedding::SpaceInfinity => (1.0 / r + eps, 0.0, inf, r),
            Embedding::TimeInfinity => (0.0, 1.0 / r + eps, r, inf),
            Embedding::BothInfinity => (1.0 / r + eps, 1.0 / r + eps, inf, inf),
            Embedding::Interpolated => (0.5 / r + eps, 0.5 / r + eps, 2.0 * r, 2.0 * r),
        }
    }

    /// `‖u‖_{mixed} / ‖u‖_{X}` for one spectrum, with phase `+ξ`.
    pub fn ratio(&self, spec: &SpaceTimeSpectrum, r: f64, eps: f64) -> Result<f64> {
        let (l, b, px, qt) = self.exponents(r, eps);
        let lhs = mixed_norm(&[spec], px, qt)?;
        let rhs = xsb_norm(spec, &PhaseSpec::x(Sign::Plus, l, b, r)?);
        Ok(quotient(lhs, rhs))
    }
}

/// Ratio sweeps of all four embeddings on fields centred on `τ = -ξ`.
pub fn check_embeddings(
    r: f64,
    eps: f64,
    ensemble: &EnsembleSpec,
    resolutions: &[usize],
) -> Result<Vec<RatioReport>> {
    if !(r > 1.0 && r.is_finite()) {
        return Err(Error::LebesgueIndex(r));
    }
    if !(eps >= 0.0) {
        return Err(Error::Config(format!(
            "slack must be nonnegative, got {eps}"
        )));
    }
    check_resolutions(resolutions)?;
    let phase = PhaseSpec::x(Sign::Plus, 0.0, 0.0, r)?;
    let entries = ratio_sweep(ensemble, resolutions, |rng, grid| {
        let band = ensemble.band(grid.n() / 2);
        let spec = random_spacetime(
            rng,
            grid,
            grid.n(),
            Some(&phase),
            ensemble.distribution,
            band,
            band,
        );
        Embedding::ALL
            .iter()
            .map(|e| e.ratio(&spec, r, eps).expect("valid indices"))
            .collect()
    })?;
    Ok(split_slots(entries, resolutions.len())
        .into_iter()
        .zip(Embedding::ALL)
        .map(|(entries, e)| {
            RatioReport::sweep(e.name(), entries)
                .with_meta("r", json!(r))
                .with_meta("eps", json!(eps))
                .with_meta(
                    "ensemble",
                    serde_json::to_value(ensemble).expect("serializable"),
                )
        })
        .collect())
}

// -------------------------------------------------------------- transversal product

/// `‖uv‖_{L̂^p} / (‖u‖_{X^{0,σ}_{+p}} ‖v‖_{X^{0,σ}_{-p}})` over random fields
/// centred on their characteristics.
pub fn check_transversal_product(
    sigma: f64,
    p: f64,
    ensemble: &EnsembleSpec,
    resolutions: &[usize],
) -> Result<RatioReport> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::LebesgueIndex(p));
    }
    if !(sigma > 1.0 / p) {
        return Err(Error::Inadmissible(format!(
            "need sigma > 1/p, got sigma = {sigma}, p = {p}"
        )));
    }
    check_resolutions(resolutions)?;
    let xu = PhaseSpec::x(Sign::Plus, 0.0, sigma, p)?;
    let xv = PhaseSpec::x(Sign::Minus, 0.0, sigma, p)?;
    let flat = PhaseSpec::x(Sign::Plus, 0.0, 0.0, p)?;
    let entries = ratio_sweep(ensemble, resolutions, |rng, grid| {
        let band = ensemble.band(grid.n() / 4);
        let u = random_spacetime(
            rng,
            grid,
            grid.n(),
            Some(&xu),
            ensemble.distribution,
            band,
            band,
        );
        let v = random_spacetime(
            rng,
            grid,
            grid.n(),
            Some(&xv),
            ensemble.distribution,
            band,
            band,
        );
        let lhs = xsb_norm(&product(&u, &v), &flat);
        vec![quotient(lhs, xsb_norm(&u, &xu) * xsb_norm(&v, &xv))]
    })?;
    Ok(RatioReport::sweep("transversal-product", entries)
        .with_meta("sigma", json!(sigma))
        .with_meta("p", json!(p))
        .with_meta(
            "ensemble",
            serde_json::to_value(ensemble).expect("serializable"),
        ))
}

// ------------------------------------------------------------- product law

/// Exponents of `‖uv‖_{X^{-c,-γ}_{r,φ}} ≲ ‖u‖_{X^{a,α}_{p,φ₁}} ‖v‖_{X^{b,β}_{q,φ₂}}`
/// with `φ₁ = +ξ`, `φ₂ = -ξ` and `φ = ±|ξ|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductLawParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl Default for ProductLawParams {
    fn default() -> Self {
        Self {
            a: 0.6,
            b: 0.0,
            c: 0.5,
            alpha: 0.0,
            beta: 0.6,
            gamma: 0.39,
            p: 2.0,
            q: 2.0,
            r: 2.0,
        }
    }
}

impl ProductLawParams {
    /// The hypotheses of the product law.
    pub fn satisfied(&self) -> bool {
        let threshold = 1.0 / self.p + 1.0 / self.q + 1.0 - 1.0 / self.r - 1.0;
        self.alpha >= 0.0
            && self.beta >= 0.0
            && self.gamma >= 0.0
            && self.a + self.b + self.c > threshold
            && self.a + self.b >= 0.0
            && self.a + self.c >= 0.0
            && self.b + self.c >= 0.0
            && self.alpha + self.beta + self.gamma > threshold
    }
}

/// Ratio sweeps of the product law, one report per cone sign of `φ`.
pub fn check_product_law(
    params: &ProductLawParams,
    ensemble: &EnsembleSpec,
    resolutions: &[usize],
) -> Result<Vec<RatioReport>> {
    for idx in [params.p, params.q, params.r] {
        if !(idx > 1.0 && idx.is_finite()) {
            return Err(Error::LebesgueIndex(idx));
        }
    }
    check_resolutions(resolutions)?;
    let xu = PhaseSpec::x(Sign::Plus, params.a, params.alpha, params.p)?;
    let xv = PhaseSpec::x(Sign::Minus, params.b, params.beta, params.q)?;
    let targets: Vec<PhaseSpec> = Sign::BOTH
        .iter()
        .map(|&s| PhaseSpec::new(PhaseKind::Cone, s, -params.c, -params.gamma, params.r))
        .collect::<Result<_>>()?;
    let entries = ratio_sweep(ensemble, resolutions, |rng, grid| {
        let band = ensemble.band(grid.n() / 4);
        let u = random_spacetime(
            rng,
            grid,
            grid.n(),
            Some(&xu),
            ensemble.distribution,
            band,
            band,
        );
        let v = random_spacetime(
            rng,
            grid,
            grid.n(),
            Some(&xv),
            ensemble.distribution,
            band,
            band,
        );
        let uv = product(&u, &v);
        let rhs = xsb_norm(&u, &xu) * xsb_norm(&v, &xv);
        targets
            .iter()
            .map(|t| quotient(xsb_norm(&uv, t), rhs))
            .collect()
    })?;
    let ok = params.satisfied();
    Ok(split_slots(entries, resolutions.len())
        .into_iter()
        .zip(Sign::BOTH)
        .map(|(entries, cone)| {
            let mut r = RatioReport::sweep(&format!("product-law{cone}"), entries)
                .with_meta(
                    "params",
                    serde_json::to_value(params).expect("serializable"),
                )
                .with_meta(
                    "ensemble",
                    serde_json::to_value(ensemble).expect("serializable"),
                );
            r.admissible = Some(ok);
            r
        })
        .collect())
}

/// Convenience: a free-wave pair drawn from `rng` on an `N`-point grid of
/// length [`SWEEP_LENGTH`].
pub fn free_wave_trial(n: usize, rng: &mut ChaCha8Rng, p: f64) -> Result<FreeWaveReport> {
    let grid = GridSpec::new(n, SWEEP_LENGTH)?;
    let f = random_band_limited(grid, rng);
    let g = random_band_limited(grid, rng);
    check_free_wave_product(&f, &g, SWEEP_LENGTH, p)
}

/// Translates `f` as a free half-wave; used by callers building
/// on-characteristic space-time data.
pub fn translate(f: &ComplexScalarField, t: f64, sign: Sign) -> Result<ComplexScalarField> {
    let spinor = SpinorField::new(f.clone(), f.clone())?;
    Ok(free_dirac(&spinor, t, sign)?.upper().clone())
}
