//! Parameter-region logic for the exponents `(p, s, r)` and the auxiliary
//! modulation exponents `(σ, ρ)`.
//!
//! All comparisons run in exact rational arithmetic: every finite `f64` is a
//! dyadic rational and is converted without rounding.

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Margin demanded of strict working conditions when re-validating a
/// returned pair.
pub const STRICT_MARGIN: f64 = 1e-12;

fn q(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn to_f64(x: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityProblem {
    pub p: f64,
    pub s: f64,
    pub r: f64,
    pub eps: f64,
}

impl FeasibilityProblem {
    pub const DEFAULT_EPS: f64 = 0.01;

    pub fn new(p: f64, s: f64, r: f64, eps: f64) -> Result<Self> {
        if !(p > 1.0 && p <= 2.0) {
            return Err(Error::LebesgueIndex(p));
        }
        if !(eps > 0.0 && eps.is_finite()) || !s.is_finite() || !r.is_finite() {
            return Err(Error::Inadmissible(format!(
                "need finite s, r and eps > 0, got s = {s}, r = {r}, eps = {eps}"
            )));
        }
        Ok(Self { p, s, r, eps })
    }
}

/// Exact rational images of the problem data.
struct Exact {
    ip: BigRational,
    s: BigRational,
    r: BigRational,
    eps: BigRational,
}

impl Exact {
    fn new(prob: &FeasibilityProblem) -> Self {
        Self {
            ip: q(prob.p).recip(),
            s: q(prob.s),
            r: q(prob.r),
            eps: q(prob.eps),
        }
    }
}

/// The four region conditions on `(p, s, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MainCheck {
    /// `s > -1/2 + 1/(2p)`
    pub s_lower: bool,
    /// `r ≤ 1 + s`
    pub r_upper: bool,
    /// `r ≥ |s|`
    pub r_abs: bool,
    /// `r > 2/p - 1`
    pub r_lower: bool,
}

impl MainCheck {
    pub fn all(&self) -> bool {
        self.s_lower && self.r_upper && self.r_abs && self.r_lower
    }
}

pub fn check_main(prob: &FeasibilityProblem) -> MainCheck {
    let e = Exact::new(prob);
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let one = int(1);
    let abs_s = if e.s < int(0) {
        -e.s.clone()
    } else {
        e.s.clone()
    };
    MainCheck {
        s_lower: e.s > -half.clone() + &e.ip * &half,
        r_upper: e.r <= &one + &e.s,
        r_abs: e.r >= abs_s,
        r_lower: e.r > int(2) * &e.ip - one,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// `expression ≥ 0`
    NonNegative,
    /// `expression > 0`
    Positive,
}

/// The seventeen working conditions, in their conventional order, each as
/// `expression (≥|>) 0`.
pub const WORKING_CONDITIONS: [(&str, Relation); 17] = [
    ("s + 1 - rho - eps", Relation::NonNegative),
    ("s + 1 - r", Relation::NonNegative),
    ("2s + 1 - rho - eps", Relation::NonNegative),
    ("2s + 1 - rho - eps + 1 - r", Relation::NonNegative),
    ("2s + sigma + 1 - r - 1/p", Relation::Positive),
    ("2s + sigma", Relation::NonNegative),
    ("s + sigma + 1 - r", Relation::NonNegative),
    ("s + 1 - r", Relation::NonNegative),
    ("sigma + 1 - rho - eps - 1/p", Relation::Positive),
    ("1 - eps - rho", Relation::NonNegative),
    ("1 - eps - sigma", Relation::NonNegative),
    ("s - s + r + 1 - sigma - eps - 1/p", Relation::Positive),
    ("s - s + 1 - sigma - eps", Relation::NonNegative),
    ("s + r", Relation::NonNegative),
    ("-s + r", Relation::NonNegative),
    ("s + 1 - sigma - eps + r", Relation::NonNegative),
    ("-s + 1 - sigma - eps + r", Relation::NonNegative),
];

fn slacks(e: &Exact, sigma: &BigRational, rho: &BigRational) -> [BigRational; 17] {
    let one = int(1);
    let two = int(2);
    let (s, r, eps, ip) = (&e.s, &e.r, &e.eps, &e.ip);
    [
        s + &one - rho - eps,
        s + &one - r,
        &two * s + &one - rho - eps,
        &two * s + &one - rho - eps + &one - r,
        &two * s + sigma + &one - r - ip,
        &two * s + sigma,
        s + sigma + &one - r,
        s + &one - r,
        sigma + &one - rho - eps - ip,
        &one - eps - rho,
        &one - eps - sigma,
        s - s + r + &one - sigma - eps - ip,
        s - s + &one - sigma - eps,
        s + r,
        -s + r,
        s + &one - sigma - eps + r,
        -s + &one - sigma - eps + r,
    ]
}

/// Floating images of the working-condition expressions, as term lists
/// summed left to right (unused slots are zero).
fn slack_terms(prob: &FeasibilityProblem, sigma: f64, rho: f64) -> [[f64; 7]; 17] {
    let (s, r, eps, ip) = (prob.s, prob.r, prob.eps, 1.0 / prob.p);
    let t = |v: &[f64]| -> [f64; 7] { std::array::from_fn(|i| v.get(i).copied().unwrap_or(0.0)) };
    [
        t(&[s, 1.0, -rho, -eps]),
        t(&[s, 1.0, -r]),
        t(&[2.0 * s, 1.0, -rho, -eps]),
        t(&[2.0 * s, 1.0, -rho, -eps, 1.0, -r]),
        t(&[2.0 * s, sigma, 1.0, -r, -ip]),
        t(&[2.0 * s, sigma]),
        t(&[s, sigma, 1.0, -r]),
        t(&[s, 1.0, -r]),
        t(&[sigma, 1.0, -rho, -eps, -ip]),
        t(&[1.0, -eps, -rho]),
        t(&[1.0, -eps, -sigma]),
        t(&[s, -s, r, 1.0, -sigma, -eps, -ip]),
        t(&[s, -s, 1.0, -sigma, -eps]),
        t(&[s, r]),
        t(&[-s, r]),
        t(&[s, 1.0, -sigma, -eps, r]),
        t(&[-s, 1.0, -sigma, -eps, r]),
    ]
}

/// Sign of `Σ terms` when the floating sum certifies it. The bound covers
/// the rounding of every partial sum and of `1/p` (at most eight
/// operations), with headroom; underflow is covered by the absolute term.
fn certified_sign(terms: &[f64]) -> Option<std::cmp::Ordering> {
    let (sum, mag) = terms
        .iter()
        .fold((0.0f64, 0.0f64), |(a, m), &t| (a + t, m + t.abs()));
    let bound = 16.0 * f64::EPSILON * mag + 16.0 * f64::MIN_POSITIVE;
    if sum > bound {
        Some(std::cmp::Ordering::Greater)
    } else if sum < -bound {
        Some(std::cmp::Ordering::Less)
    } else {
        None
    }
}

/// Evaluates every working condition at `(σ, ρ)`; strict conditions must
/// hold with slack above `margin`, non-strict ones exactly. Signs certified
/// in floating point are accepted, the rest are decided exactly.
pub fn working_conditions(
    prob: &FeasibilityProblem,
    sigma: f64,
    rho: f64,
    margin: f64,
) -> [bool; 17] {
    let terms = slack_terms(prob, sigma, rho);
    let mut exact: Option<[BigRational; 17]> = None;
    let margin_q = q(margin);
    let zero = int(0);
    std::array::from_fn(|i| {
        let strict = WORKING_CONDITIONS[i].1 == Relation::Positive;
        let mut t = [0.0; 8];
        t[..7].copy_from_slice(&terms[i]);
        if strict {
            t[7] = -margin;
        }
        match certified_sign(&t) {
            Some(ord) => ord == std::cmp::Ordering::Greater,
            None => {
                let vals =
                    exact.get_or_insert_with(|| slacks(&Exact::new(prob), &q(sigma), &q(rho)));
                if strict {
                    vals[i] > margin_q
                } else {
                    vals[i] >= zero
                }
            }
        }
    })
}

/// Admissible modulation exponents, `1/p < σ, ρ < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentPair {
    pub sigma: f64,
    pub rho: f64,
    /// Whether `ρ = 1/p + ε` was kept.
    pub proof_choice: bool,
}

#[derive(Clone)]
struct Bound {
    value: BigRational,
    strict: bool,
}

impl Bound {
    fn open(value: BigRational) -> Self {
        Self {
            value,
            strict: true,
        }
    }

    fn closed(value: BigRational) -> Self {
        Self {
            value,
            strict: false,
        }
    }
}

fn tightest_lower(bounds: Vec<Bound>) -> Bound {
    bounds
        .into_iter()
        .reduce(|a, b| match a.value.cmp(&b.value) {
            std::cmp::Ordering::Less => b,
            std::cmp::Ordering::Greater => a,
            std::cmp::Ordering::Equal => Bound {
                value: a.value,
                strict: a.strict || b.strict,
            },
        })
        .expect("nonempty")
}

fn tightest_upper(bounds: Vec<Bound>) -> Bound {
    bounds
        .into_iter()
        .reduce(|a, b| match a.value.cmp(&b.value) {
            std::cmp::Ordering::Less => a,
            std::cmp::Ordering::Greater => b,
            std::cmp::Ordering::Equal => Bound {
                value: a.value,
                strict: a.strict || b.strict,
            },
        })
        .expect("nonempty")
}

/// Midpoint of a nonempty interval, or `None` when it is empty.
fn pick(lo: &Bound, hi: &Bound) -> Option<BigRational> {
    if lo.value < hi.value {
        Some((&lo.value + &hi.value) / int(2))
    } else if lo.value == hi.value && !lo.strict && !hi.strict {
        Some(lo.value.clone())
    } else {
        None
    }
}

fn sigma_bounds(e: &Exact, rho: &BigRational) -> (Bound, Bound) {
    let one = int(1);
    let two = int(2);
    let (s, r, eps, ip) = (&e.s, &e.r, &e.eps, &e.ip);
    let lower = tightest_lower(vec![
        Bound::open(ip - &two * s - &one + r),
        Bound::closed(-(&two * s)),
        Bound::closed(r - s - &one),
        Bound::open(rho + ip - &one + eps),
        Bound::open(ip.clone()),
    ]);
    let upper = tightest_upper(vec![
        Bound::closed(&one - eps),
        Bound::open(r + &one - eps - ip),
        Bound::closed(s + &one - eps + r),
        Bound::closed(-s + &one - eps + r),
        Bound::open(one.clone()),
    ]);
    (lower, upper)
}

fn rho_upper(e: &Exact) -> Bound {
    let one = int(1);
    let two = int(2);
    let (s, r, eps) = (&e.s, &e.r, &e.eps);
    tightest_upper(vec![
        Bound::closed(s + &one - eps),
        Bound::closed(&two * s + &one - eps),
        Bound::closed(&two * s + &two - eps - r),
        Bound::closed(&one - eps),
        Bound::open(one.clone()),
    ])
}

/// Solves the working conditions for `(σ, ρ)`. The choice `ρ = 1/p + ε` is
/// tried first; otherwise `ρ` is pushed towards `1/p`, which relaxes the
/// only coupling `σ - ρ > 1/p - 1 + ε`. Returned pairs are re-validated with
/// [`STRICT_MARGIN`].
///
/// The interval engine first runs in floating point; its answer is kept
/// only if it re-validates. Emptiness is always decided by the exact engine.
pub fn find_sigma_rho(prob: &FeasibilityProblem) -> Option<ExponentPair> {
    find_fast(prob).or_else(|| find_exact(prob))
}

fn validated(
    prob: &FeasibilityProblem,
    sigma: f64,
    rho: f64,
    proof_choice: bool,
) -> Option<ExponentPair> {
    let inside = |v: f64| 1.0 / prob.p < v && v < 1.0;
    (inside(sigma)
        && inside(rho)
        && working_conditions(prob, sigma, rho, STRICT_MARGIN)
            .iter()
            .all(|&b| b))
    .then_some(ExponentPair {
        sigma,
        rho,
        proof_choice,
    })
}

/// Floating mirror of [`find_exact`]; bounds are `(value, strict)`.
fn find_fast(prob: &FeasibilityProblem) -> Option<ExponentPair> {
    let (s, r, eps, ip) = (prob.s, prob.r, prob.eps, 1.0 / prob.p);
    let lower = |b: &[(f64, bool)]| {
        b.iter().copied().fold((f64::NEG_INFINITY, false), |a, c| {
            if c.0 > a.0 {
                c
            } else if c.0 == a.0 {
                (a.0, a.1 || c.1)
            } else {
                a
            }
        })
    };
    let upper = |b: &[(f64, bool)]| {
        b.iter().copied().fold((f64::INFINITY, false), |a, c| {
            if c.0 < a.0 {
                c
            } else if c.0 == a.0 {
                (a.0, a.1 || c.1)
            } else {
                a
            }
        })
    };
    let pick = |lo: (f64, bool), hi: (f64, bool)| {
        if lo.0 < hi.0 {
            Some(0.5 * (lo.0 + hi.0))
        } else if lo.0 == hi.0 && !lo.1 && !hi.1 {
            Some(lo.0)
        } else {
            None
        }
    };
    let sigma_bounds = |rho: f64| {
        (
            lower(&[
                (ip - 2.0 * s - 1.0 + r, true),
                (-2.0 * s, false),
                (r - s - 1.0, false),
                (rho + ip - 1.0 + eps, true),
                (ip, true),
            ]),
            upper(&[
                (1.0 - eps, false),
                (r + 1.0 - eps - ip, true),
                (s + 1.0 - eps + r, false),
                (-s + 1.0 - eps + r, false),
                (1.0, true),
            ]),
        )
    };
    let rho_hi = upper(&[
        (s + 1.0 - eps, false),
        (2.0 * s + 1.0 - eps, false),
        (2.0 * s + 2.0 - eps - r, false),
        (1.0 - eps, false),
        (1.0, true),
    ]);
    let rho_lo = (ip, true);

    let proof_rho = ip + eps;
    if proof_rho < rho_hi.0 {
        let (lo, hi) = sigma_bounds(proof_rho);
        if let Some(found) = pick(lo, hi).and_then(|sigma| validated(prob, sigma, proof_rho, true))
        {
            return Some(found);
        }
    }
    pick(rho_lo, rho_hi)?;
    let (lo, hi) = sigma_bounds(ip);
    let sigma = pick(lo, hi)?;
    let rho = pick(rho_lo, upper(&[rho_hi, (sigma - ip + 1.0 - eps, true)]))?;
    validated(prob, sigma, rho, false)
}

/// Exact interval engine.
fn find_exact(prob: &FeasibilityProblem) -> Option<ExponentPair> {
    let e = Exact::new(prob);
    let zero = int(0);
    let one = int(1);
    // conditions not involving σ or ρ
    let vals = slacks(&e, &zero, &zero);
    if [1usize, 7, 13, 14].iter().any(|&i| vals[i] < zero) {
        return None;
    }
    let rho_hi = rho_upper(&e);
    let rho_lo = Bound::open(e.ip.clone());

    let validate = |sigma: &BigRational, rho: &BigRational, proof_choice: bool| {
        validated(prob, to_f64(sigma), to_f64(rho), proof_choice)
    };

    let proof_rho = &e.ip + &e.eps;
    let rho_ok = proof_rho > rho_lo.value
        && (proof_rho < rho_hi.value || (proof_rho == rho_hi.value && !rho_hi.strict));
    if rho_ok {
        let (lo, hi) = sigma_bounds(&e, &proof_rho);
        if let Some(found) = pick(&lo, &hi).and_then(|sigma| validate(&sigma, &proof_rho, true)) {
            return Some(found);
        }
    }

    // ρ → 1/p⁺: the coupling becomes σ > 2/p - 1 + ε (strict)
    let _ = pick(&rho_lo, &rho_hi)?;
    let (lo, hi) = sigma_bounds(&e, &e.ip);
    let sigma = pick(&lo, &hi)?;
    let coupling = Bound::open(&sigma - &e.ip + &one - &e.eps);
    let rho = pick(&rho_lo, &tightest_upper(vec![rho_hi, coupling]))?;
    validate(&sigma, &rho, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub n_p: usize,
    pub n_s: usize,
    pub n_r: usize,
    /// Distance kept from every region boundary.
    pub delta: f64,
    pub eps: f64,
    pub s_max: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            n_p: 50,
            n_s: 50,
            n_r: 50,
            delta: 1e-3,
            eps: 2.5e-4,
            s_max: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub spec: SweepSpec,
    pub points: usize,
    pub successes: usize,
    pub proof_choice: usize,
    /// Up to 16 `(p, s, r)` points where no pair was found.
    pub failures: Vec<[f64; 3]>,
}

impl SweepReport {
    pub fn success_rate(&self) -> f64 {
        if self.points == 0 {
            1.0
        } else {
            self.successes as f64 / self.points as f64
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Grid points `(p, s, r)` at distance at least `delta` inside the region.
pub fn sweep_points(spec: &SweepSpec) -> Vec<[f64; 3]> {
    let d = spec.delta;
    let mut out = Vec::with_capacity(spec.n_p * spec.n_s * spec.n_r);
    for p in linspace(1.0 + d, 2.0, spec.n_p) {
        let s_lo = -0.5 + 0.5 / p + d;
        for s in linspace(s_lo, spec.s_max, spec.n_s) {
            let r_lo = (s.abs() + d).max(2.0 / p - 1.0 + d);
            let r_hi = 1.0 + s - d;
            if r_lo > r_hi {
                continue;
            }
            for r in linspace(r_lo, r_hi, spec.n_r) {
                out.push([p, s, r]);
            }
        }
    }
    out
}

/// Runs [`find_sigma_rho`] on every sweep point.
pub fn sweep_exponent_solver(spec: &SweepSpec) -> Result<SweepReport> {
    if !(spec.delta >= 1e-3) {
        return Err(Error::Config(format!(
            "sweep margin must be at least 1e-3, got {}",
            spec.delta
        )));
    }
    let points = sweep_points(spec);
    let results: Vec<(usize, Option<ExponentPair>)> = points
        .par_iter()
        .enumerate()
        .map(|(i, &[p, s, r])| {
            let found = FeasibilityProblem::new(p, s, r, spec.eps)
                .ok()
                .and_then(|prob| find_sigma_rho(&prob));
            (i, found)
        })
        .collect();
    let mut report = SweepReport {
        spec: *spec,
        points: points.len(),
        successes: 0,
        proof_choice: 0,
        failures: Vec::new(),
    };
    for (i, found) in results {
        match found {
            Some(pair) => {
                report.successes += 1;
                report.proof_choice += pair.proof_choice as usize;
            }
            None if report.failures.len() < 16 => report.failures.push(points[i]),
            None => {}
        }
    }
    Ok(report)
}

/// L²-Sobolev scaling indices of the data spaces and their minimizers over
/// the region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    /// `s + 1/2 - 1/p`
    pub sigma_scale: f64,
    /// `r + 1/2 - 1/p`
    pub lambda_scale: f64,
    /// Infimum of `sigma_scale`, `-1/(2p)`.
    pub sigma_min: f64,
    /// Infimum of `lambda_scale` along `s ↓ -1/2 + 1/(2p)`:
    /// `1/p - 1/2` for `p ≤ 5/3`, else `1 - 3/(2p)`.
    pub lambda_min: f64,
}

pub fn scaling_exponents(prob: &FeasibilityProblem) -> Scaling {
    let ip = 1.0 / prob.p;
    Scaling {
        sigma_scale: prob.s + 0.5 - ip,
        lambda_scale: prob.r + 0.5 - ip,
        sigma_min: -0.5 * ip,
        lambda_min: if prob.p <= 5.0 / 3.0 {
            ip - 0.5
        } else {
            1.0 - 1.5 * ip
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewBox {
    pub s_min: f64,
    pub s_max: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for ViewBox {
    fn default() -> Self {
        Self {
            s_min: -1.0,
            s_max: 2.0,
            r_min: -0.5,
            r_max: 3.0,
        }
    }
}

/// One connected piece of a boundary line, as `(s, r)` vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// A boundary line `a·s + b·r = c`.
struct Line {
    label: String,
    a: f64,
    b: f64,
    c: f64,
}

fn in_closure(p: f64, s: f64, r: f64) -> bool {
    let tol = 1e-12;
    s >= -0.5 + 0.5 / p - tol
        && r <= 1.0 + s + tol
        && r >= s.abs() - tol
        && r >= 2.0 / p - 1.0 - tol
}

/// Pieces of the boundary of the closed region in the `(s, r)` plane at
/// fixed `p`. Each line is sampled at `resolution` points across the view
/// box, plus its intersections with the other lines.
pub fn region_boundary(p: f64, resolution: usize, view: &ViewBox) -> Result<Vec<Polyline>> {
    if resolution < 16 {
        return Err(Error::Config(format!(
            "resolution must be at least 16, got {resolution}"
        )));
    }
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::LebesgueIndex(p));
    }
    let s0 = -0.5 + 0.5 / p;
    let r0 = 2.0 / p - 1.0;
    let lines = [
        Line {
            label: format!("s = {s0}"),
            a: 1.0,
            b: 0.0,
            c: s0,
        },
        Line {
            label: "r = 1 + s".into(),
            a: -1.0,
            b: 1.0,
            c: 1.0,
        },
        Line {
            label: "r = s".into(),
            a: -1.0,
            b: 1.0,
            c: 0.0,
        },
        Line {
            label: "r = -s".into(),
            a: 1.0,
            b: 1.0,
            c: 0.0,
        },
        Line {
            label: format!("r = {r0}"),
            a: 0.0,
            b: 1.0,
            c: r0,
        },
    ];
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        let vertical = line.b == 0.0;
        let (lo, hi) = if vertical {
            (view.r_min, view.r_max)
        } else {
            (view.s_min, view.s_max)
        };
        let mut params = linspace(lo, hi, resolution);
        for (j, other) in lines.iter().enumerate() {
            let det = line.a * other.b - line.b * other.a;
            if i == j || det == 0.0 {
                continue;
            }
            let s = (line.c * other.b - line.b * other.c) / det;
            let r = (line.a * other.c - line.c * other.a) / det;
            let t = if vertical { r } else { s };
            if (lo..=hi).contains(&t) {
                params.push(t);
            }
        }
        params.sort_by(f64::total_cmp);
        params.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let mut run: Vec<(f64, f64)> = Vec::new();
        let flush = |run: &mut Vec<(f64, f64)>, out: &mut Vec<Polyline>| {
            if !run.is_empty() {
                out.push(Polyline {
                    label: line.label.clone(),
                    points: std::mem::take(run),
                });
            }
        };
        for t in params {
            let (s, r) = if vertical {
                (line.c, t)
            } else {
                (t, (line.c - line.a * t) / line.b)
            };
            let visible =
                (view.r_min..=view.r_max).contains(&r) && (view.s_min..=view.s_max).contains(&s);
            if visible && in_closure(p, s, r) {
                run.push((s, r));
            } else {
                flush(&mut run, &mut out);
            }
        }
        flush(&mut run, &mut out);
    }
    Ok(out)
}

/// One row of a region scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSample {
    pub s: f64,
    pub r: f64,
    pub admissible: bool,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
}

/// Scans a `resolution × resolution` grid of the view box at fixed `p`.
pub fn region_scan(
    p: f64,
    eps: f64,
    resolution: usize,
    view: &ViewBox,
) -> Result<Vec<RegionSample>> {
    FeasibilityProblem::new(p, 0.0, 0.0, eps)?;
    let ss = linspace(view.s_min, view.s_max, resolution);
    let rs = linspace(view.r_min, view.r_max, resolution);
    Ok(ss
        .par_iter()
        .flat_map_iter(|&s| {
            rs.iter().map(move |&r| {
                let prob = FeasibilityProblem { p, s, r, eps };
                let admissible = check_main(&prob).all();
                let pair = admissible.then(|| find_sigma_rho(&prob)).flatten();
                RegionSample {
                    s,
                    r,
                    admissible,
                    sigma: pair.map(|x| x.sigma),
                    rho: pair.map(|x| x.rho),
                }
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn prob(p: f64, s: f64, r: f64, eps: f64) -> FeasibilityProblem {
        FeasibilityProblem::new(p, s, r, eps).unwrap()
    }

    #[test]
    fn main_examples() {
        assert!(check_main(&prob(2.0, 0.0, 0.5, 0.01)).all());
        assert!(check_main(&prob(1.01, 0.0, 1.0, 0.01)).all());
        let c = check_main(&prob(2.0, -0.3, 0.3, 0.01));
        assert!(!c.all());
        assert!(!c.s_lower);
        assert!(c.r_upper && c.r_abs && c.r_lower);
    }

    #[test]
    fn main_boundaries_are_exact() {
        // equality on a strict condition fails, on a closed one passes
        assert!(!check_main(&prob(2.0, -0.25, 0.5, 0.01)).s_lower);
        assert!(check_main(&prob(2.0, 0.5, 1.5, 0.01)).r_upper);
        assert!(check_main(&prob(2.0, -0.125, 0.125, 0.01)).r_abs);
        assert!(!check_main(&prob(2.0, 0.5, 0.0, 0.01)).r_lower);
    }

    #[test]
    fn problem_validation() {
        assert!(FeasibilityProblem::new(1.0, 0.0, 0.0, 0.01).is_err());
        assert!(FeasibilityProblem::new(2.5, 0.0, 0.0, 0.01).is_err());
        assert!(FeasibilityProblem::new(2.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn solver_examples() {
        let pb = prob(2.0, 0.0, 0.5, 0.01);
        let pair = find_sigma_rho(&pb).unwrap();
        assert!(pair.proof_choice);
        assert!(working_conditions(&pb, pair.sigma, pair.rho, STRICT_MARGIN)
            .iter()
            .all(|&b| b));

        let headline = prob(1.01, 0.0, 1.0, 0.001);
        let pair = find_sigma_rho(&headline).unwrap();
        assert!(1.0 / 1.01 < pair.sigma && pair.sigma < 1.0);
        // the default slack leaves no room for ρ at this p
        assert!(find_sigma_rho(&prob(1.01, 0.0, 1.0, 0.01)).is_none());
    }

    #[test]
    fn failing_r_lower_has_no_pair() {
        // r ≤ 2/p - 1
        for (p, s, r) in [(1.2, 0.5, 0.6), (1.5, 0.2, 0.3), (1.1, 0.8, 0.8)] {
            let pb = prob(p, s, r, 0.001);
            assert!(!check_main(&pb).r_lower);
            assert!(find_sigma_rho(&pb).is_none(), "({p}, {s}, {r})");
        }
    }

    #[test]
    fn scaling_examples() {
        let sc = scaling_exponents(&prob(1.001, 0.0, 1.0, 0.01));
        assert!((sc.sigma_scale + 0.5).abs() < 1e-3);
        assert!((sc.lambda_scale - 0.5).abs() < 1e-3);
        assert!((sc.lambda_min - 0.5).abs() < 1e-3);
        let sc = scaling_exponents(&prob(2.0, 0.37, 0.5, 0.01));
        assert_eq!(sc.sigma_scale, 0.37);
        assert_eq!(sc.lambda_min, 0.25);
    }

    #[test]
    fn boundary_at_p2() {
        let lines = region_boundary(2.0, 64, &ViewBox::default()).unwrap();
        let has = |label: &str| lines.iter().any(|l| l.label == label);
        assert!(
            has("s = -0.25") && has("r = 1 + s") && has("r = s") && has("r = -s") && has("r = 0")
        );
        for l in &lines {
            for &(s, r) in &l.points {
                assert!(in_closure(2.0, s, r));
            }
        }
        let corner = lines.iter().find(|l| l.label == "r = 0").unwrap();
        assert_eq!(corner.points, vec![(0.0, 0.0)]);
        assert!(region_boundary(2.0, 8, &ViewBox::default()).is_err());
    }

    #[test]
    fn boundary_at_p12_contains_the_integrability_line() {
        let lines = region_boundary(1.2, 64, &ViewBox::default()).unwrap();
        let r0 = 2.0 / 1.2 - 1.0;
        let piece = lines
            .iter()
            .find(|l| l.label == format!("r = {r0}"))
            .unwrap();
        assert!(piece.points.len() > 1);
        assert!(piece.points.iter().all(|&(_, r)| (r - r0).abs() < 1e-15));
    }

    #[test]
    fn small_sweep_succeeds() {
        let spec = SweepSpec {
            n_p: 8,
            n_s: 8,
            n_r: 8,
            ..SweepSpec::default()
        };
        let report = sweep_exponent_solver(&spec).unwrap();
        assert_eq!(report.points, 512);
        assert_eq!(report.success_rate(), 1.0, "{:?}", report.failures);
        assert!(sweep_exponent_solver(&SweepSpec {
            delta: 1e-4,
            ..spec
        })
        .is_err());
    }

    proptest! {
        #[test]
        fn returned_pairs_satisfy_everything(p in 1.001f64..=2.0, s in -0.5f64..2.0, r in -0.5f64..3.0, eps in 1e-4f64..0.05) {
            let pb = prob(p, s, r, eps);
            if let Some(pair) = find_sigma_rho(&pb) {
                prop_assert!(1.0 / p < pair.sigma && pair.sigma < 1.0);
                prop_assert!(1.0 / p < pair.rho && pair.rho < 1.0);
                prop_assert!(working_conditions(&pb, pair.sigma, pair.rho, STRICT_MARGIN).iter().all(|&b| b));
            }
        }

        #[test]
        fn region_contains_zero_one(p in 1.0001f64..=2.0) {
            prop_assert!(check_main(&prob(p, 0.0, 1.0, 0.01)).all());
        }

        #[test]
        fn scaling_is_affine(p in 1.01f64..=2.0, s0 in -1.0f64..1.0, ds in -1.0f64..1.0) {
            let a = scaling_exponents(&prob(p, s0, 0.0, 0.01)).sigma_scale;
            let b = scaling_exponents(&prob(p, s0 + ds, 0.0, 0.01)).sigma_scale;
            let c = scaling_exponents(&prob(p, s0 + 2.0 * ds, 0.0, 0.01)).sigma_scale;
            prop_assert!(((c - a) - 2.0 * (b - a)).abs() < 1e-12);
        }
    }
}
