//! Acceptance gate. Runs every criterion in sequence so the runtime bounds
//! are measured without contention, prints one line per criterion and
//! fails if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use dkg_core::dkg::DkgParams;
use dkg_core::estimates::{
    check_free_wave_product, check_identities, check_modulation_inequality, check_null_structure,
    estimate_bilinear_constant, random_band_limited, Bilinear, BilinearParams, Distribution,
    EnsembleSpec, ModulationSampler,
};
use dkg_core::evolution::{picard, refine_state, solve, state_distance, SolveConfig};
use dkg_core::feasibility::{
    check_main, find_sigma_rho, scaling_exponents, sweep_exponent_solver, sweep_points,
    working_conditions, FeasibilityProblem, SweepSpec,
};
use dkg_core::presets::SmoothData;
use dkg_core::spectral::{ComplexScalarField, GridSpec};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(id: usize, title: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed < limit;
    let pass = out.pass && in_time;
    println!(
        "criterion {id:>2} {}: {title} | {} | {:.2}s (limit {}s)",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ------------------------------------------------------------------ oracles

/// Lower bound `min(|ξ₁|,|ξ₂|)` against the modulation sum, written out
/// from the characteristic sets directly.
fn modulation_margin(xi1: f64, tau1: f64, xi2: f64, tau2: f64, sign: f64) -> f64 {
    let s1 = (tau1 + xi1).abs();
    let s2 = (tau2 - xi2).abs();
    let s = (tau1 + tau2 + sign * (xi1 + xi2).abs()).abs();
    0.5 * (s + s1 + s2) - xi1.abs().min(xi2.abs())
}

/// The seventeen working conditions in floating point, `(value, strict)`.
fn conditions_f64(p: f64, s: f64, r: f64, eps: f64, sigma: f64, rho: f64) -> [(f64, bool); 17] {
    let ip = 1.0 / p;
    [
        (s + 1.0 - rho - eps, false),
        (s + 1.0 - r, false),
        (2.0 * s + 1.0 - rho - eps, false),
        (2.0 * s + 2.0 - rho - eps - r, false),
        (2.0 * s + sigma + 1.0 - r - ip, true),
        (2.0 * s + sigma, false),
        (s + sigma + 1.0 - r, false),
        (s + 1.0 - r, false),
        (sigma + 1.0 - rho - eps - ip, true),
        (1.0 - eps - rho, false),
        (1.0 - eps - sigma, false),
        (r + 1.0 - sigma - eps - ip, true),
        (1.0 - sigma - eps, false),
        (s + r, false),
        (r - s, false),
        (s + 1.0 - sigma - eps + r, false),
        (-s + 1.0 - sigma - eps + r, false),
    ]
}

/// Space-time coefficients of `u v` with `u = f(x - t)`, `v = g(x + t)` on
/// `L = T_w = 2π`, by direct summation.
fn direct_free_wave_spectrum(
    f: &ComplexScalarField,
    g: &ComplexScalarField,
) -> Vec<Vec<Complex64>> {
    let grid = *f.grid();
    let n = grid.n();
    let dx = grid.length() / n as f64;
    let modes = |h: &ComplexScalarField| -> Vec<(f64, Complex64)> {
        h.coeffs()
            .into_iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(m, c)| (grid.wavenumber(m) as f64, c))
            .collect()
    };
    let (fm, gm) = (modes(f), modes(g));
    let norm = 1.0 / (2.0 * PI).sqrt();
    // uv(x_i, t_j), with t_j = j·dx since N_t = N and T_w = L
    let samples: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            let t = j as f64 * dx;
            (0..n)
                .map(|i| {
                    let x = i as f64 * dx;
                    let u: Complex64 = fm
                        .iter()
                        .map(|&(k, c)| c * Complex64::from_polar(norm, k * (x - t)))
                        .sum();
                    let v: Complex64 = gm
                        .iter()
                        .map(|&(k, c)| c * Complex64::from_polar(norm, k * (x + t)))
                        .sum();
                    u * v
                })
                .collect()
        })
        .collect();
    let twiddle: Vec<Complex64> = (0..n)
        .map(|a| Complex64::from_polar(1.0, -2.0 * PI * a as f64 / n as f64))
        .collect();
    let half = n as i64 / 2;
    // transform in x, then in t; output indexed [k + N/2][q + N/2]
    let in_x: Vec<Vec<Complex64>> = samples
        .iter()
        .map(|row| {
            (0..n)
                .map(|m| {
                    let k = m as i64 - half;
                    row.iter()
                        .enumerate()
                        .map(|(i, v)| v * twiddle[(k * i as i64).rem_euclid(n as i64) as usize])
                        .sum()
                })
                .collect()
        })
        .collect();
    let scale = dx * dx / (2.0 * PI);
    (0..n)
        .map(|m| {
            (0..n)
                .map(|jq| {
                    let q = jq as i64 - half;
                    in_x.iter()
                        .enumerate()
                        .map(|(j, row)| {
                            row[m] * twiddle[(q * j as i64).rem_euclid(n as i64) as usize]
                        })
                        .sum::<Complex64>()
                        * scale
                })
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------- criteria

fn algebraic_identities() -> Outcome {
    let report = check_identities(7, 100_000);
    outcome(
        report.violations == 0 && report.sup_ratio < 1e-15,
        format!("10^5 spinors, max residual {:.3e}", report.sup_ratio),
    )
}

fn null_structure() -> Outcome {
    let ens = EnsembleSpec::new(7, 1000, Distribution::GaussianModes, 0).unwrap();
    let report = check_null_structure(&ens, 64).unwrap();
    // pointwise oracle: βP±ψ and P±ψ' are orthogonal for every sample pair
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pointwise = 0.0f64;
    for _ in 0..1000 {
        let z: Vec<Complex64> = (0..4)
            .map(|_| Complex64::new(rng.random(), rng.random()))
            .collect();
        for s in [1.0, -1.0] {
            let a = (z[0] + s * z[1]) * 0.5;
            let b = (z[2] + s * z[3]) * 0.5;
            // βP±ψ = a(1, -±1), P±ψ' = b(1, ±1)
            let form = b.conj() * a + (b * s).conj() * (-s * a);
            pointwise = pointwise.max(form.norm() / (a.norm() * b.norm()).max(f64::MIN_POSITIVE));
        }
    }
    outcome(
        report.violations == 0 && report.sup_ratio < 1e-12 && pointwise < 1e-12,
        format!(
            "10^3 pairs on N=64, max relative residual {:.3e}",
            report.sup_ratio
        ),
    )
}

fn modulation_inequality() -> Outcome {
    let report = check_modulation_inequality(&ModulationSampler::Uniform {
        seed: 7,
        count: 1_000_000,
        range: 100.0,
    });
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut oracle_violations = 0;
    for _ in 0..100_000 {
        let t: [f64; 4] = std::array::from_fn(|_| rng.random_range(-100.0..=100.0));
        for sign in [1.0, -1.0] {
            let tol = 4.0 * f64::EPSILON * t.iter().map(|v| v.abs()).sum::<f64>();
            if modulation_margin(t[0], t[1], t[2], t[3], sign) < -tol {
                oracle_violations += 1;
            }
        }
    }
    outcome(
        report.violations == 0 && oracle_violations == 0,
        format!(
            "10^6 tuples x 2 signs, {} violations, min slack {:.3e}",
            report.violations,
            report.min_slack.unwrap()
        ),
    )
}

fn free_wave_formula() -> Outcome {
    let grid = GridSpec::new(256, 2.0 * PI).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let f = random_band_limited(grid, &mut rng);
    let g = random_band_limited(grid, &mut rng);
    let report = check_free_wave_product(&f, &g, 2.0 * PI, 1.5).unwrap();

    let direct = direct_free_wave_spectrum(&f, &g);
    let (fc, gc) = (f.coeffs(), g.coeffs());
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for (m, row) in direct.iter().enumerate() {
        let k = m as i64 - 128;
        for (jq, c) in row.iter().enumerate() {
            let q = jq as i64 - 128;
            let expected = if (k - q) % 2 == 0 {
                match (grid.index_of((k - q) / 2), grid.index_of((k + q) / 2)) {
                    (Some(a), Some(b)) => fc[a] * gc[b],
                    _ => Complex64::new(0.0, 0.0),
                }
            } else {
                Complex64::new(0.0, 0.0)
            };
            err = err.max((c - expected).norm());
            scale = scale.max(expected.norm());
        }
    }
    let oracle = err / scale;
    outcome(
        report.max_rel_error < 1e-10 && oracle < 1e-10,
        format!(
            "N=256, max relative error {:.3e} (direct summation {:.3e})",
            report.max_rel_error, oracle
        ),
    )
}

/// Shared run for the conservation and persistence criteria.
struct ConservationRuns {
    drift: [f64; 2],
    projection: f64,
    reality: f64,
}

fn conservation_runs() -> ConservationRuns {
    let grid = GridSpec::new(512, 2.0 * PI).unwrap();
    // concentrated data so the time-stepping error is visible above round-off
    let data = SmoothData {
        amplitude: 2.0,
        concentration: 1000.0,
        carrier: 10,
    };
    let state = data.state(grid).unwrap();
    let params = DkgParams::new(1.0, 1.0, 1.0).unwrap();
    let mut drift = [0.0; 2];
    let mut projection = 0.0f64;
    let mut reality = 0.0f64;
    for (i, dt) in [1e-3, 5e-4].into_iter().enumerate() {
        let traj = solve(&state, &params, &SolveConfig::new(1.0, dt).unwrap()).unwrap();
        drift[i] = traj.charge_drift();
        projection = projection.max(traj.max_projection_residual());
        reality = reality.max(traj.max_reality_residual());
    }
    ConservationRuns {
        drift,
        projection,
        reality,
    }
}

fn charge_conservation(runs: &ConservationRuns) -> Outcome {
    let [coarse, fine] = runs.drift;
    let reduction = coarse / fine;
    outcome(
        coarse < 1e-6 && reduction >= 8.0,
        format!("drift {coarse:.3e} at dt=1e-3, {fine:.3e} at dt=5e-4, reduction {reduction:.1}x"),
    )
}

fn persistence(runs: &ConservationRuns) -> Outcome {
    outcome(
        runs.projection < 1e-10 && runs.reality < 1e-10,
        format!(
            "projection residual {:.3e}, reality residual {:.3e}",
            runs.projection, runs.reality
        ),
    )
}

fn picard_contraction() -> Outcome {
    let grid = GridSpec::new(64, 2.0 * PI).unwrap();
    let data = SmoothData {
        amplitude: 0.1,
        concentration: 8.0,
        carrier: 3,
    };
    let params = DkgParams::new(1.0, 1.0, 1.0).unwrap();
    let dt = 0.005;
    let config = SolveConfig::new(0.1, dt).unwrap();
    let state = data.state(grid).unwrap();
    let result = picard(&state, &params, &config, 8).unwrap();
    let ratios = result.ratios();
    let contracting = ratios.iter().take(5).all(|&q| q <= 0.5) && ratios.len() >= 5;
    let monotone = result.residuals.windows(2).all(|w| w[1] < w[0]);

    let coarse = solve(&state, &params, &config).unwrap();
    let fine_state = data.state(grid.refined(2).unwrap()).unwrap();
    let fine = solve(
        &fine_state,
        &params,
        &SolveConfig::new(0.1, dt / 2.0).unwrap(),
    )
    .unwrap();
    let self_error = state_distance(&refine_state(coarse.last(), 2).unwrap(), fine.last()).unwrap();
    let gap = state_distance(result.trajectory.last(), coarse.last()).unwrap();
    outcome(
        !result.diverged && contracting && monotone && gap <= 10.0 * self_error,
        format!(
            "max ratio {:.3}, fixed point vs solve {gap:.3e}, self-convergence {self_error:.3e}",
            ratios.iter().take(5).copied().fold(0.0, f64::max)
        ),
    )
}

fn feasibility_region() -> Outcome {
    // dyadic grid, so the floating predicate below is exact
    let step = 1.0 / 64.0;
    let mut mismatches = 0;
    for i in 0..200 {
        let s = -1.5 + step * i as f64;
        for j in 0..200 {
            let r = -1.0 + step * j as f64;
            let prob = FeasibilityProblem::new(2.0, s, r, 0.01).unwrap();
            let expected = s > -0.25 && r > 0.0 && s.abs() <= r && r <= 1.0 + s;
            if check_main(&prob).all() != expected {
                mismatches += 1;
            }
        }
    }
    let headline = FeasibilityProblem::new(1.01, 0.0, 1.0, 0.001).unwrap();
    let pair = find_sigma_rho(&headline);
    let valid = pair.is_some_and(|e| {
        working_conditions(&headline, e.sigma, e.rho, 1e-12)
            .iter()
            .all(|&b| b)
            && 1.0 / 1.01 < e.sigma.min(e.rho)
            && e.sigma.max(e.rho) < 1.0
    });
    outcome(
        mismatches == 0 && check_main(&headline).all() && valid,
        format!(
            "{mismatches} mismatches on 200x200, (1.01,0,1) pair {:?}",
            pair.map(|e| (e.sigma, e.rho))
        ),
    )
}

fn reduction_sweep() -> Outcome {
    let spec = SweepSpec::default();
    let report = sweep_exponent_solver(&spec).unwrap();
    let mut invalid = 0usize;
    for [p, s, r] in sweep_points(&spec) {
        let prob = FeasibilityProblem::new(p, s, r, spec.eps).unwrap();
        let Some(pair) = find_sigma_rho(&prob) else {
            continue;
        };
        let exact_ok = working_conditions(&prob, pair.sigma, pair.rho, 1e-12)
            .iter()
            .all(|&b| b);
        let float_ok = conditions_f64(p, s, r, spec.eps, pair.sigma, pair.rho)
            .iter()
            .all(|&(v, strict)| if strict { v > 1e-12 } else { v >= -1e-12 });
        let inside = 1.0 / p < pair.sigma.min(pair.rho) && pair.sigma.max(pair.rho) < 1.0;
        if !(exact_ok && float_ok && inside) {
            invalid += 1;
        }
    }
    outcome(
        report.successes == report.points && report.points > 0 && invalid == 0,
        format!(
            "{}/{} points solved, {invalid} failed revalidation",
            report.successes, report.points
        ),
    )
}

fn scaling_limits() -> Outcome {
    let prob = FeasibilityProblem::new(1.001, 0.0, 1.0, 0.01).unwrap();
    let sc = scaling_exponents(&prob);
    let (ds, dl) = ((sc.sigma_scale + 0.5).abs(), (sc.lambda_scale - 0.5).abs());
    outcome(
        ds < 1e-3 && dl < 1e-3,
        format!(
            "sigma_scale {:.6}, lambda_scale {:.6} at p=1.001",
            sc.sigma_scale, sc.lambda_scale
        ),
    )
}

fn bilinear_sweeps() -> Outcome {
    let ens = EnsembleSpec::new(7, 200, Distribution::GaussianModes, 0).unwrap();
    let params = BilinearParams {
        p: 2.0,
        s: 0.0,
        r: 0.5,
        sigma: 0.6,
        rho: 0.6,
        eps: 0.01,
    };
    let mut worst = f64::NEG_INFINITY;
    let mut pass = params.admissible();
    for which in Bilinear::ALL {
        for report in estimate_bilinear_constant(which, &params, &ens, &[64, 128, 256]).unwrap() {
            pass &=
                report.sup_ratio.is_finite() && report.sup_ratio > 0.0 && report.growth.len() == 2;
            worst = report.growth.iter().copied().fold(worst, f64::max);
        }
    }
    outcome(
        pass && worst < 1.5,
        format!("8 sweeps (4 estimates x 2 cone signs), largest growth per doubling {worst:.3}"),
    )
}

fn main() -> std::process::ExitCode {
    let sec = Duration::from_secs;
    let mut results = Vec::new();
    results.push(run(1, "algebraic identities", sec(5), algebraic_identities));
    results.push(run(2, "null structure", sec(10), null_structure));
    results.push(run(
        3,
        "modulation inequality",
        sec(10),
        modulation_inequality,
    ));
    results.push(run(
        4,
        "free-wave product formula",
        sec(30),
        free_wave_formula,
    ));

    // criterion 6 inspects the trajectories produced by criterion 5
    let mut runs = None;
    results.push(run(5, "charge conservation", sec(120), || {
        charge_conservation(runs.insert(conservation_runs()))
    }));
    results.push(run(
        6,
        "projection and reality persistence",
        sec(120),
        || persistence(runs.as_ref().expect("criterion 5 ran")),
    ));

    results.push(run(7, "Picard contraction", sec(60), picard_contraction));
    results.push(run(8, "feasibility region", sec(10), feasibility_region));
    results.push(run(9, "sigma-rho sweep", sec(60), reduction_sweep));
    results.push(run(10, "scaling limits", sec(1), scaling_limits));
    results.push(run(11, "bilinear ratio sweeps", sec(300), bilinear_sweeps));

    let passed = results.iter().filter(|&&b| b).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        std::process::ExitCode::SUCCESS
    } else {
        std::process::ExitCode::FAILURE
    }
}
