use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use dkg_core::estimates::{
    check_embeddings, check_free_wave_ensemble, check_identities, check_modulation_inequality,
    check_null_structure, check_product_law, check_transversal_product, estimate_bilinear_constant,
    Bilinear, BilinearParams, Distribution, EnsembleSpec, ModulationSampler, ProductLawParams,
    RatioReport,
};
use serde::Serialize;
use serde_json::Value;

use crate::config::{List, Resolver, Word};
use crate::output::Output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Exact,
    Statistical,
    All,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Suite as ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Option<Suite>,
    /// Trials per resolution in the statistical suite.
    #[arg(long)]
    count: Option<usize>,
    /// Comma-separated grid sizes for ratio sweeps.
    #[arg(long)]
    resolutions: Option<List>,
    /// gaussian-modes, band-limited or single-mode.
    #[arg(long)]
    distribution: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Random tuples for the modulation inequality.
    #[arg(long)]
    samples: Option<usize>,
    /// Directory of earlier reports; sup ratios are compared against it.
    #[arg(long)]
    baseline: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    name: String,
    file: String,
    exact: bool,
    violations: u64,
    sup_ratio: f64,
    max_growth: Option<f64>,
    growth_flag: bool,
    admissible: Option<bool>,
    /// `None` without a baseline or when the baseline lacks this report.
    baseline_match: Option<bool>,
}

#[derive(Debug, Serialize)]
struct Summary {
    suite: Suite,
    exact_violations: u64,
    passed: bool,
    reports: Vec<SummaryRow>,
}

fn exact_suite(seed: u64, samples: usize, p: f64) -> Result<Vec<RatioReport>> {
    let ensemble = EnsembleSpec::new(seed, 1000, Distribution::GaussianModes, 0)?;
    Ok(vec![
        check_identities(seed, 100_000),
        check_null_structure(&ensemble, 64)?,
        check_modulation_inequality(&ModulationSampler::Uniform {
            seed,
            count: samples,
            range: 100.0,
        }),
        {
            let mut grid =
                check_modulation_inequality(&ModulationSampler::IntegerGrid { radius: 8 });
            grid.name = "modulation-inequality-lattice".into();
            grid
        },
        check_free_wave_ensemble(
            &EnsembleSpec {
                count: 4,
                ..ensemble
            },
            256,
            p,
        )?,
    ])
}

fn statistical_suite(
    ensemble: &EnsembleSpec,
    resolutions: &[usize],
    params: &BilinearParams,
) -> Result<Vec<RatioReport>> {
    let mut reports = Vec::new();
    for which in Bilinear::ALL {
        reports.extend(estimate_bilinear_constant(
            which,
            params,
            ensemble,
            resolutions,
        )?);
    }
    for eps in [params.eps, 0.0] {
        for mut rep in check_embeddings(2.0, eps, ensemble, resolutions)? {
            if eps == 0.0 {
                rep.name.push_str("-borderline");
            }
            reports.push(rep);
        }
    }
    if params.sigma > 1.0 / params.p {
        reports.push(check_transversal_product(
            params.sigma,
            params.p,
            ensemble,
            resolutions,
        )?);
    }
    reports.extend(check_product_law(
        &ProductLawParams::default(),
        ensemble,
        resolutions,
    )?);
    Ok(reports)
}

/// Compares per-resolution sup ratios with a stored report of the same name.
fn matches_baseline(dir: &Path, file: &str, report: &RatioReport) -> Result<Option<bool>> {
    let path = dir.join(file);
    if !path.exists() {
        return Ok(None);
    }
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let doc: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let stored: Vec<f64> = doc["per_resolution"]
        .as_array()
        .map(|rows| {
            rows.iter()
                .filter_map(|r| r["sup_ratio"].as_f64())
                .collect()
        })
        .unwrap_or_default();
    let now: Vec<f64> = report.per_resolution.iter().map(|r| r.sup_ratio).collect();
    Ok(Some(
        stored.len() == now.len()
            && stored
                .iter()
                .zip(&now)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs())),
    ))
}

pub fn verify(args: &VerifyArgs, r: &mut Resolver, seed: u64, out: &mut Output) -> Result<bool> {
    let suite = r.get("suite", args.suite, Suite::All)?;
    let count = r.get("count", args.count, 100)?;
    let resolutions = r.get(
        "resolutions",
        args.resolutions.clone(),
        List(vec![64, 128, 256]),
    )?;
    let distribution: Distribution = r
        .get(
            "distribution",
            args.distribution.clone().map(Word),
            Word("gaussian-modes".into()),
        )?
        .0
        .parse()?;
    let params = BilinearParams {
        p: r.get("p", args.p, 2.0)?,
        s: r.get("s", args.s, 0.0)?,
        r: r.get("r", args.r, 0.5)?,
        sigma: r.get("sigma", args.sigma, 0.6)?,
        rho: r.get("rho", args.rho, 0.6)?,
        eps: r.get("eps", args.eps, 0.01)?,
    };
    let samples = r.get("samples", args.samples, 1_000_000)?;
    let baseline = r.get_opt(
        "baseline",
        args.baseline
            .as_ref()
            .map(|p| Word(p.display().to_string())),
    )?;
    r.finish()?;
    if let Some(Word(dir)) = &baseline {
        out.add_input(Path::new(dir));
    }
    let ensemble = EnsembleSpec::new(seed, count, distribution, 0)?;
    if !(params.p > 1.0 && params.p <= 2.0) {
        bail!("p must lie in (1, 2], got {}", params.p);
    }

    let mut reports = Vec::new();
    if matches!(suite, Suite::Exact | Suite::All) {
        reports.extend(exact_suite(seed, samples, params.p)?);
    }
    if matches!(suite, Suite::Statistical | Suite::All) {
        reports.extend(statistical_suite(&ensemble, &resolutions.0, &params)?);
    }

    let mut rows = Vec::new();
    for rep in &reports {
        let file = format!("reports/{}.json", file_stem(&rep.name));
        out.write_json(&file, rep)?;
        let baseline_match = match &baseline {
            Some(Word(dir)) => matches_baseline(Path::new(dir), &file, rep)?,
            None => None,
        };
        rows.push(SummaryRow {
            name: rep.name.clone(),
            file,
            exact: rep.exact,
            violations: rep.violations,
            sup_ratio: rep.sup_ratio,
            max_growth: (!rep.growth.is_empty())
                .then(|| rep.growth.iter().copied().fold(f64::MIN, f64::max)),
            growth_flag: rep.growth_flag,
            admissible: rep.admissible,
            baseline_match,
        });
        eprintln!(
            "verify: {:<32} sup {:.6e} violations {}",
            rep.name, rep.sup_ratio, rep.violations
        );
    }
    let exact_violations: u64 = reports
        .iter()
        .filter(|r| r.exact)
        .map(|r| r.violations)
        .sum();
    out.write_json(
        "verify_summary.json",
        &Summary {
            suite,
            exact_violations,
            passed: exact_violations == 0,
            reports: rows,
        },
    )?;
    Ok(exact_violations == 0)
}

/// Report names carry cone signs; file names spell them out.
fn file_stem(name: &str) -> String {
    name.replace('+', "-plus")
        .replace("--", "-minus")
        .trim_end_matches('-')
        .to_string()
        + if name.ends_with('-') { "-minus" } else { "" }
}
