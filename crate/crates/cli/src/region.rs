use anyhow::Result;
use clap::Args;
use dkg_core::feasibility::{
    region_boundary, region_scan, scaling_exponents, sweep_exponent_solver, FeasibilityProblem,
    Scaling, SweepReport, SweepSpec, ViewBox,
};
use dkg_core::io::fmt_f64;
use serde::Serialize;

use crate::config::Resolver;
use crate::output::Output;

#[derive(Debug, Args)]
pub struct RegionArgs {
    /// Lebesgue index in (1, 2].
    #[arg(long)]
    p: Option<f64>,
    /// Grid points per axis of the scan.
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    s_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    s_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r_max: Option<f64>,
    /// Points per axis of the (p, s, r) solver sweep; 0 skips it.
    #[arg(long)]
    sweep_n: Option<usize>,
    /// Distance the sweep keeps from every boundary.
    #[arg(long)]
    sweep_delta: Option<f64>,
    #[arg(long)]
    sweep_eps: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RegionSummary {
    p: f64,
    eps: f64,
    view: ViewBox,
    resolution: usize,
    admissible_points: usize,
    solved_points: usize,
    /// Scaling indices at `(s, r) = (0, 0)`; the minima hold region-wide.
    scaling: Scaling,
    sweep: Option<SweepReport>,
    sweep_success_rate: Option<f64>,
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn region(args: &RegionArgs, r: &mut Resolver, out: &mut Output) -> Result<bool> {
    let p = r.get("p", args.p, 2.0)?;
    let resolution = r.get("resolution", args.resolution, 200)?;
    let eps = r.get("eps", args.eps, FeasibilityProblem::DEFAULT_EPS)?;
    let base = ViewBox::default();
    let view = ViewBox {
        s_min: r.get("s_min", args.s_min, base.s_min)?,
        s_max: r.get("s_max", args.s_max, base.s_max)?,
        r_min: r.get("r_min", args.r_min, base.r_min)?,
        r_max: r.get("r_max", args.r_max, base.r_max)?,
    };
    let sweep_default = SweepSpec::default();
    let sweep_n = r.get("sweep_n", args.sweep_n, sweep_default.n_p)?;
    let sweep = SweepSpec {
        n_p: sweep_n,
        n_s: sweep_n,
        n_r: sweep_n,
        delta: r.get("sweep_delta", args.sweep_delta, sweep_default.delta)?,
        eps: r.get("sweep_eps", args.sweep_eps, sweep_default.eps)?,
        ..sweep_default
    };
    r.finish()?;

    let samples = region_scan(p, eps, resolution, &view)?;
    let rows: Vec<String> = samples
        .iter()
        .map(|x| {
            format!(
                "{},{},{},{},{}",
                fmt_f64(x.s),
                fmt_f64(x.r),
                u8::from(x.admissible),
                opt(x.sigma),
                opt(x.rho)
            )
        })
        .collect();
    out.write_csv("region.csv", "s,r,admissible,sigma,rho", &rows)?;

    let mut rows = Vec::new();
    for (piece, line) in region_boundary(p, resolution, &view)?.iter().enumerate() {
        for (s, r) in &line.points {
            rows.push(format!(
                "{},{piece},{},{}",
                line.label,
                fmt_f64(*s),
                fmt_f64(*r)
            ));
        }
    }
    out.write_csv("boundary.csv", "label,piece,s,r", &rows)?;

    let report = (sweep_n > 0)
        .then(|| sweep_exponent_solver(&sweep))
        .transpose()?;
    let rate = report.as_ref().map(SweepReport::success_rate);
    out.write_json(
        "region_summary.json",
        &RegionSummary {
            p,
            eps,
            view,
            resolution,
            admissible_points: samples.iter().filter(|x| x.admissible).count(),
            solved_points: samples.iter().filter(|x| x.sigma.is_some()).count(),
            scaling: scaling_exponents(&FeasibilityProblem::new(p, 0.0, 0.0, eps)?),
            sweep: report,
            sweep_success_rate: rate,
        },
    )?;
    if let Some(rate) = rate {
        eprintln!("region: sweep success rate {:.4}%", 100.0 * rate);
    }
    Ok(rate.is_none_or(|x| x == 1.0))
}
