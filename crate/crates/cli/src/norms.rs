use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use dkg_core::bourgain::{
    spacetime_spectrum, xsb_norm_components, Component, NormReport, PhaseKind, PhaseSpec, Taper,
};
use dkg_core::evolution::Trajectory;
use dkg_core::io::fmt_f64;
use dkg_core::Sign;
use serde::Serialize;

use crate::config::{Resolver, Word};
use crate::output::Output;
use crate::simulate::{Snapshot, TrajectorySummary};

const COMPONENTS: [&str; 4] = ["psi-plus", "psi-minus", "phi-plus", "phi-minus"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Line,
    Cone,
}

#[derive(Debug, Args)]
pub struct NormsArgs {
    /// Output directory of an earlier `simulate` run.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// psi-plus, psi-minus, phi-plus, phi-minus or all.
    #[arg(long)]
    component: Option<String>,
    /// line (τ ± ξ) or cone (τ ± |ξ|).
    #[arg(long)]
    kind: Option<String>,
    /// + or -; the default pairs each component with its own sign.
    #[arg(long, allow_hyphen_values = true)]
    sign: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    l: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    /// none or smooth-bump.
    #[arg(long)]
    taper: Option<String>,
}

#[derive(Debug, Serialize)]
struct NormsSummary {
    trajectory: String,
    reports: Vec<NormReport>,
}

fn parse_sign(raw: &str) -> Result<Sign> {
    match raw {
        "+" | "plus" => Ok(Sign::Plus),
        "-" | "minus" => Ok(Sign::Minus),
        other => bail!("unknown sign `{other}`, expected + or -"),
    }
}

fn own_sign(c: Component) -> Sign {
    match c {
        Component::PsiPlus | Component::PhiPlus => Sign::Plus,
        Component::PsiMinus | Component::PhiMinus => Sign::Minus,
    }
}

/// Rebuilds the trajectory from its snapshots. Stored states are spaced by
/// `snapshot_dt`, so `record_every` is rescaled to match.
fn load(dir: &Path, out: &mut Output) -> Result<Trajectory> {
    let path = dir.join("trajectory.json");
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let summary: TrajectorySummary =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    out.add_input(&path);
    let mut states = Vec::with_capacity(summary.snapshots.len());
    for name in &summary.snapshots {
        let path = dir.join(name);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        let snap: Snapshot =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        states.push(snap.state.to_state()?);
    }
    let mut config = summary.config;
    let step = config.dt * config.record_every as f64;
    let stride = (summary.snapshot_dt / step).round();
    if !(stride >= 1.0 && (stride * step - summary.snapshot_dt).abs() <= 1e-9 * summary.snapshot_dt)
    {
        bail!(
            "snapshot spacing {} is not a multiple of the step {step}",
            summary.snapshot_dt
        );
    }
    config.record_every *= stride as usize;
    Ok(Trajectory {
        states,
        config,
        params: summary.params,
    })
}

pub fn norms(args: &NormsArgs, r: &mut Resolver, out: &mut Output) -> Result<bool> {
    let dir = r
        .get_opt(
            "trajectory",
            args.trajectory
                .as_ref()
                .map(|p| Word(p.display().to_string())),
        )?
        .ok_or_else(|| anyhow!("--trajectory is required"))?;
    let component = r.get(
        "component",
        args.component.clone().map(Word),
        Word("all".into()),
    )?;
    let kind = r.get("kind", args.kind.clone().map(Word), Word("line".into()))?;
    let sign = r.get_opt("sign", args.sign.clone().map(Word))?;
    let l = r.get("l", args.l, 0.0)?;
    let b = r.get("b", args.b, 0.6)?;
    let p = r.get("p", args.p, 2.0)?;
    let taper: Taper = r
        .get("taper", args.taper.clone().map(Word), Word("none".into()))?
        .0
        .parse()?;
    r.finish()?;

    let kind = match <Kind as ValueEnum>::from_str(&kind.0, false).map_err(|e| anyhow!(e))? {
        Kind::Line => PhaseKind::Line,
        Kind::Cone => PhaseKind::Cone,
    };
    let sign = sign.map(|w| parse_sign(&w.0)).transpose()?;
    let components: Vec<Component> = if component.0 == "all" {
        COMPONENTS
            .iter()
            .map(|c| c.parse())
            .collect::<Result<_, _>>()?
    } else {
        vec![component.0.parse()?]
    };

    let traj = load(Path::new(&dir.0), out)?;
    let mut reports = Vec::new();
    for c in components {
        let specs = spacetime_spectrum(&traj, c, taper)?;
        let phase = PhaseSpec::new(kind, sign.unwrap_or(own_sign(c)), l, b, p)?;
        let refs: Vec<_> = specs.iter().collect();
        let first = &specs[0];
        reports.push(NormReport {
            component: c,
            phase,
            value: xsb_norm_components(&refs, &phase)?,
            n: first.grid().n(),
            length: first.grid().length(),
            n_t: first.n_t(),
            window: first.window(),
            taper,
        });
    }
    let rows: Vec<String> = reports
        .iter()
        .map(|x| {
            format!(
                "{},{},{},{},{},{},{},{}",
                COMPONENTS[x.component as usize],
                if x.phase.kind == PhaseKind::Line {
                    "line"
                } else {
                    "cone"
                },
                if x.phase.sign == Sign::Plus { "+" } else { "-" },
                fmt_f64(x.phase.l),
                fmt_f64(x.phase.b),
                fmt_f64(x.phase.p),
                x.n_t,
                fmt_f64(x.value)
            )
        })
        .collect();
    out.write_csv("norms.csv", "component,kind,sign,l,b,p,n_t,value", &rows)?;
    out.write_json(
        "norms.json",
        &NormsSummary {
            trajectory: dir.0.clone(),
            reports,
        },
    )?;
    Ok(true)
}
