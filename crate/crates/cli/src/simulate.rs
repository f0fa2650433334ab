use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use dkg_core::dkg::{DkgParams, HalfWaveState};
use dkg_core::evolution::{self, Scheme, SolveConfig, Trajectory};
use dkg_core::io::{fmt_f64, StateJson};
use dkg_core::presets::SmoothData;
use dkg_core::spectral::GridSpec;
use dkg_core::Error;
use serde::{Deserialize, Serialize};

use crate::config::{Resolver, Word};
use crate::output::Output;

/// Grid, physics and initial data shared by `simulate` and `picard`.
#[derive(Debug, Args)]
pub struct SystemArgs {
    /// Grid points (power of two).
    #[arg(long = "N")]
    n: Option<usize>,
    /// Torus length; defaults to 2π.
    #[arg(long = "L")]
    length: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    t_final: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Coupling g.
    #[arg(long = "g")]
    coupling: Option<f64>,
    /// Dirac mass M.
    #[arg(long = "M")]
    dirac_mass: Option<f64>,
    /// Klein-Gordon mass m.
    #[arg(long = "m")]
    kg_mass: Option<f64>,
    /// exponential-rk4 or strang.
    #[arg(long)]
    scheme: Option<String>,
    /// 2/3-rule dealiasing (true or false).
    #[arg(long)]
    dealias: Option<bool>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    concentration: Option<f64>,
    #[arg(long)]
    carrier: Option<i64>,
    /// Initial state as a snapshot JSON file; replaces the smooth preset.
    #[arg(long)]
    input: Option<PathBuf>,
}

struct System {
    initial: HalfWaveState,
    params: DkgParams,
    config: SolveConfig,
}

fn resolve_system(
    args: &SystemArgs,
    r: &mut Resolver,
    out: &mut Output,
    defaults: (usize, f64, f64),
) -> Result<System> {
    let n = r.get("N", args.n, defaults.0)?;
    let length = r.get("L", args.length, 2.0 * std::f64::consts::PI)?;
    let t_final = r.get("T", args.t_final, defaults.1)?;
    let dt = r.get("dt", args.dt, defaults.2)?;
    let coupling = r.get("g", args.coupling, 1.0)?;
    let dirac_mass = r.get("M", args.dirac_mass, 1.0)?;
    let kg_mass = r.get("m", args.kg_mass, 1.0)?;
    let scheme: Scheme = r
        .get(
            "scheme",
            args.scheme.clone().map(Word),
            Word("exponential-rk4".into()),
        )?
        .0
        .parse()?;
    let dealias = r.get("dealias", args.dealias, true)?;
    let preset = SmoothData::default();
    let data = SmoothData {
        amplitude: r.get("amplitude", args.amplitude, preset.amplitude)?,
        concentration: r.get("concentration", args.concentration, preset.concentration)?,
        carrier: r.get("carrier", args.carrier, preset.carrier)?,
    };
    let input = r.get_opt(
        "input",
        args.input.as_ref().map(|p| Word(p.display().to_string())),
    )?;
    let params = DkgParams::new(dirac_mass, kg_mass, coupling)?;
    let config = SolveConfig::new(t_final, dt)?
        .with_scheme(scheme)
        .with_dealias(dealias);
    let initial = match input {
        Some(Word(path)) => {
            let path = PathBuf::from(path);
            out.add_input(&path);
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let snap: Snapshot = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            snap.state.to_state()?
        }
        None => data.state(GridSpec::new(n, length)?)?,
    };
    Ok(System {
        initial,
        params,
        config,
    })
}

/// Smallest divisor `d` of `steps` with `steps / d ≤ max_count`.
pub fn stride(steps: usize, max_count: usize) -> usize {
    (1..=steps.max(1))
        .find(|d| steps % d == 0 && steps / d <= max_count)
        .unwrap_or(steps.max(1))
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Keep every k-th step for diagnostics (default: at most 1000 rows).
    #[arg(long)]
    record_every: Option<usize>,
    /// Write every k-th recorded state as a snapshot (default: at most 32
    /// intervals).
    #[arg(long)]
    snapshot_every: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub index: usize,
    pub state: StateJson,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub grid: GridSpec,
    pub params: DkgParams,
    pub config: SolveConfig,
    /// Spacing of consecutive snapshots.
    pub snapshot_dt: f64,
    pub snapshots: Vec<String>,
    pub times: Vec<f64>,
    pub charge_drift: f64,
    pub max_projection_residual: f64,
    pub max_reality_residual: f64,
    /// Last finite time when the run blew up.
    pub blow_up: Option<f64>,
}

fn write_trajectory(
    out: &mut Output,
    traj: &Trajectory,
    snapshot_every: usize,
    blow_up: Option<f64>,
) -> Result<()> {
    let rows: Vec<String> = traj
        .diagnostics()
        .iter()
        .map(|d| {
            format!(
                "{},{},{},{}",
                fmt_f64(d.t),
                fmt_f64(d.charge),
                fmt_f64(d.phi_energy),
                fmt_f64(d.max_coeff)
            )
        })
        .collect();
    out.write_csv("diagnostics.csv", "t,charge,phi_energy,max_coeff", &rows)?;
    let mut names = Vec::new();
    let mut times = Vec::new();
    for (index, state) in traj.states.iter().enumerate().step_by(snapshot_every) {
        let name = format!("snapshots/snap_{index:06}.json");
        out.write_json(
            &name,
            &Snapshot {
                index,
                state: StateJson::from_state(state),
            },
        )?;
        names.push(name);
        times.push(state.t);
    }
    let summary = TrajectorySummary {
        grid: *traj.grid(),
        params: traj.params,
        config: traj.config,
        snapshot_dt: traj.sample_dt() * snapshot_every as f64,
        snapshots: names,
        times,
        charge_drift: traj.charge_drift(),
        max_projection_residual: traj.max_projection_residual(),
        max_reality_residual: traj.max_reality_residual(),
        blow_up,
    };
    out.write_json("trajectory.json", &summary)
}

pub fn simulate(args: &SimulateArgs, r: &mut Resolver, out: &mut Output) -> Result<bool> {
    let sys = resolve_system(&args.system, r, out, (256, 1.0, 1e-3))?;
    let steps = sys.config.steps();
    let record_every = r.get("record_every", args.record_every, stride(steps, 1000))?;
    let config = sys.config.with_record_every(record_every)?;
    let recorded = steps / record_every;
    let snapshot_every = r.get("snapshot_every", args.snapshot_every, stride(recorded, 32))?;
    if snapshot_every == 0 || recorded % snapshot_every != 0 {
        bail!("snapshot_every = {snapshot_every} must divide the {recorded} recorded intervals");
    }
    r.finish()?;
    match evolution::solve(&sys.initial, &sys.params, &config) {
        Ok(traj) => {
            write_trajectory(out, &traj, snapshot_every, None)?;
            eprintln!(
                "simulate: {} states, charge drift {:.3e}",
                traj.states.len(),
                traj.charge_drift()
            );
            Ok(true)
        }
        Err(Error::BlowUp {
            last_valid_time,
            partial,
        }) => {
            write_trajectory(out, &partial, 1, Some(last_valid_time))?;
            bail!("numerical blow-up after t = {last_valid_time}; partial trajectory written")
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Args)]
pub struct PicardArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Number of Picard iterations.
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Debug, Serialize)]
struct PicardSummary {
    params: DkgParams,
    config: SolveConfig,
    residuals: Vec<f64>,
    ratios: Vec<f64>,
    diverged: bool,
    /// Distance between the last iterate and the time stepper at `T`.
    distance_to_solve: Option<f64>,
}

pub fn picard(args: &PicardArgs, r: &mut Resolver, out: &mut Output) -> Result<bool> {
    let sys = resolve_system(&args.system, r, out, (64, 0.1, 0.005))?;
    let iterations = r.get("iterations", args.iterations, 8)?;
    r.finish()?;
    let res = evolution::picard(&sys.initial, &sys.params, &sys.config, iterations)?;
    let ratios = res.ratios();
    let rows: Vec<String> = res
        .residuals
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let ratio = if i == 0 {
                String::new()
            } else {
                fmt_f64(ratios[i - 1])
            };
            format!("{},{},{}", i + 1, fmt_f64(*v), ratio)
        })
        .collect();
    out.write_csv("picard.csv", "iteration,residual,ratio", &rows)?;
    let distance_to_solve = match evolution::solve(&sys.initial, &sys.params, &sys.config) {
        Ok(traj) => Some(evolution::state_distance(
            res.trajectory.last(),
            traj.last(),
        )?),
        Err(Error::BlowUp { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    out.write_json(
        "picard.json",
        &PicardSummary {
            params: sys.params,
            config: sys.config,
            residuals: res.residuals.clone(),
            ratios,
            diverged: res.diverged,
            distance_to_solve,
        },
    )?;
    eprintln!(
        "picard: {} iterations, diverged = {}",
        res.residuals.len(),
        res.diverged
    );
    Ok(true)
}
