//! Configuration, run orchestration and artifact emission behind the
//! `rigidflow` binary.
//!
//! Every command writes into the configured output directory and returns
//! a JSON summary; [`exit_code`] maps failures to process exit codes.

mod config;
mod verify;

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

pub use config::{
    apply_override, BodyConfig, EulerConfig, InitialConfig, RingConfig, RunConfig, ShapeKind, SolverKind, SweepConfig, SweepStudy,
    VerifyConfig, ViscousConfig, OUTPUT_ENV,
};
pub use verify::{verify, PairRecord, VerifyReport};

use crate::euler::{self, EulerContext, EulerState, EulerTrajectory, VortexField};
use crate::forms::{standard_rule, FormsContext};
use crate::geometry::{truncation_field, QuadratureRule};
use crate::io::{csv_line, euler_checkpoint, loglog_svg, viscous_checkpoint, write_checkpoint};
use crate::kirchhoff::KirchhoffContext;
use crate::motion::reconstruct_world_frame;
use crate::studies::{
    self, check_decreasing_grid, pooled_constants, rate_report, strictly_decreasing, RateReport, RateSweep, StudyConfig,
    StudyKind, RATE_CSV_HEADER,
};
use crate::viscous::{assemble_system, build_basis_with, project, GalerkinBasis, GalerkinSystem, Trajectory, ViscousSolver};
use crate::{Error, Mat6, Result, Vec3};

/// Process exit code of a result: 0 success, 2 configuration, 3 solver,
/// 4 energy ledger.
pub fn exit_code(result: &Result<Value>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) => match e.root() {
            Error::Config(_) | Error::InvalidInput(_) | Error::DegenerateGeometry(_) => 2,
            Error::Ledger { .. } => 4,
            _ => 3,
        },
    }
}

/// Serializes `value` deterministically (sorted keys, shortest floats).
pub fn to_json(value: &impl Serialize) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::InvalidInput(format!("json: {e}")))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::InvalidInput(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(contents)?;
    f.flush()?;
    Ok(())
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.resolved_output();
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn mat6(m: &Mat6) -> Vec<Vec<f64>> {
    (0..6).map(|i| (0..6).map(|j| m[(i, j)]).collect()).collect()
}

fn vec3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Body, basis, assembled system and projected initial coefficients.
pub struct ViscousSetup {
    pub kctx: Arc<KirchhoffContext>,
    pub basis: GalerkinBasis,
    pub rule: QuadratureRule,
    pub sys: GalerkinSystem,
    pub g0: DVector<f64>,
}

/// Assembles the Galerkin system of `cfg` and projects its initial data.
pub fn viscous_setup(cfg: &RunConfig) -> Result<ViscousSetup> {
    let spec = cfg.body_spec()?;
    let kctx = Arc::new(KirchhoffContext::new(&spec)?);
    let v = &cfg.viscous;
    let opts = v.basis_options();
    let basis = build_basis_with(kctx.clone(), v.basis_size, &opts)?;
    let rule = standard_rule(&spec, &opts.rule)?;
    let ctx = FormsContext::new(
        rule.clone(),
        v.alpha.alpha(v.nu),
        v.nu,
        kctx.mass(),
        kctx.inertia_tensor(),
        truncation_field(&spec, v.truncation_radius)?,
    )?;
    let sys = assemble_system(&basis, &ctx)?;
    let u0 = cfg.initial.data().field(&kctx, cfg.initial.support)?;
    let g0 = project(&sys, &basis, &rule, &u0);
    Ok(ViscousSetup { kctx, basis, rule, sys, g0 })
}

/// Inviscid context and initial state of `cfg`.
pub fn euler_setup(cfg: &RunConfig) -> Result<(EulerContext, EulerState)> {
    let spec = cfg.body_spec()?;
    let kctx = Arc::new(KirchhoffContext::new(&spec)?);
    let ctx = EulerContext::new(kctx, cfg.euler.options())?;
    let field = ring_field(cfg)?;
    let state = EulerState::new(field, Vec3::from(cfg.initial.linear), Vec3::from(cfg.initial.angular));
    Ok((ctx, state))
}

fn ring_field(cfg: &RunConfig) -> Result<VortexField> {
    let r = cfg.initial.ring.as_ref().ok_or_else(|| Error::Config("field `initial.ring`: required by the inviscid solver".into()))?;
    VortexField::ring(Vec3::from(r.center), Vec3::from(r.axis), r.radius, r.circulation, r.particles)
}

#[derive(Serialize)]
struct RunSummary {
    solver: SolverKind,
    seed: u64,
    status: String,
    t_end: f64,
    dt: f64,
    samples: usize,
    initial_energy: f64,
    final_energy: f64,
    final_linear: [f64; 3],
    final_angular: [f64; 3],
    diagnostics: Value,
    artifacts: Vec<String>,
}

/// Integrates the configured system and writes `trajectory.rgf`,
/// `ledger.csv`, `motion.csv` and `summary.json`.
pub fn run(cfg: &RunConfig) -> Result<Value> {
    let dir = output_dir(cfg)?;
    let (summary, failure) = match cfg.solver {
        SolverKind::Viscous | SolverKind::FixedBody => run_viscous(cfg, &dir)?,
        SolverKind::Euler => run_euler(cfg, &dir)?,
    };
    let text = to_json(&summary)?;
    write_file(&dir.join("summary.json"), text.as_bytes())?;
    match failure {
        Some(e) => Err(e),
        None => serde_json::to_value(&summary).map_err(|e| Error::InvalidInput(e.to_string())),
    }
}

const ARTIFACTS: [&str; 4] = ["trajectory.rgf", "ledger.csv", "motion.csv", "summary.json"];

fn run_viscous(cfg: &RunConfig, dir: &Path) -> Result<(RunSummary, Option<Error>)> {
    let setup = viscous_setup(cfg)?;
    let fixed = cfg.solver == SolverKind::FixedBody;
    let (sys, g0) = if fixed {
        let rc = setup.sys.tensors.rigid_count;
        (setup.sys.fixed_body()?, setup.g0.rows(rc, setup.g0.len() - rc).into_owned())
    } else {
        (setup.sys, setup.g0)
    };
    let traj = ViscousSolver::new(&sys, cfg.viscous.nu, cfg.step_options())?.run(&g0, cfg.t_end)?;
    write_viscous_artifacts(&sys, &traj, dir)?;
    let last = traj.coeffs.last().expect("nonempty trajectory");
    let (l, r) = sys.rigid_velocity(last);
    let ledger = &traj.ledger;
    let summary = RunSummary {
        solver: cfg.solver,
        seed: cfg.seed,
        status: "ok".into(),
        t_end: cfg.t_end,
        dt: cfg.dt,
        samples: traj.times.len(),
        initial_energy: ledger.initial_energy,
        final_energy: ledger.entries.last().map_or(ledger.initial_energy, |e| e.energy),
        final_linear: vec3(&l),
        final_angular: vec3(&r),
        diagnostics: json!({
            "nu": cfg.viscous.nu,
            "alpha": traj.alpha,
            "basis_size": sys.n(),
            "halvings": traj.halvings,
            "min_relative_slack": ledger.min_relative_slack(),
            "energy_monotone": ledger.energy_monotone(0.0),
        }),
        artifacts: ARTIFACTS.iter().map(|s| s.to_string()).collect(),
    };
    Ok((summary, None))
}

fn write_viscous_artifacts(sys: &GalerkinSystem, traj: &Trajectory, dir: &Path) -> Result<()> {
    let (header, payload) = viscous_checkpoint(traj);
    let mut f = BufWriter::new(File::create(dir.join("trajectory.rgf"))?);
    write_checkpoint(&mut f, &header, &payload)?;
    f.flush()?;
    let mut csv = String::from("t,energy,viscous_rate,friction_rate,viscous_integral,friction_integral,slack\n");
    for e in &traj.ledger.entries {
        csv.push_str(&csv_line(&[e.t, e.energy, e.viscous_rate, e.friction_rate, e.viscous_integral, e.friction_integral, e.slack]));
    }
    write_file(&dir.join("ledger.csv"), csv.as_bytes())?;
    let motion = reconstruct_world_frame(&traj.times, &traj.rigid(sys))?;
    let mut buf = Vec::new();
    motion.write_csv(&mut buf)?;
    write_file(&dir.join("motion.csv"), &buf)
}

fn run_euler(cfg: &RunConfig, dir: &Path) -> Result<(RunSummary, Option<Error>)> {
    let (ctx, state) = euler_setup(cfg)?;
    let traj = euler::run(&ctx, &state, cfg.dt, cfg.steps(), false)?;
    write_euler_artifacts(&traj, dir)?;
    let drift = traj.max_energy_drift();
    let bc = traj.max_bc_residual();
    let e0 = traj.initial_energy();
    let worst = traj.samples.iter().max_by(|a, b| (a.energy - e0).abs().total_cmp(&(b.energy - e0).abs())).expect("nonempty");
    let failure = if drift > cfg.euler.energy_tol {
        Some(Error::Ledger { t: worst.t, slack: -drift })
    } else if bc > cfg.euler.bc_tol {
        Some(Error::Solver { solver: "euler", detail: format!("boundary residual {bc:e} exceeds {:e}", cfg.euler.bc_tol) })
    } else {
        None
    };
    let last = traj.samples.last().expect("nonempty trajectory");
    let summary = RunSummary {
        solver: cfg.solver,
        seed: cfg.seed,
        status: failure.as_ref().map_or("ok".into(), |e| e.to_string()),
        t_end: cfg.t_end,
        dt: cfg.dt,
        samples: traj.samples.len(),
        initial_energy: e0,
        final_energy: last.energy,
        final_linear: vec3(&last.linear),
        final_angular: vec3(&last.angular),
        diagnostics: json!({
            "particles": state.field.particles.len(),
            "epsilon": state.field.epsilon,
            "max_energy_drift": drift,
            "max_bc_residual": bc,
            "reflections": traj.reflections(),
        }),
        artifacts: ARTIFACTS.iter().map(|s| s.to_string()).collect(),
    };
    Ok((summary, failure))
}

fn write_euler_artifacts(traj: &EulerTrajectory, dir: &Path) -> Result<()> {
    let (header, payload) = euler_checkpoint(traj);
    let mut f = BufWriter::new(File::create(dir.join("trajectory.rgf"))?);
    write_checkpoint(&mut f, &header, &payload)?;
    f.flush()?;
    let e0 = traj.initial_energy();
    let mut csv = String::from("t,energy,relative_drift,bc_residual\n");
    for s in &traj.samples {
        csv.push_str(&csv_line(&[s.t, s.energy, (s.energy - e0) / e0, s.bc_residual]));
    }
    write_file(&dir.join("ledger.csv"), csv.as_bytes())?;
    let motion = reconstruct_world_frame(&traj.times(), &traj.rigid())?;
    let mut buf = Vec::new();
    motion.write_csv(&mut buf)?;
    write_file(&dir.join("motion.csv"), &buf)
}

/// Runs the configured study. Rate sweeps flush one row per finished
/// point to `points.csv`; the coordinator writes `rates.csv`,
/// `summary.json` and `rates.svg` once every point succeeded.
pub fn sweep(cfg: &RunConfig) -> Result<Value> {
    let dir = output_dir(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.sweep.workers)
        .build()
        .map_err(|e| Error::Config(format!("field `sweep.workers`: {e}")))?;
    pool.install(|| match cfg.sweep.study {
        SweepStudy::Rate => rate_sweep(cfg, &dir),
        SweepStudy::Inertia => inertia_sweep(cfg, &dir),
    })
}

fn rate_sweep(cfg: &RunConfig, dir: &Path) -> Result<Value> {
    let grid = &cfg.sweep.nu_grid;
    check_decreasing_grid(grid)?;
    let setup = viscous_setup(cfg)?;
    let study = StudyConfig { t_end: cfg.t_end, step: cfg.step_options() };
    let reference = studies::inviscid_reference(&setup.sys, &setup.g0, &study)?;
    let sweeps = cfg
        .sweep
        .alphas
        .iter()
        .map(|rule| RateSweep::new(&setup.sys, &setup.g0, &reference, rule, &study))
        .collect::<Result<Vec<_>>>()?;
    let points_dir = dir.join("points");
    fs::create_dir_all(&points_dir)?;
    let mut rows = OpenOptions::new().create(true).write(true).truncate(true).open(dir.join("points.csv"))?;
    writeln!(rows, "rule,{RATE_CSV_HEADER}")?;
    rows.flush()?;
    let rows = Mutex::new(rows);
    let tasks: Vec<(usize, usize)> = (0..sweeps.len()).flat_map(|j| (0..grid.len()).map(move |i| (j, i))).collect();
    let results: Vec<Result<studies::RatePoint>> = tasks
        .par_iter()
        .map(|&(j, i)| {
            let p = sweeps[j].point(grid[i])?;
            write_file(&points_dir.join(format!("rule{j}_nu{i}.json")), to_json(&p)?.as_bytes())?;
            let mut f = rows.lock().expect("row writer");
            write!(f, "{j},{}", studies::rate_row(&p))?;
            f.flush()?;
            Ok(p)
        })
        .collect();
    let mut points = Vec::with_capacity(results.len());
    for r in results {
        points.push(r?);
    }
    let reports: Vec<RateReport> = cfg
        .sweep
        .alphas
        .iter()
        .enumerate()
        .map(|(j, rule)| rate_report(rule, grid, points[j * grid.len()..(j + 1) * grid.len()].to_vec()))
        .collect();
    let mut csv = format!("rule,{RATE_CSV_HEADER}\n");
    for (j, rep) in reports.iter().enumerate() {
        for p in &rep.points {
            csv.push_str(&format!("{j},{}", studies::rate_row(p)));
        }
    }
    write_file(&dir.join("rates.csv"), csv.as_bytes())?;
    let pooled = if grid.len() >= 2 {
        let series: Vec<(Vec<f64>, Vec<f64>)> =
            reports.iter().map(|r| (grid.clone(), r.points.iter().map(|p| p.w_linf_h).collect())).collect();
        pooled_constants(&series).ok().map(|(slope, constants)| {
            json!({ "slope": slope, "constants_increasing": constants.windows(2).all(|w| w[1] > w[0]), "constants": constants })
        })
    } else {
        None
    };
    let summary = json!({
        "study": "rate",
        "seed": cfg.seed,
        "t_end": cfg.t_end,
        "dt": cfg.dt,
        "grid": grid,
        "slope": reports[0].linf_fit.as_ref().map(|f| f.slope),
        "reports": reports,
        "body_h1_strictly_decreasing": reports.iter().map(|r| strictly_decreasing(&r.points.iter().map(|p| p.body_h1).collect::<Vec<_>>())).collect::<Vec<_>>(),
        "pooled": pooled,
    });
    write_file(&dir.join("summary.json"), to_json(&summary)?.as_bytes())?;
    if cfg.sweep.plot && grid.len() >= 2 {
        let series: Vec<(String, Vec<f64>)> =
            reports.iter().map(|r| (format!("alpha {}", r.alpha_rule), r.points.iter().map(|p| p.w_linf_h).collect())).collect();
        let note = reports
            .iter()
            .map(|r| format!("alpha {}: slope {}", r.alpha_rule, r.linf_fit.as_ref().map_or("n/a".into(), |f| format!("{:.3}", f.slope))))
            .collect::<Vec<_>>()
            .join("; ");
        write_file(&dir.join("rates.svg"), loglog_svg("sup-in-time energy distance to the inviscid run", "nu", grid, &series, &note).as_bytes())?;
    }
    Ok(summary)
}

fn inertia_sweep(cfg: &RunConfig, dir: &Path) -> Result<Value> {
    let sigmas = &cfg.sweep.sigma_grid;
    let report = match cfg.sweep.system {
        StudyKind::Viscous => {
            let setup = viscous_setup(cfg)?;
            let study = StudyConfig { t_end: cfg.t_end, step: cfg.step_options() };
            studies::infinite_inertia_viscous(&setup.sys, &setup.g0, cfg.viscous.nu, sigmas, &study)?
        }
        StudyKind::Euler => {
            let spec = cfg.body_spec()?;
            studies::infinite_inertia_euler(&spec, &cfg.euler.options(), &ring_field(cfg)?, sigmas, cfg.dt, cfg.steps())?
        }
    };
    let points_dir = dir.join("points");
    fs::create_dir_all(&points_dir)?;
    for (i, p) in report.points.iter().enumerate() {
        write_file(&points_dir.join(format!("sigma{i}.json")), to_json(p)?.as_bytes())?;
    }
    write_file(&dir.join("inertia.csv"), report.to_csv().as_bytes())?;
    let summary = json!({ "study": "inertia", "seed": cfg.seed, "t_end": cfg.t_end, "dt": cfg.dt, "report": report });
    write_file(&dir.join("summary.json"), to_json(&summary)?.as_bytes())?;
    if cfg.sweep.plot && sigmas.len() >= 2 {
        let body: Vec<f64> = report.points.iter().map(|p| if report.kind == StudyKind::Viscous { p.body_h1 } else { p.body_sup }).collect();
        let series = vec![
            ("body velocity".to_string(), body),
            ("fluid distance".to_string(), report.points.iter().map(|p| p.fluid_distance).collect()),
        ];
        let note = report.body_fit.as_ref().map_or("".into(), |f| format!("body slope {:.3}", f.slope));
        write_file(&dir.join("inertia.svg"), loglog_svg("infinite-inertia study", "sigma", sigmas, &series, &note).as_bytes())?;
    }
    Ok(summary)
}

/// `ℳ₁`, `ℳ₂` and `ℳ` of the configured body, written to
/// `added_mass.json` and returned.
pub fn added_mass(cfg: &RunConfig) -> Result<Value> {
    let dir = output_dir(cfg)?;
    let spec = cfg.body_spec()?;
    let kctx = KirchhoffContext::new(&spec)?;
    let am = &kctx.added_mass;
    let summary = json!({
        "path": kctx.path,
        "panels": kctx.bem.as_ref().map(|b| b.surface.panel_count()),
        "mass": kctx.mass(),
        "m1": mat6(&am.m1),
        "m2": mat6(&am.m2),
        "total": mat6(&am.total),
    });
    write_file(&dir.join("added_mass.json"), to_json(&summary)?.as_bytes())?;
    Ok(summary)
}
