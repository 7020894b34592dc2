//! Study harnesses: the inviscid limit along a ν grid, convergence of the
//! body velocity in H¹(0,T), and the infinite-inertia limits of both
//! systems.
//!
//! The inviscid reference of the ν sweeps is the ν = 0 Galerkin run on
//! the same basis and from the same coefficients, so the measured
//! difference isolates the viscous effect from the spatial discretization.

mod fit;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use fit::{fit_loglog, fit_rate, nonincreasing_within, pooled_constants, strictly_decreasing, AlphaRule, SlopeFit};

use crate::euler::{self, EulerContext, EulerOptions, EulerTrajectory, VortexField};
use crate::geometry::{gauss_legendre_on, quadrature_angular, RigidBodySpec};
use crate::io::csv_line;
use crate::kirchhoff::KirchhoffContext;
use crate::viscous::{GalerkinSystem, StepOptions, Trajectory, ViscousSolver};
use crate::{Error, Result, Vec3, Vec6};

/// Tolerance of the monotonicity checks between consecutive grid points.
pub const MONOTONE_TOL: f64 = 0.02;
/// Agreement required between norms at full and halved time sampling.
pub const SAMPLING_TOL: f64 = 0.01;

/// Time horizon and stepping of every run in a study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub t_end: f64,
    pub step: StepOptions,
}

/// `∫ f dt` by the trapezoid rule on arbitrary nodes.
pub fn trapezoid(times: &[f64], f: &[f64]) -> f64 {
    times.windows(2).zip(f.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}

/// Second-order three-point derivative on arbitrary nodes.
pub fn fd_derivative(times: &[f64], v: &[Vec6]) -> Vec<Vec6> {
    let n = times.len();
    if n < 3 {
        return vec![Vec6::zeros(); n];
    }
    let three = |i: usize, j: usize, k: usize, at: usize| {
        let (t0, t1, t2) = (times[i], times[j], times[k]);
        let x = times[at];
        let c0 = ((x - t1) + (x - t2)) / ((t0 - t1) * (t0 - t2));
        let c1 = ((x - t0) + (x - t2)) / ((t1 - t0) * (t1 - t2));
        let c2 = ((x - t0) + (x - t1)) / ((t2 - t0) * (t2 - t1));
        v[i] * c0 + v[j] * c1 + v[k] * c2
    };
    (0..n)
        .map(|i| match i {
            0 => three(0, 1, 2, 0),
            i if i == n - 1 => three(n - 3, n - 2, n - 1, n - 1),
            i => three(i - 1, i, i + 1, i),
        })
        .collect()
}

/// `(‖δ‖_{L²(0,T)}, ‖δ'‖_{L²(0,T)})` with the FD derivative.
pub fn h1_parts(times: &[f64], v: &[Vec6]) -> (f64, f64) {
    let d = fd_derivative(times, v);
    let l2 = trapezoid(times, &v.iter().map(|x| x.norm_squared()).collect::<Vec<_>>()).sqrt();
    let dl2 = trapezoid(times, &d.iter().map(|x| x.norm_squared()).collect::<Vec<_>>()).sqrt();
    (l2, dl2)
}

fn stride2<T: Clone>(v: &[T]) -> Vec<T> {
    let mut out: Vec<T> = v.iter().step_by(2).cloned().collect();
    if (v.len() - 1) % 2 == 1 {
        out.push(v[v.len() - 1].clone());
    }
    out
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn vec6(l: &Vec3, r: &Vec3) -> Vec6 {
    Vec6::new(l.x, l.y, l.z, r.x, r.y, r.z)
}

fn check_aligned(a: &[f64], b: &[f64]) -> Result<()> {
    let scale = a.last().copied().unwrap_or(1.0).abs().max(1.0);
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-12 * scale) {
        return Err(Error::InvalidInput(format!(
            "trajectories are not time-aligned ({} vs {} samples)",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Rejects empty, nonpositive or non-decreasing ν grids.
pub fn check_decreasing_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || !strictly_decreasing(grid) || grid.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput(format!("ν grid must be nonempty, positive and strictly decreasing, got {grid:?}")));
    }
    Ok(())
}

fn quad(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x))
}

/// Body velocity samples with the right-hand side of the added-mass
/// equation at each sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodySeries {
    pub times: Vec<f64>,
    pub rigid: Vec<Vec6>,
    pub rates: Option<Vec<Vec6>>,
}

impl BodySeries {
    pub fn viscous(sys: &GalerkinSystem, traj: &Trajectory) -> Result<Self> {
        let rigid = traj.rigid(sys).iter().map(|(l, r)| vec6(l, r)).collect();
        let rates = traj
            .coeffs
            .iter()
            .map(|g| sys.body_rate_from_added_mass(g, traj.nu).map(|(l, r)| vec6(&l, &r)))
            .collect::<Result<Vec<_>>>()?;
        Ok(BodySeries { times: traj.times.clone(), rigid, rates: Some(rates) })
    }

    pub fn euler(ctx: &EulerContext, traj: &EulerTrajectory) -> Self {
        let rigid = traj.samples.iter().map(|s| vec6(&s.linear, &s.angular)).collect();
        let rates = if traj.fixed_body {
            vec![Vec6::zeros(); traj.states.len()]
        } else {
            traj.states.par_iter().map(|s| ctx.body_rate(s)).collect()
        };
        BodySeries { times: traj.times(), rigid, rates: Some(rates) }
    }
}

/// One grid point of the ν sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub nu: f64,
    pub alpha: f64,
    /// `‖w‖_{L∞(0,T;ℋ)}`.
    pub w_linf_h: f64,
    /// `ν^{1/2}‖w‖_{L²(0,T;H¹(ℱ₀))}`.
    pub w_h1: f64,
    /// `(αν)^{1/2}‖w − w_𝒮‖_{L²(0,T;L²(∂𝒮₀))}`.
    pub w_slip: f64,
    /// `‖(ℓ,r) − (ℓ^E,r^E)‖_{H¹(0,T)}`.
    pub body_h1: f64,
    /// `ν^{1/2}‖u‖_{L²(0,T;H¹(ℱ₀))}`.
    pub u_h1: f64,
    /// `(αν)^{1/2}‖u − u_𝒮‖_{L²(0,T;L²(∂𝒮₀))}`.
    pub u_slip: f64,
    /// Largest relative change of the norms under halved time sampling.
    pub sampling_rel: f64,
    pub min_relative_slack: f64,
}

/// Output of [`inviscid_limit_study`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub alpha_rule: String,
    pub grid: Vec<f64>,
    pub points: Vec<RatePoint>,
    /// Fit of `‖w‖_{L∞ℋ}` against ν (target slope 3/4).
    pub linf_fit: Option<SlopeFit>,
    /// Fit of `ν^{1/2}‖w‖_{L²H¹}` against ν (target slope 3/4).
    pub h1_fit: Option<SlopeFit>,
    /// Fit of the body H¹ error against ν.
    pub body_fit: Option<SlopeFit>,
    /// `‖w‖_{L∞ℋ}` strictly decreasing along the grid.
    pub linf_strictly_decreasing: bool,
    /// Every norm nonincreasing within [`MONOTONE_TOL`].
    pub monotone_within_tol: bool,
    /// Byproduct norms of `u` nonincreasing within [`MONOTONE_TOL`].
    pub byproducts_decreasing: bool,
    pub sampling_max_rel: f64,
    pub sampling_ok: bool,
}

pub const RATE_CSV_HEADER: &str = "nu,alpha,w_linf_h,w_h1,w_slip,body_h1,u_h1,u_slip,sampling_rel,min_relative_slack";

impl RateReport {
    /// One row per grid point under [`RATE_CSV_HEADER`].
    pub fn to_csv(&self) -> String {
        let mut s = String::from(RATE_CSV_HEADER);
        s.push('\n');
        for p in &self.points {
            s.push_str(&rate_row(p));
        }
        s
    }
}

/// CSV row of one grid point.
pub fn rate_row(p: &RatePoint) -> String {
    csv_line(&[p.nu, p.alpha, p.w_linf_h, p.w_h1, p.w_slip, p.body_h1, p.u_h1, p.u_slip, p.sampling_rel, p.min_relative_slack])
}

/// The ν = 0 run used as the inviscid reference.
pub fn inviscid_reference(sys: &GalerkinSystem, g0: &DVector<f64>, cfg: &StudyConfig) -> Result<Trajectory> {
    ViscousSolver::new(sys, 0.0, cfg.step.clone())?.run(g0, cfg.t_end)
}

struct Norms {
    linf: f64,
    h1: f64,
    slip: f64,
    body: f64,
    u_h1: f64,
    u_slip: f64,
}

fn sweep_norms(sys: &GalerkinSystem, traj: &Trajectory, reference: &Trajectory, reference_body: &BodySeries, nu: f64) -> Norms {
    let t = &sys.tensors;
    let h1m = &t.gram + &t.gram_grad;
    let times = &traj.times;
    let diffs: Vec<DVector<f64>> = traj.coeffs.iter().zip(&reference.coeffs).map(|(a, b)| a - b).collect();
    let linf = diffs.iter().map(|d| quad(&sys.mass_matrix, d).max(0.0).sqrt()).fold(0.0, f64::max);
    let h1 = trapezoid(times, &diffs.iter().map(|d| quad(&h1m, d)).collect::<Vec<_>>()).max(0.0).sqrt();
    let slip = trapezoid(times, &diffs.iter().map(|d| -quad(&t.a_boundary, d)).collect::<Vec<_>>()).max(0.0).sqrt();
    let u_h1 = trapezoid(times, &traj.coeffs.iter().map(|g| quad(&h1m, g)).collect::<Vec<_>>()).max(0.0).sqrt();
    let u_slip = trapezoid(times, &traj.coeffs.iter().map(|g| -quad(&t.a_boundary, g)).collect::<Vec<_>>()).max(0.0).sqrt();
    let delta: Vec<Vec6> = traj
        .rigid(sys)
        .iter()
        .zip(&reference_body.rigid)
        .map(|((l, r), e)| vec6(l, r) - e)
        .collect();
    let (a, b) = h1_parts(times, &delta);
    let an = (sys.alpha * nu).sqrt();
    Norms { linf, h1: nu.sqrt() * h1, slip: an * slip, body: (a * a + b * b).sqrt(), u_h1: nu.sqrt() * u_h1, u_slip: an * u_slip }
}

fn subsample(traj: &Trajectory) -> Trajectory {
    Trajectory { times: stride2(&traj.times), coeffs: stride2(&traj.coeffs), ..traj.clone() }
}

/// Shared state of a ν sweep: the inviscid reference at full and halved
/// time sampling. Each grid point is evaluated independently.
pub struct RateSweep<'a> {
    sys: &'a GalerkinSystem,
    g0: &'a DVector<f64>,
    reference: &'a Trajectory,
    ref_body: BodySeries,
    ref_coarse: Trajectory,
    ref_body_coarse: BodySeries,
    rule: AlphaRule,
    cfg: StudyConfig,
}

impl<'a> RateSweep<'a> {
    pub fn new(
        sys: &'a GalerkinSystem,
        g0: &'a DVector<f64>,
        reference: &'a Trajectory,
        rule: &AlphaRule,
        cfg: &StudyConfig,
    ) -> Result<Self> {
        let ref_body = BodySeries::viscous(sys, reference)?;
        let ref_body_coarse = BodySeries { times: stride2(&ref_body.times), rigid: stride2(&ref_body.rigid), rates: None };
        Ok(RateSweep {
            sys,
            g0,
            reference,
            ref_coarse: subsample(reference),
            ref_body,
            ref_body_coarse,
            rule: *rule,
            cfg: cfg.clone(),
        })
    }

    /// Viscous run at `nu` with friction `rule(ν)`, measured against the
    /// reference. Errors carry the grid point.
    pub fn point(&self, nu: f64) -> Result<RatePoint> {
        let alpha = self.rule.alpha(nu);
        let run = || -> Result<(GalerkinSystem, Trajectory)> {
            let s = self.sys.with_alpha(alpha)?;
            let traj = ViscousSolver::new(&s, nu, self.cfg.step.clone())?.run(self.g0, self.cfg.t_end)?;
            check_aligned(&traj.times, &self.reference.times)?;
            Ok((s, traj))
        };
        let (s, traj) = run().map_err(|e| Error::Study { param: nu, source: Box::new(e) })?;
        let fine = sweep_norms(&s, &traj, self.reference, &self.ref_body, nu);
        let coarse = sweep_norms(&s, &subsample(&traj), &self.ref_coarse, &self.ref_body_coarse, nu);
        let sampling_rel = [
            rel_diff(fine.linf, coarse.linf),
            rel_diff(fine.h1, coarse.h1),
            rel_diff(fine.slip, coarse.slip),
            rel_diff(fine.body, coarse.body),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        Ok(RatePoint {
            nu,
            alpha,
            w_linf_h: fine.linf,
            w_h1: fine.h1,
            w_slip: fine.slip,
            body_h1: fine.body,
            u_h1: fine.u_h1,
            u_slip: fine.u_slip,
            sampling_rel,
            min_relative_slack: traj.ledger.min_relative_slack(),
        })
    }
}

/// Viscous runs at each ν against the shared inviscid reference. `sys`
/// carries the body and basis; its friction is replaced by `rule(ν)`.
pub fn inviscid_limit_study(
    sys: &GalerkinSystem,
    g0: &DVector<f64>,
    reference: &Trajectory,
    grid: &[f64],
    rule: &AlphaRule,
    cfg: &StudyConfig,
) -> Result<RateReport> {
    check_decreasing_grid(grid)?;
    let sweep = RateSweep::new(sys, g0, reference, rule, cfg)?;
    let points = grid.par_iter().map(|&nu| sweep.point(nu)).collect::<Result<Vec<_>>>()?;
    Ok(rate_report(rule, grid, points))
}

/// Fits and flags for a set of grid points.
pub fn rate_report(rule: &AlphaRule, grid: &[f64], points: Vec<RatePoint>) -> RateReport {
    let col = |f: fn(&RatePoint) -> f64| points.iter().map(f).collect::<Vec<_>>();
    let (linf, h1, slip, body) = (col(|p| p.w_linf_h), col(|p| p.w_h1), col(|p| p.w_slip), col(|p| p.body_h1));
    let fit = |y: &[f64]| if grid.len() >= 2 { fit_rate(grid, y).ok() } else { None };
    let sampling_max_rel = points.iter().map(|p| p.sampling_rel).fold(0.0, f64::max);
    RateReport {
        alpha_rule: rule.to_string(),
        grid: grid.to_vec(),
        linf_fit: fit(&linf),
        h1_fit: fit(&h1),
        body_fit: fit(&body),
        linf_strictly_decreasing: strictly_decreasing(&linf),
        monotone_within_tol: [&linf, &h1, &slip, &body].iter().all(|v| nonincreasing_within(v, MONOTONE_TOL)),
        byproducts_decreasing: nonincreasing_within(&col(|p| p.u_h1), MONOTONE_TOL)
            && nonincreasing_within(&col(|p| p.u_slip), MONOTONE_TOL),
        sampling_max_rel,
        sampling_ok: sampling_max_rel <= SAMPLING_TOL,
        points,
    }
}

/// One run of the body H¹ comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyH1Point {
    pub param: f64,
    /// `‖δ‖_{L²(0,T)}`, `δ = (ℓ,r) − (ℓ^E,r^E)`.
    pub l2: f64,
    /// `‖δ'‖_{L²(0,T)}` with the FD derivative.
    pub derivative_fd: f64,
    /// `‖δ'‖_{L²(0,T)}` from the difference of the added-mass right-hand sides.
    pub derivative_rhs: Option<f64>,
    pub h1: f64,
    /// `‖δ'_FD − δ'_RHS‖_{L²} / ‖δ'_RHS‖_{L²}`.
    pub discrepancy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyH1Report {
    pub points: Vec<BodyH1Point>,
    pub strictly_decreasing: bool,
    pub max_discrepancy: Option<f64>,
}

pub const BODY_CSV_HEADER: &str = "param,l2,derivative_fd,derivative_rhs,h1,discrepancy";

impl BodyH1Report {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(BODY_CSV_HEADER);
        s.push('\n');
        for p in &self.points {
            s.push_str(&csv_line(&[
                p.param,
                p.l2,
                p.derivative_fd,
                p.derivative_rhs.unwrap_or(f64::NAN),
                p.h1,
                p.discrepancy.unwrap_or(f64::NAN),
            ]));
        }
        s
    }
}

/// Discrete `‖(ℓ,r) − (ℓ^E,r^E)‖_{H¹(0,T)}` of each run against the reference.
pub fn body_h1_convergence(params: &[f64], runs: &[BodySeries], reference: &BodySeries) -> Result<BodyH1Report> {
    if params.len() != runs.len() {
        return Err(Error::InvalidInput("one parameter per run is required".into()));
    }
    let mut points = Vec::with_capacity(runs.len());
    for (&param, run) in params.iter().zip(runs) {
        check_aligned(&run.times, &reference.times)?;
        let delta: Vec<Vec6> = run.rigid.iter().zip(&reference.rigid).map(|(a, b)| a - b).collect();
        let (l2, derivative_fd) = h1_parts(&run.times, &delta);
        let (derivative_rhs, discrepancy) = match (&run.rates, &reference.rates) {
            (Some(a), Some(b)) => {
                let d: Vec<Vec6> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                let fd = fd_derivative(&run.times, &delta);
                let nd = trapezoid(&run.times, &d.iter().map(|x| x.norm_squared()).collect::<Vec<_>>()).sqrt();
                let err = trapezoid(
                    &run.times,
                    &fd.iter().zip(&d).map(|(x, y)| (x - y).norm_squared()).collect::<Vec<_>>(),
                )
                .sqrt();
                (Some(nd), Some(if nd > 0.0 { err / nd } else { err }))
            }
            _ => (None, None),
        };
        points.push(BodyH1Point {
            param,
            l2,
            derivative_fd,
            derivative_rhs,
            h1: (l2 * l2 + derivative_fd * derivative_fd).sqrt(),
            discrepancy,
        });
    }
    let h1: Vec<f64> = points.iter().map(|p| p.h1).collect();
    let max_discrepancy = points.iter().filter_map(|p| p.discrepancy).reduce(f64::max);
    Ok(BodyH1Report { strictly_decreasing: strictly_decreasing(&h1), points, max_discrepancy })
}

/// Which system an infinite-inertia study runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    Viscous,
    Euler,
}

/// One σ of an infinite-inertia study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InertiaPoint {
    pub sigma: f64,
    /// `‖(ℓ,r)‖_{H¹(0,T)}`.
    pub body_h1: f64,
    /// `max_t |(ℓ,r)|`.
    pub body_sup: f64,
    /// `max_t |(ℓ,r)'|`.
    pub rate_sup: f64,
    /// `‖u − u_fixed‖_{L²(0,T;L²(ℱ₀∩B(0,2a)))}`.
    pub fluid_distance: f64,
    /// The same norms at halved time sampling, relative change.
    pub sampling_rel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InertiaReport {
    pub kind: StudyKind,
    pub points: Vec<InertiaPoint>,
    /// Body-velocity norms nonincreasing within [`MONOTONE_TOL`].
    pub body_monotone: bool,
    /// Body-velocity norm strictly decreasing.
    pub body_strictly_decreasing: bool,
    pub distance_monotone: bool,
    /// Least ledger slack (viscous) of the fixed-body reference; energy
    /// drift (Euler) of the fixed-body reference.
    pub fixed_reference_check: f64,
    /// Empirical log-log slope of the body norm in σ.
    pub body_fit: Option<SlopeFit>,
    pub sampling_max_rel: f64,
}

pub const INERTIA_CSV_HEADER: &str = "sigma,body_h1,body_sup,rate_sup,fluid_distance,sampling_rel";

impl InertiaReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(INERTIA_CSV_HEADER);
        s.push('\n');
        for p in &self.points {
            s.push_str(&csv_line(&[p.sigma, p.body_h1, p.body_sup, p.rate_sup, p.fluid_distance, p.sampling_rel]));
        }
        s
    }

    /// Body norm used for the monotonicity flags: H¹ for the viscous
    /// system, the sup of `|(ℓ,r)|` and `|(ℓ,r)'|` for the Euler system.
    fn finish(kind: StudyKind, points: Vec<InertiaPoint>, fixed_reference_check: f64) -> Self {
        let col = |f: fn(&InertiaPoint) -> f64| points.iter().map(f).collect::<Vec<_>>();
        let sig = col(|p| p.sigma);
        let (body, dist) = match kind {
            StudyKind::Viscous => (col(|p| p.body_h1), col(|p| p.fluid_distance)),
            StudyKind::Euler => (col(|p| p.body_sup), col(|p| p.fluid_distance)),
        };
        let rate = col(|p| p.rate_sup);
        let body_monotone =
            nonincreasing_within(&body, MONOTONE_TOL) && (kind == StudyKind::Viscous || nonincreasing_within(&rate, MONOTONE_TOL));
        let positive = body.iter().all(|v| *v > 0.0);
        InertiaReport {
            kind,
            body_monotone,
            body_strictly_decreasing: strictly_decreasing(&body),
            distance_monotone: nonincreasing_within(&dist, MONOTONE_TOL),
            fixed_reference_check,
            body_fit: if sig.len() >= 2 && positive { fit_loglog(&sig, &body).ok() } else { None },
            sampling_max_rel: points.iter().map(|p| p.sampling_rel).fold(0.0, f64::max),
            points,
        }
    }
}

fn check_sigma_grid(sigmas: &[f64]) -> Result<()> {
    if sigmas.is_empty() || sigmas.iter().any(|s| !(*s > 0.0)) || !sigmas.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::InvalidInput(format!("σ grid must be nonempty, positive and increasing, got {sigmas:?}")));
    }
    Ok(())
}

struct InertiaNorms {
    h1: f64,
    sup: f64,
    rate_sup: f64,
    dist: f64,
}

fn inertia_norms(times: &[f64], body: &BodySeries, dist2: &[f64]) -> InertiaNorms {
    let (a, b) = h1_parts(times, &body.rigid);
    InertiaNorms {
        h1: (a * a + b * b).sqrt(),
        sup: body.rigid.iter().map(|v| v.norm()).fold(0.0, f64::max),
        rate_sup: body.rates.as_ref().map_or(0.0, |r| r.iter().map(|v| v.norm()).fold(0.0, f64::max)),
        dist: trapezoid(times, dist2).max(0.0).sqrt(),
    }
}

fn inertia_point(sigma: f64, times: &[f64], body: &BodySeries, dist2: &[f64]) -> InertiaPoint {
    let fine = inertia_norms(times, body, dist2);
    let cb = BodySeries { times: stride2(times), rigid: stride2(&body.rigid), rates: body.rates.as_ref().map(|r| stride2(r)) };
    let coarse = inertia_norms(&cb.times, &cb, &stride2(dist2));
    let sampling_rel = [rel_diff(fine.h1, coarse.h1), rel_diff(fine.dist, coarse.dist)].into_iter().fold(0.0, f64::max);
    InertiaPoint { sigma, body_h1: fine.h1, body_sup: fine.sup, rate_sup: fine.rate_sup, fluid_distance: fine.dist, sampling_rel }
}

/// Viscous infinite-inertia study: the body density is scaled by each σ,
/// the rigid coefficients of `g0` are zeroed (`ℓ₀ = r₀ = 0`) and the
/// fluid is compared with the run on the fixed-body basis.
pub fn infinite_inertia_viscous(
    sys: &GalerkinSystem,
    g0: &DVector<f64>,
    nu: f64,
    sigmas: &[f64],
    cfg: &StudyConfig,
) -> Result<InertiaReport> {
    check_sigma_grid(sigmas)?;
    let rc = sys.tensors.rigid_count;
    let mut g = g0.clone();
    g.rows_mut(0, rc).fill(0.0);
    let fixed = sys.fixed_body()?;
    let gf = g0.rows(rc, g0.len() - rc).into_owned();
    let reference = ViscousSolver::new(&fixed, nu, cfg.step.clone())?.run(&gf, cfg.t_end)?;
    let loc = &sys.tensors.gram_local;
    let points = sigmas
        .par_iter()
        .map(|&sigma| -> Result<InertiaPoint> {
            let run = || -> Result<InertiaPoint> {
                let s = sys.with_inertia_scale(sigma)?;
                let traj = ViscousSolver::new(&s, nu, cfg.step.clone())?.run(&g, cfg.t_end)?;
                check_aligned(&traj.times, &reference.times)?;
                let body = BodySeries::viscous(&s, &traj)?;
                let dist2: Vec<f64> = traj
                    .coeffs
                    .iter()
                    .zip(&reference.coeffs)
                    .map(|(c, f)| {
                        let mut d = c.clone();
                        let mut tail = d.rows_mut(rc, c.len() - rc);
                        tail -= f;
                        quad(loc, &d)
                    })
                    .collect();
                Ok(inertia_point(sigma, &traj.times, &body, &dist2))
            };
            run().map_err(|e| Error::Study { param: sigma, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InertiaReport::finish(StudyKind::Viscous, points, reference.ledger.min_relative_slack()))
}

/// Rule on `ℱ₀ ∩ B(0, 2a)` for a sphere of radius `a`.
fn local_shell(a: f64) -> (Vec<Vec3>, Vec<f64>) {
    let (dirs, dw) = quadrature_angular(10);
    let (rs, rw) = gauss_legendre_on(8, a, 2.0 * a);
    let mut out = (Vec::new(), Vec::new());
    for (d, w) in dirs.iter().zip(&dw) {
        for (r, wr) in rs.iter().zip(&rw) {
            out.0.push(d * *r);
            out.1.push(w * wr * r * r);
        }
    }
    out
}

/// Euler infinite-inertia study with `ℓ₀ = r₀ = 0` and the blobs of
/// `field`; the fluid is compared with the run around the fixed body.
pub fn infinite_inertia_euler(
    spec: &RigidBodySpec,
    options: &EulerOptions,
    field: &VortexField,
    sigmas: &[f64],
    dt: f64,
    steps: usize,
) -> Result<InertiaReport> {
    check_sigma_grid(sigmas)?;
    let context = |sigma: f64| -> Result<EulerContext> {
        let kctx = KirchhoffContext::new(&spec.clone().with_inertia_scale(sigma))?;
        EulerContext::new(std::sync::Arc::new(kctx), options.clone())
    };
    let s0 = euler::EulerState::new(field.clone(), Vec3::zeros(), Vec3::zeros());
    let base = context(1.0)?;
    let reference = euler::run(&base, &s0, dt, steps, true)?;
    let (pts, wts) = local_shell(base.radius);
    let ref_fields: Vec<Vec<Vec3>> = reference
        .states
        .iter()
        .map(|s| {
            let rec = base.velocity_from_vorticity(&s.field, s.linear, s.angular);
            pts.par_iter().map(|x| crate::fields::VectorField::value(&rec, x)).collect()
        })
        .collect();
    let mut points = Vec::new();
    for &sigma in sigmas {
        let run = || -> Result<InertiaPoint> {
            let ctx = context(sigma)?;
            let traj = euler::run(&ctx, &s0, dt, steps, false)?;
            let body = BodySeries::euler(&ctx, &traj);
            let dist2: Vec<f64> = traj
                .states
                .iter()
                .zip(&ref_fields)
                .map(|(s, uf)| {
                    let rec = ctx.velocity_from_vorticity(&s.field, s.linear, s.angular);
                    pts.par_iter()
                        .zip(&wts)
                        .zip(uf)
                        .map(|((x, w), f)| w * (crate::fields::VectorField::value(&rec, x) - f).norm_squared())
                        .collect::<Vec<_>>()
                        .iter()
                        .sum()
                })
                .collect();
            Ok(inertia_point(sigma, &traj.times(), &body, &dist2))
        };
        points.push(run().map_err(|e| Error::Study { param: sigma, source: Box::new(e) })?);
    }
    Ok(InertiaReport::finish(StudyKind::Euler, points, reference.max_energy_drift()))
}

#[cfg(test)]
mod tests;
