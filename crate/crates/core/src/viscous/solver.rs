//! RK4 time stepping of the Galerkin system with the energy ledger.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::system::GalerkinSystem;
use crate::{Error, Result, Vec3};

/// Galerkin coefficients at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ViscousState {
    pub t: f64,
    pub coeffs: DVector<f64>,
}

impl ViscousState {
    pub fn new(coeffs: DVector<f64>) -> Self {
        ViscousState { t: 0.0, coeffs }
    }

    /// `(ℓ, r)` of the state.
    pub fn rigid(&self, sys: &GalerkinSystem) -> (Vec3, Vec3) {
        sys.rigid_velocity(&self.coeffs)
    }
}

/// Step-size control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOptions {
    pub dt: f64,
    /// Halvings allowed per macro step before the run fails.
    pub max_halvings: u32,
    /// Accepted ledger deficit per unit time, relative to `‖u₀‖²_ℋ`.
    pub ledger_rate_tol: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions { dt: 2e-3, max_halvings: 20, ledger_rate_tol: 1e-9 }
    }
}

/// One accepted step of the energy inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub t: f64,
    /// `½‖u‖²_ℋ`.
    pub energy: f64,
    /// `2ν∫|D(u)|²` at `t`.
    pub viscous_rate: f64,
    /// `2να∮|u − u_𝒮|²` at `t`.
    pub friction_rate: f64,
    /// Time integrals of the two rates up to `t`.
    pub viscous_integral: f64,
    pub friction_integral: f64,
    /// `½‖u₀‖²_ℋ − ½‖u‖²_ℋ − dissipation integrals`.
    pub slack: f64,
}

/// Per-step energy accounting of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    /// `½‖u₀‖²_ℋ`.
    pub initial_energy: f64,
    pub entries: Vec<LedgerEntry>,
}

impl EnergyLedger {
    fn start(sys: &GalerkinSystem, g: &DVector<f64>, nu: f64) -> Self {
        let e = sys.energy(g);
        let (v, f) = sys.dissipation(g, nu);
        EnergyLedger {
            initial_energy: e,
            entries: vec![LedgerEntry {
                t: 0.0,
                energy: e,
                viscous_rate: v,
                friction_rate: f,
                viscous_integral: 0.0,
                friction_integral: 0.0,
                slack: 0.0,
            }],
        }
    }

    /// Smallest slack divided by `‖u₀‖²_ℋ`.
    pub fn min_relative_slack(&self) -> f64 {
        let scale = 2.0 * self.initial_energy;
        let m = self.entries.iter().map(|e| e.slack).fold(f64::INFINITY, f64::min);
        if scale > 0.0 {
            m / scale
        } else {
            m
        }
    }

    /// Energy column is nonincreasing up to `tol · ‖u₀‖²_ℋ`.
    pub fn energy_monotone(&self, tol: f64) -> bool {
        let scale = 2.0 * self.initial_energy;
        self.entries.windows(2).all(|w| w[1].energy <= w[0].energy + tol * scale)
    }
}

/// Sampled run: coefficients at the macro steps plus the ledger of every
/// accepted substep.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub nu: f64,
    pub alpha: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub coeffs: Vec<DVector<f64>>,
    pub ledger: EnergyLedger,
    /// Largest halving depth used.
    pub halvings: u32,
}

impl Trajectory {
    /// `(ℓ, r)` at every sample.
    pub fn rigid(&self, sys: &GalerkinSystem) -> Vec<(Vec3, Vec3)> {
        self.coeffs.iter().map(|g| sys.rigid_velocity(g)).collect()
    }
}

/// Plain RK4 step of `G' = ℳ_N⁻¹(2ν𝒜G + ℬ(G, G))`.
pub fn step(sys: &GalerkinSystem, state: &ViscousState, dt: f64, nu: f64) -> Result<ViscousState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    let (g, _) = rk4(sys, &state.coeffs, &sys.rhs(&state.coeffs, nu), dt, nu);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::solver("rk4", format!("non-finite coefficients at t = {}", state.t + dt)));
    }
    Ok(ViscousState { t: state.t + dt, coeffs: g })
}

fn rk4(sys: &GalerkinSystem, g: &DVector<f64>, k1: &DVector<f64>, h: f64, nu: f64) -> (DVector<f64>, DVector<f64>) {
    let k2 = sys.rhs(&(g + k1 * (0.5 * h)), nu);
    let k3 = sys.rhs(&(g + &k2 * (0.5 * h)), nu);
    let k4 = sys.rhs(&(g + &k3 * h), nu);
    let next = g + (k1 + &k2 * 2.0 + &k3 * 2.0 + &k4) * (h / 6.0);
    let f1 = sys.rhs(&next, nu);
    (next, f1)
}

/// Integrator with ledger-driven halving.
pub struct ViscousSolver<'a> {
    pub sys: &'a GalerkinSystem,
    pub nu: f64,
    pub opts: StepOptions,
}

impl<'a> ViscousSolver<'a> {
    pub fn new(sys: &'a GalerkinSystem, nu: f64, opts: StepOptions) -> Result<Self> {
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(Error::InvalidInput(format!("viscosity must be nonnegative, got {nu}")));
        }
        if !(opts.dt > 0.0 && opts.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {}", opts.dt)));
        }
        Ok(ViscousSolver { sys, nu, opts })
    }

    /// Advances by one macro step, halving on ledger deficits.
    fn advance(
        &self,
        g: &DVector<f64>,
        f: &DVector<f64>,
        t: f64,
        h: f64,
        depth: u32,
        ledger: &mut EnergyLedger,
        max_depth: &mut u32,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let (next, f1) = rk4(self.sys, g, f, h, self.nu);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::solver("rk4", format!("non-finite coefficients at t = {}", t + h)));
        }
        let last = *ledger.entries.last().expect("ledger starts with t = 0");
        let entry = ledger_step(self.sys, self.nu, &last, g, f, &next, &f1, h);
        let deficit = (last.slack - entry.slack).max(0.0);
        let allowed = self.opts.ledger_rate_tol * 2.0 * ledger.initial_energy * h;
        if entry.slack < 0.0 && deficit > allowed {
            if depth >= self.opts.max_halvings {
                return Err(Error::Ledger { t: t + h, slack: entry.slack });
            }
            *max_depth = (*max_depth).max(depth + 1);
            let (mid, fm) = self.advance(g, f, t, 0.5 * h, depth + 1, ledger, max_depth)?;
            return self.advance(&mid, &fm, t + 0.5 * h, 0.5 * h, depth + 1, ledger, max_depth);
        }
        ledger.entries.push(entry);
        Ok((next, f1))
    }

    /// Integrates from `g0` on `[0, t_end]` with samples every `dt`.
    pub fn run(&self, g0: &DVector<f64>, t_end: f64) -> Result<Trajectory> {
        if !(t_end > 0.0) {
            return Err(Error::InvalidInput(format!("final time must be positive, got {t_end}")));
        }
        let steps = (t_end / self.opts.dt).round().max(1.0) as usize;
        let dt = t_end / steps as f64;
        let mut ledger = EnergyLedger::start(self.sys, g0, self.nu);
        let mut g = g0.clone();
        let mut f = self.sys.rhs(&g, self.nu);
        let mut times = vec![0.0];
        let mut coeffs = vec![g.clone()];
        let mut halvings = 0;
        for s in 0..steps {
            let t = s as f64 * dt;
            let (ng, nf) = self.advance(&g, &f, t, dt, 0, &mut ledger, &mut halvings)?;
            g = ng;
            f = nf;
            times.push((s + 1) as f64 * dt);
            coeffs.push(g.clone());
        }
        Ok(Trajectory { nu: self.nu, alpha: self.sys.alpha, dt, times, coeffs, ledger, halvings })
    }
}

/// Ledger entry at the end of a step: Simpson rule for the dissipation
/// with the midpoint state from cubic Hermite interpolation.
#[allow(clippy::too_many_arguments)]
fn ledger_step(
    sys: &GalerkinSystem,
    nu: f64,
    last: &LedgerEntry,
    g0: &DVector<f64>,
    f0: &DVector<f64>,
    g1: &DVector<f64>,
    f1: &DVector<f64>,
    h: f64,
) -> LedgerEntry {
    let mid = (g0 + g1) * 0.5 + (f0 - f1) * (h / 8.0);
    let (v0, b0) = (last.viscous_rate, last.friction_rate);
    let (vm, bm) = sys.dissipation(&mid, nu);
    let (v1, b1) = sys.dissipation(g1, nu);
    let vi = last.viscous_integral + h / 6.0 * (v0 + 4.0 * vm + v1);
    let bi = last.friction_integral + h / 6.0 * (b0 + 4.0 * bm + b1);
    let e = sys.energy(g1);
    let e0 = last.energy + last.viscous_integral + last.friction_integral + last.slack;
    LedgerEntry {
        t: last.t + h,
        energy: e,
        viscous_rate: v1,
        friction_rate: b1,
        viscous_integral: vi,
        friction_integral: bi,
        slack: e0 - e - vi - bi,
    }
}

/// Recomputes the ledger of a sampled trajectory (e.g. with a system
/// assembled at a different quadrature order).
pub fn energy_report(sys: &GalerkinSystem, traj: &Trajectory) -> Result<EnergyLedger> {
    let first = traj.coeffs.first().ok_or_else(|| Error::InvalidInput("empty trajectory".into()))?;
    let mut ledger = EnergyLedger::start(sys, first, traj.nu);
    let mut f0 = sys.rhs(first, traj.nu);
    for w in 0..traj.coeffs.len() - 1 {
        let h = traj.times[w + 1] - traj.times[w];
        let f1 = sys.rhs(&traj.coeffs[w + 1], traj.nu);
        let last = *ledger.entries.last().expect("nonempty");
        let e = ledger_step(sys, traj.nu, &last, &traj.coeffs[w], &f0, &traj.coeffs[w + 1], &f1, h);
        ledger.entries.push(e);
        f0 = f1;
    }
    Ok(ledger)
}
