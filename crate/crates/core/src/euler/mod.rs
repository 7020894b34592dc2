//! Inviscid system in the body frame: vortex blobs transported and
//! stretched by `u − u_𝒮`, velocity reconstructed from the blobs plus a
//! harmonic image and the Kirchhoff potentials, and the added-mass body
//! equation `ℳ[ℓ; r]' = b(u, u, vᵢ)`.
//!
//! Sphere only: the image is an exterior harmonic expansion that enforces
//! `(u − u_𝒮)·n = 0` to truncation accuracy.

mod images;
mod kernel;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use images::{regular_harmonics, ExteriorHarmonics};
pub use kernel::{
    biot_savart, biot_savart_gradient, blob_velocity, blob_velocity_gradient, energy_kernel, free_space_energy,
    VortexParticle,
};

use crate::fields::VectorField;
use crate::geometry::{quadrature_angular, gauss_legendre_on, QuadratureOptions, QuadratureRule, RigidBodySpec, Shape};
use crate::kirchhoff::KirchhoffContext;
use crate::motion::skew;
use crate::{Error, Mat3, Mat6, Result, Vec3, Vec6};

/// Blob set with a common smoothing radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VortexField {
    pub particles: Vec<VortexParticle>,
    pub epsilon: f64,
}

impl VortexField {
    pub fn empty(epsilon: f64) -> Self {
        VortexField { particles: Vec::new(), epsilon }
    }

    /// Circular ring of `n` blobs with circulation `gamma`, centered at
    /// `center`, normal `axis`, and `ε = 1.5 h_p`.
    pub fn ring(center: Vec3, axis: Vec3, radius: f64, gamma: f64, n: usize) -> Result<Self> {
        if n < 3 || !(radius > 0.0) || axis.norm() == 0.0 {
            return Err(Error::InvalidInput("ring needs n ≥ 3, positive radius and a nonzero axis".into()));
        }
        let e3 = axis.normalize();
        let e1 = if e3.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let e1 = (e1 - e3 * e3.dot(&e1)).normalize();
        let e2 = e3.cross(&e1);
        let h = 2.0 * std::f64::consts::PI * radius / n as f64;
        let particles = (0..n)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                let (s, c) = th.sin_cos();
                VortexParticle { position: center + (e1 * c + e2 * s) * radius, strength: (e2 * c - e1 * s) * (gamma * h) }
            })
            .collect();
        Ok(VortexField { particles, epsilon: 1.5 * h })
    }

    /// `Σ α_p` and `Σ x_p∧α_p / 2` (total vorticity and impulse).
    pub fn moments(&self) -> (Vec3, Vec3) {
        self.particles
            .iter()
            .fold((Vec3::zeros(), Vec3::zeros()), |(a, b), p| (a + p.strength, b + p.position.cross(&p.strength) * 0.5))
    }
}

/// Discretization parameters of the inviscid solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerOptions {
    /// Highest harmonic degree of the image.
    pub image_degree: usize,
    /// Gauss nodes in `cos θ` for the image fit and surface integrals.
    pub fit_order: usize,
    /// Surface check nodes for the boundary residual.
    pub check_nodes: usize,
    /// Angular order of the force volume rule.
    pub force_surface_order: usize,
    /// Radial nodes per segment of the force volume rule.
    pub force_radial_order: usize,
    /// Start of the mapped tail of the force rule, in body radii.
    pub force_truncation: f64,
    /// Central-difference step for the image gradient, in body radii.
    pub fd_step: f64,
    /// Reflections tolerated before a run fails.
    pub max_reflections: usize,
}

impl Default for EulerOptions {
    fn default() -> Self {
        EulerOptions {
            image_degree: 20,
            fit_order: 28,
            check_nodes: 1000,
            force_surface_order: 14,
            force_radial_order: 6,
            force_truncation: 8.0,
            fd_step: 1e-4,
            max_reflections: 0,
        }
    }
}

/// Precomputed geometry for one body.
pub struct EulerContext {
    pub kctx: Arc<KirchhoffContext>,
    pub radius: f64,
    pub mass: f64,
    pub inertia: Mat3,
    pub added_mass: Mat6,
    pub images: ExteriorHarmonics,
    pub check_points: Vec<Vec3>,
    pub force_rule: QuadratureRule,
    /// Points and weights of a rule on the body volume.
    pub ball: (Vec<Vec3>, Vec<f64>),
    pub options: EulerOptions,
    chol: nalgebra::Cholesky<f64, nalgebra::U6>,
}

/// Fibonacci points on the sphere of radius `a`.
pub fn fibonacci_sphere(n: usize, a: f64) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (1.0 + 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let s = (1.0 - z * z).sqrt();
            let th = golden * (i as f64 + 0.5);
            Vec3::new(s * th.cos(), s * th.sin(), z) * a
        })
        .collect()
}

impl EulerContext {
    pub fn new(kctx: Arc<KirchhoffContext>, options: EulerOptions) -> Result<Self> {
        let radius = match kctx.spec.shape {
            Shape::Sphere { radius } => radius,
            Shape::Mesh(_) => return Err(Error::InvalidInput("the inviscid solver supports spherical bodies only".into())),
        };
        let images = ExteriorHarmonics::new(radius, options.image_degree, options.fit_order)?;
        let spec: &RigidBodySpec = &kctx.spec;
        let opts = QuadratureOptions::new(options.force_surface_order, options.force_radial_order, options.force_truncation * radius)
            .with_breakpoints([1.5 * radius, 2.5 * radius, 4.0 * radius]);
        let force_rule = QuadratureRule::build(spec, &opts)?;
        let (dirs, dw) = quadrature_angular(12);
        let (rs, rw) = gauss_legendre_on(12, 0.0, radius);
        let mut ball = (Vec::new(), Vec::new());
        for (d, w) in dirs.iter().zip(&dw) {
            for (r, wr) in rs.iter().zip(&rw) {
                ball.0.push(d * *r);
                ball.1.push(w * wr * r * r);
            }
        }
        let added_mass = kctx.added_mass.total;
        let chol = added_mass.cholesky().ok_or_else(|| Error::solver("euler", "virtual inertia tensor is singular"))?;
        Ok(EulerContext {
            radius,
            mass: kctx.mass(),
            inertia: kctx.inertia_tensor(),
            added_mass,
            images,
            check_points: fibonacci_sphere(options.check_nodes, radius),
            force_rule,
            ball,
            options,
            chol,
            kctx,
        })
    }

    /// `u^E` for the given blobs and body velocity.
    pub fn velocity_from_vorticity(&self, field: &VortexField, linear: Vec3, angular: Vec3) -> Reconstruction<'_> {
        let a = self.radius;
        let g: Vec<f64> = self
            .images
            .nodes
            .par_iter()
            .map(|d| -biot_savart(&(d * a), &field.particles, field.epsilon).dot(d))
            .collect();
        let coeffs = self.images.fit(&g);
        Reconstruction { ctx: self, field: field.clone(), linear, angular, coeffs }
    }

    /// `(ℓ', r') = ℳ⁻¹ (b(u, u, vᵢ))ᵢ` at the given state.
    pub fn body_rate(&self, state: &EulerState) -> Vec6 {
        self.chol.solve(&self.velocity_from_vorticity(&state.field, state.linear, state.angular).forces())
    }
}

/// Reconstructed velocity `u = u_BS + ∇ψ + Σ βᵢ∇Φᵢ`, `β = (ℓ, r)`.
pub struct Reconstruction<'a> {
    ctx: &'a EulerContext,
    pub field: VortexField,
    pub linear: Vec3,
    pub angular: Vec3,
    pub coeffs: Vec<f64>,
}

impl Reconstruction<'_> {
    pub fn beta(&self) -> Vec6 {
        Vec6::new(self.linear.x, self.linear.y, self.linear.z, self.angular.x, self.angular.y, self.angular.z)
    }

    /// `u_𝒮 = ℓ + r∧x`.
    pub fn solid_velocity(&self, x: &Vec3) -> Vec3 {
        self.linear + self.angular.cross(x)
    }

    /// Image and potential part `∇χ`, `χ = ψ + Σβᵢ Φᵢ`, with `χ`.
    fn correction(&self, x: &Vec3) -> (f64, Vec3) {
        let (mut chi, mut g) = self.ctx.images.eval(&self.coeffs, x);
        let beta = self.beta();
        for (b, p) in beta.iter().zip(&self.ctx.kctx.potentials) {
            if *b != 0.0 {
                chi += b * p.value(x);
                g += p.gradient(x) * *b;
            }
        }
        (chi, g)
    }

    fn correction_gradient(&self, x: &Vec3) -> Mat3 {
        let h = self.ctx.options.fd_step * self.ctx.radius;
        let mut m = Mat3::zeros();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            let d = self.ctx.images.eval(&self.coeffs, &(x + e)).1 - self.ctx.images.eval(&self.coeffs, &(x - e)).1;
            m.set_column(k, &(d / (2.0 * h)));
        }
        for (b, p) in self.beta().iter().zip(&self.ctx.kctx.potentials) {
            if *b != 0.0 {
                m += p.hessian(x) * *b;
            }
        }
        m
    }

    /// `max |(u − u_𝒮)·n|` over the check nodes.
    pub fn bc_residual(&self) -> f64 {
        let a = self.ctx.radius;
        self.ctx
            .check_points
            .par_iter()
            .map(|x| (self.value(x) - self.solid_velocity(x)).dot(&(x / a)).abs())
            .reduce(|| 0.0, f64::max)
    }

    /// `∫_ℱ |u|²` from the exact blob energy, the body-volume part and
    /// the boundary terms of the correction.
    pub fn fluid_energy(&self) -> f64 {
        let (p, eps) = (&self.field.particles, self.field.epsilon);
        let free = free_space_energy(p, eps);
        let (bx, bw) = &self.ctx.ball;
        let inside: f64 =
            bx.par_iter().zip(bw).map(|(x, w)| w * biot_savart(x, p, eps).norm_squared()).collect::<Vec<_>>().iter().sum();
        let a = self.ctx.radius;
        let img = &self.ctx.images;
        let terms: Vec<f64> = img
            .nodes
            .par_iter()
            .zip(&img.weights)
            .map(|(d, w)| {
                let x = d * a;
                let ubs = biot_savart(&x, p, eps);
                let (chi, gchi) = self.correction(&x);
                w * a * a * (-2.0 * chi * ubs.dot(d) - chi * gchi.dot(d))
            })
            .collect();
        free - inside + terms.iter().sum::<f64>()
    }

    /// `‖u‖²_ℋ = ∫_ℱ|u|² + m|ℓ|² + r·𝒥₀r`.
    pub fn energy(&self) -> f64 {
        self.fluid_energy() + self.ctx.mass * self.linear.norm_squared() + self.angular.dot(&(self.ctx.inertia * self.angular))
    }

    /// `(b(u, u, vᵢ))ᵢ = [m r∧ℓ; (𝒥₀r)∧r] + ∫ ([(u−u_𝒮)·∇]∇Φᵢ)·u − det(r, u, ∇Φᵢ)`.
    pub fn forces(&self) -> Vec6 {
        let (l, r) = (self.linear, self.angular);
        let body_l = r.cross(&l) * self.ctx.mass;
        let body_r = (self.ctx.inertia * r).cross(&r);
        let mut out = Vec6::new(body_l.x, body_l.y, body_l.z, body_r.x, body_r.y, body_r.z);
        let vol = &self.ctx.force_rule.volume;
        let pots = &self.ctx.kctx.potentials;
        let parts: Vec<Vec6> = vol
            .points
            .par_iter()
            .zip(&vol.weights)
            .map(|(x, w)| {
                let u = self.value(x);
                let rel = u - self.solid_velocity(x);
                let mut f = Vec6::zeros();
                for (i, p) in pots.iter().enumerate() {
                    let gp = p.gradient(x);
                    if gp == Vec3::zeros() {
                        continue;
                    }
                    f[i] = w * ((p.hessian(x) * rel).dot(&u) - r.dot(&u.cross(&gp)));
                }
                f
            })
            .collect();
        for f in &parts {
            out += f;
        }
        out
    }
}

impl VectorField for Reconstruction<'_> {
    fn value(&self, x: &Vec3) -> Vec3 {
        biot_savart(x, &self.field.particles, self.field.epsilon) + self.correction(x).1
    }

    fn gradient(&self, x: &Vec3) -> Mat3 {
        biot_savart_gradient(x, &self.field.particles, self.field.epsilon).1 + self.correction_gradient(x)
    }

    fn eval(&self, x: &Vec3) -> (Vec3, Mat3) {
        let (u, g) = biot_savart_gradient(x, &self.field.particles, self.field.epsilon);
        (u + self.correction(x).1, g + self.correction_gradient(x))
    }
}

/// Blobs, body velocity and the potential coefficients `β = (ℓ, r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerState {
    pub t: f64,
    pub field: VortexField,
    pub linear: Vec3,
    pub angular: Vec3,
    pub beta: Vec6,
    pub reflections: usize,
}

impl EulerState {
    pub fn new(field: VortexField, linear: Vec3, angular: Vec3) -> Self {
        let beta = Vec6::new(linear.x, linear.y, linear.z, angular.x, angular.y, angular.z);
        EulerState { t: 0.0, field, linear, angular, beta, reflections: 0 }
    }

    /// Checks that every blob sits at least `2ε` outside the body.
    pub fn check_seeding(&self, ctx: &EulerContext) -> Result<()> {
        let min = ctx.radius + 2.0 * self.field.epsilon;
        match self.field.particles.iter().find(|p| p.position.norm() < min) {
            Some(p) => Err(Error::InvalidInput(format!(
                "particle at {:?} is closer than 2ε to the body",
                p.position.as_slice()
            ))),
            None => Ok(()),
        }
    }
}

/// Time derivative of the state.
#[derive(Clone, Debug)]
struct Rates {
    positions: Vec<Vec3>,
    strengths: Vec<Vec3>,
    body: Vec6,
}

/// Which parts of the state move.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Coupled,
    FluidOnly,
    BodyOnly,
}

fn rates(ctx: &EulerContext, field: &VortexField, l: Vec3, r: Vec3, mode: Mode) -> Result<Rates> {
    let rec = ctx.velocity_from_vorticity(field, l, r);
    let (positions, strengths) = if mode == Mode::BodyOnly {
        (vec![Vec3::zeros(); field.particles.len()], vec![Vec3::zeros(); field.particles.len()])
    } else {
        let rs = skew(&r);
        field
            .particles
            .par_iter()
            .map(|p| {
                let (u, g) = rec.eval(&p.position);
                (u - rec.solid_velocity(&p.position), (g - rs) * p.strength)
            })
            .unzip()
    };
    let body = if mode == Mode::FluidOnly {
        Vec6::zeros()
    } else {
        ctx.chol.solve(&rec.forces())
    };
    if positions.iter().chain(&strengths).any(|v| !v.iter().all(|c| c.is_finite())) || !body.iter().all(|c| c.is_finite()) {
        return Err(Error::solver("euler", "non-finite rate"));
    }
    Ok(Rates { positions, strengths, body })
}

/// Transport rates under a prescribed relative velocity `u − u_𝒮` with
/// gradient (used for closed-form transport checks).
pub fn transport_rates(field: &VortexField, rel: &dyn VectorField) -> Vec<(Vec3, Vec3)> {
    field.particles.iter().map(|p| (rel.value(&p.position), rel.gradient(&p.position) * p.strength)).collect()
}

/// RK4 step of the particle system under a prescribed relative velocity.
pub fn transport_step(field: &VortexField, rel: &dyn VectorField, dt: f64) -> VortexField {
    let shift = |f: &VortexField, k: &[(Vec3, Vec3)], h: f64| VortexField {
        particles: f
            .particles
            .iter()
            .zip(k)
            .map(|(p, (dx, da))| VortexParticle { position: p.position + dx * h, strength: p.strength + da * h })
            .collect(),
        epsilon: f.epsilon,
    };
    let k1 = transport_rates(field, rel);
    let k2 = transport_rates(&shift(field, &k1, dt / 2.0), rel);
    let k3 = transport_rates(&shift(field, &k2, dt / 2.0), rel);
    let k4 = transport_rates(&shift(field, &k3, dt), rel);
    let k: Vec<(Vec3, Vec3)> = (0..k1.len())
        .map(|i| {
            (
                (k1[i].0 + k2[i].0 * 2.0 + k3[i].0 * 2.0 + k4[i].0) / 6.0,
                (k1[i].1 + k2[i].1 * 2.0 + k3[i].1 * 2.0 + k4[i].1) / 6.0,
            )
        })
        .collect();
    shift(field, &k, dt)
}

fn advance(state: &EulerState, k: &Rates, h: f64) -> EulerState {
    let mut s = state.clone();
    for ((p, dx), da) in s.field.particles.iter_mut().zip(&k.positions).zip(&k.strengths) {
        p.position += dx * h;
        p.strength += da * h;
    }
    s.linear += k.body.fixed_rows::<3>(0) * h;
    s.angular += k.body.fixed_rows::<3>(3) * h;
    s.t += h;
    s
}

fn rk4(ctx: &EulerContext, state: &EulerState, dt: f64, mode: Mode) -> Result<EulerState> {
    let f = |s: &EulerState| rates(ctx, &s.field, s.linear, s.angular, mode);
    let k1 = f(state)?;
    let k2 = f(&advance(state, &k1, dt / 2.0))?;
    let k3 = f(&advance(state, &k2, dt / 2.0))?;
    let k4 = f(&advance(state, &k3, dt))?;
    let comb = |a: &[Vec3], b: &[Vec3], c: &[Vec3], d: &[Vec3]| -> Vec<Vec3> {
        (0..a.len()).map(|i| (a[i] + b[i] * 2.0 + c[i] * 2.0 + d[i]) / 6.0).collect()
    };
    let k = Rates {
        positions: comb(&k1.positions, &k2.positions, &k3.positions, &k4.positions),
        strengths: comb(&k1.strengths, &k2.strengths, &k3.strengths, &k4.strengths),
        body: (k1.body + k2.body * 2.0 + k3.body * 2.0 + k4.body) / 6.0,
    };
    let mut next = advance(state, &k, dt);
    next.t = state.t + dt;
    reflect(ctx, &mut next);
    next.beta = Vec6::new(next.linear.x, next.linear.y, next.linear.z, next.angular.x, next.angular.y, next.angular.z);
    Ok(next)
}

/// Mirrors blobs that entered the body back into the fluid.
fn reflect(ctx: &EulerContext, s: &mut EulerState) {
    let a = ctx.radius;
    for p in &mut s.field.particles {
        let r = p.position.norm();
        if r < a {
            p.position *= (2.0 * a - r) / r;
            s.reflections += 1;
        }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("time step must be positive, got {dt}")))
    }
}

/// RK4 step of the blobs with the body velocity held fixed.
pub fn vorticity_step(ctx: &EulerContext, state: &EulerState, dt: f64) -> Result<EulerState> {
    check_dt(dt)?;
    rk4(ctx, state, dt, Mode::FluidOnly)
}

/// RK4 step of `(ℓ, r)` with the blobs held fixed.
pub fn body_ode_step(ctx: &EulerContext, state: &EulerState, dt: f64) -> Result<EulerState> {
    check_dt(dt)?;
    rk4(ctx, state, dt, Mode::BodyOnly)
}

/// RK4 step of the coupled system.
pub fn coupled_step(ctx: &EulerContext, state: &EulerState, dt: f64) -> Result<EulerState> {
    check_dt(dt)?;
    rk4(ctx, state, dt, Mode::Coupled)
}

/// Per-step record of an inviscid run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerSample {
    pub t: f64,
    pub linear: Vec3,
    pub angular: Vec3,
    pub energy: f64,
    pub bc_residual: f64,
}

/// Samples and blob snapshots at every step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EulerTrajectory {
    pub dt: f64,
    pub fixed_body: bool,
    pub samples: Vec<EulerSample>,
    pub states: Vec<EulerState>,
}

impl EulerTrajectory {
    pub fn initial_energy(&self) -> f64 {
        self.samples[0].energy
    }

    /// `max_t |E(t) − E(0)| / E(0)`.
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.initial_energy();
        self.samples.iter().map(|s| (s.energy - e0).abs() / e0).fold(0.0, f64::max)
    }

    pub fn max_bc_residual(&self) -> f64 {
        self.samples.iter().map(|s| s.bc_residual).fold(0.0, f64::max)
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// `(ℓ, r)` at every sample.
    pub fn rigid(&self) -> Vec<(Vec3, Vec3)> {
        self.samples.iter().map(|s| (s.linear, s.angular)).collect()
    }

    pub fn reflections(&self) -> usize {
        self.states.last().map_or(0, |s| s.reflections)
    }
}

/// Runs `steps` steps of size `dt`. With `fixed_body` the body is held
/// at rest (`ℓ = r = 0`) and only the blobs move.
pub fn run(ctx: &EulerContext, initial: &EulerState, dt: f64, steps: usize, fixed_body: bool) -> Result<EulerTrajectory> {
    check_dt(dt)?;
    initial.check_seeding(ctx)?;
    let mut state = initial.clone();
    if fixed_body {
        state.linear = Vec3::zeros();
        state.angular = Vec3::zeros();
        state.beta = Vec6::zeros();
    }
    let record = |s: &EulerState| {
        let rec = ctx.velocity_from_vorticity(&s.field, s.linear, s.angular);
        EulerSample { t: s.t, linear: s.linear, angular: s.angular, energy: rec.energy(), bc_residual: rec.bc_residual() }
    };
    let mode = if fixed_body { Mode::FluidOnly } else { Mode::Coupled };
    let mut traj = EulerTrajectory { dt, fixed_body, samples: vec![record(&state)], states: vec![state.clone()] };
    for k in 0..steps {
        state = rk4(ctx, &state, dt, mode)?;
        state.t = (k + 1) as f64 * dt + initial.t;
        if state.reflections > ctx.options.max_reflections {
            return Err(Error::solver(
                "euler",
                format!("{} particle reflections at t = {} exceed the limit {}", state.reflections, state.t, ctx.options.max_reflections),
            ));
        }
        traj.samples.push(record(&state));
        traj.states.push(state.clone());
    }
    Ok(traj)
}

#[cfg(test)]
mod tests;
