//! The ℋ inner product, the forms `a`, `b`, `b_R`, the solid lifting and
//! quadrature checks of the weak-formulation identities.
//!
//! Surface integrals use the fluid's outward normal `ν = −n` where the
//! weak formulation needs it (`ν` points into the body).

mod lifting;
mod monitors;

use std::sync::Arc;

use rayon::prelude::*;

pub use lifting::{solid_lifting, SolidLifting};
pub use monitors::{inequality_monitors, wedge_constant, MonitorReport, TraceRow};

use crate::fields::{VectorField, ZeroField};
use crate::geometry::{CutoffField, QuadratureRule, TruncationField};
use crate::kirchhoff::KirchhoffContext;
use crate::{Error, Mat3, Result, Vec3, Vec6};

/// Relative quadrature tolerance of the default rules for smooth
/// integrands; identity checks are measured against multiples of it.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// A velocity field in ℋ: fluid part plus the rigid motion `(ℓ, r)` of
/// the solid.
#[derive(Clone)]
pub struct FieldH {
    pub fluid: Arc<dyn VectorField>,
    pub linear: Vec3,
    pub angular: Vec3,
    /// Weighted-gradient integrability certified (allowed as the third
    /// argument of the untruncated `b`).
    pub in_v: bool,
    /// `u·n = (ℓ + r∧x)·n` on the body surface.
    pub matched_trace: bool,
}

impl std::fmt::Debug for FieldH {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldH")
            .field("linear", &self.linear)
            .field("angular", &self.angular)
            .field("in_v", &self.in_v)
            .field("matched_trace", &self.matched_trace)
            .finish_non_exhaustive()
    }
}

impl FieldH {
    /// General constructor; arbitrary numeric fields are not certified in 𝒱.
    pub fn new(fluid: Arc<dyn VectorField>, linear: Vec3, angular: Vec3) -> Self {
        FieldH { fluid, linear, angular, in_v: false, matched_trace: false }
    }

    pub fn zero() -> Self {
        FieldH { fluid: Arc::new(ZeroField), linear: Vec3::zeros(), angular: Vec3::zeros(), in_v: true, matched_trace: true }
    }

    /// Compactly supported fluid field vanishing in the solid with zero
    /// normal trace (exterior basis modes).
    pub fn exterior(fluid: Arc<dyn VectorField>) -> Self {
        FieldH { fluid, linear: Vec3::zeros(), angular: Vec3::zeros(), in_v: true, matched_trace: true }
    }

    /// `Σ βᵢ vᵢ` built from the Kirchhoff test fields.
    pub fn kirchhoff(ctx: &KirchhoffContext, beta: &Vec6) -> Self {
        FieldH {
            fluid: Arc::new(ctx.potential_flow(beta)),
            linear: beta.fixed_rows::<3>(0).into_owned(),
            angular: beta.fixed_rows::<3>(3).into_owned(),
            in_v: true,
            matched_trace: true,
        }
    }

    /// Rigid velocity `ℓ + r∧x` at `x`.
    pub fn solid_velocity(&self, x: &Vec3) -> Vec3 {
        self.linear + self.angular.cross(x)
    }
}

/// Values and gradients of a field at every node of a rule.
#[derive(Clone, Debug, Default)]
pub struct Samples {
    pub vol_value: Vec<Vec3>,
    pub vol_grad: Vec<Mat3>,
    pub surf_value: Vec<Vec3>,
    pub surf_grad: Vec<Mat3>,
    pub linear: Vec3,
    pub angular: Vec3,
}

impl Samples {
    pub fn zeros(nv: usize, ns: usize) -> Self {
        Samples {
            vol_value: vec![Vec3::zeros(); nv],
            vol_grad: vec![Mat3::zeros(); nv],
            surf_value: vec![Vec3::zeros(); ns],
            surf_grad: vec![Mat3::zeros(); ns],
            linear: Vec3::zeros(),
            angular: Vec3::zeros(),
        }
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: f64, other: &Samples) {
        for (a, b) in self.vol_value.iter_mut().zip(&other.vol_value) {
            *a += b * c;
        }
        for (a, b) in self.vol_grad.iter_mut().zip(&other.vol_grad) {
            *a += b * c;
        }
        for (a, b) in self.surf_value.iter_mut().zip(&other.surf_value) {
            *a += b * c;
        }
        for (a, b) in self.surf_grad.iter_mut().zip(&other.surf_grad) {
            *a += b * c;
        }
        self.linear += other.linear * c;
        self.angular += other.angular * c;
    }

    pub fn solid_velocity(&self, x: &Vec3) -> Vec3 {
        self.linear + self.angular.cross(x)
    }
}

fn det(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    a.dot(&b.cross(c))
}

fn sym(g: &Mat3) -> Mat3 {
    (g + g.transpose()) * 0.5
}

/// Quadrature, physical parameters and body data shared by the forms.
#[derive(Clone, Debug)]
pub struct FormsContext {
    pub rule: QuadratureRule,
    /// Friction coefficient (1/length).
    pub alpha: f64,
    /// Kinematic viscosity.
    pub nu: f64,
    pub mass: f64,
    pub inertia: Mat3,
    pub cutoff: Option<CutoffField>,
    pub truncation: TruncationField,
    chi_r: Vec<Vec3>,
}

/// A form value with the sum of absolute contributions, used to judge
/// cancellation relative to the size of the terms.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Evaluated {
    pub value: f64,
    pub scale: f64,
}

impl Evaluated {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.value.abs() / self.scale
        }
    }
}

impl FormsContext {
    pub fn new(
        rule: QuadratureRule,
        alpha: f64,
        nu: f64,
        mass: f64,
        inertia: Mat3,
        truncation: TruncationField,
    ) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("friction α must be nonnegative, got {alpha}")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidInput(format!("viscosity ν must be positive, got {nu}")));
        }
        let chi_r = rule.volume.points.iter().map(|x| truncation.value(x)).collect();
        Ok(FormsContext { rule, alpha, nu, mass, inertia, cutoff: None, truncation, chi_r })
    }

    pub fn with_cutoff(mut self, chi: CutoffField) -> Self {
        self.cutoff = Some(chi);
        self
    }

    /// Samples a field on all nodes of the rule.
    pub fn sample(&self, u: &FieldH) -> Samples {
        sample_field(&self.rule, u)
    }

    /// `(u, v)_ℋ = ∫ u·v + m ℓ_u·ℓ_v + 𝒥₀ r_u·r_v`.
    pub fn inner_h_samples(&self, u: &Samples, v: &Samples) -> f64 {
        let w = &self.rule.volume.weights;
        let fluid: f64 = u.vol_value.iter().zip(&v.vol_value).zip(w).map(|((a, b), w)| w * a.dot(b)).sum();
        fluid + self.mass * u.linear.dot(&v.linear) + (self.inertia * u.angular).dot(&v.angular)
    }

    pub fn inner_h(&self, u: &FieldH, v: &FieldH) -> f64 {
        self.inner_h_samples(&self.sample(u), &self.sample(v))
    }

    /// Volume part `−∫ D(u):D(v)`.
    pub fn a_volume_samples(&self, u: &Samples, v: &Samples) -> f64 {
        let w = &self.rule.volume.weights;
        -u.vol_grad.iter().zip(&v.vol_grad).zip(w).map(|((a, b), w)| w * sym(a).dot(&sym(b))).sum::<f64>()
    }

    /// Boundary part `−∮ (u − u_𝒮)·(v − v_𝒮)` (without α).
    pub fn a_boundary_samples(&self, u: &Samples, v: &Samples) -> f64 {
        let s = &self.rule.surface;
        -s.points
            .iter()
            .zip(&s.weights)
            .zip(u.surf_value.iter().zip(&v.surf_value))
            .map(|((x, w), (a, b))| w * (a - u.solid_velocity(x)).dot(&(b - v.solid_velocity(x))))
            .sum::<f64>()
    }

    /// `a(u, v) = −α∮(u−u_𝒮)·(v−v_𝒮) − ∫D(u):D(v)`.
    pub fn a_samples(&self, u: &Samples, v: &Samples) -> f64 {
        self.alpha * self.a_boundary_samples(u, v) + self.a_volume_samples(u, v)
    }

    pub fn eval_a(&self, u: &FieldH, v: &FieldH) -> f64 {
        self.a_samples(&self.sample(u), &self.sample(v))
    }

    fn b_generic(&self, u: &Samples, v: &Samples, w: &Samples, truncated: bool) -> Evaluated {
        let rigid1 = self.mass * det(&u.angular, &v.linear, &w.linear);
        let rigid2 = det(&(self.inertia * u.angular), &v.angular, &w.angular);
        let pts = &self.rule.volume.points;
        let wts = &self.rule.volume.weights;
        let terms: Vec<(f64, f64)> = (0..pts.len())
            .into_par_iter()
            .map(|q| {
                let us = if truncated {
                    u.linear + u.angular.cross(&self.chi_r[q])
                } else {
                    u.solid_velocity(&pts[q])
                };
                let rel = u.vol_value[q] - us;
                let t1 = v.vol_value[q].dot(&(w.vol_grad[q] * rel));
                let t2 = det(&u.angular, &v.vol_value[q], &w.vol_value[q]);
                (wts[q] * (t1 - t2), wts[q] * (t1.abs() + t2.abs()))
            })
            .collect();
        let (value, scale) = terms.iter().fold((rigid1 + rigid2, rigid1.abs() + rigid2.abs()), |(a, b), (c, d)| (a + c, b + d));
        Evaluated { value, scale }
    }

    /// `b(u, v, w)` on samples; `w` must be in 𝒱 (checked by the caller).
    pub fn b_samples(&self, u: &Samples, v: &Samples, w: &Samples) -> Evaluated {
        self.b_generic(u, v, w, false)
    }

    /// `b_R(u, v, w)` on samples.
    pub fn b_truncated_samples(&self, u: &Samples, v: &Samples, w: &Samples) -> Evaluated {
        self.b_generic(u, v, w, true)
    }

    /// `b(u,v,w) = m det(r_u,ℓ_v,ℓ_w) + det(𝒥₀r_u,r_v,r_w)
    /// + ∫([(u−u_𝒮)·∇w]·v − det(r_u,v,w))`.
    pub fn eval_b(&self, u: &FieldH, v: &FieldH, w: &FieldH) -> Result<Evaluated> {
        if !w.in_v {
            return Err(Error::InvalidInput(
                "untruncated b needs a third argument certified in the weighted space".into(),
            ));
        }
        Ok(self.b_samples(&self.sample(u), &self.sample(v), &self.sample(w)))
    }

    /// `b_R` with `u_𝒮` replaced by `ℓ + r∧χ_R`.
    pub fn eval_b_truncated(&self, u: &FieldH, v: &FieldH, w: &FieldH) -> Evaluated {
        self.b_truncated_samples(&self.sample(u), &self.sample(v), &self.sample(w))
    }

    /// Boundary side of the Laplacian identity without the volume term:
    /// `2ℓ_v·∮D(u)ν + 2r_v·∮x∧D(u)ν + 2∮((D(u)ν)∧ν)·((v−v_𝒮)∧ν)`, with
    /// the sum of absolute contributions.
    pub fn useful_boundary_terms(&self, u: &Samples, v: &Samples) -> Evaluated {
        let s = &self.rule.surface;
        let (mut f, mut t, mut slip) = (Vec3::zeros(), Vec3::zeros(), 0.0);
        let mut slip_abs = 0.0;
        for q in 0..s.points.len() {
            let x = &s.points[q];
            let nu = -s.normals[q];
            let dn = sym(&u.surf_grad[q]) * nu;
            f += dn * s.weights[q];
            t += x.cross(&dn) * s.weights[q];
            let tang = (v.surf_value[q] - v.solid_velocity(x)).cross(&nu);
            let term = dn.cross(&nu).dot(&tang) * s.weights[q];
            slip += term;
            slip_abs += term.abs();
        }
        let b1 = 2.0 * v.linear.dot(&f);
        let b2 = 2.0 * v.angular.dot(&t);
        Evaluated { value: b1 + b2 + 2.0 * slip, scale: b1.abs() + b2.abs() + 2.0 * slip_abs }
    }

    /// Residual of `∫Δu·v = −2∫D(u):D(v) + 2ℓ_v·∮D(u)ν + 2r_v·∮x∧D(u)ν
    /// + 2∮((D(u)ν)∧ν)·((v−v_𝒮)∧ν)`.
    pub fn verify_useful_identity(&self, u: &FieldH, v: &FieldH) -> Result<Evaluated> {
        let vol = &self.rule.volume;
        let lap: Vec<Vec3> = vol
            .points
            .par_iter()
            .map(|x| u.fluid.laplacian(x))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::InvalidInput("useful identity needs Δu on the fluid domain".into()))?;
        let us = self.sample(u);
        let vs = self.sample(v);
        let lhs: f64 = lap.iter().zip(&vs.vol_value).zip(&vol.weights).map(|((l, v), w)| w * l.dot(v)).sum();
        let dd = 2.0 * self.a_volume_samples(&us, &vs);
        let bnd = self.useful_boundary_terms(&us, &vs);
        let rhs = dd + bnd.value;
        Ok(Evaluated { value: lhs - rhs, scale: lhs.abs() + dd.abs() + bnd.scale })
    }

    /// `‖u‖_ℋ`.
    pub fn norm_h(&self, u: &Samples) -> f64 {
        self.inner_h_samples(u, u).max(0.0).sqrt()
    }

    /// `‖∇u‖_{L²(ℱ₀)}` with an optional weight `(1 + |y|²)`.
    pub fn grad_norm(&self, u: &Samples, weighted: bool) -> f64 {
        let vol = &self.rule.volume;
        vol.points
            .iter()
            .zip(&vol.weights)
            .zip(&u.vol_grad)
            .map(|((x, w), g)| w * g.norm_squared() * if weighted { 1.0 + x.norm_squared() } else { 1.0 })
            .sum::<f64>()
            .sqrt()
    }

    /// `‖u‖_𝒱̲ = ‖u‖_ℋ + ‖∇u‖_{L²}`.
    pub fn norm_v_under(&self, u: &Samples) -> f64 {
        self.norm_h(u) + self.grad_norm(u, false)
    }

    /// `‖u‖_𝒱 = ‖u‖_ℋ + ‖(1+|y|²)^{1/2}∇u‖_{L²}`.
    pub fn norm_v(&self, u: &Samples) -> f64 {
        self.norm_h(u) + self.grad_norm(u, true)
    }

    /// `‖u‖_𝒱` plus the Lipschitz seminorm sampled over pairs of up to
    /// `nodes` volume nodes inside the truncation radius.
    pub fn norm_v_hat(&self, u: &Samples, nodes: usize) -> f64 {
        let vol = &self.rule.volume;
        let idx: Vec<usize> = (0..vol.points.len())
            .filter(|&q| vol.points[q].norm() < self.rule.truncation_radius)
            .collect();
        let stride = (idx.len() / nodes.max(2)).max(1);
        let pick: Vec<usize> = idx.into_iter().step_by(stride).collect();
        let mut lip: f64 = 0.0;
        for (a, &i) in pick.iter().enumerate() {
            for &j in &pick[a + 1..] {
                let d = (vol.points[i] - vol.points[j]).norm();
                if d > 0.0 {
                    lip = lip.max((u.vol_value[i] - u.vol_value[j]).norm() / d);
                }
            }
        }
        self.norm_v(u) + lip
    }
}

/// Radii and orders of the standard fluid rule.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RuleSpec {
    pub surface_order: usize,
    pub radial_order: usize,
    /// Outer radius of the compactly supported basis fields.
    pub support_radius: f64,
    /// Radius `R` of the truncation `χ_R`.
    pub truncation_radius: f64,
}

impl Default for RuleSpec {
    fn default() -> Self {
        RuleSpec { surface_order: 10, radial_order: 12, support_radius: 3.0, truncation_radius: 20.0 }
    }
}

/// Fluid rule with breakpoints at the boundary layer, the support edge,
/// `R` and `1.1R`, followed by the mapped tail.
pub fn standard_rule(spec: &crate::geometry::RigidBodySpec, rs: &RuleSpec) -> Result<QuadratureRule> {
    let a = spec.bounding_radius();
    let tail = rs.truncation_radius * (1.0 + crate::geometry::TRUNCATION_BLEND);
    let opts = crate::geometry::QuadratureOptions::new(rs.surface_order, rs.radial_order, tail)
        .with_breakpoints([a + 0.1 * (rs.support_radius - a), rs.support_radius, rs.truncation_radius]);
    QuadratureRule::build(spec, &opts)
}

/// Samples `u` at every volume and surface node of `rule`.
pub fn sample_field(rule: &QuadratureRule, u: &FieldH) -> Samples {
    let (vol_value, vol_grad): (Vec<Vec3>, Vec<Mat3>) = rule.volume.points.par_iter().map(|x| u.fluid.eval(x)).unzip();
    let (surf_value, surf_grad): (Vec<Vec3>, Vec<Mat3>) =
        rule.surface.points.par_iter().map(|x| u.fluid.eval(x)).unzip();
    Samples { vol_value, vol_grad, surf_value, surf_grad, linear: u.linear, angular: u.angular }
}

#[cfg(test)]
mod tests;
