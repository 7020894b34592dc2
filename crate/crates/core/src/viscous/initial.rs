//! Named initial data and their `ℋ`-orthogonal projection onto a basis.

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::GalerkinBasis;
use super::system::GalerkinSystem;
use crate::fields::{Combination, ExteriorMode, ModeKind, Poly, RadialProfile, SolidHarmonic, VectorField};
use crate::forms::FieldH;
use crate::geometry::QuadratureRule;
use crate::kirchhoff::KirchhoffContext;
use crate::{Error, Result, Vec3, Vec6};

/// Compactly supported vortical part of the initial data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VorticalProfile {
    /// Azimuthal swirl `f(r) axis∧x` around the body.
    Swirl { amplitude: f64, axis: [f64; 3] },
    /// Meridional circulation (poloidal field of `H = axis·x`), a vortex
    /// ring wrapped around the body.
    Ring { amplitude: f64, axis: [f64; 3] },
}

/// Rigid velocity plus vortical profiles.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub linear: [f64; 3],
    pub angular: [f64; 3],
    #[serde(default)]
    pub profiles: Vec<VorticalProfile>,
}

impl InitialData {
    /// `u₀ = Σ βᵢvᵢ + profiles`, profiles supported in `[a, support]`.
    pub fn field(&self, kctx: &KirchhoffContext, support: f64) -> Result<FieldH> {
        let a = kctx.spec.bounding_radius();
        if !(support > a) {
            return Err(Error::InvalidInput("profile support must exceed the body radius".into()));
        }
        let beta = Vec6::from_iterator(self.linear.iter().chain(&self.angular).copied());
        let k = FieldH::kirchhoff(kctx, &beta);
        let mut terms: Vec<(f64, Arc<dyn VectorField>)> = vec![(1.0, k.fluid.clone())];
        for p in &self.profiles {
            let (kind, amp, axis) = match *p {
                VorticalProfile::Swirl { amplitude, axis } => (ModeKind::Toroidal, amplitude, axis),
                VorticalProfile::Ring { amplitude, axis } => (ModeKind::Poloidal, amplitude, axis),
            };
            let axis = Vec3::from(axis);
            if !(axis.norm() > 0.0) {
                return Err(Error::InvalidInput("profile axis must be nonzero".into()));
            }
            let axis = axis.normalize();
            let poly = (0..3).fold(Poly::default(), |p, i| p.add(&Poly::monomial(unit_exp(i), axis[i]), 1.0));
            let power = if kind == ModeKind::Poloidal { 3 } else { 2 };
            let mode = ExteriorMode {
                kind,
                harmonic: SolidHarmonic::new(1, poly),
                profile: RadialProfile { inner: a, outer: support, power },
                scale: 1.0,
            };
            // Unit peak speed before the amplitude.
            let peak = (0..64)
                .map(|s| {
                    let r = a + (support - a) * (s as f64 + 0.5) / 64.0;
                    let e = if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
                    let perp = (e - axis * axis.dot(&e)).normalize();
                    mode.value(&(perp * r)).norm().max(mode.value(&(axis * r)).norm())
                })
                .fold(0.0, f64::max);
            terms.push((amp / peak.max(1e-300), Arc::new(mode)));
        }
        Ok(FieldH { fluid: Arc::new(Combination::new(terms)), ..k })
    }
}

fn unit_exp(i: usize) -> [u32; 3] {
    let mut e = [0; 3];
    e[i] = 1;
    e
}

/// `((u, wⱼ)_ℋ)ⱼ` by quadrature on `rule`.
pub fn moments(sys: &GalerkinSystem, basis: &GalerkinBasis, rule: &QuadratureRule, u: &FieldH) -> DVector<f64> {
    let vol = &rule.volume;
    let uv: Vec<Vec3> = vol.points.par_iter().map(|x| u.fluid.value(x)).collect();
    let vals: Vec<f64> = basis
        .fields
        .par_iter()
        .map(|w| {
            let fluid: f64 = vol
                .points
                .iter()
                .zip(&vol.weights)
                .zip(&uv)
                .map(|((x, wt), a)| wt * a.dot(&w.fluid.value(x)))
                .sum();
            fluid + sys.mass * u.linear.dot(&w.linear) + (sys.inertia * u.angular).dot(&w.angular)
        })
        .collect();
    DVector::from_vec(vals)
}

/// Coefficients of the `ℋ`-orthogonal projection of `u` onto the basis.
pub fn project(sys: &GalerkinSystem, basis: &GalerkinBasis, rule: &QuadratureRule, u: &FieldH) -> DVector<f64> {
    sys.project_moments(&moments(sys, basis, rule, u))
}
