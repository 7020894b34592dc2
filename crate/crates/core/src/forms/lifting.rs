//! Divergence-free extension of a rigid velocity into the fluid.

use std::sync::Arc;

use super::FieldH;
use crate::fields::VectorField;
use crate::geometry::CutoffField;
use crate::{Mat3, Vec3};

/// `ũ_𝒮 = curl(χ ψ)` with the stream function `ψ = ½(ℓ∧x − r|x|²)`.
///
/// `curl ψ = ℓ + r∧x`, so `ũ_𝒮 = χ(ℓ + r∧x) + ∇χ∧ψ`: equal to the rigid
/// velocity where `χ = 1` and zero where `χ = 0`.
#[derive(Clone, Debug)]
pub struct SolidLifting {
    pub chi: CutoffField,
    pub linear: Vec3,
    pub angular: Vec3,
}

impl SolidLifting {
    fn psi(&self, x: &Vec3) -> Vec3 {
        (self.linear.cross(x) - self.angular * x.norm_squared()) * 0.5
    }
}

impl VectorField for SolidLifting {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.eval(x).0
    }

    fn gradient(&self, x: &Vec3) -> Mat3 {
        self.eval(x).1
    }

    fn eval(&self, x: &Vec3) -> (Vec3, Mat3) {
        let (c, gc, hc) = self.chi.eval(x);
        let us = self.linear + self.angular.cross(x);
        let psi = self.psi(x);
        let value = us * c + gc.cross(&psi);
        // ∂_k ψ_m = ½(ℓ∧e_k)_m − r_m x_k
        let mut dpsi = Mat3::zeros();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = 1.0;
            dpsi.set_column(k, &(self.linear.cross(&e) * 0.5 - self.angular * x[k]));
        }
        let mut grad = us * gc.transpose() + self.angular.cross_matrix() * c;
        for k in 0..3 {
            let col = hc.column(k).into_owned().cross(&psi) + gc.cross(&dpsi.column(k).into_owned());
            let cur = grad.column(k) + col;
            grad.set_column(k, &cur);
        }
        (value, grad)
    }
}

/// Lifting of the rigid motion `(ℓ, r)` as an element of ℋ.
pub fn solid_lifting(linear: Vec3, angular: Vec3, chi: &CutoffField) -> FieldH {
    FieldH {
        fluid: Arc::new(SolidLifting { chi: chi.clone(), linear, angular }),
        linear,
        angular,
        in_v: true,
        matched_trace: true,
    }
}
