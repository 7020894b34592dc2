//! Vector-field evaluators shared by the solvers: the evaluation trait,
//! solid harmonics and the divergence-free exterior modes.

mod harmonic;
mod modes;

use std::sync::Arc;

pub use harmonic::{solid_harmonics, Poly, SolidHarmonic};
pub use modes::{ModeKind, ExteriorMode, RadialProfile};

use crate::{Mat3, Vec3};

/// A smooth vector field on the fluid domain.
///
/// Gradients follow the convention `G[(i, k)] = ∂_k u_i`.
pub trait VectorField: Send + Sync {
    fn value(&self, x: &Vec3) -> Vec3;

    fn gradient(&self, x: &Vec3) -> Mat3;

    /// Value and gradient together; override when they share work.
    fn eval(&self, x: &Vec3) -> (Vec3, Mat3) {
        (self.value(x), self.gradient(x))
    }

    /// `Δu` when the field can provide it.
    fn laplacian(&self, _x: &Vec3) -> Option<Vec3> {
        None
    }
}

/// The zero field.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroField;

impl VectorField for ZeroField {
    fn value(&self, _x: &Vec3) -> Vec3 {
        Vec3::zeros()
    }
    fn gradient(&self, _x: &Vec3) -> Mat3 {
        Mat3::zeros()
    }
    fn laplacian(&self, _x: &Vec3) -> Option<Vec3> {
        Some(Vec3::zeros())
    }
}

/// Uniform field `c` (rigid translation).
#[derive(Clone, Copy, Debug)]
pub struct ConstantField(pub Vec3);

impl VectorField for ConstantField {
    fn value(&self, _x: &Vec3) -> Vec3 {
        self.0
    }
    fn gradient(&self, _x: &Vec3) -> Mat3 {
        Mat3::zeros()
    }
    fn laplacian(&self, _x: &Vec3) -> Option<Vec3> {
        Some(Vec3::zeros())
    }
}

/// Rigid velocity field `ℓ + r∧x`.
#[derive(Clone, Copy, Debug)]
pub struct RigidField {
    pub linear: Vec3,
    pub angular: Vec3,
}

impl VectorField for RigidField {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.linear + self.angular.cross(x)
    }
    fn gradient(&self, _x: &Vec3) -> Mat3 {
        self.angular.cross_matrix()
    }
    fn laplacian(&self, _x: &Vec3) -> Option<Vec3> {
        Some(Vec3::zeros())
    }
}

/// Finite linear combination `Σ cᵢ fᵢ`.
#[derive(Clone, Default)]
pub struct Combination {
    pub terms: Vec<(f64, Arc<dyn VectorField>)>,
}

impl Combination {
    pub fn new(terms: Vec<(f64, Arc<dyn VectorField>)>) -> Self {
        Combination { terms }
    }
}

impl VectorField for Combination {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.terms.iter().map(|(c, f)| f.value(x) * *c).sum()
    }
    fn gradient(&self, x: &Vec3) -> Mat3 {
        self.terms.iter().map(|(c, f)| f.gradient(x) * *c).sum()
    }
    fn eval(&self, x: &Vec3) -> (Vec3, Mat3) {
        self.terms.iter().fold((Vec3::zeros(), Mat3::zeros()), |(v, g), (c, f)| {
            let (fv, fg) = f.eval(x);
            (v + fv * *c, g + fg * *c)
        })
    }
    fn laplacian(&self, x: &Vec3) -> Option<Vec3> {
        self.terms.iter().try_fold(Vec3::zeros(), |acc, (c, f)| f.laplacian(x).map(|l| acc + l * *c))
    }
}

/// Field given by closures for value and gradient.
pub struct FnField<V, G>
where
    V: Fn(&Vec3) -> Vec3 + Send + Sync,
    G: Fn(&Vec3) -> Mat3 + Send + Sync,
{
    pub value: V,
    pub gradient: G,
}

impl<V, G> VectorField for FnField<V, G>
where
    V: Fn(&Vec3) -> Vec3 + Send + Sync,
    G: Fn(&Vec3) -> Mat3 + Send + Sync,
{
    fn value(&self, x: &Vec3) -> Vec3 {
        (self.value)(x)
    }
    fn gradient(&self, x: &Vec3) -> Mat3 {
        (self.gradient)(x)
    }
}

/// Central-difference divergence of `f` at `x` with step `h`.
pub fn fd_divergence(f: &dyn VectorField, x: &Vec3, h: f64) -> f64 {
    (0..3)
        .map(|k| {
            let mut e = Vec3::zeros();
            e[k] = h;
            (f.value(&(x + e))[k] - f.value(&(x - e))[k]) / (2.0 * h)
        })
        .sum()
}

/// Central-difference Jacobian of `f` at `x` with step `h`.
pub fn fd_gradient(f: &dyn VectorField, x: &Vec3, h: f64) -> Mat3 {
    let mut g = Mat3::zeros();
    for k in 0..3 {
        let mut e = Vec3::zeros();
        e[k] = h;
        g.set_column(k, &((f.value(&(x + e)) - f.value(&(x - e))) / (2.0 * h)));
    }
    g
}

/// Curl from a gradient matrix `G[(i, k)] = ∂_k u_i`.
pub fn curl_of(g: &Mat3) -> Vec3 {
    Vec3::new(g[(2, 1)] - g[(1, 2)], g[(0, 2)] - g[(2, 0)], g[(1, 0)] - g[(0, 1)])
}
