//! Body shapes, densities and mass moments; quadrature rules; cutoff and
//! truncation fields.

mod cutoff;
mod gauss;
mod mesh;
mod quadrature;

use std::f64::consts::PI;
use std::sync::Arc;

pub use cutoff::{cutoff_chi, truncation_field, CutoffField, TruncationField, TRUNCATION_BLEND};
pub use gauss::{gauss_legendre, gauss_legendre_on};
pub use mesh::{closest_point_on_triangle, solid_angle, winding_number, Bvh, TriMesh};
pub use quadrature::{angular_rule as quadrature_angular, make_quadrature, triangle_rule_points, QuadratureOptions, QuadratureRule, SurfaceRule, TailModel, VolumeRule};

use crate::{Error, Mat3, Result, Vec3};

/// Solid shape in the body frame.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// Ball of the given radius centered at the origin.
    Sphere { radius: f64 },
    /// Closed triangulated surface.
    Mesh(Arc<TriMesh>),
}

/// Reference density of the solid, piecewise constant over shape cells.
///
/// Cells are concentric shells of equal thickness for a sphere and the
/// cones joining each mesh triangle to the vertex centroid for a mesh.
#[derive(Clone, Debug, PartialEq)]
pub enum Density {
    Uniform(f64),
    Cells(Vec<f64>),
}

/// Geometry and density of the rigid body.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidBodySpec {
    pub shape: Shape,
    pub density: Density,
    /// Multiplier applied to the density (infinite-inertia studies).
    pub inertia_scale: f64,
}

/// Mass, center of mass and inertia tensor about the center of mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Inertia {
    pub mass: f64,
    pub center: Vec3,
    pub tensor: Mat3,
}

impl RigidBodySpec {
    pub fn sphere(radius: f64, density: f64) -> Self {
        RigidBodySpec { shape: Shape::Sphere { radius }, density: Density::Uniform(density), inertia_scale: 1.0 }
    }

    pub fn mesh(mesh: TriMesh, density: f64) -> Self {
        RigidBodySpec { shape: Shape::Mesh(Arc::new(mesh)), density: Density::Uniform(density), inertia_scale: 1.0 }
    }

    /// Same body with the density multiplied by `sigma`.
    pub fn with_inertia_scale(mut self, sigma: f64) -> Self {
        self.inertia_scale = sigma;
        self
    }

    /// Checks the type invariants.
    pub fn validate(&self) -> Result<()> {
        match &self.shape {
            Shape::Sphere { radius } if !(*radius > 0.0 && radius.is_finite()) => {
                return Err(Error::InvalidInput(format!("sphere radius must be positive, got {radius}")))
            }
            _ => {}
        }
        if !(self.inertia_scale > 0.0 && self.inertia_scale.is_finite()) {
            return Err(Error::InvalidInput(format!("inertia scale must be positive, got {}", self.inertia_scale)));
        }
        let cells = self.cell_count();
        match &self.density {
            Density::Uniform(r) if !(*r > 0.0 && r.is_finite()) => {
                Err(Error::InvalidInput(format!("density must be positive, got {r}")))
            }
            Density::Cells(v) if v.len() != cells => Err(Error::InvalidInput(format!(
                "density has {} cells, shape has {cells}",
                v.len()
            ))),
            Density::Cells(v) if v.iter().any(|r| !(*r > 0.0 && r.is_finite())) => {
                Err(Error::InvalidInput("every density cell must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    fn cell_count(&self) -> usize {
        match (&self.shape, &self.density) {
            (Shape::Mesh(m), _) => m.triangles().len(),
            (Shape::Sphere { .. }, Density::Cells(v)) => v.len(),
            (Shape::Sphere { .. }, Density::Uniform(_)) => 1,
        }
    }

    fn cell_density(&self, k: usize) -> f64 {
        self.inertia_scale
            * match &self.density {
                Density::Uniform(r) => *r,
                Density::Cells(v) => v[k],
            }
    }

    /// Radius of a ball centered at the origin containing the body.
    pub fn bounding_radius(&self) -> f64 {
        match &self.shape {
            Shape::Sphere { radius } => *radius,
            Shape::Mesh(m) => m.max_radius(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Sphere { radius } => 2.0 * radius,
            Shape::Mesh(m) => m.diameter(),
        }
    }

    /// Surface area of the body.
    pub fn surface_area(&self) -> f64 {
        match &self.shape {
            Shape::Sphere { radius } => 4.0 * PI * radius * radius,
            Shape::Mesh(m) => m.area(),
        }
    }

    /// Unsigned distance from `x` to the body surface.
    pub fn surface_distance(&self, x: &Vec3, bvh: Option<&Bvh>) -> f64 {
        match &self.shape {
            Shape::Sphere { radius } => (x.norm() - radius).abs(),
            Shape::Mesh(m) => {
                let q = match bvh {
                    Some(b) => b.closest_point(m, x).0,
                    None => Bvh::build(m).closest_point(m, x).0,
                };
                (x - q).norm()
            }
        }
    }

    /// True when `x` lies inside the solid.
    pub fn contains(&self, x: &Vec3) -> bool {
        match &self.shape {
            Shape::Sphere { radius } => x.norm() < *radius,
            Shape::Mesh(m) => winding_number(m, x) > 0.5,
        }
    }

    /// Mesh translated so that its center of mass is the origin; spheres
    /// are returned unchanged.
    pub fn recentered(&self) -> Result<Self> {
        let inertia = compute_inertia(self)?;
        Ok(match &self.shape {
            Shape::Sphere { .. } => self.clone(),
            Shape::Mesh(m) => RigidBodySpec {
                shape: Shape::Mesh(Arc::new(m.translated(-inertia.center))),
                ..self.clone()
            },
        })
    }
}

/// Mass `m = ∫ρ`, center `h₀ = m⁻¹∫xρ` and inertia tensor
/// `𝒥₀ = ∫ρ(|x−h₀|² Id − (x−h₀)⊗(x−h₀))`.
pub fn compute_inertia(spec: &RigidBodySpec) -> Result<Inertia> {
    spec.validate()?;
    // Accumulate ∫ρ, ∫ρx and ∫ρ x⊗x.
    let (mut m, mut first, mut second) = (0.0, Vec3::zeros(), Mat3::zeros());
    match &spec.shape {
        Shape::Sphere { radius } => {
            let n = spec.cell_count();
            for k in 0..n {
                let r0 = radius * k as f64 / n as f64;
                let r1 = radius * (k + 1) as f64 / n as f64;
                let rho = spec.cell_density(k);
                m += rho * 4.0 * PI / 3.0 * (r1.powi(3) - r0.powi(3));
                // ∫ x_i x_j over a shell is δ_ij (4π/15)(r1⁵ − r0⁵).
                second += Mat3::identity() * (rho * 4.0 * PI / 15.0 * (r1.powi(5) - r0.powi(5)));
            }
        }
        Shape::Mesh(mesh) => {
            let apex = mesh.vertices().iter().sum::<Vec3>() / mesh.vertices().len() as f64;
            for k in 0..mesh.triangles().len() {
                let [a, b, c] = mesh.triangle(k);
                let vol = (a - apex).dot(&(b - apex).cross(&(c - apex))) / 6.0;
                let rho = spec.cell_density(k);
                let sum = apex + a + b + c;
                m += rho * vol;
                first += sum * (rho * vol / 4.0);
                let outer = apex * apex.transpose() + a * a.transpose() + b * b.transpose() + c * c.transpose();
                second += (outer + sum * sum.transpose()) * (rho * vol / 20.0);
            }
        }
    }
    if !(m > 0.0) {
        return Err(Error::DegenerateGeometry(format!("body mass is {m}")));
    }
    let center = first / m;
    let cov = second - center * center.transpose() * m;
    let tensor = Mat3::identity() * cov.trace() - cov;
    let tensor = (tensor + tensor.transpose()) * 0.5;
    let eig = tensor.symmetric_eigenvalues();
    if !(eig.min() > 0.0) {
        return Err(Error::DegenerateGeometry("inertia tensor is not positive definite".into()));
    }
    Ok(Inertia { mass: m, center, tensor })
}
