//! Kirchhoff potentials, rigid test fields and the virtual inertia tensor.
//!
//! `Φᵢ` is the decaying harmonic function outside the body with
//! `∂Φᵢ/∂n = Kᵢ`, where `K = (n, x∧n)`. The potentials do not depend on
//! the orientation convention of `n` (flipping it flips both sides).

mod bem;

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};

pub use bem::{gmres, neumann_data, solve_all as solve_bem, BemOptions, BemPotential, BemSolution, BemSurface};

use crate::fields::VectorField;
use crate::geometry::{compute_inertia, make_quadrature, Inertia, RigidBodySpec, Shape, TriMesh};
use crate::{Error, Mat3, Mat6, Result, Vec3, Vec6};

/// Scalar potential with derivatives on the fluid side.
pub trait Potential: Send + Sync + std::fmt::Debug {
    fn value(&self, x: &Vec3) -> f64;
    fn gradient(&self, x: &Vec3) -> Vec3;
    fn hessian(&self, x: &Vec3) -> Mat3;
}

/// Closed-form potentials of a sphere of radius `a` centered at the
/// origin: `Φᵢ = −a³ xᵢ / (2|x|³)` for translations and `Φ ≡ 0` for
/// rotations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpherePotential {
    /// 0-based index (0..3 translations, 3..6 rotations).
    pub index: usize,
    pub radius: f64,
}

impl Potential for SpherePotential {
    fn value(&self, x: &Vec3) -> f64 {
        if self.index >= 3 {
            return 0.0;
        }
        let r = x.norm();
        -self.radius.powi(3) * x[self.index] / (2.0 * r * r * r)
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        if self.index >= 3 {
            return Vec3::zeros();
        }
        let i = self.index;
        let r2 = x.norm_squared();
        let r = r2.sqrt();
        let c = -0.5 * self.radius.powi(3);
        let mut g = x * (-3.0 * x[i] / (r2 * r2 * r));
        g[i] += 1.0 / (r2 * r);
        g * c
    }

    fn hessian(&self, x: &Vec3) -> Mat3 {
        if self.index >= 3 {
            return Mat3::zeros();
        }
        let i = self.index;
        let r2 = x.norm_squared();
        let r5 = r2 * r2 * r2.sqrt();
        let r7 = r5 * r2;
        let c = -0.5 * self.radius.powi(3);
        let mut h = Mat3::zeros();
        for j in 0..3 {
            for k in 0..3 {
                let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                h[(j, k)] = c
                    * (-3.0 * (d(i, j) * x[k] + d(i, k) * x[j] + d(j, k) * x[i]) / r5
                        + 15.0 * x[i] * x[j] * x[k] / r7);
            }
        }
        h
    }
}

/// `ℳ₁ = diag(m Id, 𝒥₀)`, `ℳ₂ = (∫∇Φᵢ·∇Φⱼ)` and `ℳ = ℳ₁ + ℳ₂`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AddedMass {
    pub m1: Mat6,
    pub m2: Mat6,
    pub total: Mat6,
}

impl AddedMass {
    /// Rebuilds `ℳ₁` for new body inertia, keeping `ℳ₂`.
    pub fn with_inertia(&self, mass: f64, tensor: &Mat3) -> Result<AddedMass> {
        let m1 = body_block(mass, tensor);
        let total = m1 + self.m2;
        check_positive(&total, "virtual inertia tensor")?;
        Ok(AddedMass { m1, m2: self.m2, total })
    }
}

fn body_block(mass: f64, tensor: &Mat3) -> Mat6 {
    let mut m1 = Mat6::zeros();
    m1.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Mat3::identity() * mass));
    m1.fixed_view_mut::<3, 3>(3, 3).copy_from(tensor);
    m1
}

fn check_positive(m: &Mat6, what: &str) -> Result<()> {
    let eig = m.symmetric_eigenvalues();
    if !(eig.min() > 0.0) {
        return Err(Error::Consistency(format!("{what} is not positive definite (min eigenvalue {:e})", eig.min())));
    }
    Ok(())
}

/// Which solver produced the potentials.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialPath {
    Analytic,
    Bem,
}

/// The six potentials, the test fields `vᵢ` and `ℳ` for one body.
#[derive(Clone, Debug)]
pub struct KirchhoffContext {
    pub spec: RigidBodySpec,
    pub inertia: Inertia,
    pub potentials: Vec<Arc<dyn Potential>>,
    pub added_mass: AddedMass,
    pub path: PotentialPath,
    pub bem: Option<BemSolution>,
}

impl KirchhoffContext {
    /// Analytic potentials for a sphere, boundary elements for a mesh.
    pub fn new(spec: &RigidBodySpec) -> Result<Self> {
        Self::with_options(spec, &BemOptions::default())
    }

    pub fn with_options(spec: &RigidBodySpec, opts: &BemOptions) -> Result<Self> {
        let inertia = compute_inertia(spec)?;
        match &spec.shape {
            Shape::Sphere { radius } => {
                let potentials: Vec<Arc<dyn Potential>> = (0..6)
                    .map(|i| Arc::new(SpherePotential { index: i, radius: *radius }) as Arc<dyn Potential>)
                    .collect();
                let m2 = sphere_boundary_reduction(spec, &potentials)?;
                let added_mass = finish_added_mass(m2, &inertia, 1e-10)?;
                Ok(KirchhoffContext {
                    spec: spec.clone(),
                    inertia,
                    potentials,
                    added_mass,
                    path: PotentialPath::Analytic,
                    bem: None,
                })
            }
            Shape::Mesh(mesh) => {
                let sol = bem::solve_all(mesh, opts)?;
                let potentials: Vec<Arc<dyn Potential>> =
                    (0..6).map(|i| Arc::new(BemPotential::new(&sol, i)) as Arc<dyn Potential>).collect();
                let m2 = bem_boundary_reduction(&sol);
                let added_mass = finish_added_mass(m2, &inertia, BEM_SYMMETRY_TOL)?;
                Ok(KirchhoffContext {
                    spec: spec.clone(),
                    inertia,
                    potentials,
                    added_mass,
                    path: PotentialPath::Bem,
                    bem: Some(sol),
                })
            }
        }
    }

    /// Boundary-element context for a mesh even when an analytic path
    /// exists (used to validate the solver on sphere meshes).
    pub fn from_mesh(mesh: TriMesh, density: f64, opts: &BemOptions) -> Result<Self> {
        Self::with_options(&RigidBodySpec::mesh(mesh, density), opts)
    }

    /// Rigid test field `vᵢ` (0-based index).
    pub fn test_field(&self, i: usize) -> RigidTestField {
        RigidTestField { index: i, potential: self.potentials[i].clone() }
    }

    /// Fluid velocity `Σ βᵢ∇Φᵢ` of the irrotational flow with body velocity
    /// `β = [ℓ; r]`.
    pub fn potential_flow(&self, beta: &Vec6) -> PotentialFlow {
        PotentialFlow { beta: *beta, potentials: self.potentials.clone() }
    }

    pub fn mass(&self) -> f64 {
        self.inertia.mass
    }

    pub fn inertia_tensor(&self) -> Mat3 {
        self.inertia.tensor
    }
}

/// Relative asymmetry of the boundary-element `ℳ₂` accepted before it is
/// symmetrized.
pub const BEM_SYMMETRY_TOL: f64 = 2e-2;

fn finish_added_mass(m2: Mat6, inertia: &Inertia, sym_tol: f64) -> Result<AddedMass> {
    let scale = m2.norm().max(1e-300);
    let asym = (m2 - m2.transpose()).norm();
    if asym > sym_tol * scale {
        return Err(Error::Consistency(format!("added mass asymmetry {:e} exceeds tolerance", asym / scale)));
    }
    let m2 = (m2 + m2.transpose()) * 0.5;
    let eig = m2.symmetric_eigenvalues();
    if eig.min() < -sym_tol * scale {
        return Err(Error::Consistency(format!("added mass has negative eigenvalue {:e}", eig.min())));
    }
    let m1 = body_block(inertia.mass, &inertia.tensor);
    let total = m1 + m2;
    check_positive(&total, "virtual inertia tensor")?;
    Ok(AddedMass { m1, m2, total })
}

/// `ℳ₂ᵢⱼ = −∮ Φⱼ Kᵢ ds` with the body's outward normal (the Green identity
/// turns the volume integral into this boundary integral).
fn sphere_boundary_reduction(spec: &RigidBodySpec, pots: &[Arc<dyn Potential>]) -> Result<Mat6> {
    let q = make_quadrature(spec, 8, 1, 3.0 * spec.diameter())?;
    let s = &q.surface;
    let mut m2 = Mat6::zeros();
    for ((x, n), w) in s.points.iter().zip(&s.normals).zip(&s.weights) {
        let k = neumann_data(x, n);
        let phi: Vec<f64> = pots.iter().map(|p| p.value(x)).collect();
        for i in 0..6 {
            for j in 0..6 {
                m2[(i, j)] -= w * phi[j] * k[i];
            }
        }
    }
    Ok(m2)
}

fn bem_boundary_reduction(sol: &BemSolution) -> Mat6 {
    let mut m2 = Mat6::zeros();
    for (j, node) in sol.surface.far_nodes() {
        let k = neumann_data(&node.pos, &node.normal);
        for a in 0..6 {
            for b in 0..6 {
                m2[(a, b)] -= node.weight * sol.values[b][j] * k[a];
            }
        }
    }
    m2
}

/// Solves one exterior problem; `i ∈ 1..=6`.
///
/// For meshes this solves all six problems on the shared operator and
/// keeps the requested one.
pub fn solve_kirchhoff(spec: &RigidBodySpec, i: usize) -> Result<Arc<dyn Potential>> {
    if !(1..=6).contains(&i) {
        return Err(Error::InvalidInput(format!("potential index must be in 1..=6, got {i}")));
    }
    spec.validate()?;
    match &spec.shape {
        Shape::Sphere { radius } => Ok(Arc::new(SpherePotential { index: i - 1, radius: *radius })),
        Shape::Mesh(mesh) => {
            let sol = bem::solve_all(mesh, &BemOptions::default())?;
            Ok(Arc::new(BemPotential::new(&sol, i - 1)))
        }
    }
}

/// `ℳ` for a body: analytic for spheres, boundary elements for meshes.
pub fn assemble_added_mass(spec: &RigidBodySpec) -> Result<AddedMass> {
    Ok(KirchhoffContext::new(spec)?.added_mass)
}

/// Test field `vᵢ`: `∇Φᵢ` in the fluid; `eᵢ` or `eᵢ₋₃∧x` in the solid.
#[derive(Clone, Debug)]
pub struct RigidTestField {
    pub index: usize,
    pub potential: Arc<dyn Potential>,
}

impl RigidTestField {
    /// Rigid velocity inside the solid.
    pub fn inside(&self, x: &Vec3) -> Vec3 {
        let (l, r) = self.rigid_part();
        l + r.cross(x)
    }

    /// `(ℓ, r)` of the rigid extension.
    pub fn rigid_part(&self) -> (Vec3, Vec3) {
        let mut e = Vec3::zeros();
        e[self.index % 3] = 1.0;
        if self.index < 3 {
            (e, Vec3::zeros())
        } else {
            (Vec3::zeros(), e)
        }
    }
}

impl VectorField for RigidTestField {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.potential.gradient(x)
    }
    fn gradient(&self, x: &Vec3) -> Mat3 {
        self.potential.hessian(x)
    }
    fn eval(&self, x: &Vec3) -> (Vec3, Mat3) {
        (self.potential.gradient(x), self.potential.hessian(x))
    }
    fn laplacian(&self, _x: &Vec3) -> Option<Vec3> {
        Some(Vec3::zeros())
    }
}

/// Irrotational flow `Σ βᵢ∇Φᵢ`.
#[derive(Clone, Debug)]
pub struct PotentialFlow {
    pub beta: Vec6,
    pub potentials: Vec<Arc<dyn Potential>>,
}

impl VectorField for PotentialFlow {
    fn value(&self, x: &Vec3) -> Vec3 {
        (0..6).filter(|&i| self.beta[i] != 0.0).map(|i| self.potentials[i].gradient(x) * self.beta[i]).sum()
    }
    fn gradient(&self, x: &Vec3) -> Mat3 {
        (0..6).filter(|&i| self.beta[i] != 0.0).map(|i| self.potentials[i].hessian(x) * self.beta[i]).sum()
    }
    fn laplacian(&self, _x: &Vec3) -> Option<Vec3> {
        Some(Vec3::zeros())
    }
}

/// Outcome of the inverse bound `‖ℳ⁻¹[F;T]‖ ≤ 2(m⁻¹‖F‖ + ‖𝒥₀⁻¹‖‖T‖)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates both sides of the inverse bound; `‖𝒥₀⁻¹‖` is the spectral
/// norm, i.e. the reciprocal of the smallest eigenvalue.
pub fn inverse_bound_check(m: &Mat6, mass: f64, j0: &Mat3, force: &Vec3, torque: &Vec3) -> Result<BoundCheck> {
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::solver("added-mass", "virtual inertia tensor is singular or indefinite"))?;
    let rhs_vec = Vec6::new(force.x, force.y, force.z, torque.x, torque.y, torque.z);
    let lhs = chol.solve(&rhs_vec).norm();
    let lam_min = j0.symmetric_eigenvalues().min();
    if !(lam_min > 0.0 && mass > 0.0) {
        return Err(Error::InvalidInput("mass and inertia tensor must be positive".into()));
    }
    let rhs = 2.0 * (force.norm() / mass + torque.norm() / lam_min);
    Ok(BoundCheck { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-12) })
}

/// Result of the grid search for inertia thresholds.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct InertiaThreshold {
    /// Smallest grid value `c` such that the bound holds for every sampled
    /// load with `m ≥ c` and `λ_min(𝒥₀) ≥ c` (all grid points above `c`
    /// tested too); `None` when no grid value qualifies.
    pub threshold: Option<f64>,
    /// `(c, holds for all samples)` per grid value.
    pub grid: Vec<(f64, bool)>,
}

/// Searches the smallest `m̲ = β` on `grid` for which the inverse bound
/// holds for `samples` random loads and random inertia tensors with all
/// eigenvalues at least the grid value.
pub fn search_inertia_threshold(m2: &Mat6, grid: &[f64], samples: usize, seed: u64) -> Result<InertiaThreshold> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut results = Vec::with_capacity(sorted.len());
    for &c in &sorted {
        let mut ok = true;
        for s in 0..samples {
            // First sample uses the extreme case m = c, 𝒥₀ = c Id.
            let (mass, j0) = if s == 0 {
                (c, Mat3::identity() * c)
            } else {
                let q = random_rotation(&mut rng);
                let lam = Vec3::new(c * (1.0 + 3.0 * rng.gen::<f64>()), c * (1.0 + 3.0 * rng.gen::<f64>()), c);
                (c * (1.0 + 3.0 * rng.gen::<f64>()), q * Mat3::from_diagonal(&lam) * q.transpose())
            };
            let m = body_block(mass, &j0) + m2;
            let f = random_unit(&mut rng) * rng.gen::<f64>();
            let t = random_unit(&mut rng) * rng.gen::<f64>();
            if !inverse_bound_check(&m, mass, &j0, &f, &t)?.holds {
                ok = false;
                break;
            }
        }
        results.push((c, ok));
    }
    let mut threshold = None;
    for (c, ok) in results.iter().rev() {
        if *ok {
            threshold = Some(*c);
        } else {
            break;
        }
    }
    Ok(InertiaThreshold { threshold, grid: results })
}

pub(crate) fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub(crate) fn random_rotation(rng: &mut impl Rng) -> Mat3 {
    let axis = random_unit(rng);
    let angle = rng.gen_range(0.0..PI);
    nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).into_inner()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::fd_divergence;

    #[test]
    fn sphere_potential_neumann_data() {
        let p = SpherePotential { index: 0, radius: 1.0 };
        for n in [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.6, 0.0, 0.8), Vec3::new(0.0, 1.0, 0.0)] {
            assert!((p.gradient(&n).dot(&n) - n.x).abs() < 1e-14);
        }
    }

    #[test]
    fn sphere_hessian_matches_fd() {
        let p = SpherePotential { index: 2, radius: 1.3 };
        let x = Vec3::new(0.9, -1.1, 0.7);
        let h = p.hessian(&x);
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = 1e-6;
            let fd = (p.gradient(&(x + e)) - p.gradient(&(x - e))) / 2e-6;
            assert!((fd - h.column(k)).norm() < 1e-8);
        }
        assert!(h.trace().abs() < 1e-14);
    }

    #[test]
    fn sphere_added_mass() {
        let ctx = KirchhoffContext::new(&RigidBodySpec::sphere(1.0, 1.0)).unwrap();
        let m2 = ctx.added_mass.m2;
        let expect = Mat6::from_diagonal(&Vec6::new(2.0 * PI / 3.0, 2.0 * PI / 3.0, 2.0 * PI / 3.0, 0.0, 0.0, 0.0));
        assert!((m2 - expect).amax() < 1e-12);
        assert_eq!(ctx.path, PotentialPath::Analytic);
    }

    #[test]
    fn test_fields() {
        let ctx = KirchhoffContext::new(&RigidBodySpec::sphere(1.0, 1.0)).unwrap();
        let v1 = ctx.test_field(0);
        assert_eq!(v1.inside(&Vec3::new(0.1, 0.2, 0.3)), Vec3::new(1.0, 0.0, 0.0));
        assert!(fd_divergence(&v1, &Vec3::new(1.2, 0.4, -0.3), 1e-5).abs() < 1e-8);
        let v4 = ctx.test_field(3);
        let n = Vec3::new(0.0, 0.6, 0.8);
        assert!((v4.value(&n).dot(&n) - n.cross(&n).x).abs() < 1e-15);
    }

    #[test]
    fn inverse_bound_rotation_block() {
        let ctx = KirchhoffContext::new(&RigidBodySpec::sphere(1.0, 1.0)).unwrap();
        let j0 = ctx.inertia_tensor();
        let b = inverse_bound_check(&ctx.added_mass.total, ctx.mass(), &j0, &Vec3::zeros(), &Vec3::x()).unwrap();
        let exact = (j0.try_inverse().unwrap() * Vec3::x()).norm();
        assert!((b.lhs - exact).abs() < 1e-14 * exact);
        assert!(b.holds);
    }

    #[test]
    fn threshold_search_finds_large_inertia() {
        let ctx = KirchhoffContext::new(&RigidBodySpec::sphere(1.0, 1.0)).unwrap();
        let grid: Vec<f64> = (-3..=3).map(|k| 10f64.powi(k)).collect();
        let t = search_inertia_threshold(&ctx.added_mass.m2, &grid, 50, 1).unwrap();
        assert!(t.threshold.is_some());
        assert!(t.grid.last().unwrap().1);
    }
}
