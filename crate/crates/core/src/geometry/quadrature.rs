//! Surface and exterior-volume quadrature.

use std::f64::consts::PI;

use super::gauss::{gauss_legendre, gauss_legendre_on};
use super::{RigidBodySpec, Shape, TriMesh};
use crate::{Error, Result, Vec3};

/// Nodes on the body surface. Normals point out of the body, into the fluid.
#[derive(Clone, Debug, Default)]
pub struct SurfaceRule {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub normals: Vec<Vec3>,
}

/// Nodes in the fluid domain, including the mapped far-field tail.
#[derive(Clone, Debug, Default)]
pub struct VolumeRule {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

/// How the unbounded part of the fluid domain is integrated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailModel {
    /// `r ∈ [start, ∞)` mapped to `s = start/r ∈ (0, 1]` and integrated
    /// with Gauss–Legendre in `s`. Integrands decaying like `|x|⁻ᵏ`,
    /// `k ≥ 4`, become polynomials in `s` and are integrated exactly.
    InverseRadius { start: f64, min_decay: u32 },
}

/// Surface rule, fluid volume rule and the directions of the angular
/// product rule they were built from.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub surface: SurfaceRule,
    pub volume: VolumeRule,
    pub truncation_radius: f64,
    pub tail: TailModel,
}

/// Parameters of [`QuadratureRule::build`].
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureOptions {
    /// Gauss nodes in `cos θ` (and twice as many in `φ`); triangle rule
    /// degree for meshes.
    pub surface_order: usize,
    /// Gauss nodes per radial segment.
    pub radial_order: usize,
    /// Start of the mapped tail.
    pub truncation_radius: f64,
    /// Extra radial breakpoints (e.g. support edges of basis fields).
    pub breakpoints: Vec<f64>,
    /// Gauss nodes in the tail variable.
    pub tail_order: usize,
}

impl QuadratureOptions {
    pub fn new(surface_order: usize, radial_order: usize, truncation_radius: f64) -> Self {
        QuadratureOptions {
            surface_order,
            radial_order,
            truncation_radius,
            breakpoints: Vec::new(),
            tail_order: radial_order,
        }
    }

    pub fn with_breakpoints(mut self, b: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(b);
        self
    }
}

/// Builds the default rule; see [`QuadratureRule::build`].
pub fn make_quadrature(
    spec: &RigidBodySpec,
    surface_order: usize,
    radial_order: usize,
    truncation_radius: f64,
) -> Result<QuadratureRule> {
    QuadratureRule::build(spec, &QuadratureOptions::new(surface_order, radial_order, truncation_radius))
}

/// Directions and solid-angle weights of the product rule: Gauss in
/// `cos θ` times the uniform rule in `φ`. Exact for spherical polynomials
/// of degree `2n − 1`.
pub fn angular_rule(n: usize) -> (Vec<Vec3>, Vec<f64>) {
    let (mu, wmu) = gauss_legendre(n);
    let nphi = 2 * n;
    let mut dirs = Vec::with_capacity(n * nphi);
    let mut w = Vec::with_capacity(n * nphi);
    for (m, wm) in mu.iter().zip(&wmu) {
        let s = (1.0 - m * m).sqrt();
        for j in 0..nphi {
            let phi = 2.0 * PI * (j as f64 + 0.5) / nphi as f64;
            dirs.push(Vec3::new(s * phi.cos(), s * phi.sin(), *m));
            w.push(wm * 2.0 * PI / nphi as f64);
        }
    }
    (dirs, w)
}

impl QuadratureRule {
    /// Tensor-product rule: surface directions × composite radial
    /// Gauss–Legendre on `[boundary, R_trunc]` (breakpoints at the given
    /// radii and at doublings of the body radius) plus the mapped tail.
    pub fn build(spec: &RigidBodySpec, opts: &QuadratureOptions) -> Result<QuadratureRule> {
        spec.validate()?;
        if opts.surface_order < 1 || opts.radial_order < 1 || opts.tail_order < 1 {
            return Err(Error::InvalidInput("quadrature orders must be at least 1".into()));
        }
        let diameter = spec.diameter();
        if !(opts.truncation_radius > diameter) {
            return Err(Error::InvalidInput(format!(
                "truncation radius {} must exceed the body diameter {diameter}",
                opts.truncation_radius
            )));
        }
        let (dirs, dw) = angular_rule(opts.surface_order);
        let (surface, boundary_radius): (SurfaceRule, Vec<f64>) = match &spec.shape {
            Shape::Sphere { radius } => {
                let a = *radius;
                let s = SurfaceRule {
                    points: dirs.iter().map(|d| d * a).collect(),
                    weights: dw.iter().map(|w| w * a * a).collect(),
                    normals: dirs.clone(),
                };
                (s, vec![a; dirs.len()])
            }
            Shape::Mesh(mesh) => {
                let radii = dirs
                    .iter()
                    .map(|d| ray_exit_radius(mesh, d))
                    .collect::<Result<Vec<_>>>()?;
                (mesh_surface_rule(mesh, opts.surface_order), radii)
            }
        };
        let r_t = opts.truncation_radius;
        let inner = spec.bounding_radius();
        let mut breaks: Vec<f64> = opts.breakpoints.iter().copied().filter(|b| *b > 0.0 && *b < r_t).collect();
        let mut b = 2.0 * inner;
        while b < r_t {
            breaks.push(b);
            b *= 2.0;
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-12 * r_t);

        let (ts, tw) = gauss_legendre_on(opts.tail_order, 0.0, 1.0);
        let mut volume = VolumeRule::default();
        for ((d, w), &rb) in dirs.iter().zip(&dw).zip(&boundary_radius) {
            let mut edges = vec![rb];
            edges.extend(breaks.iter().copied().filter(|x| *x > rb * (1.0 + 1e-12)));
            edges.push(r_t);
            for seg in edges.windows(2) {
                let (rs, rw) = gauss_legendre_on(opts.radial_order, seg[0], seg[1]);
                for (r, wr) in rs.iter().zip(&rw) {
                    volume.points.push(d * *r);
                    volume.weights.push(w * wr * r * r);
                }
            }
            // r = R/s, r² dr = R³ s⁻⁴ ds.
            for (s, ws) in ts.iter().zip(&tw) {
                let r = r_t / s;
                volume.points.push(d * r);
                volume.weights.push(w * ws * r_t.powi(3) / s.powi(4));
            }
        }
        Ok(QuadratureRule {
            surface,
            volume,
            truncation_radius: r_t,
            tail: TailModel::InverseRadius { start: r_t, min_decay: 4 },
        })
    }

    /// Sum of surface weights.
    pub fn surface_area(&self) -> f64 {
        self.surface.weights.iter().sum()
    }

    /// Checks the rule invariants (positive weights, unit normals).
    pub fn check(&self) -> Result<()> {
        let s = &self.surface;
        if s.weights.iter().chain(&self.volume.weights).any(|w| !(*w > 0.0)) {
            return Err(Error::Consistency("quadrature weight not positive".into()));
        }
        if s.normals.iter().any(|n| (n.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::Consistency("surface normal not unit length".into()));
        }
        Ok(())
    }
}

/// Triangle rules on the reference triangle: (barycentric u, v, weight)
/// with weights summing to one.
pub fn triangle_rule_points(order: usize) -> Vec<(f64, f64, f64)> {
    match order {
        0 | 1 => vec![(1.0 / 3.0, 1.0 / 3.0, 1.0)],
        2 => vec![(1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0), (2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0), (1.0 / 6.0, 2.0 / 3.0, 1.0 / 3.0)],
        _ => {
            let (a, b) = (0.445_948_490_915_965, 0.091_576_213_509_771);
            let (wa, wb) = (0.223_381_589_678_011, 0.109_951_743_655_322);
            vec![
                (a, a, wa), (1.0 - 2.0 * a, a, wa), (a, 1.0 - 2.0 * a, wa),
                (b, b, wb), (1.0 - 2.0 * b, b, wb), (b, 1.0 - 2.0 * b, wb),
            ]
        }
    }
}

fn mesh_surface_rule(mesh: &TriMesh, order: usize) -> SurfaceRule {
    let rule = triangle_rule_points(order);
    let mut s = SurfaceRule::default();
    for k in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.triangle(k);
        let fnrm = mesh.face_normal(k);
        let area = 0.5 * fnrm.norm();
        let n = fnrm / fnrm.norm();
        for &(u, v, w) in &rule {
            s.points.push(a * (1.0 - u - v) + b * u + c * v);
            s.weights.push(w * area);
            s.normals.push(n);
        }
    }
    s
}

/// Distance from the origin to the mesh along direction `d`; fails unless
/// the ray crosses the surface exactly once (star-shaped about the origin).
fn ray_exit_radius(mesh: &TriMesh, d: &Vec3) -> Result<f64> {
    let mut hits: Vec<f64> = Vec::new();
    for k in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.triangle(k);
        let e1 = b - a;
        let e2 = c - a;
        let p = d.cross(&e2);
        let det = e1.dot(&p);
        if det.abs() < 1e-300 {
            continue;
        }
        let tvec = -a;
        let u = tvec.dot(&p) / det;
        let q = tvec.cross(&e1);
        let v = d.dot(&q) / det;
        let eps = 1e-12;
        if u < -eps || v < -eps || u + v > 1.0 + eps {
            continue;
        }
        let t = e2.dot(&q) / det;
        if t > 0.0 {
            hits.push(t);
        }
    }
    hits.sort_by(f64::total_cmp);
    hits.dedup_by(|x, y| (*x - *y).abs() < 1e-9 * y.abs().max(1.0));
    match hits.as_slice() {
        [t] => Ok(*t),
        [] => Err(Error::DegenerateGeometry("ray from the origin misses the mesh; origin outside body".into())),
        _ => Err(Error::DegenerateGeometry(
            "mesh is not star-shaped about the origin; volume rule unavailable".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_area_and_moments() {
        let q = make_quadrature(&RigidBodySpec::sphere(1.0, 1.0), 4, 6, 4.0).unwrap();
        q.check().unwrap();
        assert_relative_eq!(q.surface_area(), 4.0 * PI, max_relative = 1e-14);
        let s = &q.surface;
        let n: Vec3 = s.normals.iter().zip(&s.weights).map(|(n, w)| n * *w).sum();
        let xn: Vec3 = s.points.iter().zip(&s.normals).zip(&s.weights).map(|((x, n), w)| x.cross(n) * *w).sum();
        assert!(n.norm() < 1e-14 && xn.norm() < 1e-14);
    }

    #[test]
    fn exterior_integral_with_tail() {
        // ∫_{|x|>1} |x|⁻⁶ dx = 4π/3.
        let q = make_quadrature(&RigidBodySpec::sphere(1.0, 1.0), 3, 16, 5.0).unwrap();
        let v: f64 = q.volume.points.iter().zip(&q.volume.weights).map(|(x, w)| w * x.norm().powi(-6)).sum();
        assert_relative_eq!(v, 4.0 * PI / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn mesh_rule_matches_area() {
        let mesh = TriMesh::icosphere(1.0, 2);
        let area = mesh.area();
        let q = make_quadrature(&RigidBodySpec::mesh(mesh, 1.0), 3, 4, 3.0).unwrap();
        q.check().unwrap();
        assert_relative_eq!(q.surface_area(), area, max_relative = 1e-13);
    }

    #[test]
    fn rejects_small_truncation() {
        assert!(make_quadrature(&RigidBodySpec::sphere(1.0, 1.0), 3, 3, 1.5).is_err());
        assert!(make_quadrature(&RigidBodySpec::sphere(1.0, 1.0), 0, 3, 5.0).is_err());
    }
}
