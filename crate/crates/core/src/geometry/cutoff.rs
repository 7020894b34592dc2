//! Cutoff `χ` near the body and the far-field truncation `χ_R`.

use super::{Bvh, RigidBodySpec, Shape};
use crate::{Error, Mat3, Result, Vec3};

/// Smooth cutoff equal to 1 within distance `c` of the body surface and 0
/// beyond distance `2c`, built from the quintic smoothstep in `d(x)`.
#[derive(Clone, Debug)]
pub struct CutoffField {
    spec: RigidBodySpec,
    bvh: Option<Bvh>,
    width: f64,
}

/// Cutoff of width `c` around the body.
pub fn cutoff_chi(spec: &RigidBodySpec, c: f64) -> Result<CutoffField> {
    spec.validate()?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidInput(format!("cutoff width must be positive, got {c}")));
    }
    let bvh = match &spec.shape {
        Shape::Mesh(m) => Some(Bvh::build(m)),
        Shape::Sphere { .. } => None,
    };
    Ok(CutoffField { spec: spec.clone(), bvh, width: c })
}

fn smoothstep(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let t2 = t * t;
        (
            t2 * t * (10.0 - 15.0 * t + 6.0 * t2),
            30.0 * t2 * (1.0 - t) * (1.0 - t),
            60.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
        )
    }
}

impl CutoffField {
    pub fn width(&self) -> f64 {
        self.width
    }

    /// Distance to the surface, its gradient and Hessian on the fluid side.
    /// Points inside the solid report distance 0.
    fn distance(&self, x: &Vec3) -> (f64, Vec3, Mat3) {
        match &self.spec.shape {
            Shape::Sphere { radius } => {
                let r = x.norm();
                if r <= *radius {
                    return (0.0, Vec3::zeros(), Mat3::zeros());
                }
                let e = x / r;
                (r - radius, e, (Mat3::identity() - e * e.transpose()) / r)
            }
            Shape::Mesh(m) => {
                let bvh = self.bvh.as_ref().expect("mesh cutoff has a BVH");
                let grad = |p: &Vec3| -> (f64, Vec3) {
                    let (q, _) = bvh.closest_point(m, p);
                    let d = (p - q).norm();
                    if d == 0.0 {
                        (0.0, Vec3::zeros())
                    } else {
                        (d, (p - q) / d)
                    }
                };
                let (d, g) = grad(x);
                if d < 2.0 * self.width && self.spec.contains(x) {
                    return (0.0, Vec3::zeros(), Mat3::zeros());
                }
                let h = 1e-5 * self.width;
                let mut hess = Mat3::zeros();
                for k in 0..3 {
                    let mut e = Vec3::zeros();
                    e[k] = h;
                    let gp = grad(&(x + e)).1;
                    let gm = grad(&(x - e)).1;
                    hess.set_column(k, &((gp - gm) / (2.0 * h)));
                }
                (d, g, (hess + hess.transpose()) * 0.5)
            }
        }
    }

    /// `χ(x)`, `∇χ(x)` and the Hessian of `χ`.
    pub fn eval(&self, x: &Vec3) -> (f64, Vec3, Mat3) {
        let c = self.width;
        let (d, g, h) = self.distance(x);
        let t = (2.0 * c - d) / c;
        let (s, s1, s2) = smoothstep(t);
        // dt/dd = -1/c.
        let grad = g * (-s1 / c);
        let hess = g * g.transpose() * (s2 / (c * c)) - h * (s1 / c);
        (s, grad, hess)
    }

    pub fn value(&self, x: &Vec3) -> f64 {
        self.eval(x).0
    }

    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        self.eval(x).1
    }
}

/// Radial truncation `χ_R(x) = g(|x|) x/|x|` with `g(ρ) = ρ` on `[0, R]`,
/// a cubic blend on `[R, 1.1R]` and `g = R` beyond.
///
/// The blend matches value and slope at both ends, so `χ_R` is C¹ and
/// `r∧χ_R` is divergence-free for every `r` (any radial profile has zero
/// curl). The blend overshoots `R` by at most `4R/270`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationField {
    radius: f64,
}

/// Relative width of the blending shell.
pub const TRUNCATION_BLEND: f64 = 0.1;

/// Truncation field for radius `R`; requires `R > R₀` with the body inside
/// `B(0, R₀/2)`.
pub fn truncation_field(spec: &RigidBodySpec, radius: f64) -> Result<TruncationField> {
    let r0 = 2.0 * spec.bounding_radius();
    if !(radius > r0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!("truncation radius {radius} must exceed R0 = {r0}")));
    }
    Ok(TruncationField { radius })
}

impl TruncationField {
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Upper bound of `|χ_R|`.
    pub fn sup_norm_bound(&self) -> f64 {
        self.radius * (1.0 + 4.0 * TRUNCATION_BLEND / 27.0)
    }

    /// Radial profile `g` and its derivative.
    fn profile(&self, rho: f64) -> (f64, f64) {
        let r = self.radius;
        let h = TRUNCATION_BLEND * r;
        if rho <= r {
            (rho, 1.0)
        } else if rho >= r + h {
            (r, 0.0)
        } else {
            let s = rho - r;
            let q = s / h;
            (r + s - 2.0 * s * q + s * q * q, 1.0 - 4.0 * q + 3.0 * q * q)
        }
    }

    pub fn value(&self, x: &Vec3) -> Vec3 {
        let rho = x.norm();
        if rho <= self.radius {
            return *x;
        }
        x * (self.profile(rho).0 / rho)
    }

    /// Jacobian `∂_k χ_i`.
    pub fn gradient(&self, x: &Vec3) -> Mat3 {
        let rho = x.norm();
        if rho <= self.radius {
            return Mat3::identity();
        }
        let (g, dg) = self.profile(rho);
        let e = x / rho;
        let p = e * e.transpose();
        (Mat3::identity() - p) * (g / rho) + p * dg
    }

    /// True when `χ_R = x` on the whole closed ball of radius `rho`.
    pub fn is_identity_within(&self, rho: f64) -> bool {
        rho <= self.radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn cutoff_levels() {
        let chi = cutoff_chi(&RigidBodySpec::sphere(1.0, 1.0), 0.2).unwrap();
        assert_eq!(chi.value(&Vec3::new(1.1, 0.0, 0.0)), 1.0);
        assert_eq!(chi.value(&Vec3::new(0.0, 1.45, 0.0)), 0.0);
        let v = chi.value(&Vec3::new(0.0, 0.0, 1.3));
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cutoff_gradient_matches_fd() {
        let chi = cutoff_chi(&RigidBodySpec::sphere(1.0, 1.0), 0.25).unwrap();
        let x = Vec3::new(0.8, 0.7, 0.6);
        let (_, g, h) = chi.eval(&x);
        let eps = 1e-6;
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = eps;
            let fd = (chi.value(&(x + e)) - chi.value(&(x - e))) / (2.0 * eps);
            assert!((fd - g[k]).abs() < 1e-8);
            let fdg = (chi.gradient(&(x + e)) - chi.gradient(&(x - e))) / (2.0 * eps);
            assert!((fdg - h.column(k)).norm() < 1e-6);
        }
    }

    #[test]
    fn truncation_identity_and_bound() {
        let spec = RigidBodySpec::sphere(1.0, 1.0);
        let t = truncation_field(&spec, 5.0).unwrap();
        let x = Vec3::new(1.0, -2.0, 3.0);
        assert_eq!(t.value(&x), x);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let x = Vec3::new(rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0));
            assert!(t.value(&x).norm() <= t.sup_norm_bound() + 1e-12);
        }
        let far = Vec3::new(0.0, 9.0, 0.0);
        assert!((t.value(&far) - Vec3::new(0.0, 5.0, 0.0)).norm() < 1e-14);
        assert!(truncation_field(&spec, 1.5).is_err());
    }

    #[test]
    fn truncation_jacobian_matches_fd() {
        let t = truncation_field(&RigidBodySpec::sphere(1.0, 1.0), 4.0).unwrap();
        for x in [Vec3::new(2.5, 3.0, 0.4), Vec3::new(0.1, 0.2, 4.2), Vec3::new(5.0, 1.0, 0.0)] {
            let g = t.gradient(&x);
            for k in 0..3 {
                let mut e = Vec3::zeros();
                e[k] = 1e-6;
                let fd = (t.value(&(x + e)) - t.value(&(x - e))) / 2e-6;
                assert!((fd - g.column(k)).norm() < 1e-8);
            }
        }
    }
}
