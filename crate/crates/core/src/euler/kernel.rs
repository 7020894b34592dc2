//! Gaussian vortex blobs: regularized Biot–Savart kernel and the exact
//! free-space energy of a blob configuration.

use std::f64::consts::PI;

use crate::{Mat3, Vec3};

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// Blob with circulation-weighted strength `α = ω·vol`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VortexParticle {
    pub position: Vec3,
    pub strength: Vec3,
}

/// `f(r) = q(r/ε)/(4πr³)` and `f′(r)/r`, where `q` is the Gaussian mass
/// inside radius `r`: `q(ρ) = erf(ρ/√2) − √(2/π) ρ e^{−ρ²/2}`.
fn radial(r: f64, eps: f64) -> (f64, f64) {
    let rho = r / eps;
    let c = SQRT_2_OVER_PI / (4.0 * PI * eps.powi(3));
    if rho < 0.1 {
        // q(ρ)/(√(2/π)ρ³) = Σ (−1/2)ᵏ ρ²ᵏ / (k!(2k+3)).
        let r2 = rho * rho;
        let (mut f, mut df, mut t) = (0.0, 0.0, 1.0);
        for k in 0..8 {
            let kf = k as f64;
            f += t / (2.0 * kf + 3.0);
            if k > 0 {
                df += 2.0 * kf * t / (r2 * (2.0 * kf + 3.0));
            }
            t *= -0.5 * r2 / (kf + 1.0);
        }
        let df = if rho == 0.0 { -0.2 } else { df };
        return (c * f, c * df / (eps * eps));
    }
    let g = (-0.5 * rho * rho).exp();
    let q = libm::erf(rho / std::f64::consts::SQRT_2) - SQRT_2_OVER_PI * rho * g;
    let dq = SQRT_2_OVER_PI * rho * rho * g;
    let r3 = r * r * r;
    let f = q / (4.0 * PI * r3);
    let df = dq / (eps * 4.0 * PI * r3) - 3.0 * f / r;
    (f, df / r)
}

/// Velocity induced at `x` by one blob.
pub fn blob_velocity(x: &Vec3, p: &VortexParticle, eps: f64) -> Vec3 {
    let d = x - p.position;
    let (f, _) = radial(d.norm(), eps);
    p.strength.cross(&d) * f
}

/// Velocity and gradient (`G[(i, k)] = ∂_k u_i`) induced at `x` by one blob.
pub fn blob_velocity_gradient(x: &Vec3, p: &VortexParticle, eps: f64) -> (Vec3, Mat3) {
    let d = x - p.position;
    let (f, dfr) = radial(d.norm(), eps);
    let ad = p.strength.cross(&d);
    let grad = ad * d.transpose() * dfr + crate::motion::skew(&p.strength) * f;
    (ad * f, grad)
}

/// Velocity of a blob set at `x`.
pub fn biot_savart(x: &Vec3, particles: &[VortexParticle], eps: f64) -> Vec3 {
    particles.iter().map(|p| blob_velocity(x, p, eps)).sum()
}

/// Velocity and gradient of a blob set at `x`.
pub fn biot_savart_gradient(x: &Vec3, particles: &[VortexParticle], eps: f64) -> (Vec3, Mat3) {
    particles.iter().fold((Vec3::zeros(), Mat3::zeros()), |(u, g), p| {
        let (du, dg) = blob_velocity_gradient(x, p, eps);
        (u + du, g + dg)
    })
}

/// Pair kernel `M(d)` with `∫_ℝ³ |u|² = Σ_pq α_pᵀ M(x_p − x_q) α_q`:
/// `M = f_E(d) I + ∇∇h(d)`, where `f_E = erf(d/2ε)/(4πd)` is the potential
/// of the doubled blob and `−Δh = f_E`.
pub fn energy_kernel(d: &Vec3, eps: f64) -> Mat3 {
    let c = 2.0 * eps;
    let r = d.norm();
    let k = 1.0 / (2.0 * PI.powf(1.5));
    let x = r / c;
    if x < 1e-2 {
        let x2 = x * x;
        let fe = k / c * (1.0 - x2 / 3.0 + x2 * x2 / 10.0 - x2 * x2 * x2 / 42.0);
        let hp_over_r = -k / c * (1.0 / 3.0 - x2 / 15.0 + x2 * x2 / 70.0);
        let hpp = -k / c * (1.0 / 3.0 - x2 / 5.0 + x2 * x2 / 14.0);
        let e = if r > 0.0 { d / r } else { Vec3::zeros() };
        let ee = e * e.transpose();
        return Mat3::identity() * (fe + hp_over_r) + ee * (hpp - hp_over_r);
    }
    let erf = libm::erf(x);
    let fe = erf / (4.0 * PI * r);
    let hp = -((r * r / 2.0 - c * c / 4.0) * erf + c * r / (2.0 * PI.sqrt()) * (-x * x).exp()) / (4.0 * PI * r * r);
    let hpp = -fe - 2.0 * hp / r;
    let e = d / r;
    let ee = e * e.transpose();
    Mat3::identity() * (fe + hp / r) + ee * (hpp - hp / r)
}

/// `∫_ℝ³ |u|²` of the blob field.
pub fn free_space_energy(particles: &[VortexParticle], eps: f64) -> f64 {
    let mut s = 0.0;
    for p in particles {
        for q in particles {
            s += p.strength.dot(&(energy_kernel(&(p.position - q.position), eps) * q.strength));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{curl_of, fd_gradient, FnField};
    use crate::geometry::gauss_legendre_on;
    use crate::geometry::quadrature_angular;

    #[test]
    fn gradient_matches_finite_differences() {
        let p = VortexParticle { position: Vec3::new(0.1, -0.2, 0.3), strength: Vec3::new(0.4, 1.0, -0.5) };
        let eps = 0.3;
        let f = FnField {
            value: move |x: &Vec3| blob_velocity(x, &p, eps),
            gradient: move |x: &Vec3| blob_velocity_gradient(x, &p, eps).1,
        };
        for x in [Vec3::new(0.5, 0.1, 0.2), Vec3::new(0.1, -0.2, 0.3001), Vec3::new(2.0, 1.0, -1.0)] {
            let g = blob_velocity_gradient(&x, &p, eps).1;
            let fd = fd_gradient(&f, &x, 1e-5);
            assert!((g - fd).norm() < 1e-7 * g.norm().max(1.0), "{x:?}");
            assert!(g.trace().abs() < 1e-12 * g.norm().max(1.0));
        }
        // Far field is the singular Biot–Savart law.
        let x = Vec3::new(10.0, 3.0, -4.0);
        let d = x - p.position;
        let exact = p.strength.cross(&d) / (4.0 * PI * d.norm().powi(3));
        assert!((blob_velocity(&x, &p, eps) - exact).norm() < 1e-12 * exact.norm());
        // Curl at the center recovers the Gaussian peak (2/3 of it from the
        // solenoidal projection of a point strength).
        let c = curl_of(&blob_velocity_gradient(&p.position, &p, eps).1);
        let peak = (2.0 * PI * eps * eps).powf(-1.5);
        assert!((c - p.strength * (2.0 / 3.0 * peak)).norm() < 1e-10 * peak);
    }

    #[test]
    fn energy_kernel_matches_quadrature() {
        let eps = 0.4;
        let ps = [
            VortexParticle { position: Vec3::new(0.3, 0.0, 0.0), strength: Vec3::new(0.0, 1.0, 0.2) },
            VortexParticle { position: Vec3::new(-0.3, 0.1, 0.0), strength: Vec3::new(0.5, -0.4, 0.3) },
        ];
        // Composite radial rule with the mapped tail.
        let (dirs, dw) = quadrature_angular(24);
        let mut edges = vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0];
        edges.dedup();
        let mut total = 0.0;
        for (d, w) in dirs.iter().zip(&dw) {
            for seg in edges.windows(2) {
                let (rs, rw) = gauss_legendre_on(24, seg[0], seg[1]);
                for (r, wr) in rs.iter().zip(&rw) {
                    total += w * wr * r * r * biot_savart(&(d * *r), &ps, eps).norm_squared();
                }
            }
            let (ss, sw) = gauss_legendre_on(24, 0.0, 1.0);
            for (s, ws) in ss.iter().zip(&sw) {
                let r = 8.0 / s;
                total += w * ws * 512.0 / s.powi(4) * biot_savart(&(d * r), &ps, eps).norm_squared();
            }
        }
        let exact = free_space_energy(&ps, eps);
        assert!((total - exact).abs() < 1e-8 * exact, "{total} vs {exact}");
        // Series branch is continuous with the closed form.
        let a = energy_kernel(&Vec3::new(0.0, 0.0, 0.008 - 1e-9), 0.4);
        let b = energy_kernel(&Vec3::new(0.0, 0.0, 0.008 + 1e-9), 0.4);
        assert!((a - b).norm() < 1e-11, "{:e}", (a - b).norm());
        let p = VortexParticle { position: Vec3::zeros(), strength: Vec3::x() };
        let x = |r: f64| Vec3::new(0.0, r, 0.0);
        let (u0, g0) = blob_velocity_gradient(&x(0.04 - 1e-12), &p, 0.4);
        let (u1, g1) = blob_velocity_gradient(&x(0.04 + 1e-12), &p, 0.4);
        assert!((u0 - u1).norm() < 1e-11 && (g0 - g1).norm() < 1e-11, "{:e} {:e} {g0}", (u0 - u1).norm(), (g0 - g1).norm());
    }
}
