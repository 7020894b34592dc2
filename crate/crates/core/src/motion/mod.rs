//! World-frame reconstruction of the body motion and the change of
//! variables between the body frame and the spatial frame.
//!
//! `Q' = Q [r]×` (so `Q'x = R∧(Qx)` with `R = Q r`) and `h' = Q ℓ`.

use std::io::Write;
use std::sync::Arc;

use crate::fields::VectorField;
use crate::{Error, Mat3, Result, Vec3};

/// Skew matrix `[w]×` with `[w]× x = w∧x`.
pub fn skew(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// `exp([w]×)` by the Rodrigues formula.
pub fn rodrigues(w: &Vec3) -> Mat3 {
    let th = w.norm();
    let k = skew(w);
    let (a, b) = if th < 1e-6 {
        (1.0 - th * th / 6.0, 0.5 - th * th / 24.0)
    } else {
        (th.sin() / th, (1.0 - th.cos()) / (th * th))
    };
    Mat3::identity() + k * a + k * k * b
}

/// Nearest rotation (polar factor).
pub fn orthonormalize(q: &Mat3) -> Mat3 {
    let svd = q.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        r = u2 * vt;
    }
    r
}

/// Body-frame velocities and the reconstructed position `h` and rotation `Q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionSample {
    pub t: f64,
    pub linear: Vec3,
    pub angular: Vec3,
    pub h: Vec3,
    pub q: Mat3,
}

impl MotionSample {
    /// World angular velocity `R = Q r`.
    pub fn world_angular(&self) -> Vec3 {
        self.q * self.angular
    }

    /// `h' = Q ℓ`.
    pub fn world_linear(&self) -> Vec3 {
        self.q * self.linear
    }
}

/// Trajectory of the body in the spatial frame.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyMotion {
    pub samples: Vec<MotionSample>,
}

/// Integrates `Q` on the rotation group (midpoint exponential per step,
/// polar re-orthonormalization) and `h` by the trapezoid rule, from
/// `Q(0) = Id`, `h(0) = 0`.
pub fn reconstruct_world_frame(times: &[f64], rigid: &[(Vec3, Vec3)]) -> Result<BodyMotion> {
    if times.is_empty() || times.len() != rigid.len() {
        return Err(Error::InvalidInput("motion needs matching, nonempty time and velocity samples".into()));
    }
    if times.len() > 1 {
        let dt = times[1] - times[0];
        if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0)) {
            return Err(Error::InvalidInput("motion samples must be uniform in time".into()));
        }
    }
    let mut samples = Vec::with_capacity(times.len());
    let (mut h, mut q) = (Vec3::zeros(), Mat3::identity());
    samples.push(MotionSample { t: times[0], linear: rigid[0].0, angular: rigid[0].1, h, q });
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        let r_mid = (rigid[k - 1].1 + rigid[k].1) * 0.5;
        let q_next = orthonormalize(&(q * rodrigues(&(r_mid * dt))));
        h += (q * rigid[k - 1].0 + q_next * rigid[k].0) * (0.5 * dt);
        q = q_next;
        samples.push(MotionSample { t: times[k], linear: rigid[k].0, angular: rigid[k].1, h, q });
    }
    Ok(BodyMotion { samples })
}

impl BodyMotion {
    /// `(h, Q)` at time `t` (exponential interpolation between samples).
    pub fn at(&self, t: f64) -> Result<(Vec3, Mat3)> {
        let s = &self.samples;
        let (t0, t1) = (s[0].t, s[s.len() - 1].t);
        let tol = 1e-12 * t1.abs().max(1.0);
        if !(t >= t0 - tol && t <= t1 + tol) {
            return Err(Error::InvalidInput(format!("time {t} outside the sampled range [{t0}, {t1}]")));
        }
        let k = s.partition_point(|m| m.t <= t).saturating_sub(1).min(s.len().saturating_sub(2));
        if s.len() == 1 {
            return Ok((s[0].h, s[0].q));
        }
        let (a, b) = (&s[k], &s[k + 1]);
        let tau = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        let r_mid = (a.angular + b.angular) * 0.5;
        let q = orthonormalize(&(a.q * rodrigues(&(r_mid * (tau * (b.t - a.t))))));
        Ok((a.h + (b.h - a.h) * tau, q))
    }

    /// `𝒥(t) = Q 𝒥₀ Qᵀ` at every sample.
    pub fn world_inertia(&self, j0: &Mat3) -> Vec<Mat3> {
        self.samples.iter().map(|s| s.q * j0 * s.q.transpose()).collect()
    }

    /// Largest `‖QᵀQ − Id‖` and smallest `det Q` over the samples.
    pub fn orthogonality_defect(&self) -> (f64, f64) {
        self.samples.iter().fold((0.0, f64::INFINITY), |(e, d), s| {
            ((s.q.transpose() * s.q - Mat3::identity()).norm().max(e), s.q.determinant().min(d))
        })
    }

    /// `U(t, y) = Q u(Qᵀ(y − h))`.
    pub fn to_world_frame(&self, u: Arc<dyn VectorField>, t: f64) -> Result<FrameMap> {
        let (h, q) = self.at(t)?;
        Ok(FrameMap { field: u, q, h, to_world: true })
    }

    /// `u(t, x) = Qᵀ U(Qx + h)`.
    pub fn to_body_frame(&self, u: Arc<dyn VectorField>, t: f64) -> Result<FrameMap> {
        let (h, q) = self.at(t)?;
        Ok(FrameMap { field: u, q, h, to_world: false })
    }

    /// CSV with columns `t, ℓ, r, h, Q` (row-major), 17 significant digits.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "t,l1,l2,l3,r1,r2,r3,h1,h2,h3,q11,q12,q13,q21,q22,q23,q31,q32,q33")?;
        for s in &self.samples {
            let mut row = vec![s.t];
            row.extend(s.linear.iter().chain(s.angular.iter()).chain(s.h.iter()));
            for i in 0..3 {
                for j in 0..3 {
                    row.push(s.q[(i, j)]);
                }
            }
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// A velocity field moved between frames by a fixed rigid map.
#[derive(Clone)]
pub struct FrameMap {
    pub field: Arc<dyn VectorField>,
    pub q: Mat3,
    pub h: Vec3,
    pub to_world: bool,
}

impl FrameMap {
    fn source_point(&self, y: &Vec3) -> Vec3 {
        if self.to_world {
            self.q.transpose() * (y - self.h)
        } else {
            self.q * y + self.h
        }
    }
}

impl VectorField for FrameMap {
    fn value(&self, y: &Vec3) -> Vec3 {
        let v = self.field.value(&self.source_point(y));
        if self.to_world {
            self.q * v
        } else {
            self.q.transpose() * v
        }
    }

    fn gradient(&self, y: &Vec3) -> Mat3 {
        let g = self.field.gradient(&self.source_point(y));
        if self.to_world {
            self.q * g * self.q.transpose()
        } else {
            self.q.transpose() * g * self.q
        }
    }
}
