//! Divergence-free exterior modes: toroidal and poloidal fields built from
//! solid harmonics and compactly supported radial profiles.

use super::{SolidHarmonic, VectorField};
use crate::{Mat3, Vec3};

/// Profile `p(s) = sᵏ (1 − s)⁴` with `s = (r − a)/(b − a)`, zero outside
/// `[a, b]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialProfile {
    pub inner: f64,
    pub outer: f64,
    pub power: u32,
}

impl RadialProfile {
    /// `p` and its first three derivatives in `r`.
    pub fn eval(&self, r: f64) -> [f64; 4] {
        // Nodes placed on the support edges may round to just outside.
        let slack = 1e-12 * self.outer;
        if r < self.inner - slack || r > self.outer + slack {
            return [0.0; 4];
        }
        let len = self.outer - self.inner;
        let s = ((r - self.inner) / len).clamp(0.0, 1.0);
        let k = self.power as i32;
        // Derivatives of sᵏ and (1 − s)⁴ in s.
        let pw = |n: i32, d: i32| -> f64 {
            if d > n {
                return 0.0;
            }
            let c: f64 = (0..d).map(|j| (n - j) as f64).product();
            c * s.powi(n - d)
        };
        let q = 1.0 - s;
        let qd = [q.powi(4), -4.0 * q.powi(3), 12.0 * q * q, -24.0 * q];
        let a = [pw(k, 0), pw(k, 1), pw(k, 2), pw(k, 3)];
        let binom = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];
        let mut out = [0.0; 4];
        for d in 0..4 {
            let v: f64 = (0..=d).map(|j| binom[d][j] * a[j] * qd[d - j]).sum();
            out[d] = v / len.powi(d as i32);
        }
        out
    }
}

/// Toroidal `f(r) ∇H×x` or poloidal `α∇H + βHx` mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ModeKind {
    Toroidal,
    Poloidal,
}

/// Exterior mode: divergence-free, zero normal velocity at `r = a`,
/// supported in `a ≤ |x| ≤ b`.
///
/// Poloidal modes use `α = g′r + (l+1)g`, `β = −l g′/r`; their radial
/// component is `l(l+1) g H / r`.
#[derive(Clone, Debug)]
pub struct ExteriorMode {
    pub kind: ModeKind,
    pub harmonic: SolidHarmonic,
    pub profile: RadialProfile,
    pub scale: f64,
}

impl ExteriorMode {
    /// Value, gradient and Laplacian.
    pub fn eval_full(&self, x: &Vec3) -> (Vec3, Mat3, Vec3) {
        let r = x.norm();
        let p = self.profile.eval(r);
        if r == 0.0 || p.iter().all(|v| *v == 0.0) {
            return (Vec3::zeros(), Mat3::zeros(), Vec3::zeros());
        }
        let l = self.harmonic.degree as f64;
        let (h, gh, hh) = self.harmonic.eval(x);
        let e = x / r;
        let s = self.scale;
        match self.kind {
            ModeKind::Toroidal => {
                let [f, f1, f2, _] = p;
                let lvec = gh.cross(x);
                // ∂_m L_i = ε_ijk H_jm x_k + ε_ijm H_j
                let mut dl = Mat3::zeros();
                for m in 0..3 {
                    let col = hh.column(m).into_owned().cross(x) + gh.cross(&unit(m));
                    dl.set_column(m, &col);
                }
                let grad = lvec * e.transpose() * f1 + dl * f;
                let lap = lvec * (f2 + 2.0 * (l + 1.0) * f1 / r);
                (lvec * (f * s), grad * s, lap * s)
            }
            ModeKind::Poloidal => {
                let [g, g1, g2, g3] = p;
                let alpha = g1 * r + (l + 1.0) * g;
                let alpha1 = g2 * r + (l + 2.0) * g1;
                let alpha2 = g3 * r + (l + 3.0) * g2;
                let beta = -l * g1 / r;
                let beta1 = -l * (g2 / r - g1 / (r * r));
                let beta2 = -l * (g3 / r - 2.0 * g2 / (r * r) + 2.0 * g1 / (r * r * r));
                let v = gh * alpha + x * (beta * h);
                let grad = gh * e.transpose() * alpha1
                    + hh * alpha
                    + x * e.transpose() * (beta1 * h)
                    + x * gh.transpose() * beta
                    + Mat3::identity() * (beta * h);
                let lap = gh * (alpha2 + 2.0 * l * alpha1 / r + 2.0 * beta)
                    + x * (h * (beta2 + 2.0 * (l + 2.0) * beta1 / r));
                (v * s, grad * s, lap * s)
            }
        }
    }
}

fn unit(k: usize) -> Vec3 {
    let mut e = Vec3::zeros();
    e[k] = 1.0;
    e
}

impl VectorField for ExteriorMode {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.eval_full(x).0
    }
    fn gradient(&self, x: &Vec3) -> Mat3 {
        self.eval_full(x).1
    }
    fn eval(&self, x: &Vec3) -> (Vec3, Mat3) {
        let (v, g, _) = self.eval_full(x);
        (v, g)
    }
    fn laplacian(&self, x: &Vec3) -> Option<Vec3> {
        Some(self.eval_full(x).2)
    }
}
