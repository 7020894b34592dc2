//! Numerical monitors of the interpolation, trace and wedge inequalities.

use super::{FormsContext, Samples};
use crate::{Mat3, Vec3};

/// One γ of the trace-inequality sweep.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TraceRow {
    pub gamma: f64,
    /// `‖f‖_{L²(∂𝒮₀)}`.
    pub lhs: f64,
    /// `‖D(f)‖²/(4γ)`.
    pub dissipation_term: f64,
    /// Smallest `C` making the inequality hold at this γ.
    pub required_c: f64,
}

/// Left and right sides of the monitored inequalities for one field.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct MonitorReport {
    /// `‖u‖_{L⁴}` and `√2‖u‖^{1/4}‖∇u‖^{3/4}`.
    pub interpolation: (f64, f64),
    pub trace: Vec<TraceRow>,
    /// `‖(𝒥₀r)∧r‖` and `C(𝒥₀)(𝒥₀r)·r`.
    pub wedge: (f64, f64),
    /// Rounding allowance of the wedge cross product, `8ε|𝒥₀r||r|`.
    pub wedge_rounding: f64,
}

impl MonitorReport {
    pub fn interpolation_holds(&self) -> bool {
        self.interpolation.0 <= self.interpolation.1 * (1.0 + 1e-12)
    }

    pub fn wedge_holds(&self) -> bool {
        self.wedge.0 <= self.wedge.1 * (1.0 + 1e-12) + self.wedge_rounding
    }
}

/// Constant of `‖(𝒥₀r)∧r‖ ≤ C (𝒥₀r)·r`: with eigenvalues
/// `λ_min ≤ λ_max`, `C = (λ_max − λ_min)/(2λ_min)`.
///
/// `(𝒥₀r)∧r = ((𝒥₀ − λ̄)r)∧r` for `λ̄ = (λ_max+λ_min)/2`, whose norm is at
/// most `(λ_max−λ_min)/2 |r|² ≤ C (𝒥₀r)·r`.
pub fn wedge_constant(j0: &Mat3) -> f64 {
    let e = j0.symmetric_eigenvalues();
    (e.max() - e.min()) / (2.0 * e.min())
}

/// Evaluates the interpolation inequality, the trace inequality over the
/// γ values in `gammas`, and the wedge bound for `r = angular`.
pub fn inequality_monitors(ctx: &FormsContext, u: &Samples, gammas: &[f64]) -> MonitorReport {
    let vol = &ctx.rule.volume;
    let (mut l2, mut l4, mut g2, mut d2) = (0.0, 0.0, 0.0, 0.0);
    for q in 0..vol.points.len() {
        let w = vol.weights[q];
        let v2 = u.vol_value[q].norm_squared();
        l2 += w * v2;
        l4 += w * v2 * v2;
        g2 += w * u.vol_grad[q].norm_squared();
        let d = (u.vol_grad[q] + u.vol_grad[q].transpose()) * 0.5;
        d2 += w * d.norm_squared();
    }
    let l2n = l2.sqrt();
    let interp = (l4.powf(0.25), 2f64.sqrt() * l2n.powf(0.25) * g2.sqrt().powf(0.75));
    let s = &ctx.rule.surface;
    let lhs: f64 = s.weights.iter().zip(&u.surf_value).map(|(w, v)| w * v.norm_squared()).sum::<f64>().sqrt();
    let trace = gammas
        .iter()
        .map(|&gamma| {
            let diss = d2 / (4.0 * gamma);
            let denom = gamma.powf(1.0 / 3.0) * l2n.powf(2.0 / 3.0) + l2n;
            let required_c = if denom > 0.0 { ((lhs - diss) / denom).max(0.0) } else { 0.0 };
            TraceRow { gamma, lhs, dissipation_term: diss, required_c }
        })
        .collect();
    let r: Vec3 = u.angular;
    let jr = ctx.inertia * r;
    let wedge = (jr.cross(&r).norm(), wedge_constant(&ctx.inertia) * jr.dot(&r));
    let wedge_rounding = 8.0 * f64::EPSILON * jr.norm() * r.norm();
    MonitorReport { interpolation: interp, trace, wedge, wedge_rounding }
}
