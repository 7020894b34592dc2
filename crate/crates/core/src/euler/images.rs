//! Exterior Neumann images on a sphere by a truncated expansion in
//! irregular solid harmonics.

use crate::geometry::quadrature_angular;
use crate::{Error, Result, Vec3};

/// Real regular solid harmonics `Re/Im R_l^m`, `0 ≤ m ≤ l ≤ degree`, and
/// their gradients at `x`. `R_l^m = r^l P_l^m(cos θ) e^{imφ} / (l+m)!`,
/// ordered `l²` (m = 0), then `l² + 2m − 1` (Re) and `l² + 2m` (Im).
pub fn regular_harmonics(x: &Vec3, degree: usize) -> (Vec<f64>, Vec<Vec3>) {
    let n = (degree + 1) * (degree + 1);
    let mut val = vec![0.0; n];
    let mut grad = vec![Vec3::zeros(); n];
    let r2 = x.norm_squared();
    let ex = Vec3::x();
    let ey = Vec3::y();
    let ez = Vec3::z();
    let idx = |l: usize, m: usize| if m == 0 { (l * l, l * l) } else { (l * l + 2 * m - 1, l * l + 2 * m) };
    // Complex value (re, im) with gradients of each part.
    let (mut sr, mut si, mut gsr, mut gsi) = (1.0, 0.0, Vec3::zeros(), Vec3::zeros());
    for m in 0..=degree {
        if m > 0 {
            // R_m^m = −(x + iy) R_{m−1}^{m−1} / (2m).
            let c = -1.0 / (2.0 * m as f64);
            let nr = x[0] * sr - x[1] * si;
            let ni = x[0] * si + x[1] * sr;
            let gnr = ex * sr - ey * si + gsr * x[0] - gsi * x[1];
            let gni = ex * si + ey * sr + gsi * x[0] + gsr * x[1];
            sr = c * nr;
            si = c * ni;
            gsr = gnr * c;
            gsi = gni * c;
        }
        let (mut pr, mut pi, mut gpr, mut gpi) = (0.0, 0.0, Vec3::zeros(), Vec3::zeros());
        let (mut cr, mut ci, mut gcr, mut gci) = (sr, si, gsr, gsi);
        for l in m..=degree {
            let (a, b) = idx(l, m);
            val[a] = cr;
            grad[a] = gcr;
            if m > 0 {
                val[b] = ci;
                grad[b] = gci;
            }
            if l == degree {
                break;
            }
            // R_{l+1}^m = ((2l+1) z R_l^m − r² R_{l−1}^m) / ((l−m+1)(l+m+1)).
            let k = 1.0 / (((l - m + 1) * (l + m + 1)) as f64);
            let t = (2 * l + 1) as f64;
            let nr = k * (t * x[2] * cr - r2 * pr);
            let ni = k * (t * x[2] * ci - r2 * pi);
            let gnr = (ez * cr + gcr * x[2]) * (k * t) - (x * (2.0 * pr) + gpr * r2) * k;
            let gni = (ez * ci + gci * x[2]) * (k * t) - (x * (2.0 * pi) + gpi * r2) * k;
            (pr, pi, gpr, gpi) = (cr, ci, gcr, gci);
            (cr, ci, gcr, gci) = (nr, ni, gnr, gni);
        }
    }
    (val, grad)
}

/// Degree of each basis index.
fn degrees(degree: usize) -> Vec<usize> {
    (0..=degree).flat_map(|l| std::iter::repeat(l).take(2 * l + 1)).collect()
}

/// Harmonic expansion `ψ = Σ c_j R_j(x)/|x|^{2l_j+1}` outside a sphere of
/// radius `a`, fitted to Neumann data on the angular product rule by
/// discrete orthogonal projection.
#[derive(Clone, Debug)]
pub struct ExteriorHarmonics {
    pub radius: f64,
    pub degree: usize,
    /// Unit directions of the fit rule.
    pub nodes: Vec<Vec3>,
    /// Solid-angle weights of the fit rule.
    pub weights: Vec<f64>,
    basis: Vec<Vec<f64>>,
    norms: Vec<f64>,
    ls: Vec<usize>,
}

impl ExteriorHarmonics {
    /// `fit_order` Gauss nodes in `cos θ`; needs `fit_order > degree` so
    /// that the projection is exact on the retained degrees.
    pub fn new(radius: f64, degree: usize, fit_order: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidInput(format!("image radius must be positive, got {radius}")));
        }
        if fit_order <= degree {
            return Err(Error::InvalidInput(format!("fit order {fit_order} must exceed the image degree {degree}")));
        }
        let (nodes, weights) = quadrature_angular(fit_order);
        let basis: Vec<Vec<f64>> = nodes.iter().map(|d| regular_harmonics(d, degree).0).collect();
        let nb = (degree + 1) * (degree + 1);
        let norms: Vec<f64> =
            (0..nb).map(|j| basis.iter().zip(&weights).map(|(b, w)| w * b[j] * b[j]).sum()).collect();
        if norms.iter().any(|n| !(*n > 0.0)) {
            return Err(Error::solver("images", "degenerate harmonic norm"));
        }
        Ok(ExteriorHarmonics { radius, degree, nodes, weights, basis, norms, ls: degrees(degree) })
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    /// Points of the fit rule on the sphere.
    pub fn surface_points(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.nodes.iter().map(move |d| d * self.radius)
    }

    /// Coefficients with `∂ψ/∂r = g` at the fit nodes (projected onto the
    /// retained degrees).
    pub fn fit(&self, g: &[f64]) -> Vec<f64> {
        let a = self.radius;
        (0..self.len())
            .map(|j| {
                let l = self.ls[j];
                let gj: f64 = self.basis.iter().zip(&self.weights).zip(g).map(|((b, w), g)| w * g * b[j]).sum::<f64>()
                    / self.norms[j];
                -a.powi(l as i32 + 2) / (l as f64 + 1.0) * gj
            })
            .collect()
    }

    /// `ψ(x)` and `∇ψ(x)`.
    pub fn eval(&self, coeffs: &[f64], x: &Vec3) -> (f64, Vec3) {
        let (val, grad) = regular_harmonics(x, self.degree);
        let r2 = x.norm_squared();
        let r = r2.sqrt();
        let (mut psi, mut g) = (0.0, Vec3::zeros());
        let mut rl = 1.0 / r;
        let mut l_prev = 0;
        for j in 0..self.len() {
            let l = self.ls[j];
            if l != l_prev {
                rl /= r2;
                l_prev = l;
            }
            // ρ = r^{−(2l+1)}
            let c = coeffs[j];
            if c == 0.0 {
                continue;
            }
            psi += c * val[j] * rl;
            g += (grad[j] * rl - x * ((2 * l + 1) as f64 * val[j] * rl / r2)) * c;
        }
        (psi, g)
    }
}
