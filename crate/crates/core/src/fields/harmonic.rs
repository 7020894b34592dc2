//! Homogeneous harmonic polynomials (solid harmonics) in three variables.

use std::collections::BTreeMap;

use crate::geometry::quadrature_angular;
use crate::{Mat3, Vec3};

/// Polynomial in `(x, y, z)` stored as exponent triples and coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    terms: BTreeMap<[u32; 3], f64>,
}

impl Poly {
    pub fn monomial(e: [u32; 3], c: f64) -> Self {
        let mut p = Poly::default();
        p.add_term(e, c);
        p
    }

    fn add_term(&mut self, e: [u32; 3], c: f64) {
        if c == 0.0 {
            return;
        }
        let v = self.terms.entry(e).or_insert(0.0);
        *v += c;
        if *v == 0.0 {
            self.terms.remove(&e);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Poly, s: f64) -> Poly {
        let mut p = self.clone();
        for (e, c) in &other.terms {
            p.add_term(*e, s * c);
        }
        p
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly { terms: self.terms.iter().map(|(e, c)| (*e, c * s)).filter(|(_, c)| *c != 0.0).collect() }
    }

    pub fn derivative(&self, k: usize) -> Poly {
        let mut p = Poly::default();
        for (e, c) in &self.terms {
            if e[k] > 0 {
                let mut f = *e;
                f[k] -= 1;
                p.add_term(f, c * e[k] as f64);
            }
        }
        p
    }

    pub fn mul_var(&self, k: usize) -> Poly {
        let mut p = Poly::default();
        for (e, c) in &self.terms {
            let mut f = *e;
            f[k] += 1;
            p.add_term(f, *c);
        }
        p
    }

    pub fn laplacian(&self) -> Poly {
        (0..3).fold(Poly::default(), |acc, k| acc.add(&self.derivative(k).derivative(k), 1.0))
    }

    /// Two-variable Laplacian `∂xx + ∂yy`.
    fn laplacian_xy(&self) -> Poly {
        (0..2).fold(Poly::default(), |acc, k| acc.add(&self.derivative(k).derivative(k), 1.0))
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: &Vec3) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * x.x.powi(e[0] as i32) * x.y.powi(e[1] as i32) * x.z.powi(e[2] as i32))
            .sum()
    }
}

/// Solid harmonic of degree `l` with precomputed gradient and Hessian
/// polynomials.
#[derive(Clone, Debug)]
pub struct SolidHarmonic {
    pub degree: u32,
    pub poly: Poly,
    grad: [Poly; 3],
    hess: [Poly; 6],
}

const HESS_INDEX: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

impl SolidHarmonic {
    pub fn new(degree: u32, poly: Poly) -> Self {
        let grad = [poly.derivative(0), poly.derivative(1), poly.derivative(2)];
        let hess = HESS_INDEX.map(|(i, j)| grad[i].derivative(j));
        SolidHarmonic { degree, poly, grad, hess }
    }

    /// Value, gradient and Hessian at `x`.
    pub fn eval(&self, x: &Vec3) -> (f64, Vec3, Mat3) {
        let v = self.poly.eval(x);
        let g = Vec3::new(self.grad[0].eval(x), self.grad[1].eval(x), self.grad[2].eval(x));
        let mut h = Mat3::zeros();
        for (p, &(i, j)) in self.hess.iter().zip(&HESS_INDEX) {
            let val = p.eval(x);
            h[(i, j)] = val;
            h[(j, i)] = val;
        }
        (v, g, h)
    }
}

/// Harmonic extension in `z` of `f(x, y) + z g(x, y)` (Cauchy–Kovalevskaya).
fn harmonic_extension(f: &Poly, g: &Poly, degree: u32) -> Poly {
    let mut out = Poly::default();
    let (mut fk, mut gk) = (f.clone(), g.clone());
    let mut fact = 1.0;
    let mut k = 0u32;
    loop {
        if fk.is_zero() && gk.is_zero() {
            break;
        }
        // z^{2k}/(2k)! (-1)^k Δ^k f  +  z^{2k+1}/(2k+1)! (-1)^k Δ^k g
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let mut zf = fk.clone();
        for _ in 0..2 * k {
            zf = zf.mul_var(2);
        }
        out = out.add(&zf, sign / fact);
        let mut zg = gk.mul_var(2);
        for _ in 0..2 * k {
            zg = zg.mul_var(2);
        }
        out = out.add(&zg, sign / (fact * (2 * k + 1) as f64));
        fact *= ((2 * k + 1) * (2 * k + 2)) as f64;
        fk = fk.laplacian_xy();
        gk = gk.laplacian_xy();
        k += 1;
        if 2 * k > degree + 1 {
            break;
        }
    }
    out
}

/// `2l + 1` solid harmonics of degree `l`, orthonormal in `L²` of the unit
/// sphere.
pub fn solid_harmonics(l: u32) -> Vec<SolidHarmonic> {
    let mut raw = Vec::new();
    for a in 0..=l {
        raw.push(harmonic_extension(&Poly::monomial([a, l - a, 0], 1.0), &Poly::default(), l));
    }
    if l >= 1 {
        for a in 0..l {
            raw.push(harmonic_extension(&Poly::default(), &Poly::monomial([a, l - 1 - a, 0], 1.0), l));
        }
    }
    let (dirs, w) = quadrature_angular(l as usize + 2);
    let inner = |p: &Poly, q: &Poly| -> f64 { dirs.iter().zip(&w).map(|(d, w)| w * p.eval(d) * q.eval(d)).sum() };
    let mut basis: Vec<Poly> = Vec::new();
    for p in raw {
        let mut v = p;
        for _ in 0..2 {
            for b in &basis {
                let c = inner(&v, b);
                v = v.add(b, -c);
            }
        }
        let n = inner(&v, &v).sqrt();
        basis.push(v.scale(1.0 / n));
    }
    basis.into_iter().map(|p| SolidHarmonic::new(l, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_and_homogeneous() {
        for l in 0..5 {
            let hs = solid_harmonics(l);
            assert_eq!(hs.len(), 2 * l as usize + 1);
            for h in &hs {
                assert!(h.poly.laplacian().max_abs_coefficient() < 1e-12);
                let x = Vec3::new(0.3, -0.7, 0.4);
                let (v, g, _) = h.eval(&x);
                assert!((x.dot(&g) - l as f64 * v).abs() < 1e-12, "Euler relation");
            }
        }
    }

    #[test]
    fn orthonormal_on_sphere() {
        let l = 3;
        let hs = solid_harmonics(l);
        let (dirs, w) = quadrature_angular(6);
        for (i, a) in hs.iter().enumerate() {
            for (j, b) in hs.iter().enumerate() {
                let ip: f64 = dirs.iter().zip(&w).map(|(d, w)| w * a.poly.eval(d) * b.poly.eval(d)).sum();
                let exact = if i == j { 1.0 } else { 0.0 };
                assert!((ip - exact).abs() < 1e-12);
            }
        }
    }
}
