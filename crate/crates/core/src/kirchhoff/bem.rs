//! Boundary-element solver for the exterior Neumann problems.
//!
//! Direct (Green) formulation with piecewise-constant potential on curved
//! cubic triangles built from the mesh and its vertex normals. For a
//! collocation point `x` on the surface,
//! `½Φ(x) − ∮ Φ ∂G/∂n_y ds = −∮ G K ds`, with `G = 1/(4π|x−y|)` and `n`
//! the body's outward normal. The dense system is solved by GMRES.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::Potential;
use crate::geometry::{gauss_legendre_on, TriMesh};
use crate::{Error, Mat3, Result, Vec3};

/// Quadrature node on a curved patch: position, unit normal, weight.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PatchNode {
    pub pos: Vec3,
    pub normal: Vec3,
    pub weight: f64,
}

/// Curved triangle geometry: cubic Bézier patch interpolating the three
/// vertices and their normals.
#[derive(Clone, Debug)]
struct Patch {
    p: [Vec3; 3],
    b: [Vec3; 7],
}

impl Patch {
    fn new(p: [Vec3; 3], n: [Vec3; 3]) -> Self {
        let w = |i: usize, j: usize| (p[j] - p[i]).dot(&n[i]);
        let b210 = (p[0] * 2.0 + p[1] - n[0] * w(0, 1)) / 3.0;
        let b120 = (p[1] * 2.0 + p[0] - n[1] * w(1, 0)) / 3.0;
        let b021 = (p[1] * 2.0 + p[2] - n[1] * w(1, 2)) / 3.0;
        let b012 = (p[2] * 2.0 + p[1] - n[2] * w(2, 1)) / 3.0;
        let b102 = (p[2] * 2.0 + p[0] - n[2] * w(2, 0)) / 3.0;
        let b201 = (p[0] * 2.0 + p[2] - n[0] * w(0, 2)) / 3.0;
        let e = (b210 + b120 + b021 + b012 + b102 + b201) / 6.0;
        let v = (p[0] + p[1] + p[2]) / 3.0;
        let b111 = e + (e - v) / 2.0;
        Patch { p, b: [b210, b120, b021, b012, b102, b201, b111] }
    }

    /// Position and `∂p/∂u × ∂p/∂v` at barycentric parameters `(u, v)`.
    fn eval(&self, u: f64, v: f64) -> (Vec3, Vec3) {
        let w = 1.0 - u - v;
        let [p1, p2, p3] = self.p;
        let [b210, b120, b021, b012, b102, b201, b111] = self.b;
        let pos = p1 * w.powi(3)
            + p2 * u.powi(3)
            + p3 * v.powi(3)
            + b210 * (3.0 * w * w * u)
            + b120 * (3.0 * w * u * u)
            + b201 * (3.0 * w * w * v)
            + b021 * (3.0 * u * u * v)
            + b102 * (3.0 * w * v * v)
            + b012 * (3.0 * u * v * v)
            + b111 * (6.0 * w * u * v);
        let pu = p1 * (-3.0 * w * w)
            + p2 * (3.0 * u * u)
            + b210 * (3.0 * (w * w - 2.0 * w * u))
            + b120 * (3.0 * (2.0 * w * u - u * u))
            + b201 * (-6.0 * w * v)
            + b021 * (6.0 * u * v)
            + b102 * (-3.0 * v * v)
            + b012 * (3.0 * v * v)
            + b111 * (6.0 * (w * v - u * v));
        let pv = p1 * (-3.0 * w * w)
            + p3 * (3.0 * v * v)
            + b210 * (-6.0 * w * u)
            + b120 * (-3.0 * u * u)
            + b201 * (3.0 * (w * w - 2.0 * w * v))
            + b021 * (3.0 * u * u)
            + b102 * (3.0 * (2.0 * w * v - v * v))
            + b012 * (6.0 * u * v)
            + b111 * (6.0 * (w * u - u * v));
        (pos, pu.cross(&pv))
    }

    fn node(&self, u: f64, v: f64, w: f64) -> PatchNode {
        let (pos, j) = self.eval(u, v);
        let jn = j.norm();
        PatchNode { pos, normal: j / jn, weight: w * jn }
    }
}

/// Six-point degree-4 rule on the reference triangle (weights sum to ½).
fn far_rule() -> Vec<(f64, f64, f64)> {
    crate::geometry::triangle_rule_points(3).into_iter().map(|(u, v, w)| (u, v, 0.5 * w)).collect()
}

/// Duffy-transformed product rule on the three sub-triangles meeting at
/// the centroid; integrates the `1/r` and `1/r²` singularities at the
/// centroid and resolves nearby sources.
fn refined_rule(n: usize) -> Vec<(f64, f64, f64)> {
    let (g, gw) = gauss_legendre_on(n, 0.0, 1.0);
    let c0: [f64; 2] = [1.0 / 3.0, 1.0 / 3.0];
    let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let mut out = Vec::with_capacity(3 * n * n);
    for k in 0..3 {
        let c1 = corners[k];
        let c2 = corners[(k + 1) % 3];
        let e1 = [c1[0] - c0[0], c1[1] - c0[1]];
        let e2 = [c2[0] - c0[0], c2[1] - c0[1]];
        let det = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
        for (s, ws) in g.iter().zip(&gw) {
            for (t, wt) in g.iter().zip(&gw) {
                let u = c0[0] + s * ((1.0 - t) * e1[0] + t * e2[0]);
                let v = c0[1] + s * ((1.0 - t) * e1[1] + t * e2[1]);
                out.push((u, v, ws * wt * s * det));
            }
        }
    }
    out
}

/// Options of the boundary-element solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BemOptions {
    /// Gauss points per direction in each Duffy sub-triangle.
    pub near_order: usize,
    /// Near field: centroid distance below this multiple of the mean
    /// panel size.
    pub near_factor: f64,
    pub gmres_tol: f64,
    pub gmres_max_iter: usize,
}

impl Default for BemOptions {
    fn default() -> Self {
        BemOptions { near_order: 8, near_factor: 3.0, gmres_tol: 1e-12, gmres_max_iter: 200 }
    }
}

/// Discretized surface: curved panels with their quadrature.
#[derive(Clone, Debug)]
pub struct BemSurface {
    centers: Vec<Vec3>,
    far: Vec<Vec<PatchNode>>,
    near: Vec<Vec<PatchNode>>,
    panel_size: f64,
    near_factor: f64,
}

impl BemSurface {
    pub fn new(mesh: &TriMesh, opts: &BemOptions) -> Self {
        let verts = mesh.vertices();
        let mut vn = vec![Vec3::zeros(); verts.len()];
        for (k, t) in mesh.triangles().iter().enumerate() {
            let n = mesh.face_normal(k);
            for &i in t {
                vn[i] += n;
            }
        }
        for n in &mut vn {
            *n = n.normalize();
        }
        let far_r = far_rule();
        let near_r = refined_rule(opts.near_order);
        let patches: Vec<Patch> = mesh
            .triangles()
            .iter()
            .map(|t| Patch::new([verts[t[0]], verts[t[1]], verts[t[2]]], [vn[t[0]], vn[t[1]], vn[t[2]]]))
            .collect();
        let centers = patches.iter().map(|p| p.eval(1.0 / 3.0, 1.0 / 3.0).0).collect();
        let far: Vec<Vec<PatchNode>> =
            patches.iter().map(|p| far_r.iter().map(|&(u, v, w)| p.node(u, v, w)).collect()).collect();
        let near = patches.iter().map(|p| near_r.iter().map(|&(u, v, w)| p.node(u, v, w)).collect()).collect();
        let area: f64 = far.iter().flatten().map(|n| n.weight).sum();
        let panel_size = (area / patches.len() as f64).sqrt();
        BemSurface { centers, far, near, panel_size, near_factor: opts.near_factor }
    }

    pub fn panel_count(&self) -> usize {
        self.centers.len()
    }

    /// Area of the curved surface.
    pub fn area(&self) -> f64 {
        self.far.iter().flatten().map(|n| n.weight).sum()
    }

    pub(crate) fn far_nodes(&self) -> impl Iterator<Item = (usize, &PatchNode)> {
        self.far.iter().enumerate().flat_map(|(j, v)| v.iter().map(move |n| (j, n)))
    }

    fn nodes_for(&self, j: usize, x: &Vec3) -> &[PatchNode] {
        if (self.centers[j] - x).norm() < self.near_factor * self.panel_size {
            &self.near[j]
        } else {
            &self.far[j]
        }
    }
}

/// Neumann data `Kᵢ` for unit rigid motions at a point with body normal `n`.
pub fn neumann_data(x: &Vec3, n: &Vec3) -> [f64; 6] {
    let c = x.cross(n);
    [n.x, n.y, n.z, c.x, c.y, c.z]
}

/// Solution of the six exterior problems on one surface.
#[derive(Clone, Debug)]
pub struct BemSolution {
    pub surface: std::sync::Arc<BemSurface>,
    /// `values[i][j]`: potential `i` on panel `j`.
    pub values: Vec<Vec<f64>>,
    pub iterations: usize,
}

/// Assembles the double-layer matrix and the single-layer right-hand sides,
/// then solves for all six potentials.
pub fn solve_all(mesh: &TriMesh, opts: &BemOptions) -> Result<BemSolution> {
    let surface = std::sync::Arc::new(BemSurface::new(mesh, opts));
    let n = surface.panel_count();
    // Row i: D[i][j] = ∫_j ∂G/∂n_y(x_i, y) ds_y; rhs[i][k] = −∫ G K_k ds.
    let rows: Vec<(Vec<f64>, [f64; 6])> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = surface.centers[i];
            let mut d = vec![0.0; n];
            let mut rhs = [0.0; 6];
            for (j, dj) in d.iter_mut().enumerate() {
                let mut acc = 0.0;
                for node in surface.nodes_for(j, &x) {
                    let r = x - node.pos;
                    let rn = r.norm();
                    let inv = 1.0 / (4.0 * PI * rn);
                    acc += node.weight * node.normal.dot(&r) * inv / (rn * rn);
                    let g = node.weight * inv;
                    let k = neumann_data(&node.pos, &node.normal);
                    for c in 0..6 {
                        rhs[c] -= g * k[c];
                    }
                }
                *dj = acc;
            }
            (d, rhs)
        })
        .collect();
    let matvec = |v: &[f64]| -> Vec<f64> {
        rows.par_iter().enumerate().map(|(i, (d, _))| 0.5 * v[i] - dot(d, v)).collect()
    };
    let mut values = Vec::with_capacity(6);
    let mut iterations = 0;
    for c in 0..6 {
        let b: Vec<f64> = rows.iter().map(|(_, r)| r[c]).collect();
        let bnorm = dot(&b, &b).sqrt();
        if bnorm < 1e-14 * n as f64 {
            values.push(vec![0.0; n]);
            continue;
        }
        let (x, it, res) = gmres(&matvec, &b, opts.gmres_tol, opts.gmres_max_iter, 60);
        if !(res <= opts.gmres_tol * 10.0) {
            return Err(Error::solver(
                "bem-gmres",
                format!("potential {} did not converge: relative residual {res:e} after {it} iterations; the discrete operator is ill-conditioned (check mesh quality)", c + 1),
            ));
        }
        iterations += it;
        values.push(x);
    }
    Ok(BemSolution { surface, values, iterations })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Restarted GMRES; returns the solution, iteration count and final
/// relative residual.
pub fn gmres(
    matvec: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    restart: usize,
) -> (Vec<f64>, usize, f64) {
    let n = b.len();
    let bnorm = dot(b, b).sqrt().max(1e-300);
    let mut x = vec![0.0; n];
    let mut total = 0;
    loop {
        let ax = matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = dot(&r, &r).sqrt();
        if beta / bnorm <= tol || total >= max_iter {
            return (x, total, beta / bnorm);
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|t| t / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            let mut w = matvec(&v[k]);
            for (j, vj) in v.iter().enumerate() {
                h[j][k] = dot(&w, vj);
                for (wi, vi) in w.iter_mut().zip(vj) {
                    *wi -= h[j][k] * vi;
                }
            }
            let wn = dot(&w, &w).sqrt();
            h[k + 1][k] = wn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let den = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            cs[k] = h[k][k] / den;
            sn[k] = h[k + 1][k] / den;
            h[k][k] = den;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            if g[k + 1].abs() / bnorm <= tol || total >= max_iter || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|t| t / wn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&v[j]) {
                *xi += yj * vi;
            }
        }
    }
}

/// One potential from a [`BemSolution`], evaluated by the representation
/// formula `Φ(x) = ∮ (Φ ∂G/∂n_y − G K) ds`. Accurate at distances of a
/// few panel sizes from the surface or more.
#[derive(Clone, Debug)]
pub struct BemPotential {
    surface: std::sync::Arc<BemSurface>,
    values: Vec<f64>,
    index: usize,
}

impl BemPotential {
    pub fn new(solution: &BemSolution, index: usize) -> Self {
        BemPotential { surface: solution.surface.clone(), values: solution.values[index].clone(), index }
    }

    pub fn panel_values(&self) -> &[f64] {
        &self.values
    }

    fn value_and_gradient(&self, x: &Vec3) -> (f64, Vec3) {
        let mut phi = 0.0;
        let mut grad = Vec3::zeros();
        for j in 0..self.surface.panel_count() {
            let pj = self.values[j];
            for node in self.surface.nodes_for(j, x) {
                let d = x - node.pos;
                let r2 = d.norm_squared();
                let r = r2.sqrt();
                let r3 = r2 * r;
                let k = neumann_data(&node.pos, &node.normal)[self.index];
                let nd = node.normal.dot(&d);
                let w = node.weight / (4.0 * PI);
                phi += w * (pj * nd / r3 - k / r);
                grad += (node.normal / r3 - d * (3.0 * nd / (r3 * r2))) * (w * pj) + d * (w * k / r3);
            }
        }
        (phi, grad)
    }
}

impl Potential for BemPotential {
    fn value(&self, x: &Vec3) -> f64 {
        self.value_and_gradient(x).0
    }
    fn gradient(&self, x: &Vec3) -> Vec3 {
        self.value_and_gradient(x).1
    }
    fn hessian(&self, x: &Vec3) -> Mat3 {
        let h = 1e-4 * self.surface.panel_size;
        let mut m = Mat3::zeros();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            m.set_column(k, &((self.gradient(&(x + e)) - self.gradient(&(x - e))) / (2.0 * h)));
        }
        (m + m.transpose()) * 0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gmres_solves_small_system() {
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, -1.0], [0.5, 0.0, 2.0]];
        let mv = |v: &[f64]| -> Vec<f64> { a.iter().map(|r| dot(r, v)).collect() };
        let b = [1.0, 2.0, 3.0];
        let (x, _, res) = gmres(&mv, &b, 1e-14, 50, 2);
        assert!(res < 1e-13);
        let ax = mv(&x);
        for i in 0..3 {
            assert!((ax[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn curved_patches_recover_sphere_area() {
        let mesh = TriMesh::icosphere(1.0, 2);
        let s = BemSurface::new(&mesh, &BemOptions::default());
        assert!((s.area() / (4.0 * PI) - 1.0).abs() < 1e-3);
        assert!((mesh.area() / (4.0 * PI) - 1.0).abs() > 1e-2);
    }

    #[test]
    fn double_layer_row_sums() {
        let mesh = TriMesh::icosphere(1.0, 1);
        let s = BemSurface::new(&mesh, &BemOptions::default());
        let x = s.centers[3];
        let sum: f64 = (0..s.panel_count())
            .map(|j| {
                s.nodes_for(j, &x)
                    .iter()
                    .map(|n| {
                        let d = x - n.pos;
                        n.weight * n.normal.dot(&d) / (4.0 * PI * d.norm().powi(3))
                    })
                    .sum::<f64>()
            })
            .sum();
        assert!((sum + 0.5).abs() < 1e-3, "{sum}");
    }
}
