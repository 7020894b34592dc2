//! Assembly of the Galerkin matrices and the trilinear tensor.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::basis::GalerkinBasis;
use crate::forms::FormsContext;
use crate::kirchhoff::AddedMass;
use crate::{Error, Mat3, Mat6, Result, Vec3, Vec6};

/// Rays (radial lines of volume nodes) per parallel work unit. Fixed so
/// that reductions do not depend on the thread count.
const RAYS_PER_CHUNK: usize = 4;

/// Quadrature-assembled quantities that depend only on the basis and the
/// rule, not on body inertia or friction.
#[derive(Clone, Debug)]
pub struct GalerkinTensors {
    pub n: usize,
    pub rigid_count: usize,
    /// `(ℓⱼ, rⱼ)` of every basis field.
    pub rigid: Vec<(Vec3, Vec3)>,
    /// `∫_ℱ wᵢ·wⱼ`.
    pub gram: DMatrix<f64>,
    /// `∫_ℱ ∇wᵢ:∇wⱼ`.
    pub gram_grad: DMatrix<f64>,
    /// `∫_{ℱ∩B(0,ρ)} wᵢ·wⱼ` with `ρ = local_radius`.
    pub gram_local: DMatrix<f64>,
    pub local_radius: f64,
    /// `−∫ D(wᵢ):D(wⱼ)`.
    pub a_volume: DMatrix<f64>,
    /// `−∮ (wᵢ − wᵢ𝒮)·(wⱼ − wⱼ𝒮)`.
    pub a_boundary: DMatrix<f64>,
    /// Fluid part of `b_R(wᵢ, wₖ, wⱼ)` at `(i·n + k)·n + j`.
    pub trilinear_fluid: Vec<f64>,
    /// Fluid part of the untruncated `b(wⱼ, wₖ, vᵢ)` at `(j·n + k)·6 + i`
    /// (empty without rigid fields).
    pub force_fluid: Vec<f64>,
    /// `ℳ₂` of the body.
    pub added_mass_m2: Mat6,
    pub truncation_radius: f64,
}

/// `ℳ_N`, `𝒜_N`, `ℬ_N` for given body inertia and friction.
#[derive(Clone, Debug)]
pub struct GalerkinSystem {
    pub tensors: Arc<GalerkinTensors>,
    pub mass: f64,
    pub inertia: Mat3,
    pub alpha: f64,
    /// `ℳ_N = ((wᵢ, wⱼ)_ℋ)`.
    pub mass_matrix: DMatrix<f64>,
    /// `𝒜_N = (a(wᵢ, wⱼ))`.
    pub stiffness: DMatrix<f64>,
    /// `ℬ_N[i][k][j] = b_R(wᵢ, wₖ, wⱼ)` at `(i·n + k)·n + j`.
    pub trilinear: Vec<f64>,
    chol: nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>,
}

fn det(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    a.dot(&b.cross(c))
}

fn sym(g: &Mat3) -> Mat3 {
    (g + g.transpose()) * 0.5
}

struct Partial {
    gram: DMatrix<f64>,
    gram_grad: DMatrix<f64>,
    gram_local: DMatrix<f64>,
    a_volume: DMatrix<f64>,
    tri: Vec<f64>,
    force: Vec<f64>,
}

impl Partial {
    fn zeros(n: usize, nr: usize) -> Self {
        Partial {
            gram: DMatrix::zeros(n, n),
            gram_grad: DMatrix::zeros(n, n),
            gram_local: DMatrix::zeros(n, n),
            a_volume: DMatrix::zeros(n, n),
            tri: vec![0.0; n * n * n],
            force: vec![0.0; n * n * nr],
        }
    }

    fn add(&mut self, o: &Partial) {
        self.gram += &o.gram;
        self.gram_grad += &o.gram_grad;
        self.gram_local += &o.gram_local;
        self.a_volume += &o.a_volume;
        self.tri.iter_mut().zip(&o.tri).for_each(|(a, b)| *a += b);
        self.force.iter_mut().zip(&o.force).for_each(|(a, b)| *a += b);
    }
}

/// Assembles the Galerkin system on the rule, friction, body inertia and
/// truncation of `ctx`.
pub fn assemble_system(basis: &GalerkinBasis, ctx: &FormsContext) -> Result<GalerkinSystem> {
    let tensors = assemble_tensors(basis, ctx)?;
    GalerkinSystem::new(Arc::new(tensors), ctx.mass, ctx.inertia, ctx.alpha)
}

/// The inertia- and friction-independent part of [`assemble_system`].
pub fn assemble_tensors(basis: &GalerkinBasis, ctx: &FormsContext) -> Result<GalerkinTensors> {
    let n = basis.len();
    let nr = basis.rigid_count;
    let rigid: Vec<(Vec3, Vec3)> = basis.fields.iter().map(|f| (f.linear, f.angular)).collect();
    let vol = &ctx.rule.volume;
    let ns = ctx.rule.surface.points.len();
    let ray = if ns > 0 && vol.points.len() % ns == 0 { vol.points.len() / ns } else { 1 };
    let chunk = ray * RAYS_PER_CHUNK;
    let local_radius = 2.0 * basis.kctx.spec.bounding_radius();
    let fields = &basis.fields;
    let trunc = &ctx.truncation;

    let partials: Vec<Partial> = (0..vol.points.len().div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut p = Partial::zeros(n, nr);
            let mut vals = vec![Vec3::zeros(); n];
            let mut grads = vec![Mat3::zeros(); n];
            let mut syms = vec![Mat3::zeros(); n];
            let mut rel = vec![Vec3::zeros(); n];
            let mut rel_full = vec![Vec3::zeros(); n];
            let mut active = Vec::with_capacity(n);
            let mut c_buf = vec![Vec3::zeros(); n];
            for q in c * chunk..((c + 1) * chunk).min(vol.points.len()) {
                let x = &vol.points[q];
                let w = vol.weights[q];
                let chi = trunc.value(x);
                active.clear();
                for i in 0..n {
                    let (v, g) = fields[i].fluid.eval(x);
                    vals[i] = v;
                    grads[i] = g;
                    syms[i] = sym(&g);
                    if v != Vec3::zeros() || g != Mat3::zeros() {
                        active.push(i);
                    }
                    let (l, r) = rigid[i];
                    rel[i] = v - (l + r.cross(&chi));
                    rel_full[i] = v - (l + r.cross(x));
                }
                let local = x.norm() < local_radius;
                for (ai, &i) in active.iter().enumerate() {
                    for &j in &active[ai..] {
                        let g = w * vals[i].dot(&vals[j]);
                        let gg = w * grads[i].dot(&grads[j]);
                        let dd = -w * syms[i].dot(&syms[j]);
                        for (m, v) in [(&mut p.gram, g), (&mut p.gram_grad, gg), (&mut p.a_volume, dd)] {
                            m[(i, j)] += v;
                            if i != j {
                                m[(j, i)] += v;
                            }
                        }
                        if local {
                            p.gram_local[(i, j)] += g;
                            if i != j {
                                p.gram_local[(j, i)] += g;
                            }
                        }
                    }
                }
                // b_R(wᵢ, wₖ, wⱼ): ∫ wₖ·(∇wⱼ relᵢ) − det(rᵢ, wₖ, wⱼ).
                for i in 0..n {
                    let has_rel = rel[i] != Vec3::zeros();
                    let ri = rigid[i].1;
                    if !has_rel && ri == Vec3::zeros() {
                        continue;
                    }
                    for &j in &active {
                        c_buf[j] = grads[j] * rel[i];
                    }
                    for &k in &active {
                        let base = (i * n + k) * n;
                        for &j in &active {
                            let mut t = vals[k].dot(&c_buf[j]);
                            if ri != Vec3::zeros() {
                                t -= det(&ri, &vals[k], &vals[j]);
                            }
                            p.tri[base + j] += w * t;
                        }
                    }
                }
                // Untruncated b(wⱼ, wₖ, vᵢ) for the rigid test fields.
                for i in 0..nr {
                    for j in 0..n {
                        let rj = rigid[j].1;
                        if rel_full[j] == Vec3::zeros() && rj == Vec3::zeros() {
                            continue;
                        }
                        let cj = grads[i] * rel_full[j];
                        for &k in &active {
                            let t = vals[k].dot(&cj) - det(&rj, &vals[k], &vals[i]);
                            p.force[(j * n + k) * nr + i] += w * t;
                        }
                    }
                }
            }
            p
        })
        .collect();
    let mut total = Partial::zeros(n, nr);
    for p in &partials {
        total.add(p);
    }

    let s = &ctx.rule.surface;
    let mut a_boundary = DMatrix::zeros(n, n);
    let slips: Vec<Vec<Vec3>> = s
        .points
        .par_iter()
        .map(|x| {
            (0..n)
                .map(|i| {
                    let (l, r) = rigid[i];
                    fields[i].fluid.value(x) - (l + r.cross(x))
                })
                .collect()
        })
        .collect();
    for (q, slip) in slips.iter().enumerate() {
        let w = s.weights[q];
        for i in 0..n {
            for j in 0..n {
                a_boundary[(i, j)] -= w * slip[i].dot(&slip[j]);
            }
        }
    }

    for (idx, v) in total.tri.iter().enumerate() {
        if !v.is_finite() {
            let (i, k, j) = (idx / (n * n), (idx / n) % n, idx % n);
            return Err(Error::Consistency(format!("trilinear entry ({i}, {k}, {j}) is not finite")));
        }
    }
    for (name, m) in [("gram", &total.gram), ("a", &total.a_volume), ("boundary", &a_boundary)] {
        if let Some(idx) = m.iter().position(|v| !v.is_finite()) {
            return Err(Error::Consistency(format!("{name} entry ({}, {}) is not finite", idx % n, idx / n)));
        }
    }

    Ok(GalerkinTensors {
        n,
        rigid_count: nr,
        rigid,
        gram: total.gram,
        gram_grad: total.gram_grad,
        gram_local: total.gram_local,
        local_radius,
        a_volume: total.a_volume,
        a_boundary,
        trilinear_fluid: total.tri,
        force_fluid: total.force,
        added_mass_m2: basis.kctx.added_mass.m2,
        truncation_radius: ctx.truncation.radius(),
    })
}

impl GalerkinTensors {
    /// Tensors of the fields `w_{rigid_count..}`, i.e. the basis of the
    /// problem with the body held fixed (`u_𝒮 = 0`).
    pub fn fixed_body(&self) -> GalerkinTensors {
        let s = self.rigid_count;
        let n = self.n - s;
        let sub = |m: &DMatrix<f64>| m.view((s, s), (n, n)).into_owned();
        let mut tri = vec![0.0; n * n * n];
        for i in 0..n {
            for k in 0..n {
                let src = ((i + s) * self.n + k + s) * self.n + s;
                tri[(i * n + k) * n..(i * n + k + 1) * n].copy_from_slice(&self.trilinear_fluid[src..src + n]);
            }
        }
        GalerkinTensors {
            n,
            rigid_count: 0,
            rigid: self.rigid[s..].to_vec(),
            gram: sub(&self.gram),
            gram_grad: sub(&self.gram_grad),
            gram_local: sub(&self.gram_local),
            local_radius: self.local_radius,
            a_volume: sub(&self.a_volume),
            a_boundary: sub(&self.a_boundary),
            trilinear_fluid: tri,
            force_fluid: Vec::new(),
            added_mass_m2: self.added_mass_m2,
            truncation_radius: self.truncation_radius,
        }
    }
}

impl GalerkinSystem {
    /// Adds the body contributions for mass `m`, inertia `𝒥₀` and friction `α`.
    pub fn new(tensors: Arc<GalerkinTensors>, mass: f64, inertia: Mat3, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("friction α must be nonnegative, got {alpha}")));
        }
        let t = &tensors;
        let n = t.n;
        let mut mass_matrix = t.gram.clone();
        for i in 0..n {
            for j in 0..n {
                let (li, ri) = t.rigid[i];
                let (lj, rj) = t.rigid[j];
                mass_matrix[(i, j)] += mass * li.dot(&lj) + (inertia * ri).dot(&rj);
            }
        }
        mass_matrix = (&mass_matrix + mass_matrix.transpose()) * 0.5;
        let chol = mass_matrix
            .clone()
            .cholesky()
            .ok_or_else(|| Error::solver("cholesky", "Galerkin mass matrix is not positive definite"))?;
        let stiffness = &t.a_volume + &t.a_boundary * alpha;
        let mut trilinear = t.trilinear_fluid.clone();
        for i in 0..n {
            let ri = t.rigid[i].1;
            if ri == Vec3::zeros() {
                continue;
            }
            let jri = inertia * ri;
            for k in 0..n {
                let (lk, rk) = t.rigid[k];
                if lk == Vec3::zeros() && rk == Vec3::zeros() {
                    continue;
                }
                for j in 0..n {
                    let (lj, rj) = t.rigid[j];
                    trilinear[(i * n + k) * n + j] += mass * det(&ri, &lk, &lj) + det(&jri, &rk, &rj);
                }
            }
        }
        Ok(GalerkinSystem { tensors, mass, inertia, alpha, mass_matrix, stiffness, trilinear, chol })
    }

    /// Same assembled tensors with the body density scaled by `sigma`.
    pub fn with_inertia_scale(&self, sigma: f64) -> Result<Self> {
        GalerkinSystem::new(self.tensors.clone(), self.mass * sigma, self.inertia * sigma, self.alpha)
    }

    /// Same friction on the basis without the rigid fields (body held
    /// at rest).
    pub fn fixed_body(&self) -> Result<Self> {
        GalerkinSystem::new(Arc::new(self.tensors.fixed_body()), self.mass, self.inertia, self.alpha)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        GalerkinSystem::new(self.tensors.clone(), self.mass, self.inertia, alpha)
    }

    pub fn n(&self) -> usize {
        self.tensors.n
    }

    /// `ℬ_N(G, G)ⱼ = Σᵢₖ Gᵢ Gₖ ℬ[i][k][j]`.
    pub fn trilinear_apply(&self, g: &DVector<f64>) -> DVector<f64> {
        let n = self.n();
        let mut tmp = vec![0.0; n * n];
        for i in 0..n {
            let gi = g[i];
            if gi == 0.0 {
                continue;
            }
            let slab = &self.trilinear[i * n * n..(i + 1) * n * n];
            tmp.iter_mut().zip(slab).for_each(|(a, b)| *a += gi * b);
        }
        let mut out = DVector::zeros(n);
        for k in 0..n {
            let gk = g[k];
            for j in 0..n {
                out[j] += gk * tmp[k * n + j];
            }
        }
        out
    }

    /// `Σᵢₖⱼ uᵢ vₖ wⱼ ℬ[i][k][j]`.
    pub fn trilinear_form(&self, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for i in 0..n {
            for k in 0..n {
                let c = u[i] * v[k];
                if c == 0.0 {
                    continue;
                }
                let base = (i * n + k) * n;
                s += c * (0..n).map(|j| self.trilinear[base + j] * w[j]).sum::<f64>();
            }
        }
        s
    }

    /// `ℳ_N⁻¹ x`.
    pub fn solve_mass(&self, x: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(x)
    }

    /// `G' = ℳ_N⁻¹(2ν𝒜_N G + ℬ_N(G, G))`.
    pub fn rhs(&self, g: &DVector<f64>, nu: f64) -> DVector<f64> {
        let mut f = &self.stiffness * g * (2.0 * nu);
        f += self.trilinear_apply(g);
        self.chol.solve(&f)
    }

    /// `½‖u‖²_ℋ`.
    pub fn energy(&self, g: &DVector<f64>) -> f64 {
        0.5 * g.dot(&(&self.mass_matrix * g))
    }

    /// `(2ν∫|D(u)|², 2να∮|u − u_𝒮|²)`.
    pub fn dissipation(&self, g: &DVector<f64>, nu: f64) -> (f64, f64) {
        let t = &self.tensors;
        let v = -2.0 * nu * g.dot(&(&t.a_volume * g));
        let b = -2.0 * nu * self.alpha * g.dot(&(&t.a_boundary * g));
        (v, b)
    }

    /// `(ℓ, r)` of `u = Σ Gⱼ wⱼ`.
    pub fn rigid_velocity(&self, g: &DVector<f64>) -> (Vec3, Vec3) {
        let t = &self.tensors;
        t.rigid.iter().zip(g.iter()).fold((Vec3::zeros(), Vec3::zeros()), |(l, r), ((lj, rj), c)| {
            (l + lj * *c, r + rj * *c)
        })
    }

    /// `ℳ = ℳ₁ + ℳ₂` for the system's body inertia.
    pub fn added_mass(&self) -> Result<AddedMass> {
        let am = AddedMass { m1: Mat6::zeros(), m2: self.tensors.added_mass_m2, total: self.tensors.added_mass_m2 };
        am.with_inertia(self.mass, &self.inertia)
    }

    /// `2ν a(u, vᵢ) + b(u, u, vᵢ)` with the untruncated `b` expanded as
    /// `[m r∧ℓ; (𝒥₀r)∧r] + ∫ ([(u−u_𝒮)·∇]∇Φᵢ)·u − det(r, u, ∇Φᵢ)`.
    pub fn rigid_forces(&self, g: &DVector<f64>, nu: f64) -> Result<Vec6> {
        let t = &self.tensors;
        if t.rigid_count != 6 {
            return Err(Error::InvalidInput("rigid forces need the six rigid test fields in the basis".into()));
        }
        let n = t.n;
        let (l, r) = self.rigid_velocity(g);
        let body_l = r.cross(&l) * self.mass;
        let body_r = (self.inertia * r).cross(&r);
        let a = self.stiffness.transpose() * g;
        let mut out = Vec6::zeros();
        for i in 0..6 {
            let mut b = if i < 3 { body_l[i] } else { body_r[i - 3] };
            for j in 0..n {
                for k in 0..n {
                    b += g[j] * g[k] * t.force_fluid[(j * n + k) * 6 + i];
                }
            }
            out[i] = 2.0 * nu * a[i] + b;
        }
        Ok(out)
    }

    /// `(ℓ', r') = ℳ⁻¹ (2ν a(u, vᵢ) + b(u, u, vᵢ))ᵢ`.
    pub fn body_rate_from_added_mass(&self, g: &DVector<f64>, nu: f64) -> Result<(Vec3, Vec3)> {
        let f = self.rigid_forces(g, nu)?;
        let m = self.added_mass()?.total;
        let x = m
            .cholesky()
            .ok_or_else(|| Error::solver("cholesky", "virtual inertia tensor is singular"))?
            .solve(&f);
        Ok((x.fixed_rows::<3>(0).into_owned(), x.fixed_rows::<3>(3).into_owned()))
    }

    /// Coefficients of the `ℋ`-orthogonal projection given `((u, wⱼ)_ℋ)ⱼ`.
    pub fn project_moments(&self, moments: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(moments)
    }
}
