//! Galerkin basis: the six rigid test fields followed by normalized
//! exterior modes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::fields::{solid_harmonics, ExteriorMode, ModeKind, RadialProfile, VectorField};
use crate::forms::{standard_rule, FieldH, RuleSpec};
use crate::geometry::{QuadratureRule, RigidBodySpec, Shape};
use crate::kirchhoff::KirchhoffContext;
use crate::{Error, Result};

/// Identifies one basis field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModeLabel {
    /// Rigid test field `vᵢ`, 0-based.
    Rigid { index: usize },
    /// Exterior mode: harmonic `harmonic` of degree `degree`, radial power `radial`.
    Exterior { kind: ModeKind, degree: u32, harmonic: usize, radial: u32 },
}

/// Catalog limits and quadrature for [`build_basis_with`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisOptions {
    /// Highest harmonic degree `L`.
    pub max_degree: u32,
    /// Radial profiles per harmonic (`k = 0..K`).
    pub radial_count: u32,
    /// Prepend `v₁..v₆` (coupled problem) or not (fixed body).
    pub include_rigid: bool,
    pub rule: RuleSpec,
}

impl Default for BasisOptions {
    fn default() -> Self {
        BasisOptions { max_degree: 4, radial_count: 4, include_rigid: true, rule: RuleSpec::default() }
    }
}

/// Ordered basis `w₁..w_N`.
#[derive(Clone, Debug)]
pub struct GalerkinBasis {
    pub kctx: Arc<KirchhoffContext>,
    pub labels: Vec<ModeLabel>,
    pub fields: Vec<FieldH>,
    pub options: BasisOptions,
    /// Number of leading rigid fields (6 or 0).
    pub rigid_count: usize,
}

impl GalerkinBasis {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// The fluid rule the basis was normalized with.
    pub fn rule(&self) -> Result<QuadratureRule> {
        standard_rule(&self.kctx.spec, &self.options.rule)
    }
}

/// Exterior modes ordered by `l + k`, then `l`, kind and harmonic.
pub fn mode_catalog(max_degree: u32, radial_count: u32) -> Vec<ModeLabel> {
    let mut out = Vec::new();
    for level in 1..=(max_degree + radial_count) {
        for degree in 1..=max_degree.min(level) {
            let radial = level - degree;
            if radial >= radial_count {
                continue;
            }
            for kind in [ModeKind::Toroidal, ModeKind::Poloidal] {
                for harmonic in 0..(2 * degree as usize + 1) {
                    out.push(ModeLabel::Exterior { kind, degree, harmonic, radial });
                }
            }
        }
    }
    out
}

/// Basis of size `n` with the default catalog and truncation radius `r`.
pub fn build_basis(spec: &RigidBodySpec, n: usize, r: f64) -> Result<GalerkinBasis> {
    let kctx = Arc::new(KirchhoffContext::new(spec)?);
    let mut opts = BasisOptions::default();
    opts.rule.truncation_radius = r;
    build_basis_with(kctx, n, &opts)
}

/// Basis of size `n`. Exterior profiles vanish at `r = a` and at the
/// support radius; poloidal profiles carry one extra power of `s` so the
/// normal component vanishes at the body.
pub fn build_basis_with(kctx: Arc<KirchhoffContext>, n: usize, opts: &BasisOptions) -> Result<GalerkinBasis> {
    let a = match kctx.spec.shape {
        Shape::Sphere { radius } => radius,
        Shape::Mesh(_) => {
            return Err(Error::InvalidInput("Galerkin bases are available for spheres only".into()));
        }
    };
    let rigid_count = if opts.include_rigid { 6 } else { 0 };
    if n < rigid_count.max(1) {
        return Err(Error::InvalidInput(format!("basis size {n} below the {} rigid fields", rigid_count.max(1))));
    }
    if !(opts.rule.support_radius > a) {
        return Err(Error::InvalidInput("mode support radius must exceed the body radius".into()));
    }
    let catalog = mode_catalog(opts.max_degree, opts.radial_count);
    if n - rigid_count > catalog.len() {
        return Err(Error::InvalidInput(format!(
            "basis size {n} exceeds the mode catalog ({} rigid + {} exterior)",
            rigid_count,
            catalog.len()
        )));
    }
    let rule = standard_rule(&kctx.spec, &opts.rule)?;
    let harmonics: Vec<_> = (0..=opts.max_degree).map(solid_harmonics).collect();
    let mut labels = Vec::with_capacity(n);
    let mut fields = Vec::with_capacity(n);
    for i in 0..rigid_count {
        let mut e = crate::Vec6::zeros();
        e[i] = 1.0;
        labels.push(ModeLabel::Rigid { index: i });
        fields.push(FieldH::kirchhoff(&kctx, &e));
    }
    for label in catalog.into_iter().take(n - rigid_count) {
        let ModeLabel::Exterior { kind, degree, harmonic, radial } = label else { unreachable!() };
        let power = radial + u32::from(kind == ModeKind::Poloidal);
        let mut mode = ExteriorMode {
            kind,
            harmonic: harmonics[degree as usize][harmonic].clone(),
            profile: RadialProfile { inner: a, outer: opts.rule.support_radius, power },
            scale: 1.0,
        };
        let norm2: f64 = rule
            .volume
            .points
            .iter()
            .zip(&rule.volume.weights)
            .map(|(x, w)| w * mode.value(x).norm_squared())
            .sum();
        if !(norm2 > 0.0 && norm2.is_finite()) {
            return Err(Error::Consistency(format!("mode {label:?} has zero norm on the fluid rule")));
        }
        mode.scale = 1.0 / norm2.sqrt();
        labels.push(label);
        fields.push(FieldH::exterior(Arc::new(mode)));
    }
    Ok(GalerkinBasis { kctx, labels, fields, options: *opts, rigid_count })
}
