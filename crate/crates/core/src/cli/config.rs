//! Run configuration: TOML text with sections, dotted-key overrides and
//! validation with line and field diagnostics.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::euler::EulerOptions;
use crate::forms::RuleSpec;
use crate::geometry::{RigidBodySpec, TriMesh};
use crate::studies::{AlphaRule, StudyKind};
use crate::viscous::{BasisOptions, InitialData, StepOptions, VorticalProfile};
use crate::{Error, Result};

/// Environment variable overriding `output_dir`.
pub const OUTPUT_ENV: &str = "RIGIDFLOW_OUT";

/// Which system `run` integrates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    #[default]
    Viscous,
    Euler,
    /// Viscous fluid around a body held at rest.
    FixedBody,
}

/// Body geometry.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    /// Exact ball, analytic potentials.
    #[default]
    Sphere,
    /// Triangulated ball, boundary-element potentials.
    Icosphere,
    /// ASCII triangle mesh read from `mesh`.
    Mesh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BodyConfig {
    pub shape: ShapeKind,
    pub radius: f64,
    /// Subdivision level of the icosphere (`20·4^level` triangles).
    pub level: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh: Option<PathBuf>,
    pub density: f64,
    pub inertia_scale: f64,
}

impl Default for BodyConfig {
    fn default() -> Self {
        BodyConfig { shape: ShapeKind::Sphere, radius: 1.0, level: 4, mesh: None, density: 1.0, inertia_scale: 1.0 }
    }
}

/// Vortex ring seeded for the inviscid solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingConfig {
    pub center: [f64; 3],
    pub axis: [f64; 3],
    pub radius: f64,
    pub circulation: f64,
    pub particles: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub linear: [f64; 3],
    pub angular: [f64; 3],
    /// Outer radius of the vortical profiles.
    pub support: f64,
    pub profiles: Vec<VorticalProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ring: Option<RingConfig>,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig { linear: [0.0; 3], angular: [0.0; 3], support: 3.0, profiles: Vec::new(), ring: None }
    }
}

impl InitialConfig {
    pub fn data(&self) -> InitialData {
        InitialData { linear: self.linear, angular: self.angular, profiles: self.profiles.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ViscousConfig {
    pub nu: f64,
    pub alpha: AlphaRule,
    pub basis_size: usize,
    pub max_degree: u32,
    pub radial_count: u32,
    pub surface_order: usize,
    pub radial_order: usize,
    pub support_radius: f64,
    pub truncation_radius: f64,
    pub max_halvings: u32,
    pub ledger_rate_tol: f64,
}

impl Default for ViscousConfig {
    fn default() -> Self {
        let b = BasisOptions::default();
        let s = StepOptions::default();
        ViscousConfig {
            nu: 0.1,
            alpha: AlphaRule::Constant(1.0),
            basis_size: 30,
            max_degree: b.max_degree,
            radial_count: b.radial_count,
            surface_order: b.rule.surface_order,
            radial_order: b.rule.radial_order,
            support_radius: b.rule.support_radius,
            truncation_radius: b.rule.truncation_radius,
            max_halvings: s.max_halvings,
            ledger_rate_tol: s.ledger_rate_tol,
        }
    }
}

impl ViscousConfig {
    pub fn basis_options(&self) -> BasisOptions {
        BasisOptions {
            max_degree: self.max_degree,
            radial_count: self.radial_count,
            include_rigid: true,
            rule: RuleSpec {
                surface_order: self.surface_order,
                radial_order: self.radial_order,
                support_radius: self.support_radius,
                truncation_radius: self.truncation_radius,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EulerConfig {
    pub image_degree: usize,
    pub fit_order: usize,
    pub check_nodes: usize,
    pub force_surface_order: usize,
    pub force_radial_order: usize,
    pub force_truncation: f64,
    pub fd_step: f64,
    pub max_reflections: usize,
    /// Largest accepted relative energy drift.
    pub energy_tol: f64,
    /// Largest accepted normal-velocity residual at the check nodes.
    pub bc_tol: f64,
}

impl Default for EulerConfig {
    fn default() -> Self {
        let o = EulerOptions::default();
        EulerConfig {
            image_degree: o.image_degree,
            fit_order: o.fit_order,
            check_nodes: o.check_nodes,
            force_surface_order: o.force_surface_order,
            force_radial_order: o.force_radial_order,
            force_truncation: o.force_truncation,
            fd_step: o.fd_step,
            max_reflections: o.max_reflections,
            energy_tol: 1e-4,
            bc_tol: 1e-6,
        }
    }
}

impl EulerConfig {
    pub fn options(&self) -> EulerOptions {
        EulerOptions {
            image_degree: self.image_degree,
            fit_order: self.fit_order,
            check_nodes: self.check_nodes,
            force_surface_order: self.force_surface_order,
            force_radial_order: self.force_radial_order,
            force_truncation: self.force_truncation,
            fd_step: self.fd_step,
            max_reflections: self.max_reflections,
        }
    }
}

/// What `sweep` runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepStudy {
    /// Viscous runs along `nu_grid` against the inviscid reference.
    #[default]
    Rate,
    /// Body density scaled along `sigma_grid`.
    Inertia,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub study: SweepStudy,
    /// System of the inertia study.
    pub system: StudyKind,
    pub nu_grid: Vec<f64>,
    pub alphas: Vec<AlphaRule>,
    pub sigma_grid: Vec<f64>,
    pub workers: usize,
    pub plot: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            study: SweepStudy::Rate,
            system: StudyKind::Viscous,
            nu_grid: vec![4e-2, 2e-2, 1e-2, 5e-3],
            alphas: vec![AlphaRule::Constant(1.0)],
            sigma_grid: vec![1.0, 10.0, 100.0, 1000.0],
            workers: 1,
            plot: true,
        }
    }
}

/// Random-field identity and monitor suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub pairs: usize,
    pub surface_order: usize,
    pub radial_order: usize,
    pub support_radius: f64,
    pub truncation_radius: f64,
    /// Highest harmonic degree of the random modes.
    pub max_degree: u32,
    /// Width `c` of the lifting cutoff.
    pub cutoff: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            pairs: 200,
            surface_order: 8,
            radial_order: 10,
            support_radius: 3.0,
            truncation_radius: 8.0,
            max_degree: 2,
            cutoff: 0.3,
        }
    }
}

/// Complete description of one invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub solver: SolverKind,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub body: BodyConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub viscous: ViscousConfig,
    #[serde(default)]
    pub euler: EulerConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// Defaults with the given horizon and step.
    pub fn new(t_end: f64, dt: f64) -> Self {
        RunConfig {
            seed: 0,
            output_dir: default_output(),
            solver: SolverKind::default(),
            t_end,
            dt,
            body: BodyConfig::default(),
            initial: InitialConfig::default(),
            viscous: ViscousConfig::default(),
            euler: EulerConfig::default(),
            sweep: SweepConfig::default(),
            verify: VerifyConfig::default(),
        }
    }

    /// Parses and validates `text`, applying `key=value` overrides first.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| diagnostic(text, &e))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: RunConfig = if overrides.is_empty() {
            toml::from_str(text).map_err(|e| diagnostic(text, &e))?
        } else {
            RunConfig::deserialize(toml::Value::Table(doc)).map_err(|e| match toml::from_str::<RunConfig>(text) {
                // Point at the file when the error is already there.
                Err(orig) if orig.span().is_some() && !orig.message().starts_with("missing field") => diagnostic(text, &orig),
                _ => Error::Config(format!("after overrides: {}", one_line(e.message()))),
            })?
        };
        cfg.validate().map_err(|(field, msg)| match locate(text, &field) {
            Some(line) => Error::Config(format!("line {line}, field `{field}`: {msg}")),
            None => Error::Config(format!("field `{field}`: {msg}")),
        })?;
        Ok(cfg)
    }

    /// Reads `path`; unreadable files are configuration errors.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Output directory after the environment override.
    pub fn resolved_output(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output_dir.clone(),
        }
    }

    /// Number of steps of size `dt` covering `t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn body_spec(&self) -> Result<RigidBodySpec> {
        let b = &self.body;
        let spec = match b.shape {
            ShapeKind::Sphere => RigidBodySpec::sphere(b.radius, b.density),
            ShapeKind::Icosphere => RigidBodySpec::mesh(TriMesh::icosphere(b.radius, b.level), b.density),
            ShapeKind::Mesh => {
                let path = b.mesh.as_ref().ok_or_else(|| Error::Config("field `body.mesh`: required for shape = \"mesh\"".into()))?;
                let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                // Body frame origin at the center of mass.
                RigidBodySpec::mesh(TriMesh::parse_ascii(&text)?, b.density).recentered()?
            }
        };
        let spec = spec.with_inertia_scale(b.inertia_scale);
        spec.validate()?;
        Ok(spec)
    }

    pub fn step_options(&self) -> StepOptions {
        StepOptions { dt: self.dt, max_halvings: self.viscous.max_halvings, ledger_rate_tol: self.viscous.ledger_rate_tol }
    }

    /// Checks every constraint; the error names the offending field.
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        let fail = |f: &str, m: String| Err((f.to_string(), m));
        let pos = |f: &str, v: f64| if v > 0.0 && v.is_finite() { Ok(()) } else { fail(f, format!("must be positive, got {v}")) };
        let nonneg = |f: &str, v: f64| if v >= 0.0 && v.is_finite() { Ok(()) } else { fail(f, format!("must be nonnegative, got {v}")) };
        let at_least = |f: &str, v: usize, m: usize| if v >= m { Ok(()) } else { fail(f, format!("must be at least {m}, got {v}")) };
        if self.seed > i64::MAX as u64 {
            return fail("seed", "must fit a signed 64-bit integer".into());
        }
        pos("t_end", self.t_end)?;
        pos("dt", self.dt)?;
        if self.dt > self.t_end {
            return fail("dt", format!("exceeds t_end = {}", self.t_end));
        }
        let n = self.t_end / self.dt;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return fail("dt", format!("must divide t_end = {} into whole steps", self.t_end));
        }
        let b = &self.body;
        pos("body.radius", b.radius)?;
        pos("body.density", b.density)?;
        pos("body.inertia_scale", b.inertia_scale)?;
        if b.shape == ShapeKind::Mesh && b.mesh.is_none() {
            return fail("body.shape", "\"mesh\" requires body.mesh".into());
        }
        let i = &self.initial;
        for (f, v) in [("initial.linear", &i.linear), ("initial.angular", &i.angular)] {
            if v.iter().any(|x| !x.is_finite()) {
                return fail(f, "must be finite".into());
            }
        }
        if !(i.support > b.radius) {
            return fail("initial.support", format!("must exceed the body radius {}", b.radius));
        }
        if let Some(r) = &i.ring {
            pos("initial.ring.radius", r.radius)?;
            at_least("initial.ring.particles", r.particles, 3)?;
            if !(crate::Vec3::from(r.axis).norm() > 0.0) {
                return fail("initial.ring.axis", "must be nonzero".into());
            }
        }
        if self.solver == SolverKind::Euler && i.ring.is_none() {
            return fail("initial.ring", "required by solver = \"euler\"".into());
        }
        let v = &self.viscous;
        nonneg("viscous.nu", v.nu)?;
        match v.alpha {
            AlphaRule::Constant(a) => nonneg("viscous.alpha", a)?,
            AlphaRule::NuPow(p) if !p.is_finite() => return fail("viscous.alpha", "exponent must be finite".into()),
            _ => {}
        }
        at_least("viscous.basis_size", v.basis_size, 7)?;
        at_least("viscous.max_degree", v.max_degree as usize, 1)?;
        at_least("viscous.radial_count", v.radial_count as usize, 1)?;
        at_least("viscous.surface_order", v.surface_order, 2)?;
        at_least("viscous.radial_order", v.radial_order, 2)?;
        if !(v.support_radius > b.radius) {
            return fail("viscous.support_radius", format!("must exceed the body radius {}", b.radius));
        }
        if !(v.truncation_radius > 2.0 * b.radius && v.truncation_radius > v.support_radius) {
            return fail("viscous.truncation_radius", "must exceed twice the body radius and the support radius".into());
        }
        pos("viscous.ledger_rate_tol", v.ledger_rate_tol)?;
        let e = &self.euler;
        if e.fit_order <= e.image_degree {
            return fail("euler.fit_order", format!("must exceed image_degree = {}", e.image_degree));
        }
        at_least("euler.check_nodes", e.check_nodes, 1)?;
        at_least("euler.force_surface_order", e.force_surface_order, 2)?;
        at_least("euler.force_radial_order", e.force_radial_order, 2)?;
        if !(e.force_truncation > 4.0) {
            return fail("euler.force_truncation", "must exceed 4 body radii".into());
        }
        pos("euler.fd_step", e.fd_step)?;
        pos("euler.energy_tol", e.energy_tol)?;
        pos("euler.bc_tol", e.bc_tol)?;
        let s = &self.sweep;
        at_least("sweep.workers", s.workers, 1)?;
        if s.nu_grid.is_empty() || s.nu_grid.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return fail("sweep.nu_grid", "must be nonempty and positive".into());
        }
        if s.nu_grid.windows(2).any(|w| w[1] >= w[0]) {
            return fail("sweep.nu_grid", "must be strictly decreasing".into());
        }
        if s.alphas.is_empty() {
            return fail("sweep.alphas", "must be nonempty".into());
        }
        if s.alphas.iter().any(|a| matches!(a, AlphaRule::Constant(c) if !(*c >= 0.0))) {
            return fail("sweep.alphas", "constants must be nonnegative".into());
        }
        if s.sigma_grid.is_empty() || s.sigma_grid.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return fail("sweep.sigma_grid", "must be nonempty and positive".into());
        }
        if s.sigma_grid.windows(2).any(|w| w[1] <= w[0]) {
            return fail("sweep.sigma_grid", "must be strictly increasing".into());
        }
        let c = &self.verify;
        at_least("verify.pairs", c.pairs, 1)?;
        at_least("verify.surface_order", c.surface_order, 2)?;
        at_least("verify.radial_order", c.radial_order, 2)?;
        at_least("verify.max_degree", c.max_degree as usize, 1)?;
        if !(c.support_radius > b.radius) {
            return fail("verify.support_radius", format!("must exceed the body radius {}", b.radius));
        }
        if !(c.truncation_radius > 2.0 * b.radius && c.truncation_radius > c.support_radius) {
            return fail("verify.truncation_radius", "must exceed twice the body radius and the support radius".into());
        }
        pos("verify.cutoff", c.cutoff)?;
        Ok(())
    }
}

fn one_line(msg: &str) -> String {
    msg.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join("; ")
}

/// `line L, column C: message` for a parse or schema error.
fn diagnostic(text: &str, e: &toml::de::Error) -> Error {
    let msg = one_line(e.message());
    match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.chars().rev().take_while(|c| *c != '\n').count() + 1;
            Error::Config(format!("line {line}, column {column}: {msg}"))
        }
        None => Error::Config(msg),
    }
}

/// Sets `section.key = value`; the value is read as TOML and falls back
/// to a string.
pub fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not of the form key=value")))?;
    let key = key.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.trim().into())),
        Err(_) => toml::Value::String(raw.trim().into()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key {key:?} is malformed")));
    }
    let mut table = doc;
    for p in &parts[..parts.len() - 1] {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| Error::Config(format!("override key {key:?}: `{p}` is not a section")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// 1-based line where `field` (dotted) is assigned in `text`.
fn locate(text: &str, field: &str) -> Option<usize> {
    let (section, key) = match field.rsplit_once('.') {
        Some((s, k)) => (s, k),
        None => ("", field),
    };
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if let Some(h) = l.strip_prefix('[') {
            current = h.trim_start_matches('[').trim_end_matches(']').trim().to_string();
            if current == field {
                return Some(i + 1);
            }
            continue;
        }
        if let Some((k, _)) = l.split_once('=') {
            let k = k.trim();
            if current == section && k == key {
                return Some(i + 1);
            }
            if current.is_empty() && !section.is_empty() && k == field {
                return Some(i + 1);
            }
        }
    }
    None
}
