//! Randomized identity and inequality suite of the `verify` command.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use super::{output_dir, to_json, write_file, RunConfig};
use crate::fields::{solid_harmonics, Combination, ExteriorMode, ModeKind, RadialProfile, VectorField};
use crate::forms::{inequality_monitors, solid_lifting, wedge_constant, standard_rule, FieldH, FormsContext, RuleSpec, Samples, QUADRATURE_TOL};
use crate::geometry::{cutoff_chi, truncation_field, Shape};
use crate::io::csv_line;
use crate::kirchhoff::{random_unit, KirchhoffContext};
use crate::motion::rodrigues;
use crate::{Error, Mat3, Result, Vec3, Vec6};

/// Relative bound on `b(u,v,v)` and `b_R(u,v,v)`.
pub const CANCELLATION_TOL: f64 = 1e-10;
/// Bound on the lifting error on the band where the cutoff equals 1.
pub const LIFTING_TOL: f64 = 1e-10;
/// Points per pair at which the lifting is checked.
const LIFTING_POINTS: usize = 16;

/// Measurements of one random pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairRecord {
    pub pair: usize,
    /// `|b(u,v,v)|` over the sum of absolute contributions.
    pub b_rel: f64,
    pub b_truncated_rel: f64,
    pub useful_rel: f64,
    /// `|[(u,vᵢ)_ℋ] − ℳβ| / |ℳβ|` for `u = Σβᵢvᵢ`.
    pub energy_rel: f64,
    /// Largest `|ũ_𝒮 − (ℓ + r∧x)| / (|ℓ| + |r||x|)` on the band.
    pub lifting_err: f64,
    /// `‖u‖_{L⁴} / (√2‖u‖^{1/4}‖∇u‖^{3/4})`.
    pub interpolation_ratio: f64,
    /// Largest `‖(𝒥r)∧r‖ / (C(𝒥)(𝒥r)·r)` over the body tensor and a
    /// random anisotropic one.
    pub wedge_ratio: f64,
    pub interpolation_holds: bool,
    pub wedge_holds: bool,
}

/// Aggregate of the suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub pairs: usize,
    pub max_b_rel: f64,
    pub max_b_truncated_rel: f64,
    pub max_useful_rel: f64,
    pub max_energy_rel: f64,
    pub max_lifting_err: f64,
    pub max_interpolation_ratio: f64,
    pub max_wedge_ratio: f64,
    pub interpolation_violations: usize,
    pub wedge_violations: usize,
    pub cancellation_ok: bool,
    pub useful_ok: bool,
    pub energy_ok: bool,
    pub lifting_ok: bool,
    pub passed: bool,
}

pub const PAIR_CSV_HEADER: &str =
    "pair,b_rel,b_truncated_rel,useful_rel,energy_rel,lifting_err,interpolation_ratio,wedge_ratio";

struct Suite {
    ctx: FormsContext,
    kctx: KirchhoffContext,
    /// Modes for the identity fields.
    modes: Vec<Arc<dyn VectorField>>,
    /// Modes vanishing on the body, for the interpolation monitor.
    interior_modes: Vec<Arc<dyn VectorField>>,
    tests: Vec<Samples>,
    radius: f64,
    cutoff: f64,
}

impl Suite {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let spec = cfg.body_spec()?;
        let a = match spec.shape {
            Shape::Sphere { radius } => radius,
            Shape::Mesh(_) => return Err(Error::Config("field `body.shape`: verify runs on a sphere".into())),
        };
        let v = &cfg.verify;
        let kctx = KirchhoffContext::new(&spec)?;
        let rs = RuleSpec {
            surface_order: v.surface_order,
            radial_order: v.radial_order,
            support_radius: v.support_radius,
            truncation_radius: v.truncation_radius,
        };
        let rule = standard_rule(&spec, &rs)?;
        let ctx = FormsContext::new(
            rule,
            cfg.viscous.alpha.alpha(cfg.viscous.nu),
            cfg.viscous.nu,
            kctx.mass(),
            kctx.inertia_tensor(),
            truncation_field(&spec, v.truncation_radius)?,
        )?;
        let build = |interior: bool| {
            let mut out: Vec<Arc<dyn VectorField>> = Vec::new();
            for l in 1..=v.max_degree {
                for h in solid_harmonics(l) {
                    for kind in [ModeKind::Toroidal, ModeKind::Poloidal] {
                        let power = if interior || kind == ModeKind::Poloidal { 1 } else { 0 };
                        out.push(Arc::new(ExteriorMode {
                            kind,
                            harmonic: h.clone(),
                            profile: RadialProfile { inner: a, outer: v.support_radius, power },
                            scale: 1.0,
                        }));
                    }
                }
            }
            out
        };
        let tests = (0..6)
            .map(|i| {
                let mut e = Vec6::zeros();
                e[i] = 1.0;
                ctx.sample(&FieldH::kirchhoff(&kctx, &e))
            })
            .collect();
        Ok(Suite { modes: build(false), interior_modes: build(true), ctx, kctx, tests, radius: a, cutoff: v.cutoff })
    }

    fn field(&self, rng: &mut impl Rng, modes: &[Arc<dyn VectorField>], beta: &Vec6) -> FieldH {
        let k = FieldH::kirchhoff(&self.kctx, beta);
        let mut terms: Vec<(f64, Arc<dyn VectorField>)> = vec![(1.0, k.fluid.clone())];
        for m in modes {
            terms.push((rng.gen_range(-1.0..1.0), m.clone()));
        }
        FieldH { fluid: Arc::new(Combination::new(terms)), ..k }
    }

    fn pair(&self, seed: u64, pair: usize) -> Result<PairRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(pair as u64);
        let mut beta = || Vec6::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let (bu, bv, bk) = (beta(), beta(), beta());
        let u = self.field(&mut rng, &self.modes, &bu);
        let v = self.field(&mut rng, &self.modes, &bv);
        let (us, vs) = (self.ctx.sample(&u), self.ctx.sample(&v));
        let b_rel = self.ctx.b_samples(&us, &vs, &vs).relative();
        let b_truncated_rel = self.ctx.b_truncated_samples(&us, &vs, &vs).relative();
        let useful_rel = self.ctx.verify_useful_identity(&u, &v)?.relative();

        let ks = self.ctx.sample(&FieldH::kirchhoff(&self.kctx, &bk));
        let proj = Vec6::from_fn(|i, _| self.ctx.inner_h_samples(&ks, &self.tests[i]));
        let direct = self.kctx.added_mass.total * bk;
        let energy_rel = (proj - direct).norm() / direct.norm();

        let spec = &self.kctx.spec;
        let chi = cutoff_chi(spec, self.cutoff)?;
        let (l, r) = (random_unit(&mut rng) * rng.gen_range(0.1..2.0), random_unit(&mut rng) * rng.gen_range(0.1..2.0));
        let lift = solid_lifting(l, r, &chi);
        let lifting_err = (0..LIFTING_POINTS)
            .map(|q| {
                let d = random_unit(&mut rng);
                let s = if q == 0 { 0.0 } else { rng.gen_range(0.0..1.0) };
                let x = d * (self.radius + s * self.cutoff);
                let exact = l + r.cross(&x);
                (lift.fluid.value(&x) - exact).norm() / (l.norm() + r.norm() * x.norm())
            })
            .fold(0.0, f64::max);

        let w = self.field(&mut rng, &self.interior_modes, &Vec6::zeros());
        let mut ws = self.ctx.sample(&w);
        ws.angular = random_unit(&mut rng) * rng.gen_range(0.1..2.0);
        let mon = inequality_monitors(&self.ctx, &ws, &[]);
        let ratio = |(a, b): (f64, f64), slack: f64| if a <= slack { 0.0 } else { a / (b + slack) };
        // The body tensor and a random anisotropic one.
        let q = rodrigues(&(random_unit(&mut rng) * rng.gen_range(0.0..std::f64::consts::PI)));
        let j = q * Mat3::from_diagonal(&Vec3::from_fn(|_, _| rng.gen_range(0.1..4.0))) * q.transpose();
        let r = ws.angular;
        let jr = j * r;
        let random_wedge = (jr.cross(&r).norm(), wedge_constant(&j) * jr.dot(&r));
        let random_rounding = 8.0 * f64::EPSILON * jr.norm() * r.norm();
        let wedge_ratio = ratio(mon.wedge, mon.wedge_rounding).max(ratio(random_wedge, random_rounding));
        let wedge_holds =
            mon.wedge_holds() && random_wedge.0 <= random_wedge.1 * (1.0 + 1e-12) + random_rounding;
        Ok(PairRecord {
            pair,
            b_rel,
            b_truncated_rel,
            useful_rel,
            energy_rel,
            lifting_err,
            interpolation_ratio: ratio(mon.interpolation, 0.0),
            wedge_ratio,
            interpolation_holds: mon.interpolation_holds(),
            wedge_holds,
        })
    }
}

/// Runs `verify.pairs` random pairs and writes `verify.csv` and
/// `verify.json`. Fails with a consistency error when any check fails.
pub fn verify(cfg: &RunConfig) -> Result<Value> {
    let dir = output_dir(cfg)?;
    let suite = Suite::new(cfg)?;
    let records =
        (0..cfg.verify.pairs).into_par_iter().map(|k| suite.pair(cfg.seed, k)).collect::<Result<Vec<PairRecord>>>()?;
    let mut csv = format!("{PAIR_CSV_HEADER}\n");
    for p in &records {
        csv.push_str(&csv_line(&[
            p.pair as f64,
            p.b_rel,
            p.b_truncated_rel,
            p.useful_rel,
            p.energy_rel,
            p.lifting_err,
            p.interpolation_ratio,
            p.wedge_ratio,
        ]));
    }
    write_file(&dir.join("verify.csv"), csv.as_bytes())?;
    let max = |f: fn(&PairRecord) -> f64| records.iter().map(f).fold(0.0, f64::max);
    let report = VerifyReport {
        seed: cfg.seed,
        pairs: records.len(),
        max_b_rel: max(|p| p.b_rel),
        max_b_truncated_rel: max(|p| p.b_truncated_rel),
        max_useful_rel: max(|p| p.useful_rel),
        max_energy_rel: max(|p| p.energy_rel),
        max_lifting_err: max(|p| p.lifting_err),
        max_interpolation_ratio: max(|p| p.interpolation_ratio),
        max_wedge_ratio: max(|p| p.wedge_ratio),
        interpolation_violations: records.iter().filter(|p| !p.interpolation_holds).count(),
        wedge_violations: records.iter().filter(|p| !p.wedge_holds).count(),
        cancellation_ok: max(|p| p.b_rel.max(p.b_truncated_rel)) < CANCELLATION_TOL,
        useful_ok: max(|p| p.useful_rel) < 10.0 * QUADRATURE_TOL,
        energy_ok: max(|p| p.energy_rel) < QUADRATURE_TOL,
        lifting_ok: max(|p| p.lifting_err) < LIFTING_TOL,
        passed: false,
    };
    let report = VerifyReport {
        passed: report.cancellation_ok
            && report.useful_ok
            && report.energy_ok
            && report.lifting_ok
            && report.interpolation_violations == 0
            && report.wedge_violations == 0,
        ..report
    };
    let text = to_json(&report)?;
    write_file(&dir.join("verify.json"), text.as_bytes())?;
    let value = serde_json::to_value(&report).map_err(|e| Error::InvalidInput(e.to_string()))?;
    if !report.passed {
        return Err(Error::Consistency(format!("verify suite failed: {}", text.trim())));
    }
    Ok(value)
}
