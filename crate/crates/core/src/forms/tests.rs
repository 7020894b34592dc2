use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};

use super::*;
use crate::fields::{
    fd_divergence, solid_harmonics, Combination, ExteriorMode, ModeKind, RadialProfile, RigidField,
};
use crate::geometry::{cutoff_chi, truncation_field, RigidBodySpec};
use crate::kirchhoff::KirchhoffContext;

struct Setup {
    ctx: FormsContext,
    kctx: KirchhoffContext,
    modes: Vec<Arc<dyn VectorField>>,
}

fn setup(alpha: f64, r: f64) -> Setup {
    let spec = RigidBodySpec::sphere(1.0, 1.3);
    let kctx = KirchhoffContext::new(&spec).unwrap();
    let rs = RuleSpec { surface_order: 8, radial_order: 10, support_radius: 3.0, truncation_radius: r };
    let rule = standard_rule(&spec, &rs).unwrap();
    let ctx = FormsContext::new(rule, alpha, 0.1, kctx.mass(), kctx.inertia_tensor(), truncation_field(&spec, r).unwrap())
        .unwrap();
    let mut modes: Vec<Arc<dyn VectorField>> = Vec::new();
    for l in 1..3 {
        for h in solid_harmonics(l) {
            for kind in [ModeKind::Toroidal, ModeKind::Poloidal] {
                let power = if kind == ModeKind::Poloidal { 1 } else { 0 };
                modes.push(Arc::new(ExteriorMode {
                    kind,
                    harmonic: h.clone(),
                    profile: RadialProfile { inner: 1.0, outer: 3.0, power },
                    scale: 1.0,
                }));
            }
        }
    }
    Setup { ctx, kctx, modes }
}

/// Random element of ℋ with matched trace: Kirchhoff part plus modes.
fn random_field(s: &Setup, rng: &mut impl Rng, with_rigid: bool) -> FieldH {
    let beta = if with_rigid {
        Vec6::from_fn(|_, _| rng.gen_range(-1.0..1.0))
    } else {
        Vec6::zeros()
    };
    let k = FieldH::kirchhoff(&s.kctx, &beta);
    let mut terms: Vec<(f64, Arc<dyn VectorField>)> = vec![(1.0, k.fluid.clone())];
    for m in &s.modes {
        terms.push((rng.gen_range(-1.0..1.0), m.clone()));
    }
    FieldH { fluid: Arc::new(Combination::new(terms)), ..k }
}

#[test]
fn inner_product_of_first_test_field() {
    let s = setup(1.0, 8.0);
    let mut e = Vec6::zeros();
    e[0] = 1.0;
    let v1 = FieldH::kirchhoff(&s.kctx, &e);
    let ip = s.ctx.inner_h(&v1, &v1);
    assert!((ip - s.kctx.added_mass.total[(0, 0)]).abs() < 1e-9 * ip, "{ip}");
}

#[test]
fn energy_identity_for_rigid_data() {
    let s = setup(1.0, 8.0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let beta = Vec6::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let u = s.ctx.sample(&FieldH::kirchhoff(&s.kctx, &beta));
        let proj = Vec6::from_fn(|i, _| {
            let mut e = Vec6::zeros();
            e[i] = 1.0;
            s.ctx.inner_h_samples(&u, &s.ctx.sample(&FieldH::kirchhoff(&s.kctx, &e)))
        });
        let direct = s.kctx.added_mass.total * beta;
        assert!((proj - direct).norm() < 1e-9 * direct.norm());
    }
}

#[test]
fn inner_product_symmetric_positive() {
    let s = setup(1.0, 8.0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let u = s.ctx.sample(&random_field(&s, &mut rng, true));
        let v = s.ctx.sample(&random_field(&s, &mut rng, true));
        let (uv, vu) = (s.ctx.inner_h_samples(&u, &v), s.ctx.inner_h_samples(&v, &u));
        assert!((uv - vu).abs() <= 1e-14 * uv.abs().max(1.0));
        assert!(s.ctx.inner_h_samples(&u, &u) > 0.0);
    }
}

#[test]
fn a_vanishes_on_rigid_fields_and_is_symmetric() {
    let s = setup(2.0, 8.0);
    let rigid = FieldH::new(
        Arc::new(RigidField { linear: Vec3::new(0.3, -1.0, 0.2), angular: Vec3::new(0.5, 0.1, -0.7) }),
        Vec3::new(0.3, -1.0, 0.2),
        Vec3::new(0.5, 0.1, -0.7),
    );
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
    let v = random_field(&s, &mut rng, true);
    assert!(s.ctx.eval_a(&rigid, &v).abs() < 1e-12);
    let u = random_field(&s, &mut rng, true);
    let (uv, vu) = (s.ctx.eval_a(&u, &v), s.ctx.eval_a(&v, &u));
    assert!((uv - vu).abs() < 1e-12 * uv.abs().max(1.0));
    let mut ctx0 = s.ctx.clone();
    ctx0.alpha = 0.0;
    let (us, vs) = (s.ctx.sample(&u), s.ctx.sample(&v));
    assert_eq!(ctx0.a_samples(&us, &vs), ctx0.a_volume_samples(&us, &vs));
}

#[test]
fn b_cancels_and_is_trilinear() {
    let s = setup(1.0, 8.0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..4 {
        let u = s.ctx.sample(&random_field(&s, &mut rng, true));
        let v = s.ctx.sample(&random_field(&s, &mut rng, true));
        let w = s.ctx.sample(&random_field(&s, &mut rng, true));
        let b = s.ctx.b_samples(&u, &v, &v);
        assert!(b.relative() < 1e-10, "b(u,v,v) relative {:e}", b.relative());
        let br = s.ctx.b_truncated_samples(&u, &v, &v);
        assert!(br.relative() < 1e-10, "b_R(u,v,v) relative {:e}", br.relative());
        let mut u2 = Samples::zeros(u.vol_value.len(), u.surf_value.len());
        u2.axpy(2.0, &u);
        let (b1, b2) = (s.ctx.b_samples(&u, &v, &w).value, s.ctx.b_samples(&u2, &v, &w).value);
        assert!((b2 - 2.0 * b1).abs() < 1e-12 * b1.abs().max(1.0));
    }
}

#[test]
fn truncated_b_matches_b_for_supported_fields() {
    let s = setup(1.0, 8.0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let u = random_field(&s, &mut rng, false);
    let v = random_field(&s, &mut rng, false);
    let w = random_field(&s, &mut rng, false);
    let b = s.ctx.eval_b(&u, &v, &w).unwrap().value;
    let br = s.ctx.eval_b_truncated(&u, &v, &w).value;
    assert_eq!(b, br);
}

#[test]
fn truncated_b_converges_with_radius() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let mut errs = Vec::new();
    for r in [4.0, 8.0, 16.0] {
        let s = setup(1.0, r);
        let mut rng2 = rng.clone();
        let u = random_field(&s, &mut rng2, true);
        let v = random_field(&s, &mut rng2, true);
        let w = random_field(&s, &mut rng2, true);
        let b = s.ctx.eval_b(&u, &v, &w).unwrap().value;
        let br = s.ctx.eval_b_truncated(&u, &v, &w).value;
        errs.push((b - br).abs());
    }
    let _ = rng.gen::<f64>();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn untruncated_b_rejects_uncertified_field() {
    let s = setup(1.0, 8.0);
    let w = FieldH::new(Arc::new(RigidField { linear: Vec3::x(), angular: Vec3::zeros() }), Vec3::zeros(), Vec3::zeros());
    assert!(s.ctx.eval_b(&FieldH::zero(), &FieldH::zero(), &w).is_err());
}

#[test]
fn lifting_reproduces_rigid_motion() {
    let spec = RigidBodySpec::sphere(1.0, 1.0);
    let chi = cutoff_chi(&spec, 0.3).unwrap();
    let (l, r) = (Vec3::new(0.2, -0.4, 1.1), Vec3::new(-0.3, 0.8, 0.5));
    let lift = solid_lifting(l, r, &chi);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let d = crate::kirchhoff::random_unit(&mut rng);
        let x = d * rng.gen_range(1.0..1.3);
        assert!((lift.fluid.value(&x) - (l + r.cross(&x))).norm() < 1e-14);
        let y = d * rng.gen_range(1.61..3.0);
        assert_eq!(lift.fluid.value(&y), Vec3::zeros());
        let z = d * rng.gen_range(1.3..1.6);
        assert!(fd_divergence(lift.fluid.as_ref(), &z, 1e-5).abs() < 1e-6);
        assert!(lift.fluid.gradient(&z).trace().abs() < 1e-12);
    }
}

#[test]
fn useful_identity_residuals() {
    let s = setup(1.0, 8.0);
    let mut e = Vec6::zeros();
    e[0] = 1.0;
    let v1 = FieldH::kirchhoff(&s.kctx, &e);
    let res = s.ctx.verify_useful_identity(&v1, &v1).unwrap();
    assert!(res.relative() < 10.0 * QUADRATURE_TOL, "{res:?}");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3 {
        let u = random_field(&s, &mut rng, true);
        let v = random_field(&s, &mut rng, true);
        let res = s.ctx.verify_useful_identity(&u, &v).unwrap();
        assert!(res.relative() < 10.0 * QUADRATURE_TOL, "{res:?}");
    }
}

#[test]
fn wedge_monitor() {
    let s = setup(1.0, 8.0);
    let mut u = Samples::zeros(s.ctx.rule.volume.points.len(), s.ctx.rule.surface.points.len());
    u.angular = Vec3::new(0.3, -0.2, 0.9);
    let rep = inequality_monitors(&s.ctx, &u, &[1.0]);
    assert!(rep.wedge.0 <= rep.wedge_rounding && rep.wedge_holds());
    let mut ctx = s.ctx.clone();
    ctx.inertia = Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 4.0));
    let a = inequality_monitors(&ctx, &u, &[1.0]);
    u.angular *= 2.0;
    let b = inequality_monitors(&ctx, &u, &[1.0]);
    assert!((b.wedge.0 - 4.0 * a.wedge.0).abs() < 1e-12 && (b.wedge.1 - 4.0 * a.wedge.1).abs() < 1e-12);
    assert!(a.wedge_holds());
    assert!((wedge_constant(&ctx.inertia) - 1.5).abs() < 1e-14);
    let _ = PI;
}

