use super::*;
use crate::fields::{curl_of, fd_gradient, FnField};
use crate::geometry::RigidBodySpec;

fn context() -> EulerContext {
    let kctx = Arc::new(KirchhoffContext::new(&RigidBodySpec::sphere(1.0, 1.0)).unwrap());
    EulerContext::new(kctx, EulerOptions::default()).unwrap()
}

/// Four fat blobs on a ring, smooth enough for coarse volume rules.
fn fat_ring() -> VortexField {
    let mut f = VortexField::ring(Vec3::new(0.2, 0.0, 3.0), Vec3::new(0.1, 0.2, 1.0), 1.0, 1.0, 6).unwrap();
    f.epsilon = 0.7;
    f
}

#[test]
fn irrotational_reconstruction_is_the_kirchhoff_flow() {
    let ctx = context();
    let (l, r) = (Vec3::new(0.3, -0.2, 0.5), Vec3::new(0.1, 0.4, -0.3));
    let rec = ctx.velocity_from_vorticity(&VortexField::empty(0.1), l, r);
    for x in [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.5, 1.2, -0.3), Vec3::new(3.0, -2.0, 1.0)] {
        let exact: Vec3 = (0..3).map(|i| ctx.kctx.potentials[i].gradient(&x) * l[i]).sum();
        assert!((rec.value(&x) - exact).norm() <= 1e-15 * exact.norm().max(1.0));
    }
    assert!(rec.bc_residual() < 1e-14);
}

#[test]
fn distant_particle_sees_free_space_velocity() {
    let ctx = context();
    for d in [4.0, 8.0, 16.0] {
        let p = VortexParticle { position: Vec3::new(0.0, 0.0, d), strength: Vec3::new(1.0, 0.3, 0.0) };
        let field = VortexField { particles: vec![p], epsilon: 0.3 };
        let rec = ctx.velocity_from_vorticity(&field, Vec3::zeros(), Vec3::zeros());
        let x = p.position + Vec3::new(0.5, 0.0, 0.0);
        let free = biot_savart(&x, &field.particles, field.epsilon);
        let rel = (rec.value(&x) - free).norm() / free.norm();
        assert!(rel < (1.0 / d).powi(3), "d = {d}: {rel:e}");
        assert!(rec.bc_residual() < 1e-8 * free.norm());
    }
}

#[test]
fn curl_matches_mollified_vorticity() {
    let ctx = context();
    let field = VortexField::ring(Vec3::new(0.0, 0.0, 3.0), Vec3::z(), 1.0, 1.0, 64).unwrap();
    let rec = ctx.velocity_from_vorticity(&field, Vec3::new(0.1, 0.0, 0.0), Vec3::zeros());
    let eps = field.epsilon;
    let zeta = |d: f64| (2.0 * std::f64::consts::PI * eps * eps).powf(-1.5) * (-0.5 * d * d / (eps * eps)).exp();
    for p in field.particles.iter().step_by(16) {
        let omega: Vec3 = field.particles.iter().map(|q| q.strength * zeta((p.position - q.position).norm())).sum();
        let curl = curl_of(&fd_gradient(&rec, &p.position, 1e-4));
        assert!((curl - omega).norm() < 0.05 * omega.norm(), "{curl:?} vs {omega:?}");
        assert!(rec.gradient(&p.position).trace().abs() < 1e-6 * omega.norm());
    }
}

#[test]
fn zero_state_is_a_fixed_point() {
    let ctx = context();
    let s = EulerState::new(VortexField::empty(0.1), Vec3::zeros(), Vec3::zeros());
    let next = coupled_step(&ctx, &s, 0.1).unwrap();
    assert_eq!(next.linear, Vec3::zeros());
    assert_eq!(next.angular, Vec3::zeros());
    let body = body_ode_step(&ctx, &s, 0.1).unwrap();
    assert_eq!(body.linear, Vec3::zeros());
    assert!(vorticity_step(&ctx, &s, -1.0).is_err());
}

#[test]
fn steady_translation_feels_no_force() {
    let ctx = context();
    let s = EulerState::new(VortexField::empty(0.1), Vec3::new(0.4, -0.1, 0.2), Vec3::zeros());
    let rec = ctx.velocity_from_vorticity(&s.field, s.linear, s.angular);
    assert!(rec.forces().norm() < 1e-10, "{:?}", rec.forces());
    let next = body_ode_step(&ctx, &s, 0.5).unwrap();
    assert!((next.linear - s.linear).norm() < 1e-10);
}

#[test]
fn rigid_rotation_transport() {
    let w = Vec3::new(0.2, -0.5, 1.0);
    let rel = FnField { value: move |x: &Vec3| w.cross(x), gradient: move |_: &Vec3| skew(&w) };
    let field = fat_ring();
    let mut f = field.clone();
    let (dt, steps) = (0.005, 200);
    for _ in 0..steps {
        f = transport_step(&f, &rel, dt);
    }
    let q = crate::motion::rodrigues(&(w * (dt * steps as f64)));
    for (a, b) in field.particles.iter().zip(&f.particles) {
        assert!((q * a.position - b.position).norm() < 1e-9);
        assert!((q * a.strength - b.strength).norm() < 1e-9);
    }
}

#[test]
fn energy_formula_matches_volume_quadrature() {
    let ctx = context();
    let field = fat_ring();
    let rec = ctx.velocity_from_vorticity(&field, Vec3::new(0.2, 0.1, -0.3), Vec3::new(0.0, 0.5, 0.1));
    let opts = QuadratureOptions::new(40, 16, 12.0).with_breakpoints([1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0]);
    let rule = QuadratureRule::build(&ctx.kctx.spec, &opts).unwrap();
    let direct: f64 = rule.volume.points.iter().zip(&rule.volume.weights).map(|(x, w)| w * rec.value(x).norm_squared()).sum();
    let formula = rec.fluid_energy();
    assert!((direct - formula).abs() < 1e-6 * formula, "{direct} vs {formula}");
}

#[test]
fn coupled_step_is_fourth_order() {
    let ctx = context();
    let s0 = EulerState::new(fat_ring(), Vec3::new(0.0, 0.1, 0.0), Vec3::zeros());
    let t = 0.4;
    let end = |n: usize| {
        let mut s = s0.clone();
        for _ in 0..n {
            s = coupled_step(&ctx, &s, t / n as f64).unwrap();
        }
        let (a, b) = s.field.moments();
        (s.field.particles[0].position, a + b, s.linear)
    };
    let (a, b, c) = (end(2), end(4), end(8));
    for (x, y, z) in [(a.0, b.0, c.0), (a.1, b.1, c.1), (a.2, b.2, c.2)] {
        let ratio = (x - y).norm() / (y - z).norm();
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }
}

#[test]
fn weak_identity_for_rigid_test_fields() {
    let ctx = context();
    let s0 = EulerState::new(fat_ring(), Vec3::new(0.05, -0.1, 0.2), Vec3::new(0.0, 0.0, 0.3));
    let opts = QuadratureOptions::new(30, 12, 10.0).with_breakpoints([1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0]);
    let rule = QuadratureRule::build(&ctx.kctx.spec, &opts).unwrap();
    let pots = &ctx.kctx.potentials;
    // (u, vᵢ)_ℋ by volume quadrature plus the body part.
    let moment = |s: &EulerState| -> Vec6 {
        let rec = ctx.velocity_from_vorticity(&s.field, s.linear, s.angular);
        let us: Vec<Vec3> = rule.volume.points.iter().map(|x| rec.value(x)).collect();
        let body = [ctx.mass * s.linear, ctx.inertia * s.angular];
        Vec6::from_fn(|i, _| {
            let fluid: f64 =
                rule.volume.points.iter().zip(&rule.volume.weights).zip(&us).map(|((x, w), u)| w * u.dot(&pots[i].gradient(x))).sum();
            fluid + body[i / 3][i % 3]
        })
    };
    let h = 1e-2;
    let plus = coupled_step(&ctx, &s0, h).unwrap();
    let minus = coupled_step_signed(&ctx, &s0, -h);
    let fd = (moment(&plus) - moment(&minus)) / (2.0 * h);
    // −b(u, vᵢ, u) = −∫ ([(u−u_𝒮)·∇]u)·∇Φᵢ + det(r, ∇Φᵢ, u) + [m r∧ℓ; (𝒥₀r)∧r].
    let rec = ctx.velocity_from_vorticity(&s0.field, s0.linear, s0.angular);
    let (l, r) = (s0.linear, s0.angular);
    let body_l = r.cross(&l) * ctx.mass;
    let body_r = (ctx.inertia * r).cross(&r);
    let rhs = Vec6::from_fn(|i, _| {
        let fluid: f64 = rule
            .volume
            .points
            .iter()
            .zip(&rule.volume.weights)
            .map(|(x, w)| {
                let (u, g) = rec.eval(x);
                let gp = pots[i].gradient(x);
                w * ((g * (u - rec.solid_velocity(x))).dot(&gp) - r.dot(&gp.cross(&u)))
            })
            .sum();
        let body = if i < 3 { body_l[i] } else { body_r[i - 3] };
        body - fluid
    });
    assert!((fd - rhs).norm() < 1e-4 * rhs.norm().max(1e-3), "{fd:?} vs {rhs:?}");
    assert!((fd - rec.forces()).norm() < 1e-4 * rhs.norm().max(1e-3));
}

/// Same step with a signed `dt` (backward steps for central differences).
fn coupled_step_signed(ctx: &EulerContext, s: &EulerState, dt: f64) -> EulerState {
    rk4(ctx, s, dt, Mode::Coupled).unwrap()
}

#[test]
fn ring_seeding_and_reflection() {
    let ctx = context();
    let f = VortexField::ring(Vec3::new(0.0, 0.0, 3.0), Vec3::z(), 1.0, 2.0, 48).unwrap();
    assert!((f.epsilon - 1.5 * 2.0 * std::f64::consts::PI / 48.0).abs() < 1e-15);
    let (total, impulse) = f.moments();
    assert!(total.norm() < 1e-12);
    // Impulse of a ring: Γ π R² along the axis.
    assert!((impulse - Vec3::z() * (2.0 * std::f64::consts::PI)).norm() < 1e-12);
    let near = VortexField { particles: vec![VortexParticle { position: Vec3::new(0.0, 0.0, 1.1), strength: Vec3::x() }], epsilon: 0.1 };
    assert!(EulerState::new(near, Vec3::zeros(), Vec3::zeros()).check_seeding(&ctx).is_err());
    let mut s = EulerState::new(
        VortexField { particles: vec![VortexParticle { position: Vec3::new(0.0, 0.0, 0.9), strength: Vec3::x() }], epsilon: 0.1 },
        Vec3::zeros(),
        Vec3::zeros(),
    );
    reflect(&ctx, &mut s);
    assert_eq!(s.reflections, 1);
    assert!((s.field.particles[0].position.z - 1.1).abs() < 1e-15);
}
