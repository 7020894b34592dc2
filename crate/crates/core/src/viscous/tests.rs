use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};

use super::*;
use crate::fields::fd_divergence;
use crate::forms::{standard_rule, FormsContext, RuleSpec};
use crate::geometry::{truncation_field, RigidBodySpec};
use crate::kirchhoff::KirchhoffContext;

fn context(spec: &RigidBodySpec, kctx: &KirchhoffContext, rs: &RuleSpec, alpha: f64) -> FormsContext {
    let rule = standard_rule(spec, rs).unwrap();
    FormsContext::new(rule, alpha, 0.1, kctx.mass(), kctx.inertia_tensor(), truncation_field(spec, rs.truncation_radius).unwrap())
        .unwrap()
}

fn small(n: usize, alpha: f64) -> (GalerkinBasis, GalerkinSystem, FormsContext) {
    let spec = RigidBodySpec::sphere(1.0, 1.2);
    let kctx = Arc::new(KirchhoffContext::new(&spec).unwrap());
    let opts = BasisOptions { rule: RuleSpec { surface_order: 8, radial_order: 10, ..RuleSpec::default() }, ..Default::default() };
    let basis = build_basis_with(kctx.clone(), n, &opts).unwrap();
    let ctx = context(&spec, &kctx, &opts.rule, alpha);
    let sys = assemble_system(&basis, &ctx).unwrap();
    (basis, sys, ctx)
}

fn random_coeffs(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

#[test]
fn catalog_order_and_limits() {
    let c = mode_catalog(2, 2);
    assert_eq!(c.len(), 2 * (3 + 5) * 2);
    assert!(matches!(c[0], ModeLabel::Exterior { degree: 1, radial: 0, .. }));
    assert!(matches!(c[6], ModeLabel::Exterior { degree: 1, radial: 1, .. }));
    assert!(matches!(c[12], ModeLabel::Exterior { degree: 2, radial: 0, .. }));
    let spec = RigidBodySpec::sphere(1.0, 1.0);
    assert!(build_basis(&spec, 5, 20.0).is_err());
    assert!(build_basis(&spec, 6 + 192 + 1, 20.0).is_err());
}

#[test]
fn rigid_only_basis_reproduces_added_mass() {
    let (basis, sys, _) = small(6, 1.0);
    assert_eq!(basis.labels[0], ModeLabel::Rigid { index: 0 });
    let m = basis.kctx.added_mass.total;
    for i in 0..6 {
        for j in 0..6 {
            assert!((sys.mass_matrix[(i, j)] - m[(i, j)]).abs() < 1e-9 * m.norm(), "{i} {j}");
        }
    }
}

#[test]
fn modes_are_solenoidal_with_zero_normal_trace() {
    let (basis, _, _) = small(40, 1.0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    for w in &basis.fields[6..] {
        for _ in 0..10 {
            let d = crate::kirchhoff::random_unit(&mut rng);
            assert!(w.fluid.value(&d).dot(&d).abs() < 1e-12);
            let x = d * rng.gen_range(1.1..2.9);
            let scale = w.fluid.gradient(&x).norm().max(1.0);
            assert!(fd_divergence(w.fluid.as_ref(), &x, 1e-5).abs() < 1e-7 * scale);
            assert!(w.fluid.gradient(&x).trace().abs() < 1e-11 * scale);
            assert_eq!(w.fluid.value(&(d * 0.7)), crate::Vec3::zeros());
        }
        assert_eq!((w.linear, w.angular), (crate::Vec3::zeros(), crate::Vec3::zeros()));
    }
}

#[test]
fn matrices_symmetric_and_block_structure() {
    let (_, sys, _) = small(30, 1.0);
    let n = sys.n();
    let m = &sys.mass_matrix;
    let a = &sys.stiffness;
    assert!((m - m.transpose()).norm() < 1e-13 * m.norm());
    assert!((a - a.transpose()).norm() < 1e-12 * a.norm());
    assert!(a.symmetric_eigenvalues().max() < 1e-10 * a.norm());
    // (vᵢ, wⱼ)_ℋ = 0 for exterior modes: the rigid part of wⱼ vanishes.
    for i in 0..6 {
        for j in 6..n {
            assert!(m[(i, j)].abs() < 1e-10, "{i} {j} {}", m[(i, j)]);
        }
    }
}

#[test]
fn trilinear_cancellation() {
    let (_, sys, _) = small(30, 1.0);
    let n = sys.n();
    for seed in 0..10 {
        let g = random_coeffs(n, seed);
        let u = random_coeffs(n, 100 + seed);
        let c = sys.trilinear_form(&u, &g, &g);
        let scale: f64 = sys.trilinear.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
        assert!(c.abs() < 1e-10 * scale * g.norm_squared() * u.norm(), "{c:e}");
        let b = sys.trilinear_apply(&g);
        assert!((b.dot(&g) - sys.trilinear_form(&g, &g, &g)).abs() < 1e-12 * scale * g.norm().powi(3));
    }
}

#[test]
fn stiffness_two_ways_for_rigid_basis() {
    let (basis, sys, ctx) = small(6, 0.0);
    // vᵢ is harmonic, so −∫D(vᵢ):D(vⱼ) equals minus half the boundary side.
    let samples: Vec<_> = basis.fields.iter().map(|f| ctx.sample(f)).collect();
    for i in 0..6 {
        for j in 0..6 {
            let reduced = -0.5 * ctx.useful_boundary_terms(&samples[i], &samples[j]).value;
            assert!((reduced - sys.stiffness[(i, j)]).abs() < 1e-9 * sys.stiffness.norm().max(1.0), "{i} {j}");
        }
    }
    assert!(sys.stiffness.norm() > 1.0);
}

#[test]
fn zero_state_is_fixed() {
    let (_, sys, _) = small(20, 1.0);
    let s = ViscousState::new(DVector::zeros(20));
    let next = step(&sys, &s, 0.01, 0.1).unwrap();
    assert_eq!(next.coeffs, DVector::zeros(20));
    assert!(step(&sys, &s, 0.0, 0.1).is_err());
    let (l, r) = sys.body_rate_from_added_mass(&s.coeffs, 0.1).unwrap();
    assert_eq!((l, r), (crate::Vec3::zeros(), crate::Vec3::zeros()));
}

#[test]
fn energy_ledger_and_alpha_zero() {
    let (_, sys, _) = small(24, 1.0);
    let g0 = random_coeffs(24, 3) * 0.5;
    let traj = ViscousSolver::new(&sys, 0.05, StepOptions { dt: 1e-2, ..Default::default() }).unwrap().run(&g0, 0.5).unwrap();
    assert!(traj.ledger.min_relative_slack() >= -1e-8, "{}", traj.ledger.min_relative_slack());
    assert!(traj.ledger.energy_monotone(1e-12));
    let s0 = sys.with_alpha(0.0).unwrap();
    let t0 = ViscousSolver::new(&s0, 0.05, StepOptions { dt: 1e-2, ..Default::default() }).unwrap().run(&g0, 0.2).unwrap();
    assert!(t0.ledger.entries.iter().all(|e| e.friction_rate == 0.0 && e.friction_integral == 0.0));
    // Rates are linear in ν.
    let (v1, b1) = sys.dissipation(&g0, 0.1);
    let (v2, b2) = sys.dissipation(&g0, 0.2);
    assert!((v2 - 2.0 * v1).abs() < 1e-14 * v2.abs() && (b2 - 2.0 * b1).abs() < 1e-14 * b2.abs());
}

#[test]
fn fourth_order_in_time() {
    let (_, sys, _) = small(20, 1.0);
    let g0 = random_coeffs(20, 4) * 0.5;
    let run = |dt: f64| {
        let mut s = ViscousState::new(g0.clone());
        let steps = (0.4 / dt).round() as usize;
        for _ in 0..steps {
            s = step(&sys, &s, dt, 0.05).unwrap();
        }
        s.coeffs
    };
    let (a, b, c) = (run(0.04), run(0.02), run(0.01));
    let order = ((&a - &b).norm() / (&b - &c).norm()).log2();
    assert!((order - 4.0).abs() < 0.3, "observed order {order}");
}

#[test]
fn body_rate_matches_trajectory_derivative() {
    let (_, sys, _) = small(24, 1.0);
    let g0 = random_coeffs(24, 5) * 0.5;
    let nu = 0.05;
    let dt = 2e-3;
    let traj = ViscousSolver::new(&sys, nu, StepOptions { dt, ..Default::default() }).unwrap().run(&g0, 0.1).unwrap();
    let rig = traj.rigid(&sys);
    for k in [5, 20, 45] {
        // Fourth-order central difference.
        let d = |i: usize| -> crate::Vec6 {
            let (l, r) = rig[i];
            crate::Vec6::new(l.x, l.y, l.z, r.x, r.y, r.z)
        };
        let fd = (d(k - 2) - d(k - 1) * 8.0 + d(k + 1) * 8.0 - d(k + 2)) / (12.0 * dt);
        let (l, r) = sys.body_rate_from_added_mass(&traj.coeffs[k], nu).unwrap();
        let am = crate::Vec6::new(l.x, l.y, l.z, r.x, r.y, r.z);
        assert!((fd - am).norm() < 1e-3 * am.norm(), "{:e} vs {:e}", (fd - am).norm(), am.norm());
    }
}

#[test]
fn rigid_velocity_matches_projection() {
    let (basis, sys, ctx) = small(24, 1.0);
    let g = random_coeffs(24, 6);
    let mv = &sys.mass_matrix * &g;
    let beta = sys.added_mass().unwrap().total.cholesky().unwrap().solve(&crate::Vec6::from_iterator(mv.iter().take(6).copied()));
    let (l, r) = sys.rigid_velocity(&g);
    assert!((beta.fixed_rows::<3>(0) - l).norm() < 1e-9 && (beta.fixed_rows::<3>(3) - r).norm() < 1e-9);
    // Projection of a basis combination recovers it.
    let terms = basis.fields.iter().zip(g.iter()).map(|(f, c)| (*c, f.fluid.clone())).collect();
    let u = crate::forms::FieldH::new(Arc::new(crate::fields::Combination::new(terms)), l, r);
    let p = project(&sys, &basis, &ctx.rule, &u);
    assert!((p - &g).norm() < 1e-9 * g.norm());
}

#[test]
fn inner_tensor_entries_independent_of_truncation_radius() {
    let spec = RigidBodySpec::sphere(1.0, 1.0);
    let kctx = Arc::new(KirchhoffContext::new(&spec).unwrap());
    let mut out = Vec::new();
    for r in [10.0, 20.0] {
        let opts = BasisOptions {
            rule: RuleSpec { surface_order: 6, radial_order: 8, support_radius: 3.0, truncation_radius: r },
            ..Default::default()
        };
        let basis = build_basis_with(kctx.clone(), 14, &opts).unwrap();
        let ctx = context(&spec, &kctx, &opts.rule, 1.0);
        out.push(assemble_tensors(&basis, &ctx).unwrap());
    }
    let n = 14;
    for i in 6..n {
        for k in 0..n {
            for j in 0..n {
                let idx = (i * n + k) * n + j;
                assert_eq!(out[0].trilinear_fluid[idx], out[1].trilinear_fluid[idx]);
            }
        }
    }
}

#[test]
fn fixed_body_restriction_matches_direct_assembly() {
    let spec = RigidBodySpec::sphere(1.0, 1.2);
    let kctx = Arc::new(KirchhoffContext::new(&spec).unwrap());
    let rule = RuleSpec { surface_order: 6, radial_order: 8, ..RuleSpec::default() };
    let full = BasisOptions { rule: rule.clone(), ..Default::default() };
    let bare = BasisOptions { include_rigid: false, ..full.clone() };
    let ctx = context(&spec, &kctx, &rule, 1.5);
    let coupled = assemble_system(&build_basis_with(kctx.clone(), 14, &full).unwrap(), &ctx).unwrap();
    let direct = assemble_system(&build_basis_with(kctx.clone(), 8, &bare).unwrap(), &ctx).unwrap();
    let fixed = coupled.fixed_body().unwrap();
    assert_eq!(fixed.n(), 8);
    assert!((&fixed.mass_matrix - &direct.mass_matrix).norm() < 1e-12 * direct.mass_matrix.norm());
    assert!((&fixed.stiffness - &direct.stiffness).norm() < 1e-12 * direct.stiffness.norm());
    let g = random_coeffs(8, 3);
    assert!((fixed.rhs(&g, 0.1) - direct.rhs(&g, 0.1)).norm() < 1e-10 * direct.rhs(&g, 0.1).norm());
}
