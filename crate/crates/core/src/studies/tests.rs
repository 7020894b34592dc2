use std::sync::Arc;

use super::*;
use crate::forms::{standard_rule, FormsContext, RuleSpec};
use crate::geometry::truncation_field;
use crate::viscous::{assemble_system, build_basis_with, BasisOptions, InitialData, VorticalProfile};

#[test]
fn exact_power_law_fits() {
    let x: [f64; 4] = [0.04, 0.02, 0.01, 0.005];
    let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(0.75)).collect();
    let f = fit_rate(&x, &y).unwrap();
    assert!((f.slope - 0.75).abs() < 1e-12 && (f.constant - 3.0).abs() < 1e-11 && !f.dropped_coarsest);
    assert!(fit_loglog(&[1.0], &[1.0]).is_err());
    assert!(fit_loglog(&[1.0, 2.0], &[1.0, -1.0]).is_err());
}

#[test]
fn coarsest_outlier_is_dropped_and_reported() {
    let x: [f64; 5] = [0.08, 0.04, 0.02, 0.01, 0.005];
    let mut y: Vec<f64> = x.iter().map(|v| v.powf(0.75)).collect();
    for (k, v) in y.iter_mut().enumerate() {
        *v *= 1.0 + 1e-3 * (k as f64 - 2.0).powi(2);
    }
    y[0] *= 3.0;
    let f = fit_rate(&x, &y).unwrap();
    assert!(f.dropped_coarsest && f.points_used == 4);
    assert!((f.slope - 0.75).abs() < 0.01);
}

#[test]
fn pooled_slope_separates_constants() {
    let x: Vec<f64> = vec![0.04, 0.02, 0.01];
    let series: Vec<(Vec<f64>, Vec<f64>)> =
        [1.0f64, 2.0, 4.0].iter().map(|c| (x.clone(), x.iter().map(|v| c * v.powf(0.6)).collect())).collect();
    let (s, c) = pooled_constants(&series).unwrap();
    assert!((s - 0.6).abs() < 1e-12);
    for (a, b) in c.iter().zip([1.0, 2.0, 4.0]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn alpha_rules_parse_and_round_trip() {
    assert_eq!("1.5".parse::<AlphaRule>().unwrap(), AlphaRule::Constant(1.5));
    assert_eq!("nu_pow:-0.5".parse::<AlphaRule>().unwrap(), AlphaRule::NuPow(-0.5));
    assert!((AlphaRule::NuPow(-0.5).alpha(0.01) - 10.0).abs() < 1e-12);
    for bad in ["", "-1", "nu_pow:", "nu_pow:x", "nan"] {
        assert!(bad.parse::<AlphaRule>().is_err(), "{bad}");
    }
    for r in [AlphaRule::Constant(0.5), AlphaRule::NuPow(-0.5)] {
        assert_eq!(r.to_string().parse::<AlphaRule>().unwrap(), r);
        let j = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<AlphaRule>(&j).unwrap(), r);
    }
}

#[test]
fn time_rules_are_exact_on_low_degree() {
    let t: Vec<f64> = (0..11).map(|k| 0.1 * k as f64).collect();
    let v: Vec<Vec6> = t.iter().map(|s| Vec6::repeat(s * s - 2.0 * s)).collect();
    for (s, d) in t.iter().zip(fd_derivative(&t, &v)) {
        assert!((d - Vec6::repeat(2.0 * s - 2.0)).norm() < 1e-12);
    }
    assert!((trapezoid(&t, &t) - 0.5).abs() < 1e-15);
    assert!(nonincreasing_within(&[1.0, 1.01, 0.5], 0.02) && !nonincreasing_within(&[1.0, 1.03], 0.02));
}

#[test]
fn identical_body_series_give_zero() {
    let t: Vec<f64> = (0..5).map(|k| 0.25 * k as f64).collect();
    let b = BodySeries { times: t.clone(), rigid: t.iter().map(|s| Vec6::repeat(*s)).collect(), rates: None };
    let r = body_h1_convergence(&[1.0], &[b.clone()], &b).unwrap();
    assert_eq!(r.points[0].h1, 0.0);
    let mut c = b.clone();
    c.times[2] += 1e-3;
    assert!(body_h1_convergence(&[1.0], &[c], &b).is_err());
}

fn small_system() -> (GalerkinSystem, DVector<f64>) {
    let spec = RigidBodySpec::sphere(1.0, 1.0);
    let kctx = Arc::new(KirchhoffContext::new(&spec).unwrap());
    let rs = RuleSpec { surface_order: 6, radial_order: 8, ..RuleSpec::default() };
    let opts = BasisOptions { rule: rs.clone(), ..Default::default() };
    let basis = build_basis_with(kctx.clone(), 14, &opts).unwrap();
    let rule = standard_rule(&spec, &rs).unwrap();
    let ctx = FormsContext::new(rule.clone(), 1.0, 0.1, kctx.mass(), kctx.inertia_tensor(), truncation_field(&spec, rs.truncation_radius).unwrap())
        .unwrap();
    let sys = assemble_system(&basis, &ctx).unwrap();
    let init = InitialData {
        linear: [0.2, 0.0, 0.1],
        angular: [0.0, 0.1, 0.0],
        profiles: vec![VorticalProfile::Swirl { amplitude: 1.0, axis: [0.0, 0.0, 1.0] }],
    };
    let u0 = init.field(&kctx, 3.0).unwrap();
    let g0 = crate::viscous::project(&sys, &basis, &rule, &u0);
    (sys, g0)
}

#[test]
fn small_inviscid_study() {
    let (sys, g0) = small_system();
    let cfg = StudyConfig { t_end: 0.2, step: StepOptions { dt: 0.01, ..Default::default() } };
    let reference = inviscid_reference(&sys, &g0, &cfg).unwrap();
    let rep = inviscid_limit_study(&sys, &g0, &reference, &[0.04, 0.02], &AlphaRule::Constant(1.0), &cfg).unwrap();
    assert_eq!(rep.points.len(), 2);
    assert!(rep.linf_fit.is_some());
    for p in &rep.points {
        assert!(p.w_linf_h > 0.0 && p.w_h1 > 0.0 && p.body_h1 > 0.0 && p.min_relative_slack >= -1e-8);
    }
    assert!(rep.linf_strictly_decreasing);
    assert_eq!(rep.to_csv().lines().count(), 3);
    // A single-point grid reproduces that point.
    let one = inviscid_limit_study(&sys, &g0, &reference, &[0.02], &AlphaRule::Constant(1.0), &cfg).unwrap();
    assert_eq!(one.points[0], rep.points[1]);
    assert!(one.linf_fit.is_none());
    assert!(inviscid_limit_study(&sys, &g0, &reference, &[0.01, 0.02], &AlphaRule::Constant(1.0), &cfg).is_err());
}

#[test]
fn small_viscous_inertia_study() {
    let (sys, g0) = small_system();
    let cfg = StudyConfig { t_end: 0.2, step: StepOptions { dt: 0.01, ..Default::default() } };
    let rep = infinite_inertia_viscous(&sys, &g0, 0.05, &[1.0, 10.0, 100.0], &cfg).unwrap();
    assert!(rep.body_monotone && rep.body_strictly_decreasing, "{rep:?}");
    assert!(rep.fixed_reference_check >= -1e-8);
    // σ = 1 is the baseline coupled run.
    let mut g = g0.clone();
    g.rows_mut(0, 6).fill(0.0);
    let traj = ViscousSolver::new(&sys, 0.05, cfg.step.clone()).unwrap().run(&g, 0.2).unwrap();
    let body = BodySeries::viscous(&sys, &traj).unwrap();
    let (a, b) = h1_parts(&traj.times, &body.rigid);
    assert_eq!(rep.points[0].body_h1, (a * a + b * b).sqrt());
}

#[test]
fn small_euler_inertia_study() {
    let spec = RigidBodySpec::sphere(1.0, 1.0);
    let mut field = VortexField::ring(Vec3::new(0.0, 0.0, 3.0), Vec3::new(0.0, 0.3, 1.0), 1.0, 1.0, 8).unwrap();
    field.epsilon = 0.6;
    let opts = EulerOptions { force_surface_order: 8, force_radial_order: 4, ..Default::default() };
    let rep = infinite_inertia_euler(&spec, &opts, &field, &[1.0, 10.0], 0.05, 4).unwrap();
    assert!(rep.body_strictly_decreasing && rep.distance_monotone, "{rep:?}");
    assert!(rep.points.iter().all(|p| p.fluid_distance > 0.0));
}
