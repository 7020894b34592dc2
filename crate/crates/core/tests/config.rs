use proptest::prelude::*;
use rigidflow::cli::{RingConfig, RunConfig, ShapeKind, SolverKind, SweepStudy};
use rigidflow::studies::{AlphaRule, StudyKind};
use rigidflow::viscous::VorticalProfile;

fn finite() -> impl Strategy<Value = f64> {
    -10.0..10.0f64
}

fn config() -> impl Strategy<Value = RunConfig> {
    (
        (0..=i64::MAX as u64, 1usize..50, 1e-3..0.1f64, prop_oneof![Just(SolverKind::Viscous), Just(SolverKind::FixedBody), Just(SolverKind::Euler)]),
        (0.5..2.0f64, 0.1..10.0f64, prop_oneof![Just(ShapeKind::Sphere), Just(ShapeKind::Icosphere)], 0usize..5),
        ([finite(), finite(), finite()], [finite(), finite(), finite()], 0.0..2.0f64, -3.0..3.0f64),
        (0.0..1.0f64, prop_oneof![(0.0..5.0f64).prop_map(AlphaRule::Constant), (-2.0..2.0f64).prop_map(AlphaRule::NuPow)], 7usize..60),
        (prop::collection::vec(1e-4..1.0f64, 1..6), 1usize..8, any::<bool>(), 1e-6..1e-2f64),
    )
        .prop_map(|((seed, steps, dt, solver), (radius, density, shape, level), (l, r, amp, z), (nu, alpha, n), (grid, workers, plot, tol))| {
            let mut c = RunConfig::new(steps as f64 * dt, dt);
            c.seed = seed;
            c.solver = solver;
            c.output_dir = format!("out/{seed}").into();
            c.body.radius = radius;
            c.body.density = density;
            c.body.shape = shape;
            c.body.level = level;
            c.initial.linear = l;
            c.initial.angular = r;
            c.initial.support = 3.0 * radius;
            c.initial.profiles = vec![
                VorticalProfile::Swirl { amplitude: amp, axis: [0.0, 0.0, 1.0] },
                VorticalProfile::Ring { amplitude: -amp, axis: [1.0, z, 0.0] },
            ];
            c.initial.ring = Some(RingConfig { center: [0.0, 0.0, z + 4.0], axis: [0.0, 0.3, 1.0], radius, circulation: amp, particles: 8 + n });
            c.viscous.nu = nu;
            c.viscous.alpha = alpha;
            c.viscous.basis_size = n;
            c.viscous.support_radius = 3.0 * radius;
            c.viscous.truncation_radius = 20.0 * radius;
            c.verify.support_radius = 3.0 * radius;
            c.verify.truncation_radius = 8.0 * radius;
            let mut g = grid;
            g.sort_by(|a, b| b.partial_cmp(a).unwrap());
            g.dedup();
            c.sweep.nu_grid = g;
            c.sweep.alphas = vec![alpha, AlphaRule::Constant(1.0)];
            c.sweep.workers = workers;
            c.sweep.plot = plot;
            c.sweep.study = if plot { SweepStudy::Rate } else { SweepStudy::Inertia };
            c.sweep.system = if plot { StudyKind::Viscous } else { StudyKind::Euler };
            c.euler.energy_tol = tol;
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parse_serialize_parse_is_identity(c in config()) {
        prop_assert!(c.validate().is_ok(), "{:?}", c.validate());
        let text = c.to_toml().unwrap();
        let back = RunConfig::parse(&text, &[]).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_toml().unwrap(), text);
    }
}

#[test]
fn defaults_fill_missing_sections() {
    let c = RunConfig::parse("t_end = 1.0\ndt = 0.25\n", &[]).unwrap();
    assert_eq!(c, RunConfig::new(1.0, 0.25));
    assert_eq!(c.steps(), 4);
}

#[test]
fn overrides_apply_before_validation() {
    let c = RunConfig::parse(
        "t_end = 1.0\ndt = 0.5\n[viscous]\nnu = 0.1\n",
        &["viscous.nu=0.02".into(), "viscous.alpha=\"nu_pow:0.5\"".into(), "sweep.nu_grid=[0.1, 0.05]".into(), "output_dir=elsewhere".into()],
    )
    .unwrap();
    assert_eq!(c.viscous.nu, 0.02);
    assert_eq!(c.viscous.alpha, AlphaRule::NuPow(0.5));
    assert_eq!(c.sweep.nu_grid, vec![0.1, 0.05]);
    assert_eq!(c.output_dir, std::path::PathBuf::from("elsewhere"));
    assert!(RunConfig::parse("t_end = 1.0\n", &["dt=0.5".into()]).is_ok());
}

fn config_error(text: &str) -> String {
    match RunConfig::parse(text, &[]) {
        Err(rigidflow::Error::Config(m)) => m,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn diagnostics_name_line_and_field() {
    let m = config_error("t_end = 1.0\ndt = 0.5\n\n[sweep]\nnu_grid = [0.01, 0.02]\n");
    assert!(m.contains("line 5") && m.contains("sweep.nu_grid") && m.contains("decreasing"), "{m}");
    let m = config_error("t_end = 1.0\ndt = 0.3\n");
    assert!(m.contains("line 2") && m.contains("`dt`"), "{m}");
    let m = config_error("t_end = 1.0\ndt = 0.5\n[viscous]\nalpha = \"nu_pow:x\"\n");
    assert!(m.contains("line 4"), "{m}");
    let m = config_error("t_end = 1.0\ndt = 0.5\nsolver = \"euler\"\n");
    assert!(m.contains("initial.ring"), "{m}");
    let m = config_error("dt = 0.5\n");
    assert!(m.contains("t_end"), "{m}");
    let m = config_error("t_end = 1.0\ndt = 0.5\n[initial]\nprofiles = [{ kind = \"spiral\", amplitude = 1.0, axis = [0, 0, 1] }]\n");
    assert!(m.contains("line 4") && m.contains("spiral"), "{m}");
}
