use approx::assert_relative_eq;

use jumpwass::bounds::{
    cardan_minimize, d0, f_evaluate, generator_apply, generator_gap_check, smooth_w3_constant, thm33_coefficients,
    CardanProblem,
};
use jumpwass::flow::{default_start_grid, estimate_constants, ConstantSet};
use jumpwass::measure::LevyMeasureSpec;
use jumpwass::process::{CoefForm, ProcessSpec};
use jumpwass::scenario::Scenario;
use jumpwass::simulate::{simulate_terminals, GridConfig};
use jumpwass::smoothing::{deviation_bound, Abs, Ramp, ScaledSine, SmoothedFunction, VerificationGrid};
use jumpwass::testfn::{Identity, Sine, Square};

#[test]
fn smooth_w3_constant_with_unit_constants() {
    let c = ConstantSet::fixed(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
    assert_relative_eq!(smooth_w3_constant(&c), 11.0 / 6.0, max_relative = 1e-15);
}

#[test]
fn f_without_jump_gap() {
    let c = ConstantSet::fixed(0.5, 1.2, 0.3, 0.8, 1.1).unwrap();
    let (tu, ts) = (0.02, 0.05);
    let p = thm33_coefficients(tu, ts, 0.0, &c);
    assert_eq!(p.d3, 0.0);
    let f = f_evaluate(tu, ts, 0.0, &c).unwrap();
    assert_relative_eq!(f, p.d1 + 2.0 * (3.0 * p.d0 * p.d2).sqrt(), max_relative = 1e-14);
    // a vanishing cubic term leaves the minimum at the two-term value
    let near = CardanProblem::new(p.d0, p.d1, p.d2, 1e-12).unwrap();
    let m = cardan_minimize(&near).min_value;
    assert_relative_eq!(m, p.d1 + 2.0 * (p.d0 * p.d2).sqrt(), max_relative = 1e-5);
    assert!(m <= f);
}

#[test]
fn f_scales_like_cube_root() {
    let c = ConstantSet::fixed(0.5, 1.2, 0.3, 0.8, 1.1).unwrap();
    let r: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&s: &f64| f_evaluate(s, s, s, &c).unwrap() / s.cbrt())
        .collect();
    let (lo, hi) = r.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi / lo <= 2.0, "{r:?}");
    assert_eq!(f_evaluate(0.0, 0.0, 0.0, &c).unwrap(), 0.0);
    assert!(f_evaluate(-1.0, 0.0, 0.0, &c).is_err());
}

#[test]
fn cardan_boundary_and_three_root_cases() {
    let s = cardan_minimize(&CardanProblem::new(1.0, 0.0, 3.0, 1.0).unwrap());
    assert_relative_eq!(s.alpha_star, 4.0, max_relative = 1e-12);
    assert_relative_eq!(s.min_value, 3.75, max_relative = 1e-12);
    assert_relative_eq!(s.upper_bound_min3b, 9.0, max_relative = 1e-12);
    let p = CardanProblem::new(1.0, 0.0, 100.0, 1.0).unwrap();
    let s = cardan_minimize(&p);
    let grid = (0..200_000)
        .map(|i| p.g((-10.0 + 20.0 * i as f64 / 199_999.0f64).exp()))
        .fold(f64::INFINITY, f64::min);
    assert_relative_eq!(s.min_value, grid, max_relative = 1e-6);
    assert!(CardanProblem::new(-1.0, 1.0, 1.0, 1.0).is_err());
    assert_relative_eq!(d0(), 2.0 * (2.0 / std::f64::consts::PI).sqrt(), max_relative = 1e-15);
}

#[test]
fn generator_on_polynomials() {
    let (u, s) = (0.3, 0.4);
    let diff = ProcessSpec::diffusion(1.0, CoefForm::constant(u), CoefForm::constant(s));
    let x = 1.7;
    assert_relative_eq!(generator_apply(&diff, &Identity, 0.0, x, 1e-3, 64).unwrap(), u, max_relative = 1e-14);
    assert_relative_eq!(
        generator_apply(&diff, &Square, 0.0, x, 1e-3, 64).unwrap(),
        2.0 * x * u + s * s,
        max_relative = 1e-14
    );
    let (eta, a) = (0.2, 1.5);
    let jumpy = ProcessSpec {
        jump: CoefForm::linear(eta),
        levy: LevyMeasureSpec::point_mass(a, 1.0),
        ..diff
    };
    assert_relative_eq!(generator_apply(&jumpy, &Identity, 0.0, x, 1e-3, 64).unwrap(), u, max_relative = 1e-12);
    assert_relative_eq!(
        generator_apply(&jumpy, &Square, 0.0, x, 1e-3, 64).unwrap(),
        2.0 * x * u + s * s + a * eta * eta * x * x,
        max_relative = 1e-12
    );
}

#[test]
fn gap_check_of_identical_specs_is_zero() {
    let spec = ProcessSpec::geometric(1.0, 0.05, 0.2, 0.1, 1.0);
    let g = generator_gap_check(&spec, &spec, &Sine::new(1.0, 0.0), &GridConfig::new(1.0, 20, 1, 3), 200, 20).unwrap();
    assert_eq!(g.lhs.mean, 0.0);
    assert_eq!(g.rhs.mean, 0.0);
}

#[test]
fn constants_of_additive_process() {
    let spec = ProcessSpec {
        jump: CoefForm::constant(0.3),
        levy: LevyMeasureSpec::point_mass(2.0, 1.0),
        ..ProcessSpec::diffusion(1.0, CoefForm::constant(0.1), CoefForm::constant(0.2))
    };
    let grid = GridConfig::new(1.0, 50, 1, 4);
    let c = estimate_constants(&spec, &grid, &default_start_grid(1.0, 5), 200, 1.5).unwrap();
    assert_eq!((c.a1, c.b1, c.b2), (0.0, 0.0, 0.0));
    assert_eq!((c.a2, c.b3), (1.5, 1.5));
    assert!(!c.has_warnings());
}

#[test]
fn constants_of_geometric_process() {
    let spec = ProcessSpec::geometric(1.0, 0.05, 0.2, 0.12, 1.0);
    let grid = GridConfig::new(1.0, 100, 1, 5);
    let c = estimate_constants(&spec, &grid, &default_start_grid(1.0, 9), 2000, 1.5).unwrap();
    for (v, se) in [(c.a2, c.std_err.a2), (c.b3, c.std_err.b3)] {
        assert!(v.is_finite() && v > 0.0);
        assert!(se * 1.5 / v < 0.2);
    }
    assert!(c.a1.is_finite() && c.b1.is_finite() && c.b2.is_finite());
    assert_eq!(c.provenance.n_paths, 2000);
}

#[test]
fn terminals_do_not_depend_on_thread_count() {
    let spec = ProcessSpec::geometric(1.0, 0.05, 0.2, 0.1, 1.0);
    let grid = GridConfig::new(1.0, 50, 2000, 9);
    let run = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| simulate_terminals(&spec, &grid).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert!(a.0.iter().zip(&b.0).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn smoothing_converges_and_keeps_lipschitz_constant() {
    let grid = VerificationGrid {
        lo: -3.0,
        hi: 3.0,
        per_unit: 100,
    };
    let pts = grid.points();
    let ramp = Ramp { lo: -0.5, hi: 1.0 };
    let sine = ScaledSine { omega: 2.0 };
    let abs = Abs { center: 0.3 };
    for h in [&ramp as &dyn jumpwass::smoothing::LipschitzFn, &sine, &abs] {
        let mut last = f64::INFINITY;
        for alpha in [0.1, 0.01, 0.001] {
            let sf = SmoothedFunction::new(h, alpha).unwrap();
            let mut dev = 0.0f64;
            for &x in &pts {
                let j = sf.jet(x);
                dev = dev.max((j[0] - h.eval(x)).abs());
                assert!(j[1].abs() <= 1.0 + 1e-9, "{} at {x}: {}", h.name(), j[1]);
            }
            assert!(dev <= deviation_bound(alpha) + 1e-9);
            assert!(dev < last);
            last = dev;
        }
    }
}

#[test]
fn bundled_scenarios_parse_and_round_trip() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let s = Scenario::load(&path).unwrap();
            assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
            n += 1;
        }
    }
    assert!(n >= 6);
}
