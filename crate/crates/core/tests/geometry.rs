use std::collections::HashMap;

use proptest::prelude::*;

use cosym_core::cut::{levelset_cut, Axis, CutSpec};
use cosym_core::expr::parse;
use cosym_core::fields::{CoordinateChart, ScalarField};
use cosym_core::scenario::load_scenario;
use cosym_core::symmetry::{check_presym_symmetry, compute_cocycle, modify_momentum};
use cosym_core::Error;

#[test]
fn reeb_is_tangent_to_orbits_on_the_excluded_set() {
    let s = load_scenario("oscillator-moving-observer").unwrap();
    let mech = s.structure.modify(&s.hamiltonian).as_mechanical();
    let on_c = vec![-0.3, 0.0, -1.0, 0.0, 0.3];
    assert!(!s.chart.contains(&on_c));
    match check_presym_symmetry(&s.action, &mech, std::slice::from_ref(&on_c), &s.group_samples) {
        Err(Error::TangencyDetected { points }) => assert_eq!(points, vec![on_c]),
        other => panic!("expected tangency, got {other:?}"),
    }
    let off_c = s.samples(30, 1).unwrap();
    let rep = check_presym_symmetry(&s.action, &mech, &off_c, &s.group_samples).unwrap();
    assert!(rep.passed, "{rep:?}");
}

#[test]
fn plane_wave_excluded_sets_are_tangency_points() {
    let s = load_scenario("plane-wave").unwrap();
    let mech = s.structure.modify(&s.hamiltonian).as_mechanical();
    let ea0 = s.constant("eA0").unwrap();
    let t: f64 = 0.4;
    // q1 − c t = π/2 on C1 and 0 on C2.
    let c1 = vec![t + std::f64::consts::FRAC_PI_2, 0.2, -0.1, 1.0, 0.0, 0.0, t];
    let c2 = vec![t, 0.2, -0.1, 1.0, ea0, 0.0, t];
    for x in [c1, c2] {
        assert!(!s.chart.contains(&x));
        let e = check_presym_symmetry(&s.action, &mech, &[x], &s.group_samples).unwrap_err();
        assert!(matches!(e, Error::TangencyDetected { .. }), "{e}");
    }
}

#[test]
fn plane_wave_cut_matches_closed_form_branches() {
    let s = load_scenario("plane-wave").unwrap();
    let pts = s.samples(10, 2).unwrap();
    let c = compute_cocycle(&s.action, &s.structure, &pts).unwrap();
    let jh = modify_momentum(&s.action, &s.momentum, &s.hamiltonian, &c, &pts, &s.group_samples).unwrap();
    let spec = CutSpec {
        base: vec![0.0; 7],
        u: Axis {
            coord: 0,
            lo: -3.0,
            hi: 3.0,
            points: 13,
        },
        v: Axis {
            coord: 4,
            lo: -0.8,
            hi: 0.8,
            points: 9,
        },
        solve: Axis {
            coord: 3,
            lo: -1.0,
            hi: 3.0,
            points: 401,
        },
    };
    let cut = levelset_cut(&jh.components[0], 0.0, &spec).unwrap();
    assert_eq!(cut.branches.len(), 2);
    let (m, cc, ea0) = (1.0, 1.0, s.constant("eA0").unwrap());
    for (i, &q1) in cut.u.iter().enumerate() {
        for (j, &p2) in cut.v.iter().enumerate() {
            let root = (m * m * cc * cc - p2 * p2 + 2.0 * ea0 * p2 * q1.cos()).sqrt();
            let lower = cut.branches[0][i][j].unwrap();
            let upper = cut.branches[1][i][j].unwrap();
            assert!((lower - (m * cc - root)).abs() < 1e-10);
            assert!((upper - (m * cc + root)).abs() < 1e-10);
        }
    }
    let mut buf = Vec::new();
    cut.write_gnuplot(&mut buf, "plane wave").unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("# plane wave\n# columns: q1 p2 p1\n"));
}

fn xy() -> Vec<String> {
    vec!["x".into(), "y".into()]
}

proptest! {
    #[test]
    fn parsed_polynomials_match_direct_evaluation(
        a in -5.0f64..5.0, b in -5.0f64..5.0, x in -2.0f64..2.0, y in -2.0f64..2.0,
    ) {
        let consts = HashMap::from([("a".to_string(), a), ("b".to_string(), b)]);
        let e = parse("t", "a*x^3 - b*x*y + sin(y)^2 / (1 + x^2) - -y", &xy(), &consts).unwrap();
        let direct = a * x.powi(3) - b * x * y + y.sin().powi(2) / (1.0 + x * x) + y;
        prop_assert!((e.eval_f64(&[x, y]) - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
    }

    #[test]
    fn parsed_gradients_match_closed_form(x in -2.0f64..2.0, y in 0.1f64..3.0) {
        let chart = CoordinateChart::new(["x", "y"]).into_ref();
        let e = parse("t", "exp(x)*ln(y) + atan2(y, x) + sqrt(y)*cos(x)", &xy(), &HashMap::new()).unwrap();
        let f = ScalarField::new(chart, "f", move |v| e.eval(v));
        let g = f.gradient(&[x, y]).unwrap();
        let r2 = x * x + y * y;
        let gx = x.exp() * y.ln() - y / r2 - y.sqrt() * x.sin();
        let gy = x.exp() / y + x / r2 + x.cos() / (2.0 * y.sqrt());
        prop_assert!((g[0] - gx).abs() < 1e-12 && (g[1] - gy).abs() < 1e-12);
    }

    #[test]
    fn parser_never_panics(src in "[xyab0-9+*/^(), .-]{0,24}") {
        let consts = HashMap::from([("a".to_string(), 1.5)]);
        let _ = parse("t", &src, &xy(), &consts);
    }
}

#[test]
fn unary_minus_binds_looser_than_power() {
    let e = parse("t", "-x^2", &xy(), &HashMap::new()).unwrap();
    assert_eq!(e.eval_f64(&[3.0, 0.0]), -9.0);
}
