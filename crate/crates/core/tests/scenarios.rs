use std::collections::BTreeMap;
use std::path::PathBuf;

use cosym_core::reduction::{sample_level, LevelSet};
use cosym_core::scenario::{from_toml_str, load_scenario, load_scenario_with, Scenario, BUILTIN_NAMES};
use cosym_core::symmetry::{compute_cocycle, modify_momentum};
use cosym_core::Error;

fn toml_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn load_file(name: &str) -> Scenario {
    load_scenario(toml_path(name).to_str().unwrap()).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
}

#[test]
fn builtins_match_their_scenario_files() {
    for name in BUILTIN_NAMES {
        let b = load_scenario(name).unwrap();
        let f = load_file(name);
        assert_eq!(b.chart.names(), f.chart.names(), "{name}");
        assert_eq!(b.mu_default, f.mu_default, "{name}");
        for x in b.samples(40, 3).unwrap() {
            let tol = 1e-12;
            assert!((b.hamiltonian.eval(&x).unwrap() - f.hamiltonian.eval(&x).unwrap()).abs() < tol, "{name} H");
            assert!(close(&b.momentum.eval(&x).unwrap(), &f.momentum.eval(&x).unwrap(), tol), "{name} J");
            let wb = b.structure.omega().eval(&x).unwrap();
            let wf = f.structure.omega().eval(&x).unwrap();
            assert!((wb.matrix() - wf.matrix()).amax() < tol, "{name} omega");
            let eb = b.structure.eta().eval(&x).unwrap();
            let ef = f.structure.eta().eval(&x).unwrap();
            assert!((eb - ef).amax() < tol, "{name} eta");
            for s in [-0.7, 1.3] {
                assert!(close(&b.action.act(&[s], &x).unwrap(), &f.action.act(&[s], &x).unwrap(), tol), "{name} action");
            }
            assert_eq!(b.chart.contains(&x), f.chart.contains(&x), "{name} excluded sets");
        }
    }
}

#[test]
fn builtin_and_file_slices_agree() {
    for name in BUILTIN_NAMES {
        let b = load_scenario(name).unwrap();
        let f = load_file(name);
        let mu = b.mu_default.clone();
        let sb = b.build_slice(&mu).unwrap();
        let sf = f.build_slice(&mu).unwrap();
        let pts = s_j_h(&b);
        let level = LevelSet::new(b.structure.modify(&b.hamiltonian).as_mechanical(), pts, mu.clone()).unwrap();
        let points = sample_level(&level, &b.level_box, 20, 11, None).unwrap();
        for x in points.points().unwrap() {
            let (gb, yb) = sb.to_slice(&b.action, x).unwrap();
            let (gf, yf) = sf.to_slice(&f.action, x).unwrap();
            assert!(close(&gb, &gf, 1e-9), "{name} group parameter");
            assert!(sb.wrapped_distance(&yb, &yf) < 1e-9, "{name} slice point");
            assert!(close(&sb.embed().eval(&yb).unwrap(), &sf.embed().eval(&yf).unwrap(), 1e-9), "{name} embed");
        }
    }
}

fn s_j_h(s: &Scenario) -> cosym_core::symmetry::MomentumMap {
    let pts = s.samples(10, 5).unwrap();
    let c = compute_cocycle(&s.action, &s.structure, &pts).unwrap();
    modify_momentum(&s.action, &s.momentum, &s.hamiltonian, &c, &pts, &s.group_samples).unwrap()
}

#[test]
fn parameter_overrides_reach_the_builtin_and_the_file() {
    let over = BTreeMap::from([("eA0".to_string(), 1.0)]);
    let b = load_scenario_with("plane-wave", &over).unwrap();
    let f = load_scenario_with(toml_path("plane-wave").to_str().unwrap(), &over).unwrap();
    assert_eq!(b.constant("eA0"), Some(1.0));
    let x = [0.3, 0.1, -0.2, 0.4, 0.2, -0.1, 0.5];
    let expected = (0.16 + 0.04 + 0.01) / 2.0 - 0.2 * (0.3f64 - 0.5).cos();
    assert!((b.hamiltonian.eval(&x).unwrap() - expected).abs() < 1e-15);
    assert!((f.hamiltonian.eval(&x).unwrap() - expected).abs() < 1e-15);

    let three = load_scenario_with("oscillator-moving-observer", &BTreeMap::from([("N".to_string(), 3.0)])).unwrap();
    assert_eq!(three.chart.dim(), 7);
}

#[test]
fn unknown_parameter_is_a_parse_error() {
    let e = load_scenario_with("q-translation", &BTreeMap::from([("m".to_string(), 2.0)])).unwrap_err();
    assert!(matches!(e, Error::Parse { .. }), "{e}");
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn missing_file_is_an_io_error() {
    let e = load_scenario("/nonexistent/scenario.toml").unwrap_err();
    assert!(matches!(e, Error::Io(_)));
    assert_eq!(e.exit_code(), 2);
}

fn q_translation_text() -> String {
    std::fs::read_to_string(toml_path("q-translation")).unwrap()
}

#[test]
fn missing_eta_is_a_parse_error() {
    let text = q_translation_text().replace("[eta]\nt = \"1\"\n", "");
    let e = from_toml_str(&text).unwrap_err();
    let msg = e.to_string();
    assert!(matches!(e, Error::Parse { .. }), "{msg}");
    assert!(msg.contains("eta"), "{msg}");
}

#[test]
fn unknown_name_reports_line_and_column() {
    let text = q_translation_text().replace("J = [\"p1\"]", "J = [\"p1 + zz\"]");
    let msg = from_toml_str(&text).unwrap_err().to_string();
    assert!(msg.contains("zz") && msg.contains("line") && msg.contains("column"), "{msg}");
}

#[test]
fn wrong_momentum_fails_validation() {
    let text = q_translation_text().replace("J = [\"p1\"]", "J = [\"p2\"]");
    let e = from_toml_str(&text).unwrap_err();
    assert!(matches!(e, Error::Validation { .. }), "{e}");
    assert_eq!(e.exit_code(), 1);
}

#[test]
fn degenerate_structure_fails_validation() {
    let text = q_translation_text().replace("[\"q2\", \"p2\", \"1\"]", "[\"q2\", \"p2\", \"0\"]");
    assert!(from_toml_str(&text).is_err());
}
