//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use cosym_core::fields::ScalarField;
use cosym_core::integrate::{rk4_integrate, RunConfig};
use cosym_core::jet::Jet;
use cosym_core::linalg::{case_rng, lemma45_check, lemma45_fuzz, random_lemma45_case};
use cosym_core::pipeline::{run_pipeline, Outcome, PipelineConfig};
use cosym_core::reduction::{compare_dynamics, reduce, sample_level, tangent_perp_report, LevelSample, LevelSet};
use cosym_core::scenario::{load_scenario, Scenario};
use cosym_core::structure::{
    build_reeb_formalism, formalism_relation_check, hamilton_equations_residual, HamiltonianSectionData,
};
use cosym_core::symmetry::{compute_cocycle, modified_action, modify_momentum, MomentumMap};

const SEED: u64 = 20_240_601;
const OSC: &str = "oscillator-moving-observer";
const PW: &str = "plane-wave";
const QT: &str = "q-translation";

type Verdict = std::result::Result<String, String>;

fn ensure(ok: bool, msg: String) -> Verdict {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn scenario(name: &str) -> Scenario {
    load_scenario(name).expect("built-in scenario")
}

fn k(s: &Scenario, name: &str) -> f64 {
    s.constant(name).expect("scenario constant")
}

fn j_h(s: &Scenario) -> Result<MomentumMap, String> {
    let pts = s.samples(20, SEED).map_err(err)?;
    let c = compute_cocycle(&s.action, &s.structure, &pts).map_err(err)?;
    modify_momentum(&s.action, &s.momentum, &s.hamiltonian, &c, &pts, &s.group_samples).map_err(err)
}

fn level(s: &Scenario, mu: f64) -> Result<LevelSet, String> {
    let mech = s.structure.modify(&s.hamiltonian).as_mechanical();
    LevelSet::new(mech, j_h(s)?, vec![mu]).map_err(err)
}

fn level_points(l: &LevelSet, s: &Scenario, n: usize, seed: u64) -> Result<Vec<Vec<f64>>, String> {
    match sample_level(l, &s.level_box, n, seed, None).map_err(err)? {
        LevelSample::Points { points, .. } => Ok(points),
        LevelSample::EmptyLevelSet { reason, .. } => Err(format!("unexpected empty level: {reason}")),
    }
}

fn amax(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

// Hand-written evolution fields.

fn oscillator_e(s: &Scenario, x: &[f64]) -> Vec<f64> {
    let (m, om, v) = (k(s, "m"), k(s, "Omega"), k(s, "v"));
    let (q1, q2, p1, p2, t) = (x[0], x[1], x[2], x[3], x[4]);
    vec![
        p1 / m,
        p2 / m,
        -m * om * om * (v * t + q1),
        -m * om * om * q2,
        1.0,
    ]
}

fn plane_wave_e(s: &Scenario, x: &[f64]) -> Vec<f64> {
    let (m, c, a) = (k(s, "m"), k(s, "c"), k(s, "eA0"));
    let ph = x[0] - c * x[6];
    vec![
        x[3] / m,
        x[4] / m - a / m * ph.cos(),
        x[5] / m,
        -a / m * x[4] * ph.sin(),
        0.0,
        0.0,
        1.0,
    ]
}

fn oscillator_jh(s: &Scenario, x: &[f64]) -> f64 {
    let (m, om, v) = (k(s, "m"), k(s, "Omega"), k(s, "v"));
    let h = (x[2] * x[2] + x[3] * x[3]) / (2.0 * m)
        + 0.5 * m * om * om * ((x[0] + v * x[4]).powi(2) + x[1] * x[1]);
    -v * x[2] - h
}

fn plane_wave_jh(s: &Scenario, x: &[f64]) -> f64 {
    let (m, c, a) = (k(s, "m"), k(s, "c"), k(s, "eA0"));
    let h = (x[3] * x[3] + x[4] * x[4] + x[5] * x[5]) / (2.0 * m) - a / m * x[4] * (x[0] - c * x[6]).cos();
    c * x[3] - h
}

fn c1() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for name in [OSC, PW] {
        let s = scenario(name);
        let reeb = s.structure.modify(&s.hamiltonian).reeb_field();
        let evo = s.structure.evolution_field(&s.hamiltonian);
        for x in s.samples(200, SEED).map_err(err)? {
            let d = reeb.eval(&x).map_err(err)? - evo.eval(&x).map_err(err)?;
            worst = worst.max(d.amax());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst < 1e-8 && secs < 5.0, format!("max |R_H - E_H| = {worst:.2e}, {secs:.2} s"))
}

fn c2() -> Verdict {
    let mut worst: f64 = 0.0;
    for (name, oracle) in [(OSC, oscillator_e as fn(&Scenario, &[f64]) -> Vec<f64>), (PW, plane_wave_e)] {
        let s = scenario(name);
        let evo = s.structure.evolution_field(&s.hamiltonian);
        for x in s.samples(100, SEED + 1).map_err(err)? {
            let e = evo.eval(&x).map_err(err)?;
            let o = oracle(&s, &x);
            worst = worst.max(e.iter().zip(&o).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
    }
    ensure(worst < 1e-9, format!("max deviation from closed-form E_H = {worst:.2e}"))
}

fn c3() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut orders = Vec::new();
    for (name, oracle) in [(OSC, oscillator_jh as fn(&Scenario, &[f64]) -> f64), (PW, plane_wave_jh)] {
        let s = scenario(name);
        let l = level(&s, 0.0)?;
        let sc = s.clone();
        let jh = ScalarField::new(s.chart.clone(), "J_H oracle", move |x: &[Jet]| {
            let v: Vec<f64> = x.iter().map(|j| j.value()).collect();
            Jet::constant(oracle(&sc, &v))
        });
        let inv = vec![("J_H".to_string(), jh)];
        let evo = s.structure.evolution_field(&s.hamiltonian);
        let starts = level_points(&l, &s, 10, SEED + 2)?;
        let cfg = RunConfig {
            h: 1e-3,
            duration: 10.0,
            ..RunConfig::default()
        };
        for x0 in &starts {
            let traj = rk4_integrate(&evo, x0, &cfg, &inv).map_err(err)?;
            worst = worst.max(traj.invariant_drift()[0]);
        }
        let drift = |h: f64| -> Result<f64, String> {
            let cfg = RunConfig {
                h,
                duration: 10.0,
                ..RunConfig::default()
            };
            Ok(rk4_integrate(&evo, &starts[0], &cfg, &inv).map_err(err)?.invariant_drift()[0])
        };
        orders.push((drift(0.1)? / drift(0.05)?).log2());
    }
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure(
        worst < 1e-6 && min_order >= 3.5,
        format!("max drift {worst:.2e}, observed order {orders:.2?}"),
    )
}

fn c4() -> Verdict {
    let s = scenario(OSC);
    let (m, om, v) = (k(&s, "m"), k(&s, "Omega"), k(&s, "v"));
    let jh = j_h(&s)?.components[0].clone();
    let xh = s.structure.hamiltonian_field(&s.hamiltonian).apply(&jh);
    let r = s.structure.reeb_field().apply(&jh);
    let e = s.structure.evolution_field(&s.hamiltonian).apply(&jh);
    let mut dx: f64 = 0.0;
    let mut dr: f64 = 0.0;
    let mut de: f64 = 0.0;
    let mut dj: f64 = 0.0;
    for x in s.samples(100, SEED + 3).map_err(err)? {
        let w = m * om * om * v * (x[0] + v * x[4]);
        dx = dx.max((xh.eval(&x).map_err(err)? - w).abs());
        dr = dr.max((r.eval(&x).map_err(err)? + w).abs());
        de = de.max(e.eval(&x).map_err(err)?.abs());
        dj = dj.max((jh.eval(&x).map_err(err)? - oscillator_jh(&s, &x)).abs());
    }
    let worst = dx.max(dr).max(de).max(dj);
    ensure(
        worst < 1e-8,
        format!("X_H(J_H) {dx:.1e}, R(J_H) {dr:.1e}, E_H(J_H) {de:.1e}, J_H {dj:.1e}"),
    )
}

fn c5() -> Verdict {
    let mut out = Vec::new();
    let mut ok = true;
    for (name, expected) in [(OSC, 1.0), (PW, 1.0), (QT, 0.0)] {
        let s = scenario(name);
        let pts = s.samples(50, SEED + 4).map_err(err)?;
        let c = compute_cocycle(&s.action, &s.structure, &pts).map_err(err)?;
        ok &= c.values.len() == 1 && (c.values[0] - expected).abs() < 1e-12;
        out.push(format!("{name} {:?}", c.values));
    }
    ensure(ok, out.join(", "))
}

// Nullspace by Gauss-Jordan elimination with partial pivoting.
fn rref_null(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let (rows, cols) = m.shape();
    let mut a = m.clone();
    let scale = a.amax().max(1.0);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, val) = (r..rows)
            .map(|i| (i, a[(i, c)].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= 1e-9 * scale {
            continue;
        }
        a.swap_rows(r, best);
        let p = a[(r, c)];
        for j in 0..cols {
            a[(r, j)] /= p;
        }
        for i in 0..rows {
            if i != r {
                let f = a[(i, c)];
                if f != 0.0 {
                    for j in 0..cols {
                        a[(i, j)] -= f * a[(r, j)];
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (0..cols)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = DVector::zeros(cols);
            v[free] = 1.0;
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[(row, free)];
            }
            v
        })
        .collect()
}

fn rank_of(vectors: &[DVector<f64>], n: usize) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(vectors.len(), n, |i, j| vectors[i][j]);
    n - rref_null(&m).len()
}

// `{w : ω(a, w) = 0 for all a}` as a nullspace of the stacked rows `aᵀW`.
fn perp_oracle(w: &DMatrix<f64>, a: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let n = w.nrows();
    if a.is_empty() {
        return (0..n).map(|i| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })).collect();
    }
    let rows = DMatrix::from_fn(a.len(), n, |i, j| (a[i].transpose() * w)[j]);
    rref_null(&rows)
}

fn c6() -> Verdict {
    let dims = [3usize, 5, 7];
    let cases = 1000;
    let start = Instant::now();
    let fuzz = lemma45_fuzz(&dims, cases, SEED);
    let mut disagreements = 0;
    for &n in &dims {
        for i in 0..cases {
            let mut rng = case_rng(SEED, n, i);
            let case = random_lemma45_case(n, i, &mut rng).map_err(err)?;
            let w = case.form.matrix().clone();
            let gens = &case.generators;
            let dim_a = rank_of(gens, n);
            let mut with_r = gens.clone();
            with_r.push(case.reeb.clone());
            let dim_ar = rank_of(&with_r, n);
            let reeb_in_a = dim_ar == dim_a;
            let perp = perp_oracle(&w, gens);
            let predicted = if reeb_in_a { n - dim_a + 1 } else { n - dim_a };
            let biperp = perp_oracle(&w, &perp);
            let mut joint = biperp.clone();
            joint.extend(with_r.iter().cloned());
            let biperp_ok = biperp.len() == dim_ar && rank_of(&joint, n) == dim_ar;
            let lib = lemma45_check(&case.form, &case.reeb, &case.subspace).map_err(err)?;
            if perp.len() != predicted || !biperp_ok || lib.dim_perp != perp.len() || lib.dim_biperp != biperp.len() || !lib.passed() {
                disagreements += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        fuzz.passed() && disagreements == 0 && secs < 30.0,
        format!(
            "{} cases, library failures {}, oracle disagreements {disagreements}, {secs:.2} s",
            dims.len() * cases,
            fuzz.failures.len()
        ),
    )
}

fn c7() -> Verdict {
    let mut out = Vec::new();
    let mut ok = true;
    for name in [OSC, PW, QT] {
        let s = scenario(name);
        let l = level(&s, s.mu_default[0])?;
        let mut perp: f64 = 0.0;
        let mut ker: f64 = 0.0;
        for x in level_points(&l, &s, 50, SEED + 5)? {
            let r = tangent_perp_report(&l, &s.action, &x).map_err(err)?;
            perp = perp.max(r.perp_distance);
            ker = ker.max(r.kernel_distance);
            ok &= r.kernel_dim == 2 && r.dim_perp == 2;
        }
        ok &= perp < 1e-7 && ker < 1e-7;
        out.push(format!("{name} perp {perp:.1e} ker {ker:.1e}"));
    }
    ensure(ok, out.join(", "))
}

// Paper displays for the reduced data, in ambient coordinates, together
// with the slice embedding and its Jacobian written out by hand.
struct ReducedOracle {
    embed: Box<dyn Fn(&[f64]) -> (Vec<f64>, DMatrix<f64>)>,
    form: Box<dyn Fn(&[f64]) -> DMatrix<f64>>,
    field: Box<dyn Fn(&[f64]) -> Vec<f64>>,
}

fn antisym(n: usize, terms: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, n);
    for &(i, j, v) in terms {
        w[(i, j)] += v;
        w[(j, i)] -= v;
    }
    w
}

fn oscillator_oracle(s: &Scenario, mu: f64) -> ReducedOracle {
    let (m, om, v) = (k(s, "m"), k(s, "Omega"), k(s, "v"));
    let kk = m * m * v * v - 2.0 * m * mu;
    let a = m * om * v;
    ReducedOracle {
        embed: Box::new(move |y| {
            let (q2, p2, th) = (y[0], y[1], y[2]);
            let rho = (kk - p2 * p2 - m * m * om * om * q2 * q2).sqrt();
            let (rq, rp) = (-m * m * om * om * q2 / rho, -p2 / rho);
            let x = vec![0.0, q2, rho * th.cos() - m * v, p2, rho * th.sin() / a];
            #[rustfmt::skip]
            let jac = DMatrix::from_row_slice(5, 3, &[
                0.0, 0.0, 0.0,
                1.0, 0.0, 0.0,
                th.cos() * rq, th.cos() * rp, -rho * th.sin(),
                0.0, 1.0, 0.0,
                th.sin() * rq / a, th.sin() * rp / a, rho * th.cos() / a,
            ]);
            (x, jac)
        }),
        form: Box::new(move |x| {
            antisym(
                5,
                &[(1, 3, 1.0), (2, 4, x[2] / m), (3, 4, x[3] / m), (1, 4, m * om * om * x[1])],
            )
        }),
        field: Box::new(move |x| {
            vec![
                0.0,
                x[3] / m,
                -m * om * om * v * x[4],
                -m * om * om * x[1],
                x[2] / (m * v) + 1.0,
            ]
        }),
    }
}

fn plane_wave_oracle(s: &Scenario, mu: f64) -> ReducedOracle {
    let (m, c, ea) = (k(s, "m"), k(s, "c"), k(s, "eA0"));
    ReducedOracle {
        embed: Box::new(move |y| {
            let (q2, q3, p2, p3, t) = (y[0], y[1], y[2], y[3], y[4]);
            let (co, si) = ((c * t).cos(), (c * t).sin());
            let sq = (m * m * c * c - p2 * p2 - p3 * p3 + 2.0 * ea * p2 * co - 2.0 * m * mu).sqrt();
            let x = vec![0.0, q2, q3, m * c - sq, p2, p3, t];
            let mut jac = DMatrix::zeros(7, 5);
            jac[(1, 0)] = 1.0;
            jac[(2, 1)] = 1.0;
            jac[(4, 2)] = 1.0;
            jac[(5, 3)] = 1.0;
            jac[(6, 4)] = 1.0;
            jac[(3, 2)] = (p2 - ea * co) / sq;
            jac[(3, 3)] = p3 / sq;
            jac[(3, 4)] = ea * c * p2 * si / sq;
            (x, jac)
        }),
        form: Box::new(move |x| {
            let co = (c * x[6]).cos();
            antisym(
                7,
                &[
                    (1, 4, 1.0),
                    (2, 5, 1.0),
                    (3, 6, x[3] / m),
                    (4, 6, x[4] / m - ea / m * co),
                    (5, 6, x[5] / m),
                ],
            )
        }),
        field: Box::new(move |x| {
            let (co, si) = ((c * x[6]).cos(), (c * x[6]).sin());
            vec![
                0.0,
                x[4] / m - ea / m * co,
                x[5] / m,
                ea / m * x[4] * si,
                0.0,
                0.0,
                1.0 - x[3] / (m * c),
            ]
        }),
    }
}

fn c8() -> Verdict {
    let mut out = Vec::new();
    let mut ok = true;
    for name in [OSC, PW] {
        let s = scenario(name);
        let mu = s.mu_default[0];
        let oracle = if name == OSC {
            oscillator_oracle(&s, mu)
        } else {
            plane_wave_oracle(&s, mu)
        };
        let l = level(&s, mu)?;
        let slice = s.build_slice(&[mu]).map_err(err)?;
        let red = reduce(&l, &s.action, &slice).map_err(err)?;
        let (mut dw, mut dr, mut de, mut dk): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
        for x in level_points(&l, &s, 100, SEED + 6)? {
            let (_, y) = slice.to_slice(&s.action, &x).map_err(err)?;
            let (xe, jac) = (oracle.embed)(&y);
            de = de.max(amax(&(slice.embed().eval(&y).map_err(err)?.iter().zip(&xe).map(|(a, b)| a - b).collect::<Vec<_>>())));
            let w = red.omega_mu.eval(&y).map_err(err)?.matrix().clone();
            let display_w = jac.transpose() * (oracle.form)(&xe) * &jac;
            dw = dw.max((&w - display_w).amax());
            let r = red.reeb_mu.eval(&y).map_err(err)?;
            let pushed = &jac * &r;
            let display_r = DVector::from_vec((oracle.field)(&xe));
            dr = dr.max((pushed - display_r).amax());
            let sv = w.clone().svd(false, false).singular_values;
            let small = sv.iter().filter(|&&v| v < 1e-8).count();
            ok &= small == 1 && sv.iter().filter(|&&v| v >= 1e-8).all(|&v| v > 1e-4);
            dk = dk.max((&w * &r).amax() / r.norm());
        }
        ok &= dw < 1e-8 && dr < 1e-8 && de < 1e-10 && dk < 1e-8;
        out.push(format!("{name} form {dw:.1e} field {dr:.1e} kernel {dk:.1e}"));
    }
    ensure(ok, out.join(", "))
}

fn c9() -> Verdict {
    let mut out = Vec::new();
    let mut ok = true;
    for (name, t) in [(OSC, 10.0), (PW, 5.0)] {
        let s = scenario(name);
        let mu = s.mu_default[0];
        let l = level(&s, mu)?;
        let slice = s.build_slice(&[mu]).map_err(err)?;
        let red = reduce(&l, &s.action, &slice).map_err(err)?;
        let x0 = level_points(&l, &s, 1, SEED + 7)?.remove(0);
        let cfg = RunConfig {
            h: 1e-3,
            duration: t,
            ..RunConfig::default()
        };
        let rep = compare_dynamics(&l, &s.action, &red, &x0, &cfg).map_err(err)?;
        ok &= rep.max_deviation < 1e-5;
        out.push(format!("{name} T={t} deviation {:.1e}", rep.max_deviation));
    }
    ensure(ok, out.join(", "))
}

fn central_gradient(f: &ScalarField, x: &[f64]) -> Result<Vec<f64>, String> {
    let h = 1e-3;
    (0..x.len())
        .map(|i| {
            let at = |d: f64| {
                let mut y = x.to_vec();
                y[i] += d;
                f.eval(&y).map_err(err)
            };
            Ok((-at(2.0 * h)? + 8.0 * at(h)? - 8.0 * at(-h)? + at(-2.0 * h)?) / (12.0 * h))
        })
        .collect()
}

fn c10() -> Verdict {
    let mut out = Vec::new();
    let mut ok = true;
    for name in [OSC, PW, QT] {
        let s = scenario(name);
        let d = HamiltonianSectionData::new(s.hamiltonian.clone(), s.connection.clone()).map_err(err)?;
        let pts = s.samples(200, SEED + 8).map_err(err)?;
        let rel = formalism_relation_check(&d, &pts).map_err(err)?;
        let wh = build_reeb_formalism(&d);
        let n = d.n;
        let dim = 2 * n + 1;
        let mut dh: f64 = 0.0;
        for x in pts.iter().take(20) {
            let g = central_gradient(&s.hamiltonian, x)?;
            let mut terms: Vec<_> = (0..n).map(|i| (i, n + i, 1.0)).collect();
            terms.extend((0..2 * n).map(|i| (i, dim - 1, g[i])));
            let w = antisym(dim, &terms);
            dh = dh.max((wh.omega().eval(x).map_err(err)?.matrix() - w).amax());
        }
        let cfg = RunConfig {
            h: 1e-3,
            duration: 1.0,
            ..RunConfig::default()
        };
        let mut he: f64 = 0.0;
        for x0 in pts.iter().take(3) {
            let traj = rk4_integrate(&wh.reeb_field(), x0, &cfg, &[]).map_err(err)?;
            he = he.max(hamilton_equations_residual(&d, &traj).map_err(err)?);
        }
        ok &= rel.max_deviation < 1e-9 && dh < 1e-7 && he < 1e-6;
        out.push(format!(
            "{name} relation {:.1e} ω_h {dh:.1e} HE {he:.1e}",
            rel.max_deviation
        ));
    }
    ensure(ok, out.join(", "))
}

fn c11() -> Verdict {
    let s = scenario(OSC);
    let (m, v) = (k(&s, "m"), k(&s, "v"));
    let mu = 0.5 * m * v * v;
    let mut cfg = PipelineConfig::new(&s, RunConfig::default());
    cfg.mu = vec![mu];
    let rep = run_pipeline(&s, &cfg);
    let analytic = matches!(rep.outcome, Outcome::EmptyLevelSet { .. }) && rep.exit_code() == 0;
    let mut numeric = true;
    for mu in [mu, mu + 0.1] {
        let l = level(&s, mu)?;
        numeric &= sample_level(&l, &s.level_box, 10, SEED + 9, None).map_err(err)?.is_empty_level();
    }
    ensure(
        analytic && numeric,
        format!("pipeline outcome {:?}, Newton search empty: {numeric}", rep.outcome),
    )
}

fn c12() -> Verdict {
    let s = scenario(OSC);
    let v = k(&s, "v");
    let pts = s.samples(100, SEED + 10).map_err(err)?;
    let c = compute_cocycle(&s.action, &s.structure, &pts).map_err(err)?;
    let flow = s.reeb_flow.as_ref().ok_or("no Reeb flow")?;
    let (modified, rep) = modified_action(&s.action, &s.structure, flow, &c, &pts).map_err(err)?;
    let expected = [-v, 0.0, 0.0, 0.0, 0.0];
    let mut eta: f64 = 0.0;
    let mut field: f64 = 0.0;
    let eps = 1e-4;
    for x in &pts {
        let xi = modified.fundamental_fields()[0].eval(x).map_err(err)?;
        let fwd = modified.act(&[eps], x).map_err(err)?;
        let bwd = modified.act(&[-eps], x).map_err(err)?;
        let fd: Vec<f64> = fwd.iter().zip(&bwd).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        eta = eta.max(xi[4].abs()).max(fd[4].abs());
        for i in 0..5 {
            field = field.max((xi[i] - expected[i]).abs()).max((fd[i] - expected[i]).abs());
        }
    }
    ensure(
        rep.passed && eta < 1e-8 && field < 1e-8,
        format!("η(ξ̃) {eta:.1e}, |ξ̃ - (ξ - cR)| {field:.1e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 12] = [
        ("Reeb field of ω_H equals E_H", c1),
        ("closed-form evolution fields", c2),
        ("J_H conserved along E_H", c3),
        ("X_H and R do not conserve J_H", c4),
        ("cocycle values", c5),
        ("perp dimension and biperp fuzz", c6),
        ("tangent space perp on the level set", c7),
        ("reduced form and field", c8),
        ("reduced dynamics commutes", c9),
        ("Reeb and evolution formalisms agree", c10),
        ("empty level set", c11),
        ("Reeb-corrected action", c12),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = f();
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(msg) => println!("PASS criterion {}: {name} ({msg}) [{secs:.2} s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({msg}) [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
