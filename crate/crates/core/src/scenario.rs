//! Scenario registry: the built-in examples, coded natively, and a TOML
//! loader for user scenarios whose fields are written as expressions.
//!
//! A scenario file has the sections `[constants]`, `[chart]`, `[omega]`,
//! `[eta]`, `[hamiltonian]`, `[action]`, `[momentum]`, and optionally
//! `[reeb_flow]`, `[slice]`, `[[excluded]]`, `[sampling]` and
//! `[connection]`. The files under `scenarios/` are complete examples.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::fields::{
    sample_points, ChartRef, CoordinateChart, ExcludedSet, OneFormField, SampleBox, ScalarField, SmoothMap,
    TwoFormField,
};
use crate::jet::Jet;
use crate::reduction::SliceChart;
use crate::structure::CosymplecticStructure;
use crate::symmetry::{verify_momentum, AbelianAction, FlowMap, MomentumMap};

/// Number of points used by the load-time checks.
pub const LOAD_CHECK_SAMPLES: usize = 24;
const LOAD_CHECK_SEED: u64 = 7;

pub type SliceBuilder = Arc<dyn Fn(&[f64]) -> Result<SliceChart> + Send + Sync>;
pub type EmptyHook = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Everything the pipeline needs about one physical example.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub constants: BTreeMap<String, f64>,
    pub chart: ChartRef,
    pub structure: CosymplecticStructure,
    pub hamiltonian: ScalarField,
    pub action: AbelianAction,
    pub momentum: MomentumMap,
    pub reeb_flow: Option<FlowMap>,
    /// Slice chart of the level `J_H = μ`, built for a given `μ`.
    pub slice: Option<SliceBuilder>,
    pub mu_default: Vec<f64>,
    pub sample_box: SampleBox,
    /// Seeds for Newton projection onto a level set.
    pub level_box: SampleBox,
    /// Analytic emptiness test for `J_H^{-1}(μ)`.
    pub empty_hook: Option<EmptyHook>,
    pub group_samples: Vec<Vec<f64>>,
    /// Ehresmann connection components `Y^i` for the evolution formalism.
    pub connection: Option<Vec<ScalarField>>,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("chart", &self.chart.names())
            .field("k", &self.action.k())
            .field("mu_default", &self.mu_default)
            .finish_non_exhaustive()
    }
}

impl Scenario {
    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }

    pub fn build_slice(&self, mu: &[f64]) -> Result<SliceChart> {
        let b = self
            .slice
            .as_ref()
            .ok_or_else(|| Error::PreconditionViolation(format!("scenario `{}` has no slice", self.name)))?;
        b(mu)
    }

    pub fn samples(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        sample_points(&self.chart, &self.sample_box, n, seed)
    }

    /// Cross-reference dimensions, then `validate_cosymplectic` and
    /// `verify_momentum` at a fixed set of sample points.
    pub fn check(&self) -> Result<()> {
        let n = self.chart.dim();
        let k = self.action.k();
        if self.momentum.k() != k {
            return Err(Error::validation(
                "momentum dimension",
                format!("action has {k} generator(s) but J has {} component(s)", self.momentum.k()),
            ));
        }
        if self.mu_default.len() != k {
            return Err(Error::validation("mu dimension", format!("expected {k} value(s)")));
        }
        for b in [&self.sample_box, &self.level_box] {
            if b.bounds.len() != n {
                return Err(Error::validation("sample box", format!("expected {n} bounds")));
            }
        }
        if let Some(g) = self.group_samples.iter().find(|g| g.len() != k) {
            return Err(Error::validation("group samples", format!("{g:?} is not in R^{k}")));
        }
        if let Some(y) = &self.connection {
            if 2 * y.len() + 1 != n {
                return Err(Error::validation("connection", format!("expected {} components", n / 2)));
            }
        }
        let pts = self.samples(LOAD_CHECK_SAMPLES, LOAD_CHECK_SEED)?;
        let rep = self.structure.validate(&pts)?;
        if !rep.passed {
            return Err(Error::validation("validate_cosymplectic", format!("{rep:?}")));
        }
        let m = verify_momentum(&self.action, self.structure.omega(), &self.momentum, &pts)?;
        if !m.passed {
            return Err(Error::validation(
                "verify_momentum",
                format!("max |i_ξ ω − dJ| = {:?}", m.max_residual),
            ));
        }
        Ok(())
    }
}

pub const BUILTIN_NAMES: [&str; 3] = ["oscillator-moving-observer", "plane-wave", "q-translation"];

/// A builtin name, or a path to a scenario file.
pub fn load_scenario(source: &str) -> Result<Scenario> {
    load_scenario_with(source, &BTreeMap::new())
}

/// As [`load_scenario`], with named constants replaced by `overrides`
/// (`N`, `m`, `Omega`, `v` for the oscillator; `m`, `c`, `eA0` for the
/// plane wave; any `[constants]` entry of a file).
pub fn load_scenario_with(source: &str, overrides: &BTreeMap<String, f64>) -> Result<Scenario> {
    let take = |allowed: &[&str]| -> Result<()> {
        match overrides.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::parse(format!("param {k}"), format!("`{source}` has no parameter `{k}`"))),
            None => Ok(()),
        }
    };
    let get = |k: &str, d: f64| overrides.get(k).copied().unwrap_or(d);
    let s = match source {
        "oscillator-moving-observer" => {
            take(&["N", "m", "Omega", "v"])?;
            let d = OscillatorParams::default();
            let n = get("N", d.n as f64);
            if n.fract() != 0.0 || n < 1.0 {
                return Err(Error::parse("param N", "N must be a positive integer"));
            }
            oscillator(&OscillatorParams {
                n: n as usize,
                m: get("m", d.m),
                omega: get("Omega", d.omega),
                v: get("v", d.v),
            })?
        }
        "plane-wave" => {
            take(&["m", "c", "eA0"])?;
            let d = PlaneWaveParams::default();
            plane_wave(&PlaneWaveParams {
                m: get("m", d.m),
                c: get("c", d.c),
                ea0: get("eA0", d.ea0),
            })?
        }
        "q-translation" => {
            take(&[])?;
            q_translation()?
        }
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{path}: {e}")))?;
            return from_toml_str_with(&text, overrides);
        }
    };
    s.check()?;
    Ok(s)
}

// ---------------------------------------------------------------------------
// Built-ins

#[derive(Debug, Clone, Copy)]
pub struct OscillatorParams {
    pub n: usize,
    pub m: f64,
    pub omega: f64,
    pub v: f64,
}

impl Default for OscillatorParams {
    fn default() -> Self {
        OscillatorParams {
            n: 2,
            m: 1.0,
            omega: 1.0,
            v: 1.0,
        }
    }
}

fn group_samples() -> Vec<Vec<f64>> {
    vec![vec![0.4], vec![-0.9], vec![1.7]]
}

/// `N`-dimensional isotropic oscillator whose centre moves with velocity
/// `v` along `q1`, under the action `(q1 − v s, t + s)` with `J = −v p1`.
pub fn oscillator(p: &OscillatorParams) -> Result<Scenario> {
    let OscillatorParams { n, m, omega, v } = *p;
    if n < 1 || !(m > 0.0 && omega > 0.0 && v != 0.0) {
        return Err(Error::PreconditionViolation(format!("bad oscillator parameters {p:?}")));
    }
    let t = 2 * n;
    let chart = CoordinateChart::darboux(n)
        .with_excluded(ExcludedSet::new("C", move |x| {
            let mut s = (x[0] + v * x[t]).powi(2) + (x[n] + m * v).powi(2);
            for a in 1..n {
                s += x[a] * x[a] + x[n + a] * x[n + a];
            }
            s.sqrt()
        }))
        .into_ref();
    let structure = CosymplecticStructure::darboux(chart.clone())?;
    let hamiltonian = ScalarField::new(chart.clone(), "H", move |x| {
        let mut kin = Jet::ZERO;
        let mut pot = (x[0] + x[t] * v) * (x[0] + x[t] * v);
        for i in 0..n {
            kin += x[n + i] * x[n + i];
            if i > 0 {
                pot += x[i] * x[i];
            }
        }
        kin / (2.0 * m) + pot * (0.5 * m * omega * omega)
    });
    let action = AbelianAction::new(chart.clone(), "(q1 − v s, t + s)", 1, move |s, x| {
        let mut y = x.to_vec();
        y[0] = x[0] - s[0] * v;
        y[t] = x[t] + s[0];
        Ok(y)
    });
    let momentum = MomentumMap::new(vec![ScalarField::new(chart.clone(), "−v p1", move |x| x[n] * (-v))]);
    let reeb_flow = time_translation(&chart);
    let slice: SliceBuilder = Arc::new(move |mu: &[f64]| oscillator_slice(n, m, omega, v, mu[0]));
    let mut y = vec![ScalarField::constant(chart.clone(), -v)];
    y.extend((1..n).map(|_| ScalarField::constant(chart.clone(), 0.0)));
    Ok(Scenario {
        name: "oscillator-moving-observer".into(),
        description: format!("{n}-dimensional harmonic oscillator seen by an observer moving with velocity v along q1"),
        constants: BTreeMap::from([
            ("N".to_string(), n as f64),
            ("m".to_string(), m),
            ("Omega".to_string(), omega),
            ("v".to_string(), v),
        ]),
        sample_box: SampleBox::uniform(2 * n + 1, -1.0, 1.0),
        level_box: SampleBox::uniform(2 * n + 1, -1.0, 1.0),
        chart,
        structure,
        hamiltonian,
        action,
        momentum,
        reeb_flow: Some(reeb_flow),
        slice: Some(slice),
        mu_default: vec![0.0],
        empty_hook: Some(Arc::new(move |mu: &[f64]| mu[0] >= 0.5 * m * v * v)),
        group_samples: group_samples(),
        connection: Some(y),
    })
}

fn time_translation(chart: &ChartRef) -> FlowMap {
    let t = chart.dim() - 1;
    FlowMap::new(chart.clone(), "t + τ", move |tau, x| {
        let mut y = x.to_vec();
        y[t] = x[t] + tau;
        Ok(y)
    })
}

/// Slice `q1 = 0` of the oscillator level set, an ellipsoid of dimension
/// `2N − 1`, charted by `(q_α, p_α, θ)` with
/// `p1 + m v = ρ cos θ`, `m Ω v t = ρ sin θ`.
fn oscillator_slice(n: usize, m: f64, omega: f64, v: f64, mu: f64) -> Result<SliceChart> {
    let t = 2 * n;
    let two_mk = m * m * v * v - 2.0 * m * mu;
    let mut names: Vec<String> = (2..=n).map(|a| format!("q{a}")).collect();
    names.extend((2..=n).map(|a| format!("p{a}")));
    names.push("theta".into());
    let d = 2 * n - 1;
    let rho2 = move |y: &[Jet]| -> Jet {
        let mut r = Jet::constant(two_mk);
        for a in 0..n - 1 {
            r -= y[n - 1 + a] * y[n - 1 + a] + y[a] * y[a] * (m * m * omega * omega);
        }
        r
    };
    let rho2_plain = move |y: &[f64]| -> f64 {
        let mut r = two_mk;
        for a in 0..n - 1 {
            r -= y[n - 1 + a] * y[n - 1 + a] + m * m * omega * omega * y[a] * y[a];
        }
        r
    };
    let sc = CoordinateChart::new(names)
        .with_excluded(ExcludedSet::new("ρ² > 0", rho2_plain))
        .into_ref();
    let ambient = CoordinateChart::darboux(n).into_ref();
    let embed = SmoothMap::new(sc.clone(), ambient.clone(), "q1 = 0 ellipsoid", move |y| {
        let rho = rho2(y).sqrt();
        let th = y[d - 1];
        let mut x = vec![Jet::ZERO; 2 * n + 1];
        for a in 1..n {
            x[a] = y[a - 1];
            x[n + a] = y[n - 1 + a - 1];
        }
        x[n] = rho * th.cos() - m * v;
        x[t] = rho * th.sin() / (m * omega * v);
        x
    });
    let retract = SmoothMap::new(ambient.clone(), sc, "(q_α, p_α, θ)", move |x| {
        let mut y = Vec::with_capacity(d);
        y.extend_from_slice(&x[1..n]);
        y.extend_from_slice(&x[n + 1..2 * n]);
        y.push(((x[0] + x[t] * v) * (m * omega)).atan2(x[n] + m * v));
        y
    });
    let mut periods = vec![None; d];
    periods[d - 1] = Some(TAU);
    SliceChart::new(embed, retract, vec![ScalarField::coordinate(ambient, 0)], periods)
}

#[derive(Debug, Clone, Copy)]
pub struct PlaneWaveParams {
    pub m: f64,
    pub c: f64,
    pub ea0: f64,
}

impl Default for PlaneWaveParams {
    fn default() -> Self {
        PlaneWaveParams {
            m: 1.0,
            c: 1.0,
            ea0: 0.1,
        }
    }
}

/// Charged particle in a linearly polarized monochromatic plane wave
/// travelling along `q1`, with the action `(q1 + c s, t + s)` and
/// `J = c p1`.
pub fn plane_wave(p: &PlaneWaveParams) -> Result<Scenario> {
    let PlaneWaveParams { m, c, ea0 } = *p;
    if !(m > 0.0 && c > 0.0) {
        return Err(Error::PreconditionViolation(format!("bad plane-wave parameters {p:?}")));
    }
    let chart = CoordinateChart::darboux(3)
        .with_excluded(ExcludedSet::new("C1", move |x| {
            let ph = x[0] - c * x[6];
            (ph.cos().powi(2) + (x[3] - m * c).powi(2) + x[4] * x[4] + x[5] * x[5]).sqrt()
        }))
        .with_excluded(ExcludedSet::new("C2", move |x| {
            let ph = x[0] - c * x[6];
            (ph.sin().powi(2) + (x[3] - m * c).powi(2) + (x[4] - ea0 * ph.cos()).powi(2) + x[5] * x[5]).sqrt()
        }))
        .into_ref();
    let structure = CosymplecticStructure::darboux(chart.clone())?;
    let hamiltonian = ScalarField::new(chart.clone(), "H", move |x| {
        (x[3] * x[3] + x[4] * x[4] + x[5] * x[5]) / (2.0 * m) - x[4] * (x[0] - x[6] * c).cos() * (ea0 / m)
    });
    let action = AbelianAction::new(chart.clone(), "(q1 + c s, t + s)", 1, move |s, x| {
        let mut y = x.to_vec();
        y[0] = x[0] + s[0] * c;
        y[6] = x[6] + s[0];
        Ok(y)
    });
    let momentum = MomentumMap::new(vec![ScalarField::new(chart.clone(), "c p1", move |x| x[3] * c)]);
    let slice: SliceBuilder = Arc::new(move |mu: &[f64]| plane_wave_slice(m, c, ea0, mu[0]));
    let mut sample_box = SampleBox::uniform(7, -1.0, 1.0);
    for i in 3..6 {
        sample_box.bounds[i] = (-0.5, 0.5);
    }
    let connection = vec![
        ScalarField::constant(chart.clone(), c),
        ScalarField::constant(chart.clone(), 0.0),
        ScalarField::constant(chart.clone(), 0.0),
    ];
    Ok(Scenario {
        name: "plane-wave".into(),
        description: "charged particle in a linearly polarized monochromatic plane wave".into(),
        constants: BTreeMap::from([("m".to_string(), m), ("c".to_string(), c), ("eA0".to_string(), ea0)]),
        level_box: sample_box.clone(),
        sample_box,
        reeb_flow: Some(time_translation(&chart)),
        chart,
        structure,
        hamiltonian,
        action,
        momentum,
        slice: Some(slice),
        mu_default: vec![0.0],
        empty_hook: Some(Arc::new(move |mu: &[f64]| 2.0 * m * mu[0] >= m * m * c * c + ea0 * ea0)),
        group_samples: group_samples(),
        connection: Some(connection),
    })
}

/// Slice `q1 = 0` charted by `(q2, q3, p2, p3, t)` on the branch
/// `p1 = m c − √rad` of the level set.
fn plane_wave_slice(m: f64, c: f64, ea0: f64, mu: f64) -> Result<SliceChart> {
    let rad = move |y: &[Jet]| -> Jet {
        -(y[2] * y[2]) - y[3] * y[3] + y[2] * (y[4] * c).cos() * (2.0 * ea0) + (m * m * c * c - 2.0 * m * mu)
    };
    let rad_plain = move |y: &[f64]| -> f64 {
        m * m * c * c - y[2] * y[2] - y[3] * y[3] + 2.0 * ea0 * y[2] * (c * y[4]).cos() - 2.0 * m * mu
    };
    let sc = CoordinateChart::new(["q2", "q3", "p2", "p3", "t"])
        .with_excluded(ExcludedSet::new("p1 < m c branch", rad_plain))
        .into_ref();
    let ambient = CoordinateChart::darboux(3).into_ref();
    let embed = SmoothMap::new(sc.clone(), ambient.clone(), "q1 = 0, p1 = m c − √rad", move |y| {
        let p1 = Jet::constant(m * c) - rad(y).sqrt();
        vec![Jet::ZERO, y[0], y[1], p1, y[2], y[3], y[4]]
    });
    let retract = SmoothMap::new(ambient.clone(), sc, "(q2, q3, p2, p3, t)", |x| {
        vec![x[1], x[2], x[4], x[5], x[6]]
    });
    SliceChart::new(embed, retract, vec![ScalarField::coordinate(ambient, 0)], vec![None; 5])
}

/// Time-dependent oscillator in `q2`, free in `q1`, with the
/// `q1`-translation action whose cocycle vanishes.
pub fn q_translation() -> Result<Scenario> {
    let chart = CoordinateChart::darboux(2).into_ref();
    let structure = CosymplecticStructure::darboux(chart.clone())?;
    let hamiltonian = ScalarField::new(chart.clone(), "H", |x| {
        (x[2] * x[2] + x[3] * x[3]) * 0.5 + x[1] * x[1] * (x[4].sin() * 0.5 + 1.0) * 0.5
    });
    let action = AbelianAction::new(chart.clone(), "q1 + s", 1, |s, x| {
        let mut y = x.to_vec();
        y[0] = x[0] + s[0];
        Ok(y)
    });
    let momentum = MomentumMap::new(vec![ScalarField::coordinate(chart.clone(), 2).with_label("p1")]);
    let slice: SliceBuilder = Arc::new(|mu: &[f64]| {
        let mu = mu[0];
        let sc = CoordinateChart::new(["q2", "p2", "t"]).into_ref();
        let ambient = CoordinateChart::darboux(2).into_ref();
        let embed = SmoothMap::new(sc.clone(), ambient.clone(), "q1 = 0, p1 = μ", move |y| {
            vec![Jet::ZERO, y[0], Jet::constant(mu), y[1], y[2]]
        });
        let retract = SmoothMap::new(ambient.clone(), sc, "(q2, p2, t)", |x| vec![x[1], x[3], x[4]]);
        SliceChart::new(embed, retract, vec![ScalarField::coordinate(ambient, 0)], vec![None; 3])
    });
    Ok(Scenario {
        name: "q-translation".into(),
        description: "time-dependent oscillator in q2 with the q1-translation symmetry".into(),
        constants: BTreeMap::new(),
        sample_box: SampleBox::uniform(5, -1.0, 1.0),
        level_box: SampleBox::uniform(5, -1.0, 1.0),
        reeb_flow: Some(time_translation(&chart)),
        connection: Some(vec![
            ScalarField::constant(chart.clone(), 0.0),
            ScalarField::new(chart.clone(), "q2 sin t", |x| x[1] * x[4].sin()),
        ]),
        chart,
        structure,
        hamiltonian,
        action,
        momentum,
        slice: Some(slice),
        mu_default: vec![0.3],
        empty_hook: None,
        group_samples: group_samples(),
    })
}

// ---------------------------------------------------------------------------
// Scenario files

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileScenario {
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    constants: BTreeMap<String, Spanned<toml::Value>>,
    chart: FileChart,
    omega: FileOmega,
    eta: BTreeMap<String, Spanned<String>>,
    hamiltonian: FileHamiltonian,
    action: FileAction,
    momentum: FileMomentum,
    reeb_flow: Option<FileMap>,
    slice: Option<FileSlice>,
    #[serde(default)]
    excluded: Vec<FileExcluded>,
    #[serde(default)]
    sampling: FileSampling,
    connection: Option<FileConnection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileChart {
    coordinates: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOmega {
    terms: Vec<Spanned<(String, String, String)>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileHamiltonian {
    #[serde(rename = "H")]
    h: Spanned<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileAction {
    generators: usize,
    map: BTreeMap<String, Spanned<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileMomentum {
    #[serde(rename = "J")]
    j: Vec<Spanned<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileMap {
    map: BTreeMap<String, Spanned<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileExcluded {
    name: String,
    distance: Spanned<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSlice {
    coordinates: Vec<String>,
    #[serde(default, rename = "let")]
    lets: Vec<Spanned<(String, String)>>,
    embed: BTreeMap<String, Spanned<String>>,
    retract: BTreeMap<String, Spanned<String>>,
    section: Vec<Spanned<String>>,
    #[serde(default)]
    periods: BTreeMap<String, Spanned<String>>,
    #[serde(default)]
    excluded: Vec<FileExcluded>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSampling {
    #[serde(default, rename = "box")]
    sample_box: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    level_box: Option<BTreeMap<String, [f64; 2]>>,
    mu: Option<Vec<f64>>,
    empty_when: Option<Spanned<String>>,
    group: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConnection {
    #[serde(rename = "Y")]
    y: Vec<Spanned<String>>,
}

/// Maps byte offsets to 1-based line numbers.
#[derive(Clone)]
struct Lines(Arc<Vec<usize>>);

impl Lines {
    fn new(text: &str) -> Self {
        Lines(Arc::new(
            std::iter::once(0).chain(text.match_indices('\n').map(|(i, _)| i + 1)).collect(),
        ))
    }

    fn line(&self, offset: usize) -> usize {
        self.0.partition_point(|&start| start <= offset)
    }

    fn locate(&self, e: Error, span: std::ops::Range<usize>) -> Error {
        match e {
            Error::Parse { line: None, key, message } => Error::Parse {
                line: Some(self.line(span.start)),
                key,
                message,
            },
            other => other,
        }
    }
}

/// Expressions with `let` bindings appended to the variable list in order.
#[derive(Debug, Clone)]
struct Compiled {
    lets: Vec<Expr>,
    outputs: Vec<Expr>,
}

impl Compiled {
    fn eval(&self, x: &[Jet]) -> Vec<Jet> {
        if self.lets.is_empty() {
            return self.outputs.iter().map(|e| e.eval(x)).collect();
        }
        let mut vars = x.to_vec();
        for l in &self.lets {
            let v = l.eval(&vars);
            vars.push(v);
        }
        self.outputs.iter().map(|e| e.eval(&vars)).collect()
    }
}

struct Ctx<'a> {
    lines: &'a Lines,
    consts: HashMap<String, f64>,
}

impl Ctx<'_> {
    fn expr(&self, key: &str, src: &Spanned<String>, vars: &[String]) -> Result<Expr> {
        expr::parse(key, src.get_ref(), vars, &self.consts).map_err(|e| self.lines.locate(e, src.span()))
    }

    fn scalar(&self, chart: &ChartRef, key: &str, src: &Spanned<String>) -> Result<ScalarField> {
        let e = self.expr(key, src, chart.names())?;
        Ok(ScalarField::new(chart.clone(), src.get_ref().clone(), move |x| e.eval(x)))
    }

    fn index(&self, chart: &[String], key: &str, name: &str, span: std::ops::Range<usize>) -> Result<usize> {
        chart.iter().position(|c| c == name).ok_or_else(|| {
            self.lines
                .locate(Error::parse(key, format!("`{name}` is not a coordinate")), span)
        })
    }

    /// One expression per target coordinate; missing entries default to
    /// the identity when `identity` is set.
    fn coordinate_map(
        &self,
        key: &str,
        targets: &[String],
        map: &BTreeMap<String, Spanned<String>>,
        vars: &[String],
        identity: bool,
    ) -> Result<Vec<Expr>> {
        for (name, src) in map {
            if !targets.contains(name) {
                return Err(self.lines.locate(
                    Error::parse(format!("{key}.{name}"), format!("`{name}` is not a target coordinate")),
                    src.span(),
                ));
            }
        }
        targets
            .iter()
            .enumerate()
            .map(|(i, name)| match map.get(name) {
                Some(src) => self.expr(&format!("{key}.{name}"), src, vars),
                None if identity => Ok(Expr::Var(i)),
                None => Err(Error::parse(key, format!("missing entry for coordinate `{name}`"))),
            })
            .collect()
    }

    fn excluded(&self, key: &str, sets: &[FileExcluded], vars: &[String], lets: &[Expr]) -> Result<Vec<ExcludedSet>> {
        sets.iter()
            .map(|s| {
                let e = self.expr(&format!("{key}.{}", s.name), &s.distance, vars)?;
                let c = Compiled {
                    lets: lets.to_vec(),
                    outputs: vec![e],
                };
                Ok(ExcludedSet::new(s.name.clone(), move |x| {
                    let lifted: Vec<Jet> = x.iter().copied().map(Jet::constant).collect();
                    c.eval(&lifted)[0].value()
                }))
            })
            .collect()
    }
}

fn resolve_constants(
    lines: &Lines,
    raw: &BTreeMap<String, Spanned<toml::Value>>,
    overrides: &BTreeMap<String, f64>,
) -> Result<HashMap<String, f64>> {
    if let Some(k) = overrides.keys().find(|k| !raw.contains_key(*k)) {
        return Err(Error::parse(format!("param {k}"), format!("scenario has no constant `{k}`")));
    }
    let mut consts: HashMap<String, f64> = overrides.iter().map(|(k, v)| (k.clone(), *v)).collect();
    let mut pending: Vec<(&String, &Spanned<toml::Value>)> = Vec::new();
    for (name, v) in raw {
        if overrides.contains_key(name) {
            continue;
        }
        match v.get_ref() {
            toml::Value::Float(f) => {
                consts.insert(name.clone(), *f);
            }
            toml::Value::Integer(i) => {
                consts.insert(name.clone(), *i as f64);
            }
            toml::Value::String(_) => pending.push((name, v)),
            _ => {
                return Err(lines.locate(
                    Error::parse(format!("constants.{name}"), "expected a number or an expression string"),
                    v.span(),
                ))
            }
        }
    }
    // expressions may refer to each other in any order
    while !pending.is_empty() {
        let before = pending.len();
        let mut last_err = None;
        pending.retain(|(name, v)| {
            let src = v.get_ref().as_str().expect("string constant");
            match expr::parse_constant(&format!("constants.{name}"), src, &consts) {
                Ok(c) => {
                    consts.insert((*name).clone(), c);
                    false
                }
                Err(e) => {
                    last_err = Some(lines.locate(e, v.span()));
                    true
                }
            }
        });
        if pending.len() == before {
            return Err(last_err.expect("unresolved constant"));
        }
    }
    Ok(consts)
}

fn sample_box(key: &str, chart: &[String], spec: &BTreeMap<String, [f64; 2]>) -> Result<SampleBox> {
    let default = spec.get("default").copied().unwrap_or([-1.0, 1.0]);
    for name in spec.keys() {
        if name != "default" && !chart.contains(name) {
            return Err(Error::parse(format!("sampling.{key}.{name}"), "not a coordinate"));
        }
    }
    Ok(SampleBox {
        bounds: chart
            .iter()
            .map(|c| {
                let [lo, hi] = spec.get(c).copied().unwrap_or(default);
                (lo, hi)
            })
            .collect(),
    })
}

fn toml_error(text: &str, e: toml::de::Error) -> Error {
    let line = e.span().map(|s| Lines::new(text).line(s.start));
    Error::Parse {
        line,
        key: None,
        message: e.message().trim().to_string(),
    }
}

/// Parses and validates a scenario file.
pub fn from_toml_str(text: &str) -> Result<Scenario> {
    from_toml_str_with(text, &BTreeMap::new())
}

pub fn from_toml_str_with(text: &str, overrides: &BTreeMap<String, f64>) -> Result<Scenario> {
    let file: FileScenario = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let lines = Lines::new(text);
    let consts = resolve_constants(&lines, &file.constants, overrides)?;
    let ctx = Ctx { lines: &lines, consts };
    let names = file.chart.coordinates.clone();
    if names.is_empty() {
        return Err(Error::parse("chart.coordinates", "chart needs at least one coordinate"));
    }
    let mut chart = CoordinateChart::new(names.clone());
    for set in ctx.excluded("excluded", &file.excluded, &names, &[])? {
        chart = chart.with_excluded(set);
    }
    let chart = chart.into_ref();

    let terms = file
        .omega
        .terms
        .iter()
        .map(|t| {
            let (a, b, src) = t.get_ref();
            let i = ctx.index(&names, "omega.terms", a, t.span())?;
            let j = ctx.index(&names, "omega.terms", b, t.span())?;
            let e = ctx.expr(&format!("omega.terms.{a}^{b}"), &Spanned::new(t.span(), src.clone()), &names)?;
            Ok((i, j, ScalarField::new(chart.clone(), src.clone(), move |x| e.eval(x))))
        })
        .collect::<Result<Vec<_>>>()?;
    let omega = TwoFormField::from_wedge_terms(chart.clone(), "ω", terms);

    let mut eta_comps: Vec<ScalarField> = (0..names.len()).map(|_| ScalarField::constant(chart.clone(), 0.0)).collect();
    for (name, src) in &file.eta {
        let i = ctx.index(&names, &format!("eta.{name}"), name, src.span())?;
        eta_comps[i] = ctx.scalar(&chart, &format!("eta.{name}"), src)?;
    }
    let eta = OneFormField::from_components(chart.clone(), "η", eta_comps);
    let structure = CosymplecticStructure::new(omega, eta)?;
    let hamiltonian = ctx.scalar(&chart, "hamiltonian.H", &file.hamiltonian.h)?.with_label("H");

    let k = file.action.generators;
    if k == 0 {
        return Err(Error::parse("action.generators", "need at least one generator"));
    }
    let s_names: Vec<String> = (1..=k).map(|a| format!("s{a}")).collect();
    let mut action_vars = names.clone();
    action_vars.extend(s_names.iter().cloned());
    let act_exprs = ctx.coordinate_map("action.map", &names, &file.action.map, &action_vars, true)?;
    let action = AbelianAction::new(chart.clone(), "action", k, move |s, x| {
        let mut v = x.to_vec();
        v.extend_from_slice(s);
        Ok(act_exprs.iter().map(|e| e.eval(&v)).collect::<Vec<_>>())
    });
    if file.momentum.j.len() != k {
        return Err(Error::parse(
            "momentum.J",
            format!("expected {k} component(s), found {}", file.momentum.j.len()),
        ));
    }
    let momentum = MomentumMap::new(
        file.momentum
            .j
            .iter()
            .enumerate()
            .map(|(a, src)| ctx.scalar(&chart, &format!("momentum.J[{a}]"), src))
            .collect::<Result<_>>()?,
    );

    let reeb_flow = match &file.reeb_flow {
        Some(f) => {
            let mut vars = names.clone();
            vars.push("tau".into());
            let exprs = ctx.coordinate_map("reeb_flow.map", &names, &f.map, &vars, true)?;
            Some(FlowMap::new(chart.clone(), "reeb flow", move |tau, x| {
                let mut v = x.to_vec();
                v.push(tau);
                Ok(exprs.iter().map(|e| e.eval(&v)).collect())
            }))
        }
        None => None,
    };

    let mu_default = file.sampling.mu.clone().unwrap_or_else(|| vec![0.0; k]);
    let mu_names: Vec<String> = if k == 1 {
        vec!["mu".into(), "mu1".into()]
    } else {
        (1..=k).map(|a| format!("mu{a}")).collect()
    };
    let slice: Option<SliceBuilder> = match &file.slice {
        Some(spec) => {
            let spec = spec.clone();
            let base = ctx.consts.clone();
            let ambient = chart.clone();
            let lines = lines.clone();
            let mu_names = mu_names.clone();
            let build: SliceBuilder = Arc::new(move |mu: &[f64]| {
                let mut consts = base.clone();
                for (i, name) in mu_names.iter().enumerate() {
                    consts.insert(name.clone(), mu[if k == 1 { 0 } else { i }]);
                }
                build_file_slice(&Ctx { lines: &lines, consts }, &spec, &ambient)
            });
            // surface expression errors at load time
            build(&mu_default)?;
            Some(build)
        }
        None => None,
    };

    let empty_hook: Option<EmptyHook> = match &file.sampling.empty_when {
        Some(src) => {
            let e = ctx.expr("sampling.empty_when", src, &mu_names)?;
            let single = k == 1;
            Some(Arc::new(move |mu: &[f64]| {
                let v: Vec<f64> = if single { vec![mu[0], mu[0]] } else { mu.to_vec() };
                e.eval_f64(&v) >= 0.0
            }))
        }
        None => None,
    };

    let connection = match &file.connection {
        Some(c) => Some(
            c.y.iter()
                .enumerate()
                .map(|(i, src)| ctx.scalar(&chart, &format!("connection.Y[{i}]"), src))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let sample = sample_box("box", &names, &file.sampling.sample_box)?;
    let level_box = match &file.sampling.level_box {
        Some(b) => sample_box("level_box", &names, b)?,
        None => sample.clone(),
    };
    let s = Scenario {
        name: file.name,
        description: file.description,
        constants: ctx.consts.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        chart,
        structure,
        hamiltonian,
        action,
        momentum,
        reeb_flow,
        slice,
        mu_default,
        sample_box: sample,
        level_box,
        empty_hook,
        group_samples: file.sampling.group.unwrap_or_else(|| vec![vec![0.4; k], vec![-0.9; k], vec![1.7; k]]),
        connection,
    };
    s.check()?;
    Ok(s)
}

fn build_file_slice(ctx: &Ctx<'_>, spec: &FileSlice, ambient: &ChartRef) -> Result<SliceChart> {
    let coords = spec.coordinates.clone();
    let mut vars = coords.clone();
    let mut lets = Vec::new();
    for l in &spec.lets {
        let (name, src) = l.get_ref();
        lets.push(ctx.expr(&format!("slice.let.{name}"), &Spanned::new(l.span(), src.clone()), &vars)?);
        vars.push(name.clone());
    }
    let mut sc = CoordinateChart::new(coords.clone());
    for set in ctx.excluded("slice.excluded", &spec.excluded, &vars, &lets)? {
        sc = sc.with_excluded(set);
    }
    let sc = sc.into_ref();
    let embed_exprs = ctx.coordinate_map("slice.embed", ambient.names(), &spec.embed, &vars, false)?;
    let embed_c = Compiled {
        lets,
        outputs: embed_exprs,
    };
    let embed = SmoothMap::new(sc.clone(), ambient.clone(), "slice embedding", move |y| embed_c.eval(y));
    let retract_exprs = ctx.coordinate_map("slice.retract", &coords, &spec.retract, ambient.names(), false)?;
    let retract = SmoothMap::new(ambient.clone(), sc, "slice retraction", move |x| {
        retract_exprs.iter().map(|e| e.eval(x)).collect()
    });
    let section = spec
        .section
        .iter()
        .enumerate()
        .map(|(i, src)| ctx.scalar(ambient, &format!("slice.section[{i}]"), src))
        .collect::<Result<Vec<_>>>()?;
    let mut periods = vec![None; coords.len()];
    for (name, src) in &spec.periods {
        let i = ctx.index(&coords, &format!("slice.periods.{name}"), name, src.span())?;
        let p = expr::parse_constant(&format!("slice.periods.{name}"), src.get_ref(), &ctx.consts)
            .map_err(|e| ctx.lines.locate(e, src.span()))?;
        periods[i] = Some(p);
    }
    SliceChart::new(embed, retract, section, periods)
}
