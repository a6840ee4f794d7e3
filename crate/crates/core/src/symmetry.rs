//! Abelian `ℝᵏ` actions, the cocycle `c_η`, momentum maps and their
//! modification by a Hamiltonian, Noether checks, the Reeb-corrected action
//! and symmetries of mechanical presymplectic structures.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{
    differential, interior_product, lie_derivative_2form, pullback_1form, pullback_2form, ChartRef, ScalarField,
    SmoothMap, TwoFormField, VectorField,
};
use crate::jet::{depth_of, lift, values, Jet};
use crate::linalg::Subspace;
use crate::structure::{CosymplecticStructure, MechanicalPresymplecticStructure};

/// Tolerance for identities evaluated exactly with dual numbers.
pub const ALGEBRAIC_TOL: f64 = 1e-9;
/// Tolerance for momentum-map residuals.
pub const MOMENTUM_TOL: f64 = 1e-8;
/// Relative distance below which `R(x)` counts as tangent to the orbit.
pub const TRANSVERSALITY_MARGIN: f64 = 1e-6;

type ActFn = dyn Fn(&[Jet], &[Jet]) -> Result<Vec<Jet>> + Send + Sync;
type FlowFn = dyn Fn(Jet, &[Jet]) -> Result<Vec<Jet>> + Send + Sync;

fn raw_vector(f: &VectorField, x: &[f64]) -> Result<DVector<f64>> {
    Ok(DVector::from_vec(values(&f.eval_jet(&lift(x))?)))
}

/// An action of `ℝᵏ` on a chart, `(s, x) ↦ φ_s(x)`.
#[derive(Clone)]
pub struct AbelianAction {
    chart: ChartRef,
    label: String,
    k: usize,
    act: Arc<ActFn>,
    fundamental: Vec<VectorField>,
}

impl fmt::Debug for AbelianAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AbelianAction({}, k = {})", self.label, self.k)
    }
}

impl AbelianAction {
    /// Action with fundamental fields obtained by differentiating `act` at `s = 0`.
    pub fn new(
        chart: ChartRef,
        label: impl Into<String>,
        k: usize,
        act: impl Fn(&[Jet], &[Jet]) -> Result<Vec<Jet>> + Send + Sync + 'static,
    ) -> Self {
        let act: Arc<ActFn> = Arc::new(act);
        let label = label.into();
        let fundamental = (0..k)
            .map(|a| {
                let act = act.clone();
                VectorField::try_new(chart.clone(), format!("ξ_{}", a + 1), move |x| {
                    let d = depth_of(x);
                    let mut s = vec![Jet::ZERO; k];
                    s[a] = Jet::ZERO
                        .seeded(d, 1.0)
                        .ok_or_else(|| Error::PreconditionViolation("differentiation depth exhausted".into()))?;
                    Ok(act(&s, x)?.iter().map(|c| c.tangent(d)).collect())
                })
            })
            .collect();
        AbelianAction {
            chart,
            label,
            k,
            act,
            fundamental,
        }
    }

    /// Replace the derived fundamental fields by closed-form ones; the
    /// consistency check compares the two.
    pub fn with_fundamental_fields(mut self, fields: Vec<VectorField>) -> Result<Self> {
        if fields.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                found: fields.len(),
            });
        }
        self.fundamental = fields;
        Ok(self)
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fundamental_fields(&self) -> &[VectorField] {
        &self.fundamental
    }

    pub fn act(&self, s: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                found: s.len(),
            });
        }
        self.chart.check(x)?;
        Ok(values(&(self.act)(&lift(s), &lift(x))?))
    }

    pub fn act_jet(&self, s: &[Jet], x: &[Jet]) -> Result<Vec<Jet>> {
        (self.act)(s, x)
    }

    /// `φ_s` as a smooth map of the chart.
    pub fn map(&self, s: &[f64]) -> SmoothMap {
        let act = self.act.clone();
        let s = lift(s);
        SmoothMap::try_new(self.chart.clone(), self.chart.clone(), format!("φ_{:?}", values(&s)), move |x| {
            act(&s, x)
        })
    }

    /// Identity, composition law and fundamental-field consistency at the
    /// given points and group elements.
    pub fn consistency(&self, points: &[Vec<f64>], group: &[(Vec<f64>, Vec<f64>)]) -> Result<ActionConsistencyReport> {
        let zero = vec![0.0; self.k];
        let mut rep = ActionConsistencyReport::default();
        for (i, x) in points.iter().enumerate() {
            let id = self.act(&zero, x)?;
            rep.max_identity = rep.max_identity.max(max_abs_diff(&id, x));
            let (s, s2) = &group[i % group.len().max(1)];
            let inner = values(&(self.act)(&lift(s2), &lift(x))?);
            let lhs = values(&(self.act)(&lift(s), &lift(&inner))?);
            let sum: Vec<f64> = s.iter().zip(s2).map(|(a, b)| a + b).collect();
            let rhs = values(&(self.act)(&lift(&sum), &lift(x))?);
            rep.max_composition = rep.max_composition.max(max_abs_diff(&lhs, &rhs));
            let derived = AbelianAction::new(self.chart.clone(), "", self.k, {
                let act = self.act.clone();
                move |s, x| act(s, x)
            });
            for (a, f) in self.fundamental.iter().enumerate() {
                let d = raw_vector(&derived.fundamental[a], x)?;
                let v = raw_vector(f, x)?;
                rep.max_fundamental = rep.max_fundamental.max((d - v).amax());
            }
        }
        rep.samples = points.len();
        rep.passed = rep.max_identity < ALGEBRAIC_TOL && rep.max_composition < ALGEBRAIC_TOL && rep.max_fundamental < MOMENTUM_TOL;
        Ok(rep)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ActionConsistencyReport {
    pub samples: usize,
    pub max_identity: f64,
    pub max_composition: f64,
    pub max_fundamental: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CosymplecticActionReport {
    pub samples: usize,
    pub group_samples: usize,
    pub max_pullback_omega: f64,
    pub max_pullback_eta: f64,
    pub max_lie_omega: f64,
    pub max_d_cocycle: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `φ_s*ω = ω`, `φ_s*η = η`, `L_{ξ_M} ω = 0` and `d(η(ξ_M)) = 0` at samples.
pub fn check_cosymplectic_action(
    a: &AbelianAction,
    s: &CosymplecticStructure,
    points: &[Vec<f64>],
    group: &[Vec<f64>],
) -> Result<CosymplecticActionReport> {
    let mut rep = CosymplecticActionReport {
        samples: points.len(),
        group_samples: group.len(),
        max_pullback_omega: 0.0,
        max_pullback_eta: 0.0,
        max_lie_omega: 0.0,
        max_d_cocycle: 0.0,
        tolerance: ALGEBRAIC_TOL,
        passed: false,
    };
    let pulled: Vec<_> = group
        .iter()
        .map(|g| {
            let m = a.map(g);
            (pullback_2form(&m, s.omega()), pullback_1form(&m, s.eta()))
        })
        .collect();
    let lie: Vec<_> = a.fundamental_fields().iter().map(|f| lie_derivative_2form(f, s.omega())).collect();
    let dc: Vec<_> = a
        .fundamental_fields()
        .iter()
        .map(|f| differential(&s.eta().contract(f)))
        .collect();
    for x in points {
        let w = s.omega().eval(x)?;
        let e = s.eta().eval(x)?;
        for (pw, pe) in &pulled {
            rep.max_pullback_omega = rep.max_pullback_omega.max((pw.eval(x)?.matrix() - w.matrix()).amax());
            rep.max_pullback_eta = rep.max_pullback_eta.max((pe.eval(x)? - &e).amax());
        }
        for l in &lie {
            rep.max_lie_omega = rep.max_lie_omega.max(l.eval(x)?.matrix().amax());
        }
        for d in &dc {
            rep.max_d_cocycle = rep.max_d_cocycle.max(d.eval(x)?.amax());
        }
    }
    rep.passed = rep.max_pullback_omega < ALGEBRAIC_TOL
        && rep.max_pullback_eta < ALGEBRAIC_TOL
        && rep.max_lie_omega < ALGEBRAIC_TOL
        && rep.max_d_cocycle < ALGEBRAIC_TOL;
    Ok(rep)
}

/// The constants `c_η(e_a) = η(ξ_M^{(a)})`.
#[derive(Debug, Clone, Serialize)]
pub struct Cocycle {
    pub values: Vec<f64>,
    pub spread: Vec<f64>,
}

impl Cocycle {
    pub fn zero(k: usize) -> Self {
        Cocycle {
            values: vec![0.0; k],
            spread: vec![0.0; k],
        }
    }
}

pub fn compute_cocycle(a: &AbelianAction, s: &CosymplecticStructure, points: &[Vec<f64>]) -> Result<Cocycle> {
    if points.is_empty() {
        return Err(Error::PreconditionViolation("cocycle needs at least one sample point".into()));
    }
    let mut values_out = Vec::with_capacity(a.k());
    let mut spread = Vec::with_capacity(a.k());
    for (idx, f) in a.fundamental_fields().iter().enumerate() {
        let c = s.eta().contract(f);
        let vals: Vec<f64> = points.iter().map(|x| c.eval(x)).collect::<Result<_>>()?;
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo > ALGEBRAIC_TOL {
            return Err(Error::NonConstant { index: idx, spread: hi - lo });
        }
        values_out.push(vals.iter().sum::<f64>() / vals.len() as f64);
        spread.push(hi - lo);
    }
    Ok(Cocycle {
        values: values_out,
        spread,
    })
}

/// Whether `η(ξ_M) = 0` for every generator.
pub fn albert_condition(c: &Cocycle) -> bool {
    c.values.iter().all(|v| v.abs() < ALGEBRAIC_TOL)
}

/// Components `J_{e_a}`.
#[derive(Debug, Clone)]
pub struct MomentumMap {
    pub components: Vec<ScalarField>,
}

impl MomentumMap {
    pub fn new(components: Vec<ScalarField>) -> Self {
        MomentumMap { components }
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentumReport {
    pub samples: usize,
    pub max_residual: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// `i_{ξ_M} ω = dJ_ξ` for every generator.
pub fn verify_momentum(
    a: &AbelianAction,
    omega: &TwoFormField,
    j: &MomentumMap,
    points: &[Vec<f64>],
) -> Result<MomentumReport> {
    if j.k() != a.k() {
        return Err(Error::DimensionMismatch {
            expected: a.k(),
            found: j.k(),
        });
    }
    let residuals: Vec<_> = a
        .fundamental_fields()
        .iter()
        .zip(&j.components)
        .map(|(f, c)| interior_product(f, omega).sub(&differential(c)))
        .collect();
    let mut max_residual = vec![0.0f64; a.k()];
    for x in points {
        for (m, r) in max_residual.iter_mut().zip(&residuals) {
            *m = m.max(r.eval(x)?.amax());
        }
    }
    Ok(MomentumReport {
        samples: points.len(),
        passed: max_residual.iter().all(|&r| r < MOMENTUM_TOL),
        max_residual,
        tolerance: MOMENTUM_TOL,
    })
}

/// Max `|f(φ_s(x)) − f(x)|`.
pub fn invariance_deviation(a: &AbelianAction, f: &ScalarField, points: &[Vec<f64>], group: &[Vec<f64>]) -> Result<f64> {
    let mut dev: f64 = 0.0;
    for x in points {
        let v = f.eval(x)?;
        for g in group {
            let y = a.act(g, x)?;
            dev = dev.max((f.eval_jet(&lift(&y))?.value() - v).abs());
        }
    }
    Ok(dev)
}

/// `(J_H)_a = J_a − c_a H`, after checking that `H` is invariant.
pub fn modify_momentum(
    a: &AbelianAction,
    j: &MomentumMap,
    h: &ScalarField,
    c: &Cocycle,
    points: &[Vec<f64>],
    group: &[Vec<f64>],
) -> Result<MomentumMap> {
    let dev = invariance_deviation(a, h, points, group)?;
    if dev > ALGEBRAIC_TOL {
        return Err(Error::NotInvariant { deviation: dev });
    }
    Ok(MomentumMap::new(
        j.components
            .iter()
            .zip(&c.values)
            .map(|(ja, &ca)| {
                if ca == 0.0 {
                    ja.clone()
                } else {
                    ja.sub(&h.scale(ca)).with_label(format!("{} - {ca}·H", ja.label()))
                }
            })
            .collect(),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct NoetherEntry {
    pub component: usize,
    pub field: String,
    pub max_abs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoetherReport {
    pub samples: usize,
    pub entries: Vec<NoetherEntry>,
}

impl NoetherReport {
    pub fn max_for(&self, field: &str) -> Option<f64> {
        self.entries
            .iter()
            .filter(|e| e.field == field)
            .map(|e| e.max_abs)
            .reduce(f64::max)
    }
}

/// Max `|dJ_a(V)|` for each component and each named field.
pub fn noether_report(j: &MomentumMap, fields: &[(&str, &VectorField)], points: &[Vec<f64>]) -> Result<NoetherReport> {
    let mut entries = Vec::new();
    for (a, c) in j.components.iter().enumerate() {
        for (name, v) in fields {
            let vj = v.apply(c);
            let mut m: f64 = 0.0;
            for x in points {
                m = m.max(vj.eval(x)?.abs());
            }
            entries.push(NoetherEntry {
                component: a,
                field: name.to_string(),
                max_abs: m,
            });
        }
    }
    Ok(NoetherReport {
        samples: points.len(),
        entries,
    })
}

/// A closed-form flow `Φ_τ(x)`.
#[derive(Clone)]
pub struct FlowMap {
    chart: ChartRef,
    label: String,
    f: Arc<FlowFn>,
}

impl fmt::Debug for FlowMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FlowMap({})", self.label)
    }
}

impl FlowMap {
    pub fn new(
        chart: ChartRef,
        label: impl Into<String>,
        f: impl Fn(Jet, &[Jet]) -> Result<Vec<Jet>> + Send + Sync + 'static,
    ) -> Self {
        FlowMap {
            chart,
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn eval(&self, tau: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(values(&(self.f)(Jet::constant(tau), &lift(x))?))
    }

    /// Max of `|Φ_0(x) − x|` and `|dΦ_τ/dτ − V(Φ_τ(x))|` over the samples.
    pub fn deviation_from(&self, v: &VectorField, points: &[Vec<f64>], taus: &[f64]) -> Result<f64> {
        let mut dev: f64 = 0.0;
        for x in points {
            dev = dev.max(max_abs_diff(&self.eval(0.0, x)?, x));
            for &tau in taus {
                let t = Jet::constant(tau).seeded(0, 1.0).expect("depth 0");
                let y = (self.f)(t, &lift(x))?;
                let dy: Vec<f64> = y.iter().map(|c| c.tangent(0).value()).collect();
                let vy = raw_vector(v, &values(&y))?;
                dev = dev.max(max_abs_diff(&dy, vy.as_slice()));
            }
        }
        Ok(dev)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModifiedActionReport {
    pub samples: usize,
    pub flow_deviation: f64,
    pub max_eta_contraction: f64,
    pub max_field_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `φ̃_s = Φ^R_{−f(s)} ∘ φ_s` with `f(s) = Σ c_a s_a`.
pub fn modified_action(
    a: &AbelianAction,
    s: &CosymplecticStructure,
    flow: &FlowMap,
    c: &Cocycle,
    points: &[Vec<f64>],
) -> Result<(AbelianAction, ModifiedActionReport)> {
    let reeb = s.reeb_field();
    let taus = [-1.3, -0.2, 0.0, 0.7, 2.1];
    let flow_dev = flow.deviation_from(&reeb, points, &taus)?;
    if flow_dev > MOMENTUM_TOL {
        return Err(Error::FlowMismatch { deviation: flow_dev });
    }
    let act = a.act.clone();
    let phi = flow.f.clone();
    let cs = c.values.clone();
    let modified = AbelianAction::new(a.chart.clone(), format!("{} (Reeb-corrected)", a.label), a.k, move |sv, x| {
        let f: Jet = sv.iter().zip(&cs).map(|(si, ci)| *si * *ci).sum();
        phi(-f, &act(sv, x)?)
    });
    let mut rep = ModifiedActionReport {
        samples: points.len(),
        flow_deviation: flow_dev,
        max_eta_contraction: 0.0,
        max_field_deviation: 0.0,
        tolerance: MOMENTUM_TOL,
        passed: false,
    };
    for x in points {
        let r = reeb.eval(x)?;
        let e = s.eta().eval(x)?;
        for (idx, (old, new)) in a.fundamental.iter().zip(&modified.fundamental).enumerate() {
            let xi = old.eval(x)?;
            let xt = new.eval(x)?;
            rep.max_eta_contraction = rep.max_eta_contraction.max(e.dot(&xt).abs());
            rep.max_field_deviation = rep.max_field_deviation.max((xt - (xi - &r * c.values[idx])).amax());
        }
    }
    rep.passed = rep.max_eta_contraction < MOMENTUM_TOL && rep.max_field_deviation < MOMENTUM_TOL;
    Ok((modified, rep))
}

#[derive(Debug, Clone, Serialize)]
pub struct PresymSymmetryReport {
    pub samples: usize,
    pub group_samples: usize,
    pub max_pullback_omega: f64,
    pub max_reeb_pushforward: f64,
    pub min_transversality: f64,
    pub margin: f64,
    pub passed: bool,
}

/// `φ_s*ω = ω`, `Tφ_s·R = R∘φ_s`, and `R(x) ∉ T_x(G·x)`.
///
/// Sample points bypass the chart's domain guard so that excluded sets can
/// be probed; points where `R` is tangent to the orbit yield
/// [`Error::TangencyDetected`].
pub fn check_presym_symmetry(
    a: &AbelianAction,
    m: &MechanicalPresymplecticStructure,
    points: &[Vec<f64>],
    group: &[Vec<f64>],
) -> Result<PresymSymmetryReport> {
    let mut rep = PresymSymmetryReport {
        samples: points.len(),
        group_samples: group.len(),
        max_pullback_omega: 0.0,
        max_reeb_pushforward: 0.0,
        min_transversality: f64::INFINITY,
        margin: TRANSVERSALITY_MARGIN,
        passed: false,
    };
    let n = a.chart.dim();
    let pulled: Vec<_> = group.iter().map(|g| (a.map(g), pullback_2form(&a.map(g), m.omega()))).collect();
    let mut tangent_points = Vec::new();
    for x in points {
        let xj = lift(x);
        let r = raw_vector(m.reeb(), x)?;
        let xis: Vec<DVector<f64>> = a
            .fundamental
            .iter()
            .map(|f| raw_vector(f, x))
            .collect::<Result<_>>()?;
        let orbit = Subspace::span(n, &xis)?;
        let dist = orbit.relative_distance(&r);
        rep.min_transversality = rep.min_transversality.min(dist);
        if dist < TRANSVERSALITY_MARGIN {
            tangent_points.push(x.clone());
            continue;
        }
        let w = DMatrix::from_row_slice(n, n, &values(&m.omega().eval_jet(&xj)?));
        for (map, pw) in &pulled {
            let pwm = DMatrix::from_row_slice(n, n, &values(&pw.eval_jet(&xj)?));
            rep.max_pullback_omega = rep.max_pullback_omega.max((pwm - &w).amax());
            let y = values(&map.eval_jet(&xj)?);
            let jac = jacobian_unguarded(map, x)?;
            let pushed = jac * &r;
            let ry = raw_vector(m.reeb(), &y)?;
            rep.max_reeb_pushforward = rep.max_reeb_pushforward.max((pushed - ry).amax());
        }
    }
    if !tangent_points.is_empty() {
        return Err(Error::TangencyDetected { points: tangent_points });
    }
    rep.passed = rep.max_pullback_omega < ALGEBRAIC_TOL && rep.max_reeb_pushforward < MOMENTUM_TOL;
    Ok(rep)
}

fn jacobian_unguarded(map: &SmoothMap, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut jac = DMatrix::zeros(map.target().dim(), n);
    for i in 0..n {
        let xs: Vec<Jet> = x
            .iter()
            .enumerate()
            .map(|(j, &v)| Jet::constant(v).seeded(0, if i == j { 1.0 } else { 0.0 }).expect("depth 0"))
            .collect();
        let y = map.eval_jet(&xs)?;
        for (r, c) in y.iter().enumerate() {
            jac[(r, i)] = c.tangent(0).value();
        }
    }
    Ok(jac)
}
