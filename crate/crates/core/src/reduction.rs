//! Level sets of a momentum map, the pointwise perp/kernel diagnostics on
//! them, and reduction of a mechanical presymplectic structure through an
//! explicit slice.

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{
    d_two_form_at, differential, exterior_derivative, jacobian_jet, pullback_1form, pullback_2form, ChartRef,
    CoordinateChart, ExcludedSet, OneFormField, SampleBox, ScalarField, SmoothMap, TwoFormField, VectorField,
};
use crate::integrate::{rk4_integrate, RunConfig};
use crate::jet::{lift, values, Jet};
use crate::linalg::{kernel, least_squares_jet, nullspace, perp, AntisymmetricForm, Subspace, TangentVector};
use crate::structure::{MechanicalPresymplecticStructure, MechanicalReport};
use crate::symmetry::{AbelianAction, MomentumMap};

/// Constraint residual at which level-set projection stops.
pub const LEVEL_TOL: f64 = 1e-11;
pub const NEWTON_MAX_ITER: usize = 50;
/// Smallest singular value of `dJ` accepted as a regular point.
pub const REGULARITY_MIN: f64 = 1e-4;
/// Projector distance for the pointwise subspace identities.
pub const PERP_TOL: f64 = 1e-7;
/// Condition estimate above which the orbit/slice split is rejected.
pub const SPLIT_COND_MAX: f64 = 1e10;
/// Failed seeds after which a level set is declared empty.
pub const EMPTY_SEEDS: usize = 100;
/// Tolerance for identities on the slice and the reduced structure.
pub const SLICE_TOL: f64 = 1e-8;

/// `J^{-1}(μ)` inside a mechanical presymplectic manifold.
#[derive(Debug, Clone)]
pub struct LevelSet {
    structure: MechanicalPresymplecticStructure,
    j: MomentumMap,
    dj: Vec<OneFormField>,
    mu: Vec<f64>,
}

impl LevelSet {
    pub fn new(structure: MechanicalPresymplecticStructure, j: MomentumMap, mu: Vec<f64>) -> Result<Self> {
        if mu.len() != j.k() {
            return Err(Error::DimensionMismatch {
                expected: j.k(),
                found: mu.len(),
            });
        }
        let dj = j.components.iter().map(differential).collect();
        Ok(LevelSet { structure, j, dj, mu })
    }

    pub fn structure(&self) -> &MechanicalPresymplecticStructure {
        &self.structure
    }

    pub fn momentum(&self) -> &MomentumMap {
        &self.j
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn chart(&self) -> &ChartRef {
        self.structure.chart()
    }

    /// `J(x) − μ`.
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.j.eval(x)?.iter().zip(&self.mu).map(|(j, m)| j - m).collect())
    }

    pub fn max_residual(&self, x: &[f64]) -> Result<f64> {
        Ok(self.residual(x)?.iter().fold(0.0, |m, r| m.max(r.abs())))
    }

    /// Rows `dJ_a(x)`.
    pub fn constraint_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let rows: Vec<DVector<f64>> = self.dj.iter().map(|d| d.eval(x)).collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(rows.len(), x.len(), |a, i| rows[a][i]))
    }

    fn regular_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.constraint_jacobian(x)?;
        let sv = d.clone().svd(false, false).singular_values;
        let (lo, hi) = (sv.min(), sv.max());
        if !(lo >= REGULARITY_MIN) {
            return Err(Error::RankDeficient {
                condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
            });
        }
        Ok(d)
    }

    /// Minimum-norm Newton projection onto the level set.
    pub fn project(&self, x0: &[f64]) -> Result<Vec<f64>> {
        let mut x = x0.to_vec();
        let mut r = self.residual(&x)?;
        for _ in 0..NEWTON_MAX_ITER {
            if r.iter().all(|v| v.abs() < LEVEL_TOL) {
                self.regular_jacobian(&x)?;
                return Ok(x);
            }
            let d = self.regular_jacobian(&x)?;
            let g = &d * d.transpose();
            let rv = DVector::from_column_slice(&r);
            let lam = g.lu().solve(&rv).ok_or(Error::RankDeficient {
                condition: f64::INFINITY,
            })?;
            let step = d.transpose() * lam;
            for (xi, si) in x.iter_mut().zip(step.iter()) {
                *xi -= si;
            }
            r = self.residual(&x)?;
        }
        if r.iter().all(|v| v.abs() < LEVEL_TOL) {
            self.regular_jacobian(&x)?;
            return Ok(x);
        }
        Err(Error::NoConvergence {
            iterations: NEWTON_MAX_ITER,
            residual: r.iter().fold(0.0, |m, v| m.max(v.abs())),
        })
    }

    /// `T_x J^{-1}(μ) = ker dJ(x)`.
    pub fn tangent_space(&self, x: &[f64]) -> Result<Subspace> {
        nullspace(&self.constraint_jacobian(x)?)
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome")]
pub enum LevelSample {
    Points {
        points: Vec<Vec<f64>>,
        seeds_tried: usize,
        failures: usize,
        seed: u64,
    },
    EmptyLevelSet {
        seeds_tried: usize,
        reason: String,
    },
}

impl LevelSample {
    pub fn points(&self) -> Option<&[Vec<f64>]> {
        match self {
            LevelSample::Points { points, .. } => Some(points),
            LevelSample::EmptyLevelSet { .. } => None,
        }
    }

    pub fn is_empty_level(&self) -> bool {
        matches!(self, LevelSample::EmptyLevelSet { .. })
    }
}

/// Draws `n` points of the level set by projecting box seeds.
///
/// `empty_hook`, when given, is an analytic emptiness test on `μ`. Without
/// it, emptiness is declared after [`EMPTY_SEEDS`] consecutive failed seeds
/// with no success.
pub fn sample_level(
    level: &LevelSet,
    seeds: &SampleBox,
    n: usize,
    seed: u64,
    empty_hook: Option<&(dyn Fn(&[f64]) -> bool + Sync)>,
) -> Result<LevelSample> {
    if let Some(hook) = empty_hook {
        if hook(&level.mu) {
            return Ok(LevelSample::EmptyLevelSet {
                seeds_tried: 0,
                reason: format!("analytic bound: no point has J = {:?}", level.mu),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chart = level.chart();
    let mut points = Vec::with_capacity(n);
    let mut tried = 0;
    let mut failures = 0;
    let cap = EMPTY_SEEDS + 50 * n;
    let mut last_err = None;
    while points.len() < n {
        if tried >= cap || (points.is_empty() && failures >= EMPTY_SEEDS) {
            if points.is_empty() {
                return Ok(LevelSample::EmptyLevelSet {
                    seeds_tried: tried,
                    reason: format!(
                        "Newton projection failed from all {tried} seeds (last error: {})",
                        last_err.map_or_else(|| "none".to_string(), |e: Error| e.to_string())
                    ),
                });
            }
            return Err(Error::NoConvergence {
                iterations: tried,
                residual: f64::NAN,
            });
        }
        tried += 1;
        let x0 = seeds.draw(&mut rng);
        if !chart.contains(&x0) {
            failures += 1;
            continue;
        }
        match level.project(&x0) {
            Ok(x) if chart.contains(&x) => points.push(x),
            Ok(_) => failures += 1,
            Err(e) => {
                failures += 1;
                last_err = Some(e);
            }
        }
    }
    Ok(LevelSample::Points {
        points,
        seeds_tried: tried,
        failures,
        seed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TangentPerpReport {
    pub constraint_residual: f64,
    pub dim_tangent: usize,
    pub dim_perp: usize,
    pub perp_distance: f64,
    pub kernel_dim: usize,
    pub kernel_distance: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `(T_x level)^⊥ = span{ξ_M(x)} ⊕ ⟨R(x)⟩` and `ker(ι*ω)(x) = span{ξ_M(x), R(x)}`.
pub fn tangent_perp_report(level: &LevelSet, a: &AbelianAction, x: &[f64]) -> Result<TangentPerpReport> {
    let n = x.len();
    let w = level.structure.omega().eval(x)?;
    let r = level.structure.reeb().eval(x)?;
    let mut gens: Vec<TangentVector> = a
        .fundamental_fields()
        .iter()
        .map(|f| f.eval(x))
        .collect::<Result<_>>()?;
    gens.push(r);
    let expected = Subspace::span(n, &gens)?;
    let tangent = level.tangent_space(x)?;
    let perp_t = perp(&w, &tangent)?;
    let perp_distance = perp_t.distance(&expected);
    // ι*ω in the basis B of T_x level, kernel mapped back to ambient vectors
    let restricted = AntisymmetricForm::new(w.restricted(&tangent))?;
    let ker_local = kernel(&restricted)?;
    let ker = Subspace::column_space(&(tangent.basis() * ker_local.basis()))?;
    let kernel_distance = ker.distance(&expected);
    let dims_ok = perp_t.dim() == expected.dim() && ker.dim() == expected.dim();
    Ok(TangentPerpReport {
        constraint_residual: level.max_residual(x)?,
        dim_tangent: tangent.dim(),
        dim_perp: perp_t.dim(),
        perp_distance,
        kernel_dim: ker.dim(),
        kernel_distance,
        tolerance: PERP_TOL,
        passed: dims_ok && perp_distance < PERP_TOL && kernel_distance < PERP_TOL,
    })
}

/// A chart on a slice `𝒩` of the level set meeting every orbit once.
///
/// `embed` maps slice coordinates into `M`, `retract` recovers them from a
/// point of `embed(𝒩)`, and the section functions vanish exactly on the
/// slice. Periodic slice coordinates are compared modulo their period.
#[derive(Debug, Clone)]
pub struct SliceChart {
    chart: ChartRef,
    embed: SmoothMap,
    retract: SmoothMap,
    section: Vec<ScalarField>,
    periods: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SliceReport {
    pub samples: usize,
    pub max_constraint: f64,
    pub max_section: f64,
    pub max_roundtrip: f64,
    pub max_equivariance: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl SliceChart {
    pub fn new(embed: SmoothMap, retract: SmoothMap, section: Vec<ScalarField>, periods: Vec<Option<f64>>) -> Result<Self> {
        let chart = embed.source().clone();
        if retract.target().dim() != chart.dim() || retract.source().dim() != embed.target().dim() {
            return Err(Error::DimensionMismatch {
                expected: chart.dim(),
                found: retract.target().dim(),
            });
        }
        if periods.len() != chart.dim() {
            return Err(Error::DimensionMismatch {
                expected: chart.dim(),
                found: periods.len(),
            });
        }
        Ok(SliceChart {
            chart,
            embed,
            retract,
            section,
            periods,
        })
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn embed(&self) -> &SmoothMap {
        &self.embed
    }

    pub fn retract(&self) -> &SmoothMap {
        &self.retract
    }

    pub fn section(&self) -> &[ScalarField] {
        &self.section
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Distance between slice points with periodic coordinates wrapped.
    pub fn wrapped_distance(&self, y1: &[f64], y2: &[f64]) -> f64 {
        y1.iter()
            .zip(y2)
            .zip(&self.periods)
            .map(|((a, b), p)| match p {
                Some(p) => {
                    let d = (a - b).rem_euclid(*p);
                    d.min(p - d)
                }
                None => (a - b).abs(),
            })
            .fold(0.0, f64::max)
    }

    /// `Ψ(s, y) = φ_s(embed(y))` on the chart `(s_1..s_k, y)`.
    pub fn quotient_map(&self, a: &AbelianAction) -> SmoothMap {
        let k = a.k();
        let mut names: Vec<String> = (1..=k).map(|i| format!("s{i}")).collect();
        names.extend(self.chart.names().iter().cloned());
        let mut qc = CoordinateChart::new(names);
        for set in self.chart.excluded() {
            let set = set.clone();
            qc = qc.with_excluded(ExcludedSet::new(set.name.clone(), move |x| set.distance(&x[k..])));
        }
        let embed = self.embed.clone();
        let act = a.clone();
        SmoothMap::try_new(qc.into_ref(), a.chart().clone(), "Ψ", move |sy| {
            act.act_jet(&sy[..k], &embed.eval_jet(&sy[k..])?)
        })
    }

    /// Group element `s` with `σ(φ_{−s}(x)) = 0`, by Newton iteration.
    pub fn group_parameter(&self, a: &AbelianAction, x: &[f64]) -> Result<Vec<f64>> {
        let k = a.k();
        if self.section.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: self.section.len(),
            });
        }
        let xj = lift(x);
        let g = |s: &[Jet]| -> Result<Vec<Jet>> {
            let neg: Vec<Jet> = s.iter().map(|v| -*v).collect();
            let z = a.act_jet(&neg, &xj)?;
            self.section.iter().map(|f| f.eval_jet(&z)).collect()
        };
        let mut s = vec![0.0; k];
        for _ in 0..NEWTON_MAX_ITER {
            let gv = values(&g(&lift(&s))?);
            let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if gv.iter().all(|v| v.abs() < 1e-14 * scale) {
                return Ok(s);
            }
            let jac = jacobian_jet(&g, &lift(&s))?;
            let m = DMatrix::from_fn(k, k, |r, c| jac[c][r].value());
            let delta = m.lu().solve(&DVector::from_column_slice(&gv)).ok_or(Error::RankDeficient {
                condition: f64::INFINITY,
            })?;
            for (si, di) in s.iter_mut().zip(delta.iter()) {
                *si -= di;
            }
        }
        let gv = values(&g(&lift(&s))?);
        let res = gv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if res < 1e-10 {
            return Ok(s);
        }
        Err(Error::NoConvergence {
            iterations: NEWTON_MAX_ITER,
            residual: res,
        })
    }

    /// `(s, y)` with `x = Ψ(s, y)`.
    pub fn to_slice(&self, a: &AbelianAction, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let s = self.group_parameter(a, x)?;
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let z = values(&a.act_jet(&lift(&neg), &lift(x))?);
        let y = values(&self.retract.eval_jet(&lift(&z))?);
        self.chart.check(&y)?;
        let back = self.embed.eval(&y)?;
        let scale = 1.0 + z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gap = back.iter().zip(&z).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        if gap > SLICE_TOL * scale {
            return Err(Error::PreconditionViolation(format!(
                "point lies outside the slice chart (round-trip gap {gap:.3e})"
            )));
        }
        Ok((s, y))
    }

    /// Embedding lands on the level set and the section; retract inverts
    /// embed; `Ψ(s + s′, y) = φ_s(Ψ(s′, y))`.
    pub fn validate(&self, level: &LevelSet, a: &AbelianAction, points: &[Vec<f64>], group: &[Vec<f64>]) -> Result<SliceReport> {
        let psi = self.quotient_map(a);
        let mut rep = SliceReport {
            samples: points.len(),
            max_constraint: 0.0,
            max_section: 0.0,
            max_roundtrip: 0.0,
            max_equivariance: 0.0,
            tolerance: SLICE_TOL,
            passed: false,
        };
        for (i, y) in points.iter().enumerate() {
            let x = self.embed.eval(y)?;
            rep.max_constraint = rep.max_constraint.max(level.max_residual(&x)?);
            for f in &self.section {
                rep.max_section = rep.max_section.max(f.eval(&x)?.abs());
            }
            let back = values(&self.retract.eval_jet(&lift(&x))?);
            rep.max_roundtrip = rep.max_roundtrip.max(self.wrapped_distance(&back, y));
            if !group.is_empty() {
                let s = &group[i % group.len()];
                let s2 = &group[(i + 1) % group.len()];
                let mut arg: Vec<f64> = s.iter().zip(s2).map(|(u, v)| u + v).collect();
                arg.extend_from_slice(y);
                let lhs = psi.eval(&arg)?;
                let mut arg2 = s2.clone();
                arg2.extend_from_slice(y);
                let rhs = a.act(s, &psi.eval(&arg2)?)?;
                let dev = lhs.iter().zip(&rhs).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
                rep.max_equivariance = rep.max_equivariance.max(dev);
            }
        }
        rep.passed = rep.max_constraint < SLICE_TOL
            && rep.max_section < SLICE_TOL
            && rep.max_roundtrip < SLICE_TOL
            && rep.max_equivariance < SLICE_TOL;
        Ok(rep)
    }
}

/// `(ω_μ, R_μ)` on the slice chart.
#[derive(Debug, Clone)]
pub struct ReducedStructure {
    pub slice: SliceChart,
    pub omega_mu: TwoFormField,
    pub reeb_mu: VectorField,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReducedReport {
    pub mechanical: MechanicalReport,
    pub max_kernel_residual: f64,
    pub ranks: Vec<usize>,
    pub passed: bool,
}

impl ReducedStructure {
    pub fn as_mechanical(&self) -> MechanicalPresymplecticStructure {
        MechanicalPresymplecticStructure::new(self.omega_mu.clone(), self.reeb_mu.clone())
    }

    /// `dω_μ = 0`, `rank ω_μ = dim − 1` and `ω_μ·R_μ = 0`.
    pub fn validate(&self, points: &[Vec<f64>]) -> Result<ReducedReport> {
        let mechanical = self.as_mechanical().validate(points)?;
        let mut max_res: f64 = 0.0;
        let mut ranks = Vec::new();
        for y in points {
            let w = self.omega_mu.eval(y)?;
            let r = self.reeb_mu.eval(y)?;
            max_res = max_res.max(w.contract(&r).amax());
            let rank = w.rank()?;
            if !ranks.contains(&rank) {
                ranks.push(rank);
            }
        }
        let dim = self.slice.dim();
        Ok(ReducedReport {
            passed: mechanical.passed && max_res < SLICE_TOL && ranks.iter().all(|&r| r + 1 == dim),
            mechanical,
            max_kernel_residual: max_res,
            ranks,
        })
    }
}

/// `ω_μ = embed*ω` and `R_μ` = slice component of `R` in the split
/// `T(level) = T(orbit) ⊕ T(embed(𝒩))`.
pub fn reduce(level: &LevelSet, a: &AbelianAction, slice: &SliceChart) -> Result<ReducedStructure> {
    if slice.embed.target().dim() != level.chart().dim() {
        return Err(Error::DimensionMismatch {
            expected: level.chart().dim(),
            found: slice.embed.target().dim(),
        });
    }
    let omega_mu = pullback_2form(&slice.embed, level.structure.omega()).with_label("ω_μ");
    let embed = slice.embed.clone();
    let fundamental = a.fundamental_fields().to_vec();
    let reeb = level.structure.reeb().clone();
    let k = a.k();
    let reeb_mu = VectorField::try_new(slice.chart.clone(), "R_μ", move |y| {
        let x = embed.eval_jet(y)?;
        let jac = jacobian_jet(&|v: &[Jet]| embed.eval_jet(v), y)?;
        let xis: Vec<Vec<Jet>> = fundamental.iter().map(|f| f.eval_jet(&x)).collect::<Result<_>>()?;
        let r = reeb.eval_jet(&x)?;
        let n = x.len();
        let rows: Vec<Vec<Jet>> = (0..n)
            .map(|i| {
                xis.iter()
                    .map(|xi| xi[i])
                    .chain(jac.iter().map(|col| col[i]))
                    .collect()
            })
            .collect();
        let (sol, residual, cond) =
            least_squares_jet(&rows, &r).ok_or(Error::SliceNotTransverse { condition: f64::INFINITY })?;
        if !cond.is_finite() || cond > SPLIT_COND_MAX {
            return Err(Error::SliceNotTransverse { condition: cond });
        }
        let rnorm = values(&r).iter().map(|v| v * v).sum::<f64>().sqrt();
        if residual > SLICE_TOL * rnorm.max(1.0) {
            return Err(Error::validation(
                "reduced reeb",
                format!("Reeb field is not tangent to the level set (residual {residual:.3e})"),
            ));
        }
        Ok(sol[k..].to_vec())
    });
    Ok(ReducedStructure {
        slice: slice.clone(),
        omega_mu,
        reeb_mu,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BasicFormReport {
    pub samples: usize,
    pub max_contraction: f64,
    pub max_contraction_d: f64,
    pub max_eta_contraction: Option<f64>,
    pub max_eta_contraction_d: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// On the chart `(s, y)` of `Ψ`: `i_{∂_s} Ψ*ω = 0` and `i_{∂_s} dΨ*ω = 0`,
/// and the same for `η` when given.
pub fn basic_form_report(
    slice: &SliceChart,
    a: &AbelianAction,
    omega: &TwoFormField,
    eta: Option<&OneFormField>,
    points: &[Vec<f64>],
) -> Result<BasicFormReport> {
    let psi = slice.quotient_map(a);
    let k = a.k();
    let pw = pullback_2form(&psi, omega);
    let pe = eta.map(|e| pullback_1form(&psi, e));
    let de = pe.as_ref().map(exterior_derivative);
    let m = psi.source().dim();
    let mut rep = BasicFormReport {
        samples: points.len(),
        max_contraction: 0.0,
        max_contraction_d: 0.0,
        max_eta_contraction: pe.as_ref().map(|_| 0.0),
        max_eta_contraction_d: pe.as_ref().map(|_| 0.0),
        tolerance: SLICE_TOL,
        passed: false,
    };
    for p in points {
        let w = pw.eval(p)?;
        let dw = d_two_form_at(&pw, p)?;
        for sa in 0..k {
            rep.max_contraction = rep.max_contraction.max(w.matrix().row(sa).amax());
            for j in 0..m {
                for l in 0..m {
                    rep.max_contraction_d = rep.max_contraction_d.max(dw[(sa * m + j) * m + l].abs());
                }
            }
            if let (Some(pe), Some(de)) = (&pe, &de) {
                let e = pe.eval(p)?;
                let d = de.eval(p)?;
                rep.max_eta_contraction = rep.max_eta_contraction.map(|v| v.max(e[sa].abs()));
                rep.max_eta_contraction_d = rep.max_eta_contraction_d.map(|v| v.max(d.matrix().row(sa).amax()));
            }
        }
    }
    rep.passed = rep.max_contraction < SLICE_TOL
        && rep.max_contraction_d < SLICE_TOL
        && rep.max_eta_contraction.is_none_or(|v| v < SLICE_TOL)
        && rep.max_eta_contraction_d.is_none_or(|v| v < SLICE_TOL);
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub duration: f64,
    pub h: f64,
    pub steps: usize,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub max_deviation: f64,
    pub max_constraint_drift: f64,
}

/// Integrates `R` on `M` and `R_μ` on the slice, maps the ambient states to
/// slice coordinates through the quotient, and reports the largest gap.
pub fn compare_dynamics(
    level: &LevelSet,
    a: &AbelianAction,
    reduced: &ReducedStructure,
    x0: &[f64],
    cfg: &RunConfig,
) -> Result<CompareReport> {
    let r0 = level.max_residual(x0)?;
    if r0 > SLICE_TOL {
        return Err(Error::PreconditionViolation(format!(
            "initial point is off the level set (|J − μ| = {r0:.3e})"
        )));
    }
    let slice = &reduced.slice;
    let (_, y0) = slice.to_slice(a, x0)?;
    let invariants: Vec<(String, ScalarField)> = level
        .j
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| (format!("J{}", i + 1), c.clone()))
        .collect();
    let full = rk4_integrate(level.structure.reeb(), x0, cfg, &invariants)?;
    let red = rk4_integrate(&reduced.reeb_mu, &y0, cfg, &[])?;
    let mut max_dev: f64 = 0.0;
    for (x, y) in full.states.iter().zip(&red.states) {
        let (_, yx) = slice.to_slice(a, x)?;
        max_dev = max_dev.max(slice.wrapped_distance(&yx, y));
    }
    let max_drift = full
        .invariant_log
        .iter()
        .flat_map(|row| row.iter().zip(&level.mu).map(|(j, m)| (j - m).abs()))
        .fold(0.0, f64::max);
    Ok(CompareReport {
        duration: cfg.duration,
        h: cfg.h,
        steps: full.states.len() - 1,
        x0: x0.to_vec(),
        y0,
        max_deviation: max_dev,
        max_constraint_drift: max_drift,
    })
}
