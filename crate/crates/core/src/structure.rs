//! Cosymplectic and mechanical presymplectic structures, the Reeb and
//! Hamiltonian solves, the `ω + dH∧η` modification and the two Hamiltonian
//! formalisms on a restricted phase space `(q^i, p_i, t)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{
    closedness_check, closedness_check_1form, differential, exterior_derivative, lie_derivative_1form,
    lie_derivative_2form, wedge, ChartRef, CoordinateChart, OneFormField, ScalarField, TwoFormField, VectorField,
    CLOSED_TOL,
};
use crate::integrate::Trajectory;
use crate::jet::Jet;
use crate::linalg::{kernel, least_squares_jet, solve_jet, Subspace, TangentVector};

/// Condition estimate above which the ♭ map is treated as singular.
pub const FLAT_COND_MAX: f64 = 1e12;
/// Largest acceptable residual of the stacked Reeb system.
pub const REEB_RESIDUAL_TOL: f64 = 1e-8;
/// Smallest acceptable `|det ♭|` in structure validation.
pub const VOLUME_MIN: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct CosymplecticStructure {
    chart: ChartRef,
    omega: TwoFormField,
    eta: OneFormField,
}

#[derive(Debug, Clone, Serialize)]
pub struct CosymplecticReport {
    pub samples: usize,
    pub max_d_omega: f64,
    pub max_d_eta: f64,
    pub min_abs_det_flat: f64,
    pub max_flat_condition: f64,
    pub closed_tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReebInvarianceReport {
    pub samples: usize,
    pub max_reeb_omega: f64,
    pub max_reeb_eta: f64,
    pub max_lie_omega: f64,
    pub max_lie_eta: f64,
    pub passed: bool,
}

impl CosymplecticStructure {
    pub fn new(omega: TwoFormField, eta: OneFormField) -> Result<Self> {
        let chart = omega.chart().clone();
        if eta.chart().dim() != chart.dim() {
            return Err(Error::DimensionMismatch {
                expected: chart.dim(),
                found: eta.chart().dim(),
            });
        }
        Ok(CosymplecticStructure { chart, omega, eta })
    }

    /// `(Σ dq^i∧dp_i, dt)` on a chart ordered `(q, p, t)`.
    pub fn darboux(chart: ChartRef) -> Result<Self> {
        let dim = chart.dim();
        if dim.is_multiple_of(2) {
            return Err(Error::PreconditionViolation(format!("Darboux chart needs odd dimension, got {dim}")));
        }
        let omega = TwoFormField::darboux(chart.clone(), dim / 2);
        let eta = OneFormField::coordinate(chart, dim - 1);
        CosymplecticStructure::new(omega, eta)
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn omega(&self) -> &TwoFormField {
        &self.omega
    }

    pub fn eta(&self) -> &OneFormField {
        &self.eta
    }

    /// Matrix `F = Ω + ηηᵀ` whose row `i` is `♭(∂_i) = i_{∂_i}ω + η_i η`.
    ///
    /// For a vector `X`, `♭(X) = Fᵀ X`.
    pub fn flat_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let w = self.omega.eval(x)?;
        let e = self.eta.eval(x)?;
        let f = w.matrix() + &e * e.transpose();
        let sv = f.clone().svd(false, false).singular_values;
        let cond = sv.max() / sv.min();
        if !cond.is_finite() || cond > FLAT_COND_MAX {
            return Err(Error::SingularFlat { condition: cond });
        }
        Ok(f)
    }

    pub fn flat(&self, x: &[f64], v: &TangentVector) -> Result<TangentVector> {
        Ok(self.flat_matrix(x)?.transpose() * v)
    }

    /// `♭⁻¹(α)` at a point.
    pub fn sharp(&self, x: &[f64], alpha: &TangentVector) -> Result<TangentVector> {
        let f = self.flat_matrix(x)?;
        f.transpose()
            .lu()
            .solve(alpha)
            .ok_or(Error::SingularFlat { condition: f64::INFINITY })
    }

    /// The Reeb field: `i_R ω = 0`, `η(R) = 1`, from the stacked least-squares system.
    pub fn reeb_field(&self) -> VectorField {
        let (omega, eta) = (self.omega.clone(), self.eta.clone());
        let n = self.chart.dim();
        VectorField::try_new(self.chart.clone(), format!("R({}, {})", omega.label(), eta.label()), move |x| {
            let m = omega.eval_jet(x)?;
            let e = eta.eval_jet(x)?;
            let mut a: Vec<Vec<Jet>> = (0..n).map(|j| (0..n).map(|i| m[i * n + j]).collect()).collect();
            a.push(e);
            let mut b = vec![Jet::ZERO; n];
            b.push(Jet::ONE);
            let (r, residual, cond) = least_squares_jet(&a, &b).ok_or(Error::SingularFlat {
                condition: f64::INFINITY,
            })?;
            if !cond.is_finite() || cond > FLAT_COND_MAX {
                return Err(Error::SingularFlat { condition: cond });
            }
            if residual > REEB_RESIDUAL_TOL {
                return Err(Error::validation(
                    "reeb",
                    format!("no vector satisfies i_R ω = 0, η(R) = 1 (residual {residual:.3e})"),
                ));
            }
            Ok(r)
        })
    }

    /// `X_H` with `i_X ω = dH − R(H)η` and `η(X) = 0`.
    pub fn hamiltonian_field(&self, h: &ScalarField) -> VectorField {
        let (omega, eta) = (self.omega.clone(), self.eta.clone());
        let reeb = self.reeb_field();
        let dh = differential(h);
        let n = self.chart.dim();
        VectorField::try_new(self.chart.clone(), format!("X_({})", h.label()), move |x| {
            let m = omega.eval_jet(x)?;
            let e = eta.eval_jet(x)?;
            let r = reeb.eval_jet(x)?;
            let d = dh.eval_jet(x)?;
            let rh: Jet = r.iter().zip(&d).map(|(a, b)| *a * *b).sum();
            // Fᵀ X = dH − R(H) η
            let a: Vec<Vec<Jet>> = (0..n)
                .map(|j| (0..n).map(|i| m[i * n + j] + e[i] * e[j]).collect())
                .collect();
            let rhs: Vec<Jet> = (0..n).map(|j| d[j] - rh * e[j]).collect();
            let (sol, cond) = solve_jet(a, rhs).ok_or(Error::SingularFlat {
                condition: f64::INFINITY,
            })?;
            if cond > FLAT_COND_MAX {
                return Err(Error::SingularFlat { condition: cond });
            }
            Ok(sol)
        })
    }

    /// `E_H = X_H + R`.
    pub fn evolution_field(&self, h: &ScalarField) -> VectorField {
        self.hamiltonian_field(h)
            .add(&self.reeb_field())
            .with_label(format!("E_({})", h.label()))
    }

    /// `(ω + dH∧η, η)`.
    pub fn modify(&self, h: &ScalarField) -> CosymplecticStructure {
        let omega = self
            .omega
            .add(&wedge(&differential(h), &self.eta))
            .with_label(format!("{} + d({})∧{}", self.omega.label(), h.label(), self.eta.label()));
        CosymplecticStructure {
            chart: self.chart.clone(),
            omega,
            eta: self.eta.clone(),
        }
    }

    /// `(ω, R)`.
    pub fn as_mechanical(&self) -> MechanicalPresymplecticStructure {
        MechanicalPresymplecticStructure::new(self.omega.clone(), self.reeb_field())
    }

    /// Closedness of `ω` and `η`, and the ♭ determinant as a volume proxy.
    pub fn validate(&self, points: &[Vec<f64>]) -> Result<CosymplecticReport> {
        let dw = closedness_check(&self.omega, points, CLOSED_TOL)?;
        let de = closedness_check_1form(&self.eta, points, CLOSED_TOL)?;
        let mut min_det = f64::INFINITY;
        let mut max_cond: f64 = 0.0;
        for p in points {
            let w = self.omega.eval(p)?;
            let e = self.eta.eval(p)?;
            let f = w.matrix() + &e * e.transpose();
            min_det = min_det.min(f.determinant().abs());
            let sv = f.svd(false, false).singular_values;
            max_cond = max_cond.max(sv.max() / sv.min());
        }
        let max_cond = if max_cond.is_nan() { f64::INFINITY } else { max_cond };
        Ok(CosymplecticReport {
            samples: points.len(),
            max_d_omega: dw.max_component,
            max_d_eta: de.max_component,
            min_abs_det_flat: min_det,
            max_flat_condition: max_cond,
            closed_tolerance: CLOSED_TOL,
            passed: dw.passed && de.passed && min_det > VOLUME_MIN && max_cond <= FLAT_COND_MAX,
        })
    }

    /// `i_R ω`, `η(R) − 1`, and the Cartan-formula Lie derivatives `L_R ω`, `L_R η`.
    pub fn reeb_invariance(&self, points: &[Vec<f64>], tol: f64) -> Result<ReebInvarianceReport> {
        let reeb = self.reeb_field();
        let lw = lie_derivative_2form(&reeb, &self.omega);
        let le = lie_derivative_1form(&reeb, &self.eta);
        let mut rep = ReebInvarianceReport {
            samples: points.len(),
            max_reeb_omega: 0.0,
            max_reeb_eta: 0.0,
            max_lie_omega: 0.0,
            max_lie_eta: 0.0,
            passed: false,
        };
        for p in points {
            let r = reeb.eval(p)?;
            let w = self.omega.eval(p)?;
            let e = self.eta.eval(p)?;
            rep.max_reeb_omega = rep.max_reeb_omega.max(w.contract(&r).amax());
            rep.max_reeb_eta = rep.max_reeb_eta.max((e.dot(&r) - 1.0).abs());
            rep.max_lie_omega = rep.max_lie_omega.max(lw.eval(p)?.matrix().amax());
            rep.max_lie_eta = rep.max_lie_eta.max(le.eval(p)?.amax());
        }
        rep.passed = rep.max_reeb_omega < tol && rep.max_reeb_eta < tol && rep.max_lie_omega < tol && rep.max_lie_eta < tol;
        Ok(rep)
    }
}

/// A closed corank-one 2-form together with a generator of its kernel.
#[derive(Debug, Clone)]
pub struct MechanicalPresymplecticStructure {
    chart: ChartRef,
    omega: TwoFormField,
    reeb: VectorField,
}

#[derive(Debug, Clone, Serialize)]
pub struct MechanicalReport {
    pub samples: usize,
    pub max_d_omega: f64,
    pub max_kernel_distance: f64,
    pub min_reeb_norm: f64,
    pub kernel_dims: Vec<usize>,
    pub passed: bool,
}

impl MechanicalPresymplecticStructure {
    pub fn new(omega: TwoFormField, reeb: VectorField) -> Self {
        MechanicalPresymplecticStructure {
            chart: omega.chart().clone(),
            omega,
            reeb,
        }
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn omega(&self) -> &TwoFormField {
        &self.omega
    }

    pub fn reeb(&self) -> &VectorField {
        &self.reeb
    }

    /// Closedness, and `ker ω(x) = span{R(x)}` with `R(x) ≠ 0` at every point.
    pub fn validate(&self, points: &[Vec<f64>]) -> Result<MechanicalReport> {
        let dw = closedness_check(&self.omega, points, CLOSED_TOL)?;
        let mut max_dist: f64 = 0.0;
        let mut min_norm = f64::INFINITY;
        let mut dims = Vec::new();
        let mut kernel_ok = true;
        for p in points {
            let w = self.omega.eval(p)?;
            let r = self.reeb.eval(p)?;
            min_norm = min_norm.min(r.norm());
            let ker = kernel(&w)?;
            if !dims.contains(&ker.dim()) {
                dims.push(ker.dim());
            }
            let line = Subspace::span(self.chart.dim(), std::slice::from_ref(&r))?;
            if ker.dim() != 1 || line.dim() != 1 {
                kernel_ok = false;
                continue;
            }
            max_dist = max_dist.max(ker.distance(&line));
        }
        Ok(MechanicalReport {
            samples: points.len(),
            max_d_omega: dw.max_component,
            max_kernel_distance: max_dist,
            min_reeb_norm: min_norm,
            kernel_dims: dims,
            passed: dw.passed && kernel_ok && max_dist < crate::linalg::SUBSPACE_TOL && min_norm > 0.0,
        })
    }
}

/// A Hamiltonian section `h(q, p, t) = (q, p, t, −H_h)` on `V*Π` with
/// coordinates `(q^1..q^n, p_1..p_n, t)`, and optionally an Ehresmann
/// connection `Y = Y^i ∂_{q^i} + ∂_t`.
#[derive(Debug, Clone)]
pub struct HamiltonianSectionData {
    pub n: usize,
    pub h: ScalarField,
    pub y: Option<Vec<ScalarField>>,
}

impl HamiltonianSectionData {
    pub fn new(h: ScalarField, y: Option<Vec<ScalarField>>) -> Result<Self> {
        let dim = h.chart().dim();
        if dim.is_multiple_of(2) {
            return Err(Error::PreconditionViolation(format!(
                "restricted phase space needs odd dimension, got {dim}"
            )));
        }
        let n = dim / 2;
        if let Some(y) = &y {
            if y.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: y.len(),
                });
            }
        }
        Ok(HamiltonianSectionData { n, h, y })
    }

    pub fn chart(&self) -> &ChartRef {
        self.h.chart()
    }

    /// Chart `(q1..qn, p1..pn, t)`.
    pub fn standard_chart(n: usize) -> ChartRef {
        CoordinateChart::darboux(n).into_ref()
    }

    fn t_index(&self) -> usize {
        2 * self.n
    }
}

/// `(ω_h, dt)` with `ω_h = dq^i∧dp_i + ∂H_h/∂q^i dq^i∧dt + ∂H_h/∂p_i dp_i∧dt`.
pub fn build_reeb_formalism(d: &HamiltonianSectionData) -> CosymplecticStructure {
    let chart = d.chart().clone();
    let n = d.n;
    let t = d.t_index();
    let dh = differential(&d.h);
    let dim = chart.dim();
    let omega = TwoFormField::try_new(chart.clone(), format!("ω_h[{}]", d.h.label()), move |x| {
        let g = dh.eval_jet(x)?;
        let mut m = vec![Jet::ZERO; dim * dim];
        for i in 0..n {
            m[i * dim + n + i] = Jet::ONE;
            m[(n + i) * dim + i] = -Jet::ONE;
            // ∂H/∂q^i dq^i∧dt and ∂H/∂p_i dp_i∧dt
            for k in [i, n + i] {
                m[k * dim + t] = g[k];
                m[t * dim + k] = -g[k];
            }
        }
        Ok(m)
    });
    let eta = OneFormField::coordinate(chart, t);
    CosymplecticStructure { chart: omega.chart().clone(), omega, eta }
}

/// `λ_Y = p_i dq^i − Y^i p_i dt`.
pub fn liouville_y(d: &HamiltonianSectionData) -> Result<OneFormField> {
    let y = d.y.clone().ok_or_else(|| Error::PreconditionViolation("formalism needs a connection Y".into()))?;
    let n = d.n;
    let t = d.t_index();
    let dim = d.chart().dim();
    Ok(OneFormField::try_new(d.chart().clone(), "λ_Y", move |x| {
        let mut a = vec![Jet::ZERO; dim];
        let mut yp = Jet::ZERO;
        for i in 0..n {
            a[i] = x[n + i];
            yp += y[i].eval_jet(x)? * x[n + i];
        }
        a[t] = -yp;
        Ok(a)
    }))
}

/// `H_h^Y = −Y^i p_i + H_h`.
pub fn evolution_hamiltonian(d: &HamiltonianSectionData) -> Result<ScalarField> {
    let y = d.y.clone().ok_or_else(|| Error::PreconditionViolation("formalism needs a connection Y".into()))?;
    let n = d.n;
    let h = d.h.clone();
    Ok(ScalarField::try_new(d.chart().clone(), format!("-Y^i p_i + {}", d.h.label()), move |x| {
        let mut v = h.eval_jet(x)?;
        for i in 0..n {
            v -= y[i].eval_jet(x)? * x[n + i];
        }
        Ok(v)
    }))
}

/// `((ω_Y = −dλ_Y, dt), H_h^Y)`.
pub fn build_evolution_formalism(d: &HamiltonianSectionData) -> Result<(CosymplecticStructure, ScalarField)> {
    let lambda = liouville_y(d)?;
    let omega = exterior_derivative(&lambda).scale(-1.0).with_label("ω_Y");
    let eta = OneFormField::coordinate(d.chart().clone(), d.t_index());
    let s = CosymplecticStructure::new(omega, eta)?;
    Ok((s, evolution_hamiltonian(d)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct FormalismRelationReport {
    pub samples: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Tolerance for `ω_h = ω_Y + dH_h^Y∧dt`.
pub const FORMALISM_TOL: f64 = 1e-9;

/// Max over points of `|ω_h − ω_Y − dH_h^Y∧dt|`.
pub fn formalism_relation_check(d: &HamiltonianSectionData, points: &[Vec<f64>]) -> Result<FormalismRelationReport> {
    let wh = build_reeb_formalism(d);
    let (sy, hy) = build_evolution_formalism(d)?;
    let rhs = sy.omega().add(&wedge(&differential(&hy), sy.eta()));
    let mut max_dev: f64 = 0.0;
    for p in points {
        let diff = wh.omega().eval(p)?.matrix() - rhs.eval(p)?.matrix();
        max_dev = max_dev.max(diff.amax());
    }
    Ok(FormalismRelationReport {
        samples: points.len(),
        max_deviation: max_dev,
        tolerance: FORMALISM_TOL,
        passed: max_dev < FORMALISM_TOL,
    })
}

/// Max over interior states of `|dq/dt − ∂H_h/∂p|` and `|dp/dt + ∂H_h/∂q|`
/// along a trajectory of `R_h`, with `d/dt` by fourth-order central
/// differences on the uniform grid.
pub fn hamilton_equations_residual(d: &HamiltonianSectionData, traj: &Trajectory) -> Result<f64> {
    let n = d.n;
    let states = &traj.states;
    if states.len() < 5 {
        return Err(Error::PreconditionViolation("need at least five states".into()));
    }
    let t = d.t_index();
    let h = states[1][t] - states[0][t];
    if !(h.abs() > 0.0) {
        return Err(Error::PreconditionViolation("time does not advance along the trajectory".into()));
    }
    let mut worst: f64 = 0.0;
    for i in 2..states.len() - 2 {
        let g = d.h.gradient(&states[i])?;
        for c in 0..2 * n {
            let rate = (-states[i + 2][c] + 8.0 * states[i + 1][c] - 8.0 * states[i - 1][c] + states[i - 2][c]) / (12.0 * h);
            let expected = if c < n { g[n + c] } else { -g[c - n] };
            worst = worst.max((rate - expected).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::tangent;

    fn darboux1() -> CosymplecticStructure {
        CosymplecticStructure::darboux(CoordinateChart::darboux(1).into_ref()).unwrap()
    }

    #[test]
    fn darboux_flat_pattern() {
        let s = darboux1();
        let f = s.flat_matrix(&[0.3, -2.0, 5.0]).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(f, expected);
        assert_eq!(s.flat(&[0.0; 3], &tangent(&[1.0, 0.0, 0.0])).unwrap().as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn darboux_reeb_is_time_direction() {
        let s = darboux1();
        assert_eq!(s.reeb_field().eval(&[1.0, 2.0, 3.0]).unwrap().as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn free_particle_hamiltonian_field() {
        let s = darboux1();
        let h = ScalarField::new(s.chart().clone(), "p^2/4", |x| x[1] * x[1] / 4.0);
        let x = s.hamiltonian_field(&h).eval(&[0.1, 0.6, 2.0]).unwrap();
        assert!((x - tangent(&[0.3, 0.0, 0.0])).amax() < 1e-15);
        let c = ScalarField::constant(s.chart().clone(), 3.0);
        assert_eq!(s.evolution_field(&c).eval(&[0.0; 3]).unwrap().as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn degenerate_pair_fails_validation() {
        let chart = CoordinateChart::new(["q", "p", "t"]).into_ref();
        let omega = TwoFormField::darboux(chart.clone(), 1);
        let eta = OneFormField::coordinate(chart, 0);
        let s = CosymplecticStructure::new(omega, eta).unwrap();
        let rep = s.validate(&[vec![0.1, 0.2, 0.3]]).unwrap();
        assert!(!rep.passed);
        assert!(matches!(s.flat_matrix(&[0.0; 3]), Err(Error::SingularFlat { .. })));
        assert!(s.reeb_field().eval(&[0.0; 3]).is_err());
    }

    #[test]
    fn zero_hamiltonian_leaves_structure_unchanged() {
        let s = darboux1();
        let m = s.modify(&ScalarField::constant(s.chart().clone(), 0.0));
        let x = [0.5, 0.5, 0.5];
        assert_eq!(m.omega().eval(&x).unwrap().matrix(), s.omega().eval(&x).unwrap().matrix());
    }

    #[test]
    fn harmonic_reeb_formalism_by_hand() {
        let chart = HamiltonianSectionData::standard_chart(1);
        let h = ScalarField::new(chart.clone(), "(p^2+q^2)/2", |x| (x[0] * x[0] + x[1] * x[1]) * 0.5);
        let d = HamiltonianSectionData::new(h, None).unwrap();
        let s = build_reeb_formalism(&d);
        let (q, p) = (0.7, -0.4);
        let m = s.omega().eval(&[q, p, 1.0]).unwrap();
        // dq∧dp + q dq∧dt + p dp∧dt
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, q, -1.0, 0.0, p, -q, -p, 0.0]);
        assert_eq!(m.matrix(), &expected);
        let r = s.reeb_field().eval(&[q, p, 1.0]).unwrap();
        assert!((r - tangent(&[p, -q, 1.0])).amax() < 1e-14);
    }

    #[test]
    fn evolution_formalism_with_linear_connection() {
        // Y = q ∂_q + ∂_t, H_h = 0: ω_Y = dq∧dp + (p dq + q dp)∧dt
        let chart = HamiltonianSectionData::standard_chart(1);
        let y = ScalarField::coordinate(chart.clone(), 0);
        let d = HamiltonianSectionData::new(ScalarField::constant(chart, 0.0), Some(vec![y])).unwrap();
        let (s, hy) = build_evolution_formalism(&d).unwrap();
        let (q, p) = (1.3, 0.2);
        let m = s.omega().eval(&[q, p, 0.0]).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, p, -1.0, 0.0, q, -p, -q, 0.0]);
        assert!((m.matrix() - expected).amax() < 1e-15);
        assert!((hy.eval(&[q, p, 0.0]).unwrap() + q * p).abs() < 1e-15);
        let rep = formalism_relation_check(&d, &[vec![q, p, 0.0], vec![-0.2, 0.9, 3.0]]).unwrap();
        assert!(rep.passed);
    }
}
