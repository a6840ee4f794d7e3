//! Pointwise exterior and linear algebra on a single tangent space.
//!
//! Rank decisions go through singular values with a relative threshold
//! `τ = 1e-10·σ_max`. A singular value inside `[0.1τ, 10τ]` is reported as
//! [`Error::ToleranceAmbiguity`] instead of being silently classified.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::Jet;

pub type TangentVector = DVector<f64>;

/// Relative singular-value threshold for rank decisions.
pub const RANK_THRESHOLD: f64 = 1e-10;
/// Subspaces are equal when their orthogonal projectors differ by less than this (Frobenius).
pub const SUBSPACE_TOL: f64 = 1e-8;
/// Relative antisymmetry tolerance for [`AntisymmetricForm::new`].
pub const ANTISYMMETRY_TOL: f64 = 1e-10;

/// A 2-form on a single tangent space, `matrix[(i, j)] = ω(e_i, e_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AntisymmetricForm {
    matrix: DMatrix<f64>,
}

impl AntisymmetricForm {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let scale = matrix.amax().max(1.0);
        let deviation = (&matrix + matrix.transpose()).amax();
        if deviation > ANTISYMMETRY_TOL * scale {
            return Err(Error::NotAntisymmetric { deviation });
        }
        Ok(AntisymmetricForm { matrix })
    }

    /// `Σ c · e^i∧e^j` over the given `(i, j, c)` terms.
    pub fn from_wedges(dim: usize, terms: &[(usize, usize, f64)]) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        for &(i, j, c) in terms {
            m[(i, j)] += c;
            m[(j, i)] -= c;
        }
        AntisymmetricForm { matrix: m }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eval(&self, u: &TangentVector, v: &TangentVector) -> f64 {
        u.dot(&(&self.matrix * v))
    }

    /// `i_v ω`, with components `Σ_i v^i ω_ij`.
    pub fn contract(&self, v: &TangentVector) -> DVector<f64> {
        self.matrix.tr_mul(v)
    }

    pub fn rank(&self) -> Result<usize> {
        let svd = self.matrix.clone().svd(false, false);
        rank_decision(svd.singular_values.as_slice())
    }

    /// Gram matrix `Bᵀ Ω B` of the form restricted to a subspace, in its basis.
    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        self.matrix.clone().svd(false, false).singular_values.max()
    }

    pub fn restricted(&self, sub: &Subspace) -> DMatrix<f64> {
        sub.basis.transpose() * &self.matrix * &sub.basis
    }
}

/// Number of singular values above `τ = 1e-10·σ_max`.
pub fn rank_decision(singular_values: &[f64]) -> Result<usize> {
    let smax = singular_values.iter().cloned().fold(0.0, f64::max);
    rank_decision_scaled(singular_values, smax)
}

/// As [`rank_decision`] but with the threshold relative to an external
/// `scale`, for matrices derived from a larger one whose own `σ_max` may be
/// pure rounding noise.
pub fn rank_decision_scaled(singular_values: &[f64], scale: f64) -> Result<usize> {
    let smax = scale;
    if smax == 0.0 {
        return Ok(0);
    }
    let tau = RANK_THRESHOLD * smax;
    let mut rank = 0;
    for &s in singular_values {
        if s >= 0.1 * tau && s <= 10.0 * tau {
            return Err(Error::ToleranceAmbiguity {
                value: s,
                threshold: tau,
            });
        }
        if s > tau {
            rank += 1;
        }
    }
    Ok(rank)
}

/// A linear subspace of ℝⁿ stored with an orthonormal basis (columns of `basis`).
#[derive(Debug, Clone)]
pub struct Subspace {
    ambient: usize,
    basis: DMatrix<f64>,
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Subspace {
            ambient,
            basis: DMatrix::zeros(ambient, 0),
        }
    }

    pub fn full(ambient: usize) -> Self {
        Subspace {
            ambient,
            basis: DMatrix::identity(ambient, ambient),
        }
    }

    /// Span of a list of vectors; dependent vectors are allowed and dropped.
    pub fn span(ambient: usize, vectors: &[TangentVector]) -> Result<Self> {
        if let Some(v) = vectors.iter().find(|v| v.len() != ambient) {
            return Err(Error::DimensionMismatch {
                expected: ambient,
                found: v.len(),
            });
        }
        if vectors.is_empty() {
            return Ok(Subspace::zero(ambient));
        }
        let m = DMatrix::from_columns(vectors);
        let rank = rank_decision(m.clone().svd(false, false).singular_values.as_slice())?;
        Ok(Subspace {
            ambient,
            basis: pivoted_gram_schmidt(&m, rank),
        })
    }

    /// Span of the columns of `m`.
    pub fn column_space(m: &DMatrix<f64>) -> Result<Self> {
        let cols: Vec<_> = m.column_iter().map(|c| c.into_owned()).collect();
        Subspace::span(m.nrows(), &cols)
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    /// Orthonormal basis as matrix columns.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn basis_vectors(&self) -> Vec<TangentVector> {
        self.basis.column_iter().map(|c| c.into_owned()).collect()
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Euclidean distance from `v` to the subspace, relative to `|v|`.
    pub fn relative_distance(&self, v: &TangentVector) -> f64 {
        let norm = v.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let proj = &self.basis * self.basis.tr_mul(v);
        (v - proj).norm() / norm
    }

    pub fn contains(&self, v: &TangentVector) -> bool {
        self.relative_distance(v) < SUBSPACE_TOL
    }

    /// Frobenius norm of the projector difference.
    pub fn distance(&self, other: &Subspace) -> f64 {
        (self.projector() - other.projector()).norm()
    }

    pub fn same_as(&self, other: &Subspace) -> bool {
        self.ambient == other.ambient && self.distance(other) < SUBSPACE_TOL
    }

    /// Whether every basis vector of `other` lies in `self`.
    pub fn contains_subspace(&self, other: &Subspace) -> bool {
        other.basis_vectors().iter().all(|v| self.contains(v))
    }
}

/// Modified Gram-Schmidt with column pivoting, keeping `rank` columns.
fn pivoted_gram_schmidt(m: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let mut work: Vec<DVector<f64>> = m.column_iter().map(|c| c.into_owned()).collect();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(rank);
    for _ in 0..rank {
        let (idx, _) = work
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.norm()))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        let mut q = work.swap_remove(idx);
        // second pass re-orthogonalizes against accumulated rounding
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&q);
                q -= b * c;
            }
        }
        q /= q.norm();
        for w in work.iter_mut() {
            let c = q.dot(w);
            *w -= &q * c;
        }
        basis.push(q);
    }
    if basis.is_empty() {
        DMatrix::zeros(m.nrows(), 0)
    } else {
        DMatrix::from_columns(&basis)
    }
}

/// Nullspace `{v : M v = 0}` of an arbitrary `r × n` matrix.
pub fn nullspace(m: &DMatrix<f64>) -> Result<Subspace> {
    nullspace_scaled(m, None)
}

/// Nullspace with the rank threshold taken relative to `scale` instead of
/// the matrix's own largest singular value.
pub fn nullspace_scaled(m: &DMatrix<f64>, scale: Option<f64>) -> Result<Subspace> {
    let n = m.ncols();
    if n == 0 {
        return Ok(Subspace::zero(0));
    }
    // pad to at least n rows so the SVD yields a full set of right singular vectors
    let rows = m.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let sv = svd.singular_values.as_slice();
    let rank = match scale {
        Some(scale) => rank_decision_scaled(sv, scale)?,
        None => rank_decision(sv)?,
    };
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let null: Vec<DVector<f64>> = order[rank..]
        .iter()
        .map(|&i| v_t.row(i).transpose().into_owned())
        .collect();
    Subspace::span(n, &null)
}

/// `ker ω`.
pub fn kernel(form: &AntisymmetricForm) -> Result<Subspace> {
    nullspace(form.matrix())
}

/// `A^⊥ = {v : ω(v, a) = 0 for all a ∈ A}` for a form of corank exactly one.
pub fn perp(form: &AntisymmetricForm, a: &Subspace) -> Result<Subspace> {
    let n = form.dim();
    if a.ambient() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ambient(),
        });
    }
    let corank = n - form.rank()?;
    if corank != 1 {
        return Err(Error::PreconditionViolation(format!(
            "perp requires a form of corank 1, found corank {corank}"
        )));
    }
    perp_unchecked(form, a)
}

fn perp_unchecked(form: &AntisymmetricForm, a: &Subspace) -> Result<Subspace> {
    // ω(v, a) = vᵀ Ω a, so each basis vector of A contributes the row (Ω a)ᵀ
    let rows = (form.matrix() * a.basis()).transpose();
    nullspace_scaled(&rows, Some(form.spectral_norm()))
}

/// `A + B`.
pub fn subspace_sum(a: &Subspace, b: &Subspace) -> Result<Subspace> {
    if a.ambient() != b.ambient() {
        return Err(Error::DimensionMismatch {
            expected: a.ambient(),
            found: b.ambient(),
        });
    }
    let mut vectors = a.basis_vectors();
    vectors.extend(b.basis_vectors());
    Subspace::span(a.ambient(), &vectors)
}

/// Outcome of checking the two dimension alternatives and the biperp identity
/// for a corank-one form with kernel `⟨R⟩`.
#[derive(Debug, Clone, Serialize)]
pub struct Lemma45Report {
    pub dim_v: usize,
    pub dim_a: usize,
    pub reeb_in_a: bool,
    pub dim_perp: usize,
    pub predicted_dim_perp: usize,
    pub dim_biperp: usize,
    /// Projector distance between `(A^⊥)^⊥` and `A ⊕ ⟨R⟩` (or `A` when `R ∈ A`).
    pub biperp_distance: f64,
    pub dimension_ok: bool,
    pub biperp_ok: bool,
    #[serde(skip)]
    pub perp: Subspace,
    #[serde(skip)]
    pub biperp: Subspace,
    #[serde(skip)]
    pub predicted_biperp: Subspace,
}

impl Lemma45Report {
    pub fn passed(&self) -> bool {
        self.dimension_ok && self.biperp_ok
    }
}

pub fn lemma45_check(
    form: &AntisymmetricForm,
    reeb: &TangentVector,
    a: &Subspace,
) -> Result<Lemma45Report> {
    let n = form.dim();
    let ker = kernel(form)?;
    let reeb_line = Subspace::span(n, std::slice::from_ref(reeb))?;
    if reeb_line.dim() != 1 || !ker.same_as(&reeb_line) {
        return Err(Error::PreconditionViolation(format!(
            "kernel of the form (dim {}) is not spanned by the given Reeb vector",
            ker.dim()
        )));
    }
    let reeb_in_a = a.contains(reeb);
    let perp_a = perp_unchecked(form, a)?;
    let predicted_dim_perp = if reeb_in_a {
        n - a.dim() + 1
    } else {
        n - a.dim()
    };
    let biperp = perp_unchecked(form, &perp_a)?;
    let predicted_biperp = if reeb_in_a {
        a.clone()
    } else {
        subspace_sum(a, &reeb_line)?
    };
    let biperp_distance = biperp.distance(&predicted_biperp);
    Ok(Lemma45Report {
        dim_v: n,
        dim_a: a.dim(),
        reeb_in_a,
        dim_perp: perp_a.dim(),
        predicted_dim_perp,
        dim_biperp: biperp.dim(),
        biperp_distance,
        dimension_ok: perp_a.dim() == predicted_dim_perp,
        biperp_ok: biperp_distance < SUBSPACE_TOL && biperp.dim() == predicted_biperp.dim(),
        perp: perp_a,
        biperp,
        predicted_biperp,
    })
}

/// Random antisymmetric matrix of odd dimension with entries in `[-1, 1]`;
/// generically of corank one.
pub fn random_antisymmetric<R: Rng>(n: usize, rng: &mut R) -> AntisymmetricForm {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = rng.random_range(-1.0..1.0);
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
    }
    AntisymmetricForm { matrix: m }
}

pub fn random_vector<R: Rng>(n: usize, rng: &mut R) -> TangentVector {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// One generated fuzz case: a corank-one form, its kernel generator and a subspace.
#[derive(Debug, Clone)]
pub struct Lemma45Case {
    pub form: AntisymmetricForm,
    pub reeb: TangentVector,
    pub subspace: Subspace,
    /// Spanning vectors the subspace was built from, before orthonormalization.
    pub generators: Vec<TangentVector>,
}

/// Draws a random case; even-numbered cases put `R` inside `A`.
pub fn random_lemma45_case<R: Rng>(n: usize, index: usize, rng: &mut R) -> Result<Lemma45Case> {
    let form = random_antisymmetric(n, rng);
    let ker = kernel(&form)?;
    if ker.dim() != 1 {
        return Err(Error::PreconditionViolation(format!(
            "random form has corank {}",
            ker.dim()
        )));
    }
    let reeb = ker.basis_vectors().remove(0);
    let include_reeb = index.is_multiple_of(2);
    let mut generators = Vec::new();
    let dim_a = if include_reeb {
        generators.push(reeb.clone() * rng.random_range(0.5..2.0));
        rng.random_range(1..=n)
    } else {
        rng.random_range(1..n)
    };
    while generators.len() < dim_a {
        generators.push(random_vector(n, rng));
    }
    let subspace = Subspace::span(n, &generators)?;
    Ok(Lemma45Case {
        form,
        reeb,
        subspace,
        generators,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma45DimSummary {
    pub dim: usize,
    pub cases: usize,
    pub passed: usize,
    pub reeb_in_a_cases: usize,
    pub max_biperp_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma45FuzzReport {
    pub seed: u64,
    pub per_dim: Vec<Lemma45DimSummary>,
    pub failures: Vec<String>,
}

impl Lemma45FuzzReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.per_dim.iter().all(|d| d.passed == d.cases)
    }
}

/// Runs `cases` random instances per dimension. Each case has its own RNG
/// stream derived from `(seed, dim, index)`, so results do not depend on
/// scheduling.
pub fn lemma45_fuzz(dims: &[usize], cases: usize, seed: u64) -> Lemma45FuzzReport {
    use rayon::prelude::*;
    let mut per_dim = Vec::new();
    let mut failures = Vec::new();
    for &n in dims {
        let outcomes: Vec<std::result::Result<Lemma45Report, String>> = (0..cases)
            .into_par_iter()
            .map(|i| {
                let mut rng = case_rng(seed, n, i);
                let case = random_lemma45_case(n, i, &mut rng).map_err(|e| e.to_string())?;
                lemma45_check(&case.form, &case.reeb, &case.subspace).map_err(|e| e.to_string())
            })
            .collect();
        let mut summary = Lemma45DimSummary {
            dim: n,
            cases,
            passed: 0,
            reeb_in_a_cases: 0,
            max_biperp_distance: 0.0,
        };
        for (i, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(r) => {
                    summary.reeb_in_a_cases += r.reeb_in_a as usize;
                    summary.max_biperp_distance = summary.max_biperp_distance.max(r.biperp_distance);
                    if r.passed() {
                        summary.passed += 1;
                    } else {
                        failures.push(format!(
                            "dim {n} case {i}: dim A^⊥ = {} (predicted {}), biperp distance {:.3e}",
                            r.dim_perp, r.predicted_dim_perp, r.biperp_distance
                        ));
                    }
                }
                Err(e) => failures.push(format!("dim {n} case {i}: {e}")),
            }
        }
        per_dim.push(summary);
    }
    Lemma45FuzzReport {
        seed,
        per_dim,
        failures,
    }
}

pub fn case_rng(seed: u64, dim: usize, index: usize) -> ChaCha8Rng {
    let mixed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((dim as u64) << 32)
        .wrapping_add(index as u64);
    ChaCha8Rng::seed_from_u64(mixed)
}

// ---------------------------------------------------------------------------
// Dense solves carried out in jet arithmetic, so solved fields stay differentiable.

/// Solves `A x = b` by Gaussian elimination with partial pivoting on real parts.
///
/// Returns the solution and a pivot-ratio condition estimate; `None` when a
/// pivot vanishes.
pub(crate) fn solve_jet(mut a: Vec<Vec<Jet>>, mut b: Vec<Jet>) -> Option<(Vec<Jet>, f64)> {
    let n = b.len();
    let mut max_pivot: f64 = 0.0;
    let mut min_pivot = f64::INFINITY;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            a[i][col]
                .value()
                .abs()
                .total_cmp(&a[j][col].value().abs())
        })?;
        let p = a[piv][col].value().abs();
        if p == 0.0 || !p.is_finite() {
            return None;
        }
        max_pivot = max_pivot.max(p);
        min_pivot = min_pivot.min(p);
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = a[col][col].recip();
        for row in (col + 1)..n {
            let factor = a[row][col] * inv;
            if factor.value() == 0.0 && factor.depth() == 0 {
                continue;
            }
            for k in col..n {
                let t = a[col][k];
                a[row][k] -= factor * t;
            }
            let t = b[col];
            b[row] -= factor * t;
        }
    }
    let mut x = vec![Jet::ZERO; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some((x, max_pivot / min_pivot))
}

/// Least-squares solution of an overdetermined `A x ≈ b` (`m ≥ n`) via
/// modified Gram-Schmidt QR.
///
/// Returns the solution, the real part of the residual norm, and a condition
/// estimate from the triangular factor; `None` if `A` is rank deficient.
pub(crate) fn least_squares_jet(a: &[Vec<Jet>], b: &[Jet]) -> Option<(Vec<Jet>, f64, f64)> {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    // columns of A
    let mut q: Vec<Vec<Jet>> = (0..n).map(|j| (0..m).map(|i| a[i][j]).collect()).collect();
    let mut r = vec![vec![Jet::ZERO; n]; n];
    for j in 0..n {
        for k in 0..j {
            let c: Jet = (0..m).map(|i| q[k][i] * q[j][i]).sum();
            r[k][j] += c;
            for i in 0..m {
                let t = q[k][i];
                q[j][i] -= c * t;
            }
        }
        let norm = (0..m).map(|i| q[j][i] * q[j][i]).sum::<Jet>().sqrt();
        if norm.value() == 0.0 || !norm.value().is_finite() {
            return None;
        }
        r[j][j] = norm;
        for i in 0..m {
            q[j][i] = q[j][i] / norm;
        }
    }
    let qtb: Vec<Jet> = (0..n)
        .map(|j| (0..m).map(|i| q[j][i] * b[i]).sum())
        .collect();
    let mut x = vec![Jet::ZERO; n];
    for row in (0..n).rev() {
        let mut acc = qtb[row];
        for k in (row + 1)..n {
            acc -= r[row][k] * x[k];
        }
        x[row] = acc / r[row][row];
    }
    let residual = (0..m)
        .map(|i| {
            let ax: f64 = (0..n).map(|j| a[i][j].value() * x[j].value()).sum();
            (ax - b[i].value()).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    let diag: Vec<f64> = (0..n).map(|j| r[j][j].value().abs()).collect();
    let cond = diag.iter().cloned().fold(0.0, f64::max) / diag.iter().cloned().fold(f64::INFINITY, f64::min);
    Some((x, residual, cond))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, i: usize) -> TangentVector {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    fn e12() -> AntisymmetricForm {
        AntisymmetricForm::from_wedges(3, &[(0, 1, 1.0)])
    }

    #[test]
    fn kernel_of_block_form() {
        let k = kernel(&e12()).unwrap();
        assert_eq!(k.dim(), 1);
        assert!(k.contains(&e(3, 2)));
    }

    #[test]
    fn kernel_of_darboux_form_is_time_direction() {
        // (q1, q2, p1, p2, t)
        let w = AntisymmetricForm::from_wedges(5, &[(0, 2, 1.0), (1, 3, 1.0)]);
        let k = kernel(&w).unwrap();
        assert!(k.same_as(&Subspace::span(5, &[e(5, 4)]).unwrap()));
        for v in k.basis_vectors() {
            assert!((v.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            AntisymmetricForm::new(m),
            Err(Error::NotAntisymmetric { .. })
        ));
    }

    #[test]
    fn perp_examples() {
        let w = e12();
        let a = Subspace::span(3, &[e(3, 0)]).unwrap();
        let p = perp(&w, &a).unwrap();
        assert_eq!(p.dim(), 2);
        assert!(p.same_as(&Subspace::span(3, &[e(3, 0), e(3, 2)]).unwrap()));

        let r = Subspace::span(3, &[e(3, 2)]).unwrap();
        let p = perp(&w, &r).unwrap();
        assert_eq!(p.dim(), 3);
    }

    #[test]
    fn perp_requires_corank_one() {
        let w = AntisymmetricForm::from_wedges(3, &[]);
        let a = Subspace::span(3, &[e(3, 0)]).unwrap();
        assert!(matches!(perp(&w, &a), Err(Error::PreconditionViolation(_))));
    }

    #[test]
    fn lemma_examples() {
        let w = e12();
        let r = lemma45_check(&w, &e(3, 2), &Subspace::span(3, &[e(3, 0)]).unwrap()).unwrap();
        assert!(r.passed() && !r.reeb_in_a);
        assert!(r
            .biperp
            .same_as(&Subspace::span(3, &[e(3, 0), e(3, 2)]).unwrap()));

        let a = Subspace::span(3, &[e(3, 2)]).unwrap();
        let r = lemma45_check(&w, &e(3, 2), &a).unwrap();
        assert!(r.passed() && r.reeb_in_a);
        assert!(r.biperp.same_as(&a));
    }

    #[test]
    fn lemma_rejects_wrong_reeb() {
        let a = Subspace::span(3, &[e(3, 0)]).unwrap();
        assert!(matches!(
            lemma45_check(&e12(), &e(3, 0), &a),
            Err(Error::PreconditionViolation(_))
        ));
    }

    #[test]
    fn subspace_sum_examples() {
        let a = Subspace::span(3, &[e(3, 0)]).unwrap();
        let b = Subspace::span(3, &[e(3, 2)]).unwrap();
        let s = subspace_sum(&a, &b).unwrap();
        assert!(s.same_as(&Subspace::span(3, &[e(3, 0), e(3, 2)]).unwrap()));
        assert_eq!(subspace_sum(&a, &a).unwrap().dim(), 1);
    }

    #[test]
    fn ambiguous_rank_is_reported() {
        assert!(matches!(
            rank_decision(&[1.0, 1e-10]),
            Err(Error::ToleranceAmbiguity { .. })
        ));
        assert_eq!(rank_decision(&[1.0, 1e-14]).unwrap(), 1);
        assert_eq!(rank_decision(&[1.0, 1e-6]).unwrap(), 2);
        assert_eq!(rank_decision(&[0.0, 0.0]).unwrap(), 0);
    }

    #[test]
    fn perp_of_kernel_is_everything() {
        let mut rng = case_rng(11, 5, 0);
        for _ in 0..50 {
            let w = random_antisymmetric(5, &mut rng);
            let k = kernel(&w).unwrap();
            assert_eq!(perp(&w, &k).unwrap().dim(), 5);
        }
    }

    #[test]
    fn small_fuzz_passes() {
        let report = lemma45_fuzz(&[3, 5], 40, 3);
        assert!(report.passed(), "{:?}", report.failures);
        assert!(report.per_dim.iter().all(|d| d.reeb_in_a_cases == 20));
    }

    #[test]
    fn jet_solvers_match_direct_solution() {
        let a = vec![
            vec![Jet::constant(2.0), Jet::constant(1.0)],
            vec![Jet::constant(1.0), Jet::constant(3.0)],
        ];
        let b = vec![Jet::constant(1.0), Jet::constant(2.0)];
        let (x, cond) = solve_jet(a.clone(), b.clone()).unwrap();
        assert!((x[0].value() - 0.2).abs() < 1e-15 && (x[1].value() - 0.6).abs() < 1e-15);
        assert!(cond >= 1.0);
        let mut tall = a.clone();
        tall.push(vec![Jet::constant(1.0), Jet::constant(1.0)]);
        let mut rhs = b.clone();
        rhs.push(Jet::constant(0.8));
        let (y, res, _) = least_squares_jet(&tall, &rhs).unwrap();
        assert!(res < 1e-14);
        assert!((y[0].value() - 0.2).abs() < 1e-14 && (y[1].value() - 0.6).abs() < 1e-14);
    }
}
