//! Scalar, vector and form fields over a single coordinate chart, and the
//! calculus on them: differential, exterior derivative, wedge, interior
//! product, Lie bracket, pullback and Lie derivatives.
//!
//! Every field is a closure over [`Jet`] coordinates, so derived fields can
//! be differentiated again. When the nesting budget of [`MAX_DEPTH`] is
//! exhausted, derivatives fall back to central differences.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::{depth_of, lift, values, Jet, MAX_DEPTH};
use crate::linalg::{AntisymmetricForm, TangentVector};

/// Points closer than this to an excluded set are rejected.
pub const GUARD_MARGIN: f64 = 1e-9;

pub type ChartRef = Arc<CoordinateChart>;

type ResidualFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
pub(crate) type JetScalarFn = dyn Fn(&[Jet]) -> Result<Jet> + Send + Sync;
pub(crate) type JetVecFn = dyn Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync;

/// A closed set removed from the chart, described by a nonnegative
/// distance-like function that vanishes exactly on the set.
#[derive(Clone)]
pub struct ExcludedSet {
    pub name: String,
    distance: Arc<ResidualFn>,
}

impl ExcludedSet {
    pub fn new(name: impl Into<String>, distance: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ExcludedSet {
            name: name.into(),
            distance: Arc::new(distance),
        }
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        (self.distance)(x)
    }
}

impl fmt::Debug for ExcludedSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExcludedSet").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone)]
pub struct CoordinateChart {
    names: Vec<String>,
    excluded: Vec<ExcludedSet>,
}

impl CoordinateChart {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        CoordinateChart {
            names: names.into_iter().map(Into::into).collect(),
            excluded: Vec::new(),
        }
    }

    /// Darboux coordinates `(q1..qn, p1..pn, t)`.
    pub fn darboux(n: usize) -> Self {
        let mut names: Vec<String> = (1..=n).map(|i| format!("q{i}")).collect();
        names.extend((1..=n).map(|i| format!("p{i}")));
        names.push("t".into());
        CoordinateChart::new(names)
    }

    pub fn with_excluded(mut self, set: ExcludedSet) -> Self {
        self.excluded.push(set);
        self
    }

    pub fn into_ref(self) -> ChartRef {
        Arc::new(self)
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn excluded(&self) -> &[ExcludedSet] {
        &self.excluded
    }

    /// Checks dimension and the domain guard.
    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        for set in &self.excluded {
            let d = set.distance(x);
            if d.is_nan() || d < GUARD_MARGIN {
                return Err(Error::DomainGuardViolation {
                    set: set.name.clone(),
                    point: x.to_vec(),
                    distance: d,
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.check(x).is_ok()
    }
}

/// Axis-aligned box used to draw sample points.
#[derive(Debug, Clone, Serialize)]
pub struct SampleBox {
    pub bounds: Vec<(f64, f64)>,
}

impl SampleBox {
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Self {
        SampleBox {
            bounds: vec![(lo, hi); dim],
        }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..hi) } else { lo })
            .collect()
    }
}

/// Draws `n` points uniformly from `bounds`, rejecting those the chart guard excludes.
pub fn sample_points(chart: &CoordinateChart, bounds: &SampleBox, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if bounds.bounds.len() != chart.dim() {
        return Err(Error::DimensionMismatch {
            expected: chart.dim(),
            found: bounds.bounds.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > 1000 * n.max(1) {
            return Err(Error::PreconditionViolation(
                "sample box lies almost entirely inside excluded sets".into(),
            ));
        }
        let x = bounds.draw(&mut rng);
        if chart.contains(&x) {
            out.push(x);
        }
    }
    Ok(out)
}

fn check_jets(chart: &CoordinateChart, x: &[Jet]) -> Result<()> {
    if x.len() != chart.dim() {
        return Err(Error::DimensionMismatch {
            expected: chart.dim(),
            found: x.len(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Differentiation primitives

/// `∂_i f^c` for every coordinate direction `i`, indexed `[i][c]`.
///
/// Uses a fresh dual infinitesimal when one is available and central
/// differences otherwise.
pub(crate) fn jacobian_jet<F>(f: &F, x: &[Jet]) -> Result<Vec<Vec<Jet>>>
where
    F: Fn(&[Jet]) -> Result<Vec<Jet>> + ?Sized,
{
    let n = x.len();
    let depth = depth_of(x);
    let mut rows = Vec::with_capacity(n);
    if depth < MAX_DEPTH {
        for i in 0..n {
            let seeded: Vec<Jet> = x
                .iter()
                .enumerate()
                .map(|(j, xj)| xj.seeded(depth, if i == j { 1.0 } else { 0.0 }).expect("depth checked"))
                .collect();
            let y = f(&seeded)?;
            rows.push(y.iter().map(|c| c.tangent(depth)).collect());
        }
    } else {
        for i in 0..n {
            let h = fd_step(x[i].value());
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[i] = plus[i] + h;
            minus[i] = minus[i] - h;
            let yp = f(&plus)?;
            let ym = f(&minus)?;
            rows.push(yp.iter().zip(&ym).map(|(a, b)| (*a - *b) / (2.0 * h)).collect());
        }
    }
    Ok(rows)
}

/// Central-difference step `1e-5·max(1, |x|)`.
pub fn fd_step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

fn scalar_as_vec(f: Arc<JetScalarFn>) -> impl Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync {
    move |x| Ok(vec![f(x)?])
}

// ---------------------------------------------------------------------------
// Field types

#[derive(Clone)]
pub struct ScalarField {
    chart: ChartRef,
    label: String,
    f: Arc<JetScalarFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.label)
    }
}

impl ScalarField {
    pub fn new(chart: ChartRef, label: impl Into<String>, f: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static) -> Self {
        ScalarField {
            chart,
            label: label.into(),
            f: Arc::new(move |x| Ok(f(x))),
        }
    }

    pub fn try_new(
        chart: ChartRef,
        label: impl Into<String>,
        f: impl Fn(&[Jet]) -> Result<Jet> + Send + Sync + 'static,
    ) -> Self {
        ScalarField {
            chart,
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn coordinate(chart: ChartRef, i: usize) -> Self {
        let label = chart.names()[i].clone();
        ScalarField::new(chart, label, move |x| x[i])
    }

    pub fn constant(chart: ChartRef, c: f64) -> Self {
        ScalarField::new(chart, format!("{c}"), move |_| Jet::constant(c))
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.chart.check(x)?;
        Ok((self.f)(&lift(x))?.value())
    }

    pub fn eval_jet(&self, x: &[Jet]) -> Result<Jet> {
        check_jets(&self.chart, x)?;
        (self.f)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        differential(self).eval(x)
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        let (f, g) = (self.f.clone(), other.f.clone());
        ScalarField::try_new(self.chart.clone(), format!("({}) + ({})", self.label, other.label), move |x| {
            Ok(f(x)? + g(x)?)
        })
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        let (f, g) = (self.f.clone(), other.f.clone());
        ScalarField::try_new(self.chart.clone(), format!("({}) - ({})", self.label, other.label), move |x| {
            Ok(f(x)? - g(x)?)
        })
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        let (f, g) = (self.f.clone(), other.f.clone());
        ScalarField::try_new(self.chart.clone(), format!("({}) * ({})", self.label, other.label), move |x| {
            Ok(f(x)? * g(x)?)
        })
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        let f = self.f.clone();
        ScalarField::try_new(self.chart.clone(), format!("{c} * ({})", self.label), move |x| Ok(f(x)? * c))
    }

    /// `c` minus the field, `c - f`.
    pub fn shifted(&self, c: f64) -> ScalarField {
        let f = self.f.clone();
        ScalarField::try_new(self.chart.clone(), format!("({}) + {c}", self.label), move |x| Ok(f(x)? + c))
    }
}

macro_rules! component_field {
    ($name:ident, $doc:literal) => {
        #[doc = $doc]
        #[derive(Clone)]
        pub struct $name {
            chart: ChartRef,
            label: String,
            f: Arc<JetVecFn>,
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.label)
            }
        }

        impl $name {
            pub fn new(
                chart: ChartRef,
                label: impl Into<String>,
                f: impl Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
            ) -> Self {
                $name {
                    chart,
                    label: label.into(),
                    f: Arc::new(move |x| Ok(f(x))),
                }
            }

            pub fn try_new(
                chart: ChartRef,
                label: impl Into<String>,
                f: impl Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync + 'static,
            ) -> Self {
                $name {
                    chart,
                    label: label.into(),
                    f: Arc::new(f),
                }
            }

            /// Field whose components are the given scalar fields.
            pub fn from_components(chart: ChartRef, label: impl Into<String>, comps: Vec<ScalarField>) -> Self {
                let fs: Vec<Arc<JetScalarFn>> = comps.into_iter().map(|c| c.f).collect();
                $name::try_new(chart, label, move |x| fs.iter().map(|f| f(x)).collect())
            }

            pub fn zero(chart: ChartRef) -> Self {
                let n = chart.dim();
                $name::new(chart, "0", move |_| vec![Jet::ZERO; n])
            }

            pub fn chart(&self) -> &ChartRef {
                &self.chart
            }

            pub fn label(&self) -> &str {
                &self.label
            }

            pub fn with_label(mut self, label: impl Into<String>) -> Self {
                self.label = label.into();
                self
            }

            pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
                self.chart.check(x)?;
                let y = (self.f)(&lift(x))?;
                Ok(DVector::from_vec(values(&y)))
            }

            pub fn eval_jet(&self, x: &[Jet]) -> Result<Vec<Jet>> {
                check_jets(&self.chart, x)?;
                (self.f)(x)
            }

            /// Component `i` as a scalar field.
            pub fn component(&self, i: usize) -> ScalarField {
                let f = self.f.clone();
                ScalarField::try_new(self.chart.clone(), format!("{}[{i}]", self.label), move |x| Ok(f(x)?[i]))
            }

            pub fn add(&self, other: &$name) -> $name {
                let (f, g) = (self.f.clone(), other.f.clone());
                $name::try_new(self.chart.clone(), format!("({}) + ({})", self.label, other.label), move |x| {
                    Ok(f(x)?.into_iter().zip(g(x)?).map(|(a, b)| a + b).collect())
                })
            }

            pub fn sub(&self, other: &$name) -> $name {
                let (f, g) = (self.f.clone(), other.f.clone());
                $name::try_new(self.chart.clone(), format!("({}) - ({})", self.label, other.label), move |x| {
                    Ok(f(x)?.into_iter().zip(g(x)?).map(|(a, b)| a - b).collect())
                })
            }

            pub fn scale(&self, c: f64) -> $name {
                let f = self.f.clone();
                $name::try_new(self.chart.clone(), format!("{c} * ({})", self.label), move |x| {
                    Ok(f(x)?.into_iter().map(|a| a * c).collect())
                })
            }

            /// Pointwise product with a scalar field.
            pub fn times(&self, s: &ScalarField) -> $name {
                let (f, g) = (self.f.clone(), s.f.clone());
                $name::try_new(self.chart.clone(), format!("({}) * ({})", s.label, self.label), move |x| {
                    let c = g(x)?;
                    Ok(f(x)?.into_iter().map(|a| a * c).collect())
                })
            }
        }
    };
}

component_field!(VectorField, "A vector field, components in the chart's coordinate basis.");
component_field!(OneFormField, "A 1-form field, components in the chart's coordinate coframe.");

impl VectorField {
    /// Coordinate field `∂/∂x^i`.
    pub fn coordinate(chart: ChartRef, i: usize) -> Self {
        let n = chart.dim();
        let label = format!("d/d{}", chart.names()[i]);
        VectorField::new(chart, label, move |_| {
            let mut v = vec![Jet::ZERO; n];
            v[i] = Jet::ONE;
            v
        })
    }

    /// `X(f) = df(X)`.
    pub fn apply(&self, f: &ScalarField) -> ScalarField {
        differential(f).contract(self)
    }
}

impl OneFormField {
    /// Coordinate differential `dx^i`.
    pub fn coordinate(chart: ChartRef, i: usize) -> Self {
        let n = chart.dim();
        let label = format!("d{}", chart.names()[i]);
        OneFormField::new(chart, label, move |_| {
            let mut v = vec![Jet::ZERO; n];
            v[i] = Jet::ONE;
            v
        })
    }

    /// `α(X)`.
    pub fn contract(&self, x: &VectorField) -> ScalarField {
        let (a, v) = (self.f.clone(), x.f.clone());
        ScalarField::try_new(self.chart.clone(), format!("<{}, {}>", self.label, x.label), move |p| {
            Ok(a(p)?.into_iter().zip(v(p)?).map(|(ai, vi)| ai * vi).sum())
        })
    }
}

/// A 2-form field; evaluates to a row-major `n × n` antisymmetric matrix.
#[derive(Clone)]
pub struct TwoFormField {
    chart: ChartRef,
    label: String,
    f: Arc<JetVecFn>,
}

impl fmt::Debug for TwoFormField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TwoFormField({})", self.label)
    }
}

impl TwoFormField {
    /// From a closure returning the row-major component matrix.
    pub fn try_new(
        chart: ChartRef,
        label: impl Into<String>,
        f: impl Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync + 'static,
    ) -> Self {
        TwoFormField {
            chart,
            label: label.into(),
            f: Arc::new(f),
        }
    }

    /// `Σ c_k(x) dx^{i_k} ∧ dx^{j_k}`.
    pub fn from_wedge_terms(chart: ChartRef, label: impl Into<String>, terms: Vec<(usize, usize, ScalarField)>) -> Self {
        let n = chart.dim();
        let terms: Vec<(usize, usize, Arc<JetScalarFn>)> = terms.into_iter().map(|(i, j, c)| (i, j, c.f)).collect();
        TwoFormField::try_new(chart, label, move |x| {
            let mut m = vec![Jet::ZERO; n * n];
            for (i, j, c) in &terms {
                let v = c(x)?;
                m[i * n + j] += v;
                m[j * n + i] -= v;
            }
            Ok(m)
        })
    }

    /// Constant-coefficient form.
    pub fn constant(chart: ChartRef, label: impl Into<String>, form: &AntisymmetricForm) -> Self {
        let n = chart.dim();
        let m: Vec<Jet> = (0..n * n)
            .map(|k| Jet::constant(form.matrix()[(k / n, k % n)]))
            .collect();
        TwoFormField::try_new(chart, label, move |_| Ok(m.clone()))
    }

    /// `Σ dq^i ∧ dp_i` on a Darboux chart with `n` degrees of freedom.
    pub fn darboux(chart: ChartRef, n: usize) -> Self {
        let terms: Vec<_> = (0..n).map(|i| (i, n + i, 1.0)).collect();
        let form = AntisymmetricForm::from_wedges(chart.dim(), &terms);
        TwoFormField::constant(chart, "dq^i∧dp_i", &form)
    }

    pub fn zero(chart: ChartRef) -> Self {
        let n = chart.dim();
        TwoFormField::try_new(chart, "0", move |_| Ok(vec![Jet::ZERO; n * n]))
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn eval(&self, x: &[f64]) -> Result<AntisymmetricForm> {
        self.chart.check(x)?;
        let n = self.chart.dim();
        let m = (self.f)(&lift(x))?;
        AntisymmetricForm::new(DMatrix::from_fn(n, n, |i, j| m[i * n + j].value()))
    }

    pub fn eval_jet(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        check_jets(&self.chart, x)?;
        (self.f)(x)
    }

    pub fn add(&self, other: &TwoFormField) -> TwoFormField {
        let (f, g) = (self.f.clone(), other.f.clone());
        TwoFormField::try_new(self.chart.clone(), format!("{} + {}", self.label, other.label), move |x| {
            Ok(f(x)?.into_iter().zip(g(x)?).map(|(a, b)| a + b).collect())
        })
    }

    pub fn sub(&self, other: &TwoFormField) -> TwoFormField {
        let (f, g) = (self.f.clone(), other.f.clone());
        TwoFormField::try_new(self.chart.clone(), format!("{} - {}", self.label, other.label), move |x| {
            Ok(f(x)?.into_iter().zip(g(x)?).map(|(a, b)| a - b).collect())
        })
    }

    pub fn scale(&self, c: f64) -> TwoFormField {
        let f = self.f.clone();
        TwoFormField::try_new(self.chart.clone(), format!("{c} * ({})", self.label), move |x| {
            Ok(f(x)?.into_iter().map(|a| a * c).collect())
        })
    }
}

/// A smooth map between two charts.
#[derive(Clone)]
pub struct SmoothMap {
    source: ChartRef,
    target: ChartRef,
    label: String,
    f: Arc<JetVecFn>,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmoothMap({})", self.label)
    }
}

impl SmoothMap {
    pub fn new(
        source: ChartRef,
        target: ChartRef,
        label: impl Into<String>,
        f: impl Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    ) -> Self {
        SmoothMap {
            source,
            target,
            label: label.into(),
            f: Arc::new(move |x| Ok(f(x))),
        }
    }

    pub fn try_new(
        source: ChartRef,
        target: ChartRef,
        label: impl Into<String>,
        f: impl Fn(&[Jet]) -> Result<Vec<Jet>> + Send + Sync + 'static,
    ) -> Self {
        SmoothMap {
            source,
            target,
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn identity(chart: ChartRef) -> Self {
        SmoothMap::new(chart.clone(), chart, "id", |x| x.to_vec())
    }

    pub fn source(&self) -> &ChartRef {
        &self.source
    }

    pub fn target(&self) -> &ChartRef {
        &self.target
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.source.check(x)?;
        Ok(values(&(self.f)(&lift(x))?))
    }

    pub fn eval_jet(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        check_jets(&self.source, x)?;
        (self.f)(x)
    }

    /// Jacobian `∂φ^i/∂y^a` as a `target × source` matrix.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.source.check(x)?;
        let rows = jacobian_jet(&*self.f, &lift(x))?;
        Ok(DMatrix::from_fn(self.target.dim(), self.source.dim(), |i, a| {
            rows[a][i].value()
        }))
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &SmoothMap) -> SmoothMap {
        let (f, g) = (self.f.clone(), inner.f.clone());
        SmoothMap::try_new(
            inner.source.clone(),
            self.target.clone(),
            format!("{} ∘ {}", self.label, inner.label),
            move |x| f(&g(x)?),
        )
    }
}

// ---------------------------------------------------------------------------
// Operations

/// `df`, by forward-mode differentiation.
pub fn differential(f: &ScalarField) -> OneFormField {
    let g = scalar_as_vec(f.f.clone());
    OneFormField::try_new(f.chart.clone(), format!("d({})", f.label), move |x| {
        Ok(jacobian_jet(&g, x)?.into_iter().map(|row| row[0]).collect())
    })
}

/// `dα` with `(dα)_ij = ∂_i α_j − ∂_j α_i`.
pub fn exterior_derivative(alpha: &OneFormField) -> TwoFormField {
    let f = alpha.f.clone();
    let n = alpha.chart.dim();
    TwoFormField::try_new(alpha.chart.clone(), format!("d({})", alpha.label), move |x| {
        let jac = jacobian_jet(&*f, x)?;
        let mut m = vec![Jet::ZERO; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = jac[i][j] - jac[j][i];
                m[i * n + j] = v;
                m[j * n + i] = -v;
            }
        }
        Ok(m)
    })
}

/// `α∧β` with `(α∧β)_ij = α_i β_j − α_j β_i`.
pub fn wedge(alpha: &OneFormField, beta: &OneFormField) -> TwoFormField {
    let (f, g) = (alpha.f.clone(), beta.f.clone());
    let n = alpha.chart.dim();
    TwoFormField::try_new(alpha.chart.clone(), format!("{}∧{}", alpha.label, beta.label), move |x| {
        let a = f(x)?;
        let b = g(x)?;
        let mut m = vec![Jet::ZERO; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = a[i] * b[j] - a[j] * b[i];
                m[i * n + j] = v;
                m[j * n + i] = -v;
            }
        }
        Ok(m)
    })
}

/// `i_X ω` with components `Σ_i X^i ω_ij`.
pub fn interior_product(x: &VectorField, omega: &TwoFormField) -> OneFormField {
    let (v, w) = (x.f.clone(), omega.f.clone());
    let n = omega.chart.dim();
    OneFormField::try_new(omega.chart.clone(), format!("i_({}) {}", x.label, omega.label), move |p| {
        let xv = v(p)?;
        let m = w(p)?;
        Ok((0..n).map(|j| (0..n).map(|i| xv[i] * m[i * n + j]).sum()).collect())
    })
}

/// `[X, Y]^i = X^j ∂_j Y^i − Y^j ∂_j X^i`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> VectorField {
    let (f, g) = (x.f.clone(), y.f.clone());
    let n = x.chart.dim();
    VectorField::try_new(x.chart.clone(), format!("[{}, {}]", x.label, y.label), move |p| {
        let xv = f(p)?;
        let yv = g(p)?;
        let dx = jacobian_jet(&*f, p)?;
        let dy = jacobian_jet(&*g, p)?;
        Ok((0..n)
            .map(|i| (0..n).map(|j| xv[j] * dy[j][i] - yv[j] * dx[j][i]).sum())
            .collect())
    })
}

/// `f ∘ φ`.
pub fn pullback_scalar(phi: &SmoothMap, f: &ScalarField) -> ScalarField {
    let (m, g) = (phi.f.clone(), f.f.clone());
    let target = phi.target.clone();
    ScalarField::try_new(phi.source.clone(), format!("φ*({})", f.label), move |y| {
        let x = m(y)?;
        target.check(&values(&x))?;
        g(&x)
    })
}

/// `(φ*α)_a = Σ_i α_i(φ(y)) ∂_a φ^i`.
pub fn pullback_1form(phi: &SmoothMap, alpha: &OneFormField) -> OneFormField {
    let (m, a) = (phi.f.clone(), alpha.f.clone());
    let target = phi.target.clone();
    let (ns, nt) = (phi.source.dim(), phi.target.dim());
    OneFormField::try_new(phi.source.clone(), format!("φ*({})", alpha.label), move |y| {
        let x = m(y)?;
        target.check(&values(&x))?;
        let jac = jacobian_jet(&*m, y)?;
        let av = a(&x)?;
        Ok((0..ns).map(|k| (0..nt).map(|i| av[i] * jac[k][i]).sum()).collect())
    })
}

/// `(φ*ω)_ab = Σ_ij ∂_a φ^i ω_ij(φ(y)) ∂_b φ^j`.
pub fn pullback_2form(phi: &SmoothMap, omega: &TwoFormField) -> TwoFormField {
    let (m, w) = (phi.f.clone(), omega.f.clone());
    let target = phi.target.clone();
    let (ns, nt) = (phi.source.dim(), phi.target.dim());
    TwoFormField::try_new(phi.source.clone(), format!("φ*({})", omega.label), move |y| {
        let x = m(y)?;
        target.check(&values(&x))?;
        let jac = jacobian_jet(&*m, y)?;
        let wm = w(&x)?;
        // t[a][j] = Σ_i J_ia ω_ij
        let t: Vec<Vec<Jet>> = (0..ns)
            .map(|a| (0..nt).map(|j| (0..nt).map(|i| jac[a][i] * wm[i * nt + j]).sum()).collect())
            .collect();
        let mut out = vec![Jet::ZERO; ns * ns];
        for a in 0..ns {
            for b in (a + 1)..ns {
                let v: Jet = (0..nt).map(|j| t[a][j] * jac[b][j]).sum();
                out[a * ns + b] = v;
                out[b * ns + a] = -v;
            }
        }
        Ok(out)
    })
}

/// Components `(dω)_{ijk} = ∂_i ω_jk + ∂_j ω_ki + ∂_k ω_ij`, row-major `n³`.
pub(crate) fn d_two_form_jet(w: &JetVecFn, x: &[Jet], n: usize) -> Result<Vec<Jet>> {
    let jac = jacobian_jet(w, x)?;
    let mut out = vec![Jet::ZERO; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out[(i * n + j) * n + k] = jac[i][j * n + k] + jac[j][k * n + i] + jac[k][i * n + j];
            }
        }
    }
    Ok(out)
}

/// `dω` at a point, as the `n³` component array.
pub fn d_two_form_at(omega: &TwoFormField, x: &[f64]) -> Result<Vec<f64>> {
    omega.chart.check(x)?;
    let n = omega.chart.dim();
    Ok(values(&d_two_form_jet(&*omega.f, &lift(x), n)?))
}

/// `L_X ω = i_X dω + d(i_X ω)`.
pub fn lie_derivative_2form(x: &VectorField, omega: &TwoFormField) -> TwoFormField {
    let n = omega.chart.dim();
    let (v, w) = (x.f.clone(), omega.f.clone());
    let d_inner = exterior_derivative(&interior_product(x, omega));
    let dif = d_inner.f.clone();
    TwoFormField::try_new(omega.chart.clone(), format!("L_({}) {}", x.label, omega.label), move |p| {
        let xv = v(p)?;
        let dw = d_two_form_jet(&*w, p, n)?;
        let mut out = dif(p)?;
        for j in 0..n {
            for k in 0..n {
                let c: Jet = (0..n).map(|i| xv[i] * dw[(i * n + j) * n + k]).sum();
                out[j * n + k] += c;
            }
        }
        Ok(out)
    })
}

/// `L_X α = i_X dα + d(α(X))`.
pub fn lie_derivative_1form(x: &VectorField, alpha: &OneFormField) -> OneFormField {
    let a = interior_product(x, &exterior_derivative(alpha));
    let b = differential(&alpha.contract(x));
    a.add(&b).with_label(format!("L_({}) {}", x.label, alpha.label))
}

/// `L_X ω` at a point by differentiating the pullback along the first-order
/// flow approximation `y ↦ y + εX(y)`: central differences at `ε` and `ε/2`
/// combined by Richardson extrapolation.
///
/// Independent of the Cartan route in [`lie_derivative_2form`].
pub fn lie_derivative_2form_flow(x: &VectorField, omega: &TwoFormField, p: &[f64], eps: f64) -> Result<DMatrix<f64>> {
    omega.chart.check(p)?;
    let n = omega.chart.dim();
    let xv = x.eval(p)?;
    let dx = {
        let rows = jacobian_jet(&*x.f, &lift(p))?;
        DMatrix::from_fn(n, n, |i, j| rows[j][i].value())
    };
    let pulled = |e: f64| -> Result<DMatrix<f64>> {
        let q: Vec<f64> = (0..n).map(|i| p[i] + e * xv[i]).collect();
        let w = omega.eval(&q)?;
        let jac = DMatrix::identity(n, n) + &dx * e;
        Ok(jac.transpose() * w.matrix() * jac)
    };
    let central = |e: f64| -> Result<DMatrix<f64>> { Ok((pulled(e)? - pulled(-e)?) / (2.0 * e)) };
    let coarse = central(eps)?;
    let fine = central(eps / 2.0)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

/// Central-difference gradient, an oracle independent of the dual-number path.
pub fn central_difference_gradient(f: &ScalarField, x: &[f64]) -> Result<DVector<f64>> {
    let n = x.len();
    let mut g = DVector::zeros(n);
    for i in 0..n {
        let h = fd_step(x[i]);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f.eval(&xp)? - f.eval(&xm)?) / (2.0 * h);
    }
    Ok(g)
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosednessReport {
    pub form: String,
    pub samples: usize,
    pub max_component: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Default tolerance for sampled closedness checks on dual-number derivatives.
pub const CLOSED_TOL: f64 = 1e-8;

/// Max `|(dω)_{ijk}|` over the sample points.
pub fn closedness_check(omega: &TwoFormField, points: &[Vec<f64>], tol: f64) -> Result<ClosednessReport> {
    let mut max_component: f64 = 0.0;
    for p in points {
        let d = d_two_form_at(omega, p)?;
        max_component = d.iter().fold(max_component, |m, v| m.max(v.abs()));
    }
    Ok(ClosednessReport {
        form: omega.label.clone(),
        samples: points.len(),
        max_component,
        tolerance: tol,
        passed: max_component < tol,
    })
}

/// Max `|(dα)_ij|` over the sample points.
pub fn closedness_check_1form(alpha: &OneFormField, points: &[Vec<f64>], tol: f64) -> Result<ClosednessReport> {
    let d = exterior_derivative(alpha);
    let mut max_component: f64 = 0.0;
    for p in points {
        max_component = max_component.max(d.eval(p)?.matrix().amax());
    }
    Ok(ClosednessReport {
        form: alpha.label.clone(),
        samples: points.len(),
        max_component,
        tolerance: tol,
        passed: max_component < tol,
    })
}

/// Vector as `TangentVector` from a plain slice.
pub fn tangent(v: &[f64]) -> TangentVector {
    DVector::from_column_slice(v)
}
