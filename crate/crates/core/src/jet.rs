//! Nested dual numbers with a runtime nesting depth.
//!
//! A [`Jet`] of depth `d` is an element of `ℝ[ε₀, …, ε_{d-1}] / (ε_i²)`: a
//! coefficient for every subset of the infinitesimals, stored by bitmask.
//! Evaluating a function on a jet whose `ε_k` part is a seeded direction
//! yields the directional derivative in the `ε_k` coefficient, and nesting
//! seeds gives exact mixed partials up to order [`MAX_DEPTH`].
//!
//! Field closures are written once against `&[Jet]` and can then be
//! evaluated plainly (depth 0) or differentiated as deep as needed, which is
//! what lets derived fields (`dH`, `ω + dH∧η`, Reeb fields solved from those)
//! be differentiated again without a symbolic layer.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Maximum number of nested infinitesimals carried by a [`Jet`].
pub const MAX_DEPTH: usize = 3;
const SLOTS: usize = 1 << MAX_DEPTH;

#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    depth: u8,
    c: [f64; SLOTS],
}

impl Jet {
    pub const ZERO: Jet = Jet {
        depth: 0,
        c: [0.0; SLOTS],
    };
    pub const ONE: Jet = Jet::constant(1.0);

    pub const fn constant(v: f64) -> Self {
        let mut c = [0.0; SLOTS];
        c[0] = v;
        Jet { depth: 0, c }
    }

    /// Real part.
    #[inline]
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.depth as usize
    }

    /// Coefficient of the monomial `∏_{k ∈ mask} ε_k`.
    pub fn coeff(&self, mask: usize) -> f64 {
        self.c[mask]
    }

    pub fn is_finite(&self) -> bool {
        self.c[..1 << self.depth].iter().all(|v| v.is_finite())
    }

    #[inline]
    fn len(&self) -> usize {
        1 << self.depth
    }

    /// Returns `self + dir·ε_k` where `k = depth`; the result has depth `depth + 1`.
    ///
    /// Returns `None` when the jet is already at [`MAX_DEPTH`].
    pub fn seeded(&self, depth: usize, dir: f64) -> Option<Jet> {
        if depth >= MAX_DEPTH {
            return None;
        }
        let mut out = *self;
        out.depth = (depth + 1) as u8;
        out.c[1 << depth] = dir;
        Some(out)
    }

    /// Extracts the coefficient of `ε_k` as a jet in the remaining `ε_0..ε_{k-1}`.
    pub fn tangent(&self, k: usize) -> Jet {
        let mut out = Jet::ZERO;
        out.depth = k as u8;
        if self.depth() > k {
            let bit = 1 << k;
            for s in 0..bit {
                out.c[s] = self.c[s | bit];
            }
        }
        out
    }

    /// Truncates the jet to its first `k` infinitesimals.
    pub fn truncated(&self, k: usize) -> Jet {
        if self.depth() <= k {
            return *self;
        }
        let mut out = Jet::ZERO;
        out.depth = k as u8;
        out.c[..1 << k].copy_from_slice(&self.c[..1 << k]);
        out
    }

    /// Applies a smooth scalar function given its derivatives at the real part.
    ///
    /// `derivs[k]` must hold `f⁽ᵏ⁾(value)` for `k = 0..=depth`.
    fn apply(&self, derivs: &[f64]) -> Jet {
        let d = self.depth();
        let mut out = Jet::constant(derivs[0]);
        if d == 0 {
            return out;
        }
        out.depth = self.depth;
        let mut nil = *self;
        nil.c[0] = 0.0;
        let mut power = nil;
        let mut factorial = 1.0;
        for (k, fk) in derivs.iter().enumerate().take(d + 1).skip(1) {
            factorial *= k as f64;
            let scale = fk / factorial;
            for s in 0..self.len() {
                out.c[s] += scale * power.c[s];
            }
            if k < d {
                power = power * nil;
            }
        }
        out
    }

    pub fn sin(self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.apply(&[s, c, -s, -c])
    }

    pub fn cos(self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.apply(&[c, -s, -c, s])
    }

    pub fn tan(self) -> Jet {
        self.sin() / self.cos()
    }

    pub fn atan(self) -> Jet {
        let x = self.value();
        let w = 1.0 / (1.0 + x * x);
        self.apply(&[x.atan(), w, -2.0 * x * w * w, (6.0 * x * x - 2.0) * w * w * w])
    }

    /// Four-quadrant `atan2(self, x)`.
    pub fn atan2(self, x: Jet) -> Jet {
        let (y0, x0) = (self.value(), x.value());
        // the rotated ratio has zero real part, so only the atan series near 0 is used
        let u = (self * x0 - x * y0) / (x * x0 + self * y0);
        u.atan() + y0.atan2(x0)
    }

    pub fn exp(self) -> Jet {
        let e = self.value().exp();
        self.apply(&[e, e, e, e])
    }

    pub fn ln(self) -> Jet {
        let x = self.value();
        self.apply(&[x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)])
    }

    pub fn sqrt(self) -> Jet {
        self.powf(0.5)
    }

    pub fn recip(self) -> Jet {
        let x = self.value();
        let r = 1.0 / x;
        self.apply(&[r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    /// `self^r` for a real constant exponent.
    pub fn powf(self, r: f64) -> Jet {
        let x = self.value();
        let mut derivs = [0.0; MAX_DEPTH + 1];
        let mut coef = 1.0;
        for (k, d) in derivs.iter_mut().enumerate() {
            *d = coef * x.powf(r - k as f64);
            coef *= r - k as f64;
        }
        self.apply(&derivs)
    }

    pub fn powi(self, n: i32) -> Jet {
        match n {
            0 => Jet::ONE,
            1 => self,
            2 => self * self,
            n if n < 0 => self.powi(-n).recip(),
            n => {
                let x = self.value();
                let mut derivs = [0.0; MAX_DEPTH + 1];
                let mut coef = 1.0;
                for (k, d) in derivs.iter_mut().enumerate() {
                    let e = n - k as i32;
                    *d = if e >= 0 { coef * x.powi(e) } else { 0.0 };
                    coef *= e as f64;
                }
                self.apply(&derivs)
            }
        }
    }

    /// `self^other` for a jet exponent, via `exp(other · ln self)`.
    pub fn pow(self, other: Jet) -> Jet {
        if other.depth == 0 {
            let e = other.value();
            if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
                return self.powi(e as i32);
            }
            return self.powf(e);
        }
        (other * self.ln()).exp()
    }
}

impl Default for Jet {
    fn default() -> Self {
        Jet::ZERO
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.depth == 0 {
            write!(f, "Jet({})", self.c[0])
        } else {
            write!(f, "Jet{:?}", &self.c[..self.len()])
        }
    }
}

impl fmt::Display for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.c[0])
    }
}

impl Add for Jet {
    type Output = Jet;
    #[inline]
    fn add(mut self, rhs: Jet) -> Jet {
        self.depth = self.depth.max(rhs.depth);
        for s in 0..self.len() {
            self.c[s] += rhs.c[s];
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    #[inline]
    fn sub(mut self, rhs: Jet) -> Jet {
        self.depth = self.depth.max(rhs.depth);
        for s in 0..self.len() {
            self.c[s] -= rhs.c[s];
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, rhs: Jet) -> Jet {
        let depth = self.depth.max(rhs.depth);
        if depth == 0 {
            return Jet::constant(self.c[0] * rhs.c[0]);
        }
        if rhs.depth == 0 {
            return self * rhs.c[0];
        }
        if self.depth == 0 {
            return rhs * self.c[0];
        }
        let mut out = Jet::ZERO;
        out.depth = depth;
        let n = 1usize << depth;
        for s in 0..n {
            // sum over submasks a of s: lhs[a] * rhs[s \ a]
            let mut acc = 0.0;
            let mut a = s;
            loop {
                acc += self.c[a] * rhs.c[s ^ a];
                if a == 0 {
                    break;
                }
                a = (a - 1) & s;
            }
            out.c[s] = acc;
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[inline]
    fn div(self, rhs: Jet) -> Jet {
        if rhs.depth == 0 {
            return self * (1.0 / rhs.c[0]);
        }
        self * rhs.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    #[inline]
    fn neg(mut self) -> Jet {
        for s in 0..self.len() {
            self.c[s] = -self.c[s];
        }
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn mul(mut self, rhs: f64) -> Jet {
        for s in 0..self.len() {
            self.c[s] *= rhs;
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    #[inline]
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        rhs + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        -rhs + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl Div<Jet> for f64 {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        rhs.recip() * self
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self = *self - rhs;
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

impl std::iter::Sum for Jet {
    fn sum<I: Iterator<Item = Jet>>(iter: I) -> Jet {
        iter.fold(Jet::ZERO, |a, b| a + b)
    }
}

/// Largest depth among a slice of jets.
pub fn depth_of(x: &[Jet]) -> usize {
    x.iter().map(Jet::depth).max().unwrap_or(0)
}

/// Lifts a plain point to depth-0 jets.
pub fn lift(x: &[f64]) -> Vec<Jet> {
    x.iter().copied().map(Jet::constant).collect()
}

/// Real parts of a slice of jets.
pub fn values(x: &[Jet]) -> Vec<f64> {
    x.iter().map(Jet::value).collect()
}

/// Seeds a fresh infinitesimal along `dir` on every coordinate of `x`.
///
/// Returns the seeded point and the index of the new infinitesimal, or `None`
/// when the point is already at [`MAX_DEPTH`].
pub fn seed_direction(x: &[Jet], dir: &[f64]) -> Option<(Vec<Jet>, usize)> {
    let depth = depth_of(x);
    let seeded = x
        .iter()
        .zip(dir)
        .map(|(xi, &di)| xi.seeded(depth, di))
        .collect::<Option<Vec<_>>>()?;
    Some((seeded, depth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d1(x: f64) -> Jet {
        Jet::constant(x).seeded(0, 1.0).unwrap()
    }

    #[test]
    fn first_derivatives_of_elementary_functions() {
        let x: f64 = 0.7;
        let cases: Vec<(fn(Jet) -> Jet, f64)> = vec![
            (Jet::sin, x.cos()),
            (Jet::cos, -x.sin()),
            (Jet::exp, x.exp()),
            (Jet::atan, 1.0 / (1.0 + x * x)),
            (Jet::ln, 1.0 / x),
            (Jet::sqrt, 0.5 / x.sqrt()),
            (Jet::recip, -1.0 / (x * x)),
            (Jet::tan, 1.0 / (x.cos() * x.cos())),
        ];
        for (f, expected) in cases {
            let y = f(d1(x));
            assert!((y.tangent(0).value() - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn nested_seeds_give_higher_derivatives() {
        // f(x) = x^3 sin x; f''' via three nested seeds at the same direction
        let x = 1.3_f64;
        let j = Jet::constant(x)
            .seeded(0, 1.0)
            .unwrap()
            .seeded(1, 1.0)
            .unwrap()
            .seeded(2, 1.0)
            .unwrap();
        let y = j.powi(3) * j.sin();
        let (s, c) = x.sin_cos();
        let f1 = 3.0 * x * x * s + x.powi(3) * c;
        let f2 = 6.0 * x * s + 6.0 * x * x * c - x.powi(3) * s;
        let f3 = 6.0 * s + 18.0 * x * c - 9.0 * x * x * s - x.powi(3) * c;
        assert!((y.coeff(0b001) - f1).abs() < 1e-12);
        assert!((y.coeff(0b011) - f2).abs() < 1e-12);
        assert!((y.coeff(0b111) - f3).abs() < 1e-11);
    }

    #[test]
    fn mixed_partials_commute() {
        // f(x, y) = exp(x y) + x / y
        let (x0, y0) = (0.4, 1.7);
        let x = Jet::constant(x0).seeded(0, 1.0).unwrap().seeded(1, 0.0).unwrap();
        let y = Jet::constant(y0).seeded(0, 0.0).unwrap().seeded(1, 1.0).unwrap();
        let f = (x * y).exp() + x / y;
        let fxy = (1.0 + x0 * y0) * (x0 * y0).exp() - 1.0 / (y0 * y0);
        assert!((f.coeff(0b11) - fxy).abs() < 1e-12);
        let x = Jet::constant(x0).seeded(0, 0.0).unwrap().seeded(1, 1.0).unwrap();
        let y = Jet::constant(y0).seeded(0, 1.0).unwrap().seeded(1, 0.0).unwrap();
        let g = (x * y).exp() + x / y;
        assert!((g.coeff(0b11) - f.coeff(0b11)).abs() < 1e-13);
    }

    #[test]
    fn powers_agree_across_routes() {
        let x = d1(1.9);
        for n in [-3, -1, 0, 1, 2, 3, 5] {
            let a = x.powi(n);
            let b = x.powf(n as f64);
            let c = x.pow(Jet::constant(n as f64));
            assert!((a.value() - b.value()).abs() < 1e-12);
            assert!((a.coeff(1) - b.coeff(1)).abs() < 1e-11);
            assert!((a.coeff(1) - c.coeff(1)).abs() < 1e-11);
        }
        let e = d1(0.3);
        let p = Jet::constant(2.0).pow(e);
        assert!((p.coeff(1) - 2f64.powf(0.3) * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn tangent_extraction_truncates_depth() {
        let x = Jet::constant(2.0).seeded(0, 1.0).unwrap().seeded(1, 1.0).unwrap();
        let y = x * x;
        let t = y.tangent(1);
        assert_eq!(t.depth(), 1);
        assert!((t.value() - 4.0).abs() < 1e-15);
        assert!((t.coeff(1) - 2.0).abs() < 1e-15);
        assert!(Jet::constant(1.0).seeded(MAX_DEPTH, 1.0).is_none());
    }

    #[test]
    fn atan2_in_every_quadrant() {
        for &(y, x) in &[(0.3, 0.9), (0.4, -0.7), (-0.5, -0.8), (-1.2, 0.1)] {
            let yj = Jet::constant(y).seeded(0, 1.0).unwrap();
            let xj = Jet::constant(x).seeded(1, 1.0).unwrap();
            let a = yj.atan2(xj);
            let r2 = x * x + y * y;
            assert_eq!(a.value(), f64::atan2(y, x));
            assert!((a.coeff(0b01) - x / r2).abs() < 1e-15);
            assert!((a.coeff(0b10) + y / r2).abs() < 1e-15);
            // ∂²/∂y∂x of atan2(y, x) = (y² − x²)/r⁴
            assert!((a.coeff(0b11) - (y * y - x * x) / (r2 * r2)).abs() < 1e-14);
        }
    }
}
