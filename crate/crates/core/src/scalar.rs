//! Coefficient rings shared by forms, polynomials and the group law.
//!
//! The same polynomial and cochain code runs over exact rationals (for the
//! algebraic checks), plain `f64` (for sampling) and [`Jet`] (forward-mode
//! first derivatives).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub type Rational = BigRational;

/// Minimal commutative ring interface.
pub trait Scalar:
    Clone + fmt::Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    /// Embed a rational constant with the same "shape" as `self`
    /// (for jets: same number of partials).
    fn lift(&self, q: &Rational) -> Self;
    fn is_zero_value(&self) -> bool;
}

impl Scalar for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn one_like(&self) -> Self {
        1.0
    }
    fn lift(&self, q: &Rational) -> Self {
        rational_to_f64(q)
    }
    fn is_zero_value(&self) -> bool {
        *self == 0.0
    }
}

impl Scalar for Rational {
    fn zero_like(&self) -> Self {
        Rational::zero()
    }
    fn one_like(&self) -> Self {
        Rational::one()
    }
    fn lift(&self, q: &Rational) -> Self {
        q.clone()
    }
    fn is_zero_value(&self) -> bool {
        self.is_zero()
    }
}

/// Scalars that can be built without a template value: the coefficient
/// fields used by cochains.
pub trait Coeff: Scalar + PartialEq {
    fn from_q(q: &Rational) -> Self;
    fn zero_value() -> Self;
}

impl Coeff for f64 {
    fn from_q(q: &Rational) -> Self {
        rational_to_f64(q)
    }
    fn zero_value() -> Self {
        0.0
    }
}

impl Coeff for Rational {
    fn from_q(q: &Rational) -> Self {
        q.clone()
    }
    fn zero_value() -> Self {
        <Rational as Zero>::zero()
    }
}

pub fn rational_to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        // numerator/denominator too large for a direct conversion
        let n = q.numer().to_f64().unwrap_or(f64::NAN);
        let d = q.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parse `"p"`, `"p/q"` or a finite decimal such as `"-0.25"` exactly.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((ip, fp)) = t.split_once('.') {
        let neg = ip.starts_with('-');
        let ip_digits = ip.trim_start_matches(['-', '+']);
        if !fp.chars().all(|c| c.is_ascii_digit()) || !ip_digits.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        if ip_digits.is_empty() && fp.is_empty() {
            return None;
        }
        let digits = format!("{ip_digits}{fp}");
        let n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
        let d = num_traits::pow(BigInt::from(10), fp.len());
        let q = Rational::new(n, d);
        return Some(if neg { -q } else { q });
    }
    let n: BigInt = t.parse().ok()?;
    Some(Rational::from_integer(n))
}

pub fn format_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// First-order jet: a value together with its partial derivatives with
/// respect to a fixed set of input coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub partials: Vec<f64>,
}

impl Jet {
    pub fn constant(value: f64, n: usize) -> Self {
        Jet { value, partials: vec![0.0; n] }
    }

    /// The `i`-th coordinate variable of an `n`-dimensional input.
    pub fn variable(value: f64, i: usize, n: usize) -> Self {
        let mut partials = vec![0.0; n];
        partials[i] = 1.0;
        Jet { value, partials }
    }

    pub fn n_vars(&self) -> usize {
        self.partials.len()
    }

    /// Chain rule for a scalar function with value `f` and derivative `df`.
    pub fn chain(&self, f: f64, df: f64) -> Jet {
        Jet { value: f, partials: self.partials.iter().map(|p| p * df).collect() }
    }

    pub fn scale(&self, s: f64) -> Jet {
        self.chain(self.value * s, s)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self.value += rhs.value;
        for (a, b) in self.partials.iter_mut().zip(rhs.partials) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        self.value -= rhs.value;
        for (a, b) in self.partials.iter_mut().zip(rhs.partials) {
            *a -= b;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let (u, v) = (self.value, rhs.value);
        let partials = self.partials.iter().zip(&rhs.partials).map(|(du, dv)| du * v + u * dv).collect();
        Jet { value: u * v, partials }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        self.value = -self.value;
        for p in &mut self.partials {
            *p = -*p;
        }
        self
    }
}

impl Scalar for Jet {
    fn zero_like(&self) -> Self {
        Jet::constant(0.0, self.n_vars())
    }
    fn one_like(&self) -> Self {
        Jet::constant(1.0, self.n_vars())
    }
    fn lift(&self, q: &Rational) -> Self {
        Jet::constant(rational_to_f64(q), self.n_vars())
    }
    fn is_zero_value(&self) -> bool {
        self.value == 0.0 && self.partials.iter().all(|p| *p == 0.0)
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
