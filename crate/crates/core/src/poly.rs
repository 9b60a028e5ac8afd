//! Sparse multivariate polynomials with rational coefficients.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::Zero;

use crate::scalar::{rational_to_f64, Rational, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u8>, Rational>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: Rational) -> Self {
        let mut p = Poly::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Poly::zero(nvars);
        p.add_term(e, crate::scalar::int(1));
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u8>, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, exps: Vec<u8>, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(exps) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn scale(&self, c: &Rational) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, v) in &self.terms {
            out.add_term(e.clone(), v * c);
        }
        out
    }

    pub fn derivative(&self, var: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, v) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[var] -= 1;
            out.add_term(e2, v * crate::scalar::int(e[var] as i64));
        }
        out
    }

    /// Keeps the variables in `keep` (in that order), substituting zero for
    /// all others.
    pub fn restrict(&self, keep: &[usize]) -> Poly {
        let mut out = Poly::zero(keep.len());
        for (e, v) in &self.terms {
            let dropped_nonzero = e.iter().enumerate().any(|(i, &p)| p > 0 && !keep.contains(&i));
            if dropped_nonzero {
                continue;
            }
            out.add_term(keep.iter().map(|&i| e[i]).collect(), v.clone());
        }
        out
    }

    /// Total degree (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|e| e.iter().map(|&p| p as usize).sum()).max().unwrap_or(0)
    }

    pub fn eval<T: Scalar>(&self, point: &[T]) -> T {
        assert_eq!(point.len(), self.nvars);
        let template = &point[0];
        let mut acc = template.zero_like();
        for (e, c) in &self.terms {
            let mut t = template.lift(c);
            for (x, &p) in point.iter().zip(e) {
                for _ in 0..p {
                    t = t * x.clone();
                }
            }
            acc = acc + t;
        }
        acc
    }

    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly {
            terms: self
                .terms
                .iter()
                .map(|(e, c)| {
                    let factors = e.iter().enumerate().filter(|(_, &p)| p > 0).map(|(i, &p)| (i, p)).collect();
                    (rational_to_f64(c), factors)
                })
                .collect(),
        }
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(mut self, rhs: Poly) -> Poly {
        for (e, v) in rhs.terms {
            self.add_term(e, v);
        }
        self
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        self + (-rhs)
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(mut self) -> Poly {
        for v in self.terms.values_mut() {
            *v = -v.clone();
        }
        self
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (ea, va) in &self.terms {
            for (eb, vb) in &rhs.terms {
                let e: Vec<u8> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, va * vb);
            }
        }
        out
    }
}

impl Scalar for Poly {
    fn zero_like(&self) -> Self {
        Poly::zero(self.nvars)
    }
    fn one_like(&self) -> Self {
        Poly::constant(self.nvars, crate::scalar::int(1))
    }
    fn lift(&self, q: &Rational) -> Self {
        Poly::constant(self.nvars, q.clone())
    }
    fn is_zero_value(&self) -> bool {
        self.is_zero()
    }
}

/// Floating-point evaluation form of a [`Poly`].
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, u8)>)>,
}

impl CompiledPoly {
    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, factors) in &self.terms {
            let mut t = *c;
            for &(i, p) in factors {
                t *= point[i].powi(p as i32);
            }
            acc += t;
        }
        acc
    }

    pub fn eval<T: Scalar>(&self, point: &[T], constant: impl Fn(f64) -> T) -> T {
        let mut acc: Option<T> = None;
        for (c, factors) in &self.terms {
            let mut t = constant(*c);
            for &(i, p) in factors {
                for _ in 0..p {
                    t = t * point[i].clone();
                }
            }
            acc = Some(match acc {
                None => t,
                Some(a) => a + t,
            });
        }
        acc.unwrap_or_else(|| constant(0.0))
    }
}
