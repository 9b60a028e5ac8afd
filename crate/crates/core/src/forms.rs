//! Left-invariant exterior forms (Chevalley–Eilenberg cochains with trivial
//! coefficients) in the wedge basis `e^{i_1} ∧ … ∧ e^{i_k}`, `i_1 < … < i_k`.
//!
//! Forms are evaluated on basis vectors with the determinant convention,
//! `(e^1 ∧ e^2)(e_1, e_2) = 1`, which is the alternation normalization with
//! the `(m+n)!/(m! n!)` factor in the wedge product.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::algebra::LieAlgebra;
use crate::error::{Error, Result};
use crate::scalar::{format_rational, parse_rational, Coeff, Rational};

/// All strictly increasing `k`-subsets of `0..n`, lexicographically ordered.
pub fn wedge_basis(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// Sign of the permutation sorting `indices`, or `None` on a repeat.
pub fn sort_sign(indices: &[usize]) -> Option<(Vec<usize>, i32)> {
    let mut v = indices.to_vec();
    let mut sign = 1;
    // insertion sort counting transpositions
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
        if j > 0 && v[j - 1] == v[j] {
            return None;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v, sign))
}

#[derive(Clone, Debug, PartialEq)]
pub struct KForm<T> {
    dim: usize,
    degree: usize,
    coeffs: BTreeMap<Vec<usize>, T>,
}

impl<T: Coeff> KForm<T> {
    pub fn zero(dim: usize, degree: usize) -> Self {
        KForm { dim, degree, coeffs: BTreeMap::new() }
    }

    /// The constant function 1.
    pub fn unit(dim: usize) -> Self {
        KForm::basis(dim, &[], T::from_q(&crate::scalar::int(1)))
    }

    /// `c · e^{i_1} ∧ … ∧ e^{i_k}` for any (not necessarily sorted) indices.
    pub fn basis(dim: usize, indices: &[usize], c: T) -> Self {
        let mut f = KForm::zero(dim, indices.len());
        if let Some((sorted, sign)) = sort_sign(indices) {
            assert!(sorted.iter().all(|&i| i < dim), "basis index out of range");
            f.add_term(sorted, if sign < 0 { -c } else { c });
        }
        f
    }

    pub fn from_dense(dim: usize, degree: usize, values: &[T]) -> Self {
        let basis = wedge_basis(dim, degree);
        assert_eq!(basis.len(), values.len());
        let mut f = KForm::zero(dim, degree);
        for (idx, v) in basis.into_iter().zip(values) {
            f.add_term(idx, v.clone());
        }
        f
    }

    pub fn to_dense(&self) -> Vec<T> {
        wedge_basis(self.dim, self.degree).iter().map(|idx| self.coeff(idx)).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, &T)> {
        self.coeffs.iter()
    }

    /// Coefficient of a sorted index tuple.
    pub fn coeff(&self, sorted: &[usize]) -> T {
        self.coeffs.get(sorted).cloned().unwrap_or_else(T::zero_value)
    }

    /// Value on `(e_{i_1}, …, e_{i_k})` for arbitrary index order.
    pub fn eval_basis(&self, indices: &[usize]) -> T {
        match sort_sign(indices) {
            Some((sorted, sign)) => {
                let c = self.coeff(&sorted);
                if sign < 0 {
                    -c
                } else {
                    c
                }
            }
            None => T::zero_value(),
        }
    }

    fn add_term(&mut self, sorted: Vec<usize>, c: T) {
        if c.is_zero_value() {
            return;
        }
        match self.coeffs.remove(&sorted) {
            Some(old) => {
                let s = old + c;
                if !s.is_zero_value() {
                    self.coeffs.insert(sorted, s);
                }
            }
            None => {
                self.coeffs.insert(sorted, c);
            }
        }
    }

    pub fn add(&self, other: &KForm<T>) -> KForm<T> {
        assert_eq!((self.dim, self.degree), (other.dim, other.degree), "form shape mismatch");
        let mut out = self.clone();
        for (idx, c) in &other.coeffs {
            out.add_term(idx.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, s: &T) -> KForm<T> {
        let mut out = KForm::zero(self.dim, self.degree);
        for (idx, c) in &self.coeffs {
            out.add_term(idx.clone(), c.clone() * s.clone());
        }
        out
    }

    pub fn sub(&self, other: &KForm<T>) -> KForm<T> {
        self.add(&other.scale(&(-T::from_q(&crate::scalar::int(1)))))
    }

    pub fn map<U: Coeff>(&self, f: impl Fn(&T) -> U) -> KForm<U> {
        let mut out = KForm::zero(self.dim, self.degree);
        for (idx, c) in &self.coeffs {
            out.add_term(idx.clone(), f(c));
        }
        out
    }

    /// Exterior product; degrees beyond the dimension give the zero form.
    pub fn wedge(&self, other: &KForm<T>) -> KForm<T> {
        assert_eq!(self.dim, other.dim, "wedge of forms on different algebras");
        let mut out = KForm::zero(self.dim, self.degree + other.degree);
        for (a, ca) in &self.coeffs {
            for (b, cb) in &other.coeffs {
                if a.iter().any(|i| b.contains(i)) {
                    continue;
                }
                let inversions: usize = a.iter().map(|i| b.iter().filter(|j| *j < i).count()).sum();
                let mut merged: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
                merged.sort_unstable();
                let c = ca.clone() * cb.clone();
                out.add_term(merged, if inversions % 2 == 1 { -c } else { c });
            }
        }
        out
    }

    /// Chevalley–Eilenberg differential with trivial coefficients:
    /// `df(X_1, …, X_{k+1}) = Σ_{a<b} (-1)^{a+b} f([X_a, X_b], X_1, …, X̂_a, …, X̂_b, …)`.
    pub fn differential(&self, alg: &LieAlgebra) -> KForm<T> {
        assert_eq!(self.dim, alg.dim(), "form and algebra dimensions differ");
        let k = self.degree;
        let mut out = KForm::zero(self.dim, k + 1);
        if k + 1 > self.dim || self.is_zero() {
            return out;
        }
        let mut brackets: HashMap<(usize, usize), Vec<(usize, T)>> = HashMap::new();
        for t in alg.terms() {
            brackets.entry((t.i, t.j)).or_default().push((t.k, T::from_q(&t.coeff)));
        }
        if brackets.is_empty() {
            return out;
        }
        for target in wedge_basis(self.dim, k + 1) {
            let mut acc = T::zero_value();
            for a in 0..=k {
                for b in a + 1..=k {
                    let Some(br) = brackets.get(&(target[a], target[b])) else {
                        continue;
                    };
                    // (a + 1) + (b + 1) has the parity of a + b
                    let negative = (a + b) % 2 == 1;
                    let rest: Vec<usize> =
                        target.iter().enumerate().filter(|(p, _)| *p != a && *p != b).map(|(_, &i)| i).collect();
                    for (m, c) in br {
                        let mut args = Vec::with_capacity(k);
                        args.push(*m);
                        args.extend_from_slice(&rest);
                        let v = self.eval_basis(&args);
                        if v.is_zero_value() {
                            continue;
                        }
                        let term = c.clone() * v;
                        acc = if negative { acc - term } else { acc + term };
                    }
                }
            }
            out.add_term(target, acc);
        }
        out
    }
}

impl KForm<f64> {
    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &KForm<f64>) -> f64 {
        self.sub(other).max_abs()
    }
}

impl KForm<Rational> {
    pub fn to_f64(&self) -> KForm<f64> {
        self.map(crate::scalar::rational_to_f64)
    }

    /// Parses expressions such as `"e1^e2"`, `"2*e1^e3 - 1/2*e2^e3"` or `"1"`
    /// over the algebra's basis covector names.
    pub fn parse(text: &str, alg: &LieAlgebra) -> Result<Self> {
        FormParser { text, pos: 0, alg }.parse()
    }
}

struct FormParser<'a> {
    text: &'a str,
    pos: usize,
    alg: &'a LieAlgebra,
}

impl FormParser<'_> {
    fn rest(&self) -> &str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn error(&self, expected: &str) -> Error {
        Error::Syntax { position: self.text[..self.pos].chars().count() + 1, expected: vec![expected.to_string()] }
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> &str {
        let start = self.pos;
        let len: usize = self.rest().chars().take_while(|&c| f(c)).map(char::len_utf8).sum();
        self.pos += len;
        &self.text[start..self.pos]
    }

    fn parse(mut self) -> Result<KForm<Rational>> {
        let dim = self.alg.dim();
        let mut total: Option<KForm<Rational>> = None;
        let mut sign = Rational::from_q(&crate::scalar::int(1));
        self.skip_ws();
        if self.peek() == Some('-') {
            sign = -sign;
            self.pos += 1;
        } else if self.peek() == Some('+') {
            self.pos += 1;
        }
        loop {
            self.skip_ws();
            let term = self.term()?.scale(&sign);
            total = Some(match total {
                None => term,
                Some(t) if t.degree() == term.degree() => t.add(&term),
                Some(_) => return Err(self.error("terms of equal degree")),
            });
            self.skip_ws();
            match self.peek() {
                None => break,
                Some('+') => sign = crate::scalar::int(1),
                Some('-') => sign = crate::scalar::int(-1),
                Some(_) => return Err(self.error("`+`, `-` or end of input")),
            }
            self.pos += 1;
        }
        Ok(total.unwrap_or_else(|| KForm::zero(dim, 0)))
    }

    fn term(&mut self) -> Result<KForm<Rational>> {
        let dim = self.alg.dim();
        let mut coeff = crate::scalar::int(1);
        let mut have_coeff = false;
        if matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '.') {
            let lit = self.take_while(|c| c.is_ascii_digit() || c == '.' || c == '/').to_string();
            coeff = parse_rational(&lit).ok_or_else(|| self.error("rational coefficient"))?;
            have_coeff = true;
            self.skip_ws();
            if self.peek() == Some('*') {
                self.pos += 1;
                self.skip_ws();
            } else {
                return Ok(KForm::unit(dim).scale(&coeff));
            }
        }
        let mut indices = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            let name = self.take_while(|c| c.is_alphanumeric() || c == '_').to_string();
            if name.is_empty() {
                return Err(self.error(if have_coeff || !indices.is_empty() { "basis name" } else { "basis name or coefficient" }));
            }
            let idx = self.alg.basis_names().iter().position(|n| *n == name).ok_or(Error::UnknownSymbol {
                name: name.clone(),
                position: self.text[..start].chars().count() + 1,
            })?;
            indices.push(idx);
            self.skip_ws();
            if self.peek() == Some('^') {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(KForm::basis(dim, &indices, coeff))
    }
}

impl KForm<Rational> {
    pub fn render(&self, names: &[String]) -> String {
        render(self, names, format_rational)
    }
}

impl KForm<f64> {
    pub fn render(&self, names: &[String]) -> String {
        render(self, names, |v| format!("{v}"))
    }
}

/// Wedge-monomial name such as `e1^e3`.
pub fn monomial_name(idx: &[usize], names: &[String]) -> String {
    if idx.is_empty() {
        return "1".to_string();
    }
    idx.iter().map(|&i| names[i].as_str()).collect::<Vec<_>>().join("^")
}

fn render<T: Coeff>(f: &KForm<T>, names: &[String], fmt_c: impl Fn(&T) -> String) -> String {
    if f.is_zero() {
        return "0".to_string();
    }
    f.coeffs.iter().map(|(idx, c)| format!("{}*{}", fmt_c(c), monomial_name(idx, names))).collect::<Vec<_>>().join(" + ")
}

impl fmt::Display for KForm<Rational> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (1..=self.dim).map(|i| format!("e{i}")).collect();
        write!(f, "{}", self.render(&names))
    }
}
