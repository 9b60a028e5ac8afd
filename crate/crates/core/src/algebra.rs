//! Nilpotent Lie algebras with exact rational structure constants.

use std::path::Path;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::QMatrix;
use crate::scalar::{format_rational, int, parse_rational, rational_to_f64, Rational, Scalar};

/// A nonzero structure constant `[e_i, e_j] ∋ coeff · e_k` with `i < j`.
#[derive(Clone, Debug, PartialEq)]
pub struct BracketTerm {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub coeff: Rational,
    pub coeff_f64: f64,
}

/// A validated nilpotent Lie algebra. Indices are 0-based in the API and
/// 1-based in files.
#[derive(Clone, Debug, PartialEq)]
pub struct LieAlgebra {
    dim: usize,
    basis_names: Vec<String>,
    terms: Vec<BracketTerm>,
    lcs: Vec<usize>,
    weights: Vec<u32>,
}

/// `(i, j, [(k, c)])`: 0-based raw bracket entry `[e_i, e_j] = Σ c e_k`.
pub type RawBracket = (usize, usize, Vec<(usize, Rational)>);

impl LieAlgebra {
    /// Validates structure constants: index ranges, duplicate pairs, the
    /// Jacobi identity and nilpotency, all exactly.
    pub fn new(dim: usize, basis_names: Option<Vec<String>>, brackets: &[RawBracket]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidAlgebra("dimension must be at least 1".into()));
        }
        let basis_names = match basis_names {
            Some(names) => {
                if names.len() != dim {
                    return Err(Error::InvalidAlgebra(format!(
                        "basis has {} names but dim is {dim}",
                        names.len()
                    )));
                }
                names
            }
            None => (1..=dim).map(|i| format!("e{i}")).collect(),
        };
        for (a, name) in basis_names.iter().enumerate() {
            if basis_names[..a].contains(name) {
                return Err(Error::InvalidAlgebra(format!("duplicate basis name `{name}`")));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut terms = Vec::new();
        for (entry, (i, j, rhs)) in brackets.iter().enumerate() {
            let describe = || format!("bracket entry #{} [{}, {}]", entry + 1, i + 1, j + 1);
            if *i >= dim || *j >= dim {
                return Err(Error::InvalidAlgebra(format!("{}: index out of range 1..={dim}", describe())));
            }
            if i >= j {
                return Err(Error::InvalidAlgebra(format!("{}: requires i < j", describe())));
            }
            if !seen.insert((*i, *j)) {
                return Err(Error::InvalidAlgebra(format!("{}: duplicate pair", describe())));
            }
            let mut acc = vec![Rational::zero(); dim];
            for (k, c) in rhs {
                if *k >= dim {
                    return Err(Error::InvalidAlgebra(format!(
                        "{}: target index {} out of range 1..={dim}",
                        describe(),
                        k + 1
                    )));
                }
                acc[*k] += c;
            }
            for (k, c) in acc.into_iter().enumerate() {
                if !c.is_zero() {
                    let coeff_f64 = rational_to_f64(&c);
                    terms.push(BracketTerm { i: *i, j: *j, k, coeff: c, coeff_f64 });
                }
            }
        }
        terms.sort_by_key(|t| (t.i, t.j, t.k));
        let mut alg = LieAlgebra { dim, basis_names, terms, lcs: Vec::new(), weights: Vec::new() };
        alg.check_jacobi()?;
        alg.lcs = alg.lower_central_series()?;
        alg.weights = alg.compute_weights();
        Ok(alg)
    }

    pub fn abelian(dim: usize) -> Result<Self> {
        LieAlgebra::new(dim, None, &[])
    }

    /// Heisenberg algebra of dimension `2m + 1`: `[e_i, e_{m+i}] = e_{2m+1}`
    /// reordered so that `[e_{2i-1}, e_{2i}] = e_{2m+1}`.
    pub fn heisenberg(m: usize) -> Result<Self> {
        let n = 2 * m + 1;
        let brackets: Vec<RawBracket> = (0..m).map(|p| (2 * p, 2 * p + 1, vec![(n - 1, int(1))])).collect();
        LieAlgebra::new(n, None, &brackets)
    }

    /// Standard filiform algebra: `[e_1, e_i] = e_{i+1}` for `2 ≤ i < n`.
    pub fn filiform(n: usize) -> Result<Self> {
        let brackets: Vec<RawBracket> = (1..n.saturating_sub(1)).map(|i| (0, i, vec![(i + 1, int(1))])).collect();
        LieAlgebra::new(n, None, &brackets)
    }

    /// Free nilpotent algebra of class 2 on `r` generators.
    pub fn free_two_step(r: usize) -> Result<Self> {
        let mut brackets = Vec::new();
        let mut next = r;
        for i in 0..r {
            for j in i + 1..r {
                brackets.push((i, j, vec![(next, int(1))]));
                next += 1;
            }
        }
        LieAlgebra::new(next, None, &brackets)
    }

    /// Named algebras: `R<n>`, `h3`, `h5`, `h<2m+1>`, `filiform<n>`,
    /// `free2_<r>`.
    pub fn builtin(name: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown builtin algebra `{name}`"));
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
        if let Some(n) = name.strip_prefix('R') {
            return LieAlgebra::abelian(num(n)?);
        }
        if let Some(n) = name.strip_prefix("filiform") {
            return LieAlgebra::filiform(num(n)?);
        }
        if let Some(r) = name.strip_prefix("free2_") {
            return LieAlgebra::free_two_step(num(r)?);
        }
        if let Some(n) = name.strip_prefix('h') {
            let n = num(n)?;
            if n % 2 == 1 && n >= 3 {
                return LieAlgebra::heisenberg(n / 2);
            }
        }
        Err(bad())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis_names(&self) -> &[String] {
        &self.basis_names
    }

    pub fn terms(&self) -> &[BracketTerm] {
        &self.terms
    }

    /// Dimensions of the lower central series, ending with 0.
    pub fn lcs(&self) -> &[usize] {
        &self.lcs
    }

    /// Nilpotency class (number of nonzero lower central series terms).
    pub fn class(&self) -> usize {
        self.lcs.len() - 1
    }

    /// Filtration weight of each basis direction: the largest `m` with
    /// `e_i` in the `m`-th lower central series term.
    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    /// Homogeneous dimension `Σ w_i`.
    pub fn homogeneous_dim(&self) -> u32 {
        self.weights.iter().sum()
    }

    pub fn is_abelian(&self) -> bool {
        self.terms.is_empty()
    }

    /// `[x, y]` for coordinate vectors over any coefficient ring.
    pub fn bracket<T: Scalar>(&self, x: &[T], y: &[T]) -> Vec<T> {
        let zero = x[0].zero_like();
        let mut out = vec![zero; self.dim];
        for t in &self.terms {
            let c = x[0].lift(&t.coeff);
            let v = x[t.i].clone() * y[t.j].clone() - x[t.j].clone() * y[t.i].clone();
            out[t.k] = out[t.k].clone() + c * v;
        }
        out
    }

    fn basis_vector(&self, i: usize) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); self.dim];
        v[i] = int(1);
        v
    }

    fn check_jacobi(&self) -> Result<()> {
        let n = self.dim;
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let (ei, ej, ek) = (self.basis_vector(i), self.basis_vector(j), self.basis_vector(k));
                    let a = self.bracket(&self.bracket(&ei, &ej), &ek);
                    let b = self.bracket(&self.bracket(&ej, &ek), &ei);
                    let c = self.bracket(&self.bracket(&ek, &ei), &ej);
                    let residual: Vec<Rational> =
                        a.into_iter().zip(b).zip(c).map(|((a, b), c)| a + b + c).collect();
                    if residual.iter().any(|r| !r.is_zero()) {
                        let residual = residual.iter().map(format_rational).collect::<Vec<_>>().join(", ");
                        return Err(Error::JacobiViolation { i: i + 1, j: j + 1, k: k + 1, residual: format!("({residual})") });
                    }
                }
            }
        }
        Ok(())
    }

    fn span_basis(&self, vectors: Vec<Vec<Rational>>) -> Vec<Vec<Rational>> {
        if vectors.is_empty() {
            return vectors;
        }
        let mut m = QMatrix { rows: vectors.len(), cols: self.dim, data: vectors };
        let r = m.rref().len();
        m.data.truncate(r);
        m.data
    }

    /// Successive terms `γ_1 = g ⊃ γ_2 = [g, g] ⊃ …` as row-reduced bases.
    fn lcs_terms(&self) -> Result<Vec<Vec<Vec<Rational>>>> {
        let mut terms = vec![(0..self.dim).map(|i| self.basis_vector(i)).collect::<Vec<_>>()];
        loop {
            let last = terms.last().unwrap();
            let mut gens = Vec::new();
            for i in 0..self.dim {
                let ei = self.basis_vector(i);
                for v in last {
                    gens.push(self.bracket(&ei, v));
                }
            }
            let next = self.span_basis(gens);
            if next.is_empty() {
                terms.push(next);
                return Ok(terms);
            }
            if next.len() == last.len() {
                return Err(Error::NotNilpotent { stable_dim: next.len() });
            }
            terms.push(next);
        }
    }

    fn lower_central_series(&self) -> Result<Vec<usize>> {
        Ok(self.lcs_terms()?.iter().map(|t| t.len()).collect())
    }

    fn compute_weights(&self) -> Vec<u32> {
        let terms = self.lcs_terms().expect("validated");
        (0..self.dim)
            .map(|i| {
                let e = self.basis_vector(i);
                let mut w = 1;
                for (m, t) in terms.iter().enumerate().skip(1) {
                    if t.is_empty() {
                        break;
                    }
                    let mut rows = t.clone();
                    rows.push(e.clone());
                    if self.span_basis(rows).len() == t.len() {
                        w = m as u32 + 1;
                    }
                }
                w
            })
            .collect()
    }

    pub fn to_file(&self) -> AlgebraFile {
        let mut brackets: Vec<(usize, usize, Vec<(usize, String)>)> = Vec::new();
        for t in &self.terms {
            let entry = (t.i + 1, t.j + 1, (t.k + 1, format_rational(&t.coeff)));
            match brackets.last_mut() {
                Some((i, j, rhs)) if *i == entry.0 && *j == entry.1 => rhs.push(entry.2),
                _ => brackets.push((entry.0, entry.1, vec![entry.2])),
            }
        }
        AlgebraFile { dim: self.dim, basis: Some(self.basis_names.clone()), brackets }
    }

    pub fn from_file(file: &AlgebraFile) -> Result<Self> {
        let mut raw = Vec::with_capacity(file.brackets.len());
        for (entry, (i, j, rhs)) in file.brackets.iter().enumerate() {
            let describe = || format!("bracket entry #{} [{i}, {j}]", entry + 1);
            if *i == 0 || *j == 0 {
                return Err(Error::InvalidAlgebra(format!("{}: indices are 1-based", describe())));
            }
            let mut terms = Vec::new();
            for (k, c) in rhs {
                if *k == 0 {
                    return Err(Error::InvalidAlgebra(format!("{}: indices are 1-based", describe())));
                }
                let q = parse_rational(c).ok_or_else(|| {
                    Error::InvalidAlgebra(format!("{}: bad rational coefficient `{c}`", describe()))
                })?;
                terms.push((k - 1, q));
            }
            raw.push((i - 1, j - 1, terms));
        }
        LieAlgebra::new(file.dim, file.basis.clone(), &raw)
    }

    pub fn parse_json(text: &str, origin: &str) -> Result<Self> {
        let file: AlgebraFile = serde_json::from_str(text).map_err(|e| Error::FileFormat {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        LieAlgebra::from_file(&file)
    }

    /// Loads `builtin:<name>` or a JSON algebra file.
    pub fn load(reference: &str, relative_to: Option<&Path>) -> Result<Self> {
        if let Some(name) = reference.strip_prefix("builtin:") {
            return LieAlgebra::builtin(name);
        }
        let path = match relative_to {
            Some(dir) if Path::new(reference).is_relative() => dir.join(reference),
            _ => Path::new(reference).to_path_buf(),
        };
        let text = std::fs::read_to_string(&path)?;
        LieAlgebra::parse_json(&text, &path.display().to_string())
    }
}

/// On-disk algebra record.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AlgebraFile {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<String>>,
    #[serde(default)]
    pub brackets: Vec<(usize, usize, Vec<(usize, String)>)>,
}
