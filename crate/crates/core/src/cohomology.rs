//! Cohomology spaces and the cup-product ring of the Chevalley–Eilenberg
//! complex, computed with exact rational linear algebra.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::Serialize;

use crate::algebra::LieAlgebra;
use crate::error::{Error, Result};
use crate::forms::{wedge_basis, KForm};
use crate::linalg::QMatrix;
use crate::scalar::{rational_to_f64, Coeff, Rational};

/// Matrix of `d: C^k → C^{k+1}` in the lexicographic wedge bases.
pub fn differential_matrix(alg: &LieAlgebra, k: usize) -> QMatrix {
    let n = alg.dim();
    let rows = if k < n { wedge_basis(n, k + 1).len() } else { 0 };
    let columns: Vec<Vec<Rational>> = wedge_basis(n, k)
        .iter()
        .map(|idx| {
            if k < n {
                KForm::basis(n, idx, crate::scalar::int(1)).differential(alg).to_dense()
            } else {
                Vec::new()
            }
        })
        .collect();
    QMatrix::from_columns(rows, &columns)
}

#[derive(Clone, Debug)]
pub struct CohomologySpace {
    pub degree: usize,
    pub betti: usize,
    pub representatives: Vec<KForm<Rational>>,
    /// `betti × dim C^k`; exact on closed forms, kills coboundaries.
    projector: QMatrix,
    /// Row-infinity norm of `d_k`, used to scale closedness diagnostics.
    pub differential_norm: f64,
}

impl CohomologySpace {
    fn compute(alg: &LieAlgebra, k: usize) -> Self {
        let n = alg.dim();
        let size = wedge_basis(n, k).len();
        let dk = differential_matrix(alg, k);
        let kernel = if dk.rows == 0 {
            (0..size).map(|i| unit(size, i)).collect()
        } else {
            dk.nullspace()
        };

        // row-reduced basis of the coboundaries d(C^{k-1})
        let mut image = if k == 0 { QMatrix::zeros(0, size) } else { differential_matrix(alg, k - 1).transpose() };
        let image_pivots = image.rref();
        image.data.truncate(image_pivots.len());
        image.rows = image_pivots.len();

        // complement: closed forms vanishing on the coboundary pivot columns
        let reduce = |v: &[Rational]| -> Vec<Rational> {
            let mut v = v.to_vec();
            for (row, &p) in image.data.iter().zip(&image_pivots) {
                if v[p].is_zero() {
                    continue;
                }
                let f = v[p].clone();
                for (x, r) in v.iter_mut().zip(row) {
                    *x -= &f * r;
                }
            }
            v
        };
        let reduced: Vec<Vec<Rational>> = kernel.iter().map(|z| reduce(z)).collect();
        let mut reps = QMatrix { rows: reduced.len(), cols: size, data: reduced };
        let rep_pivots = if reps.rows == 0 { Vec::new() } else { reps.rref() };
        reps.data.truncate(rep_pivots.len());
        reps.rows = rep_pivots.len();

        let betti = rep_pivots.len();
        let mut projector = QMatrix::zeros(betti, size);
        for col in 0..size {
            let coords = reduce(&unit(size, col));
            for (j, &p) in rep_pivots.iter().enumerate() {
                projector.data[j][col] = coords[p].clone();
            }
        }
        let differential_norm = dk
            .data
            .iter()
            .map(|row| row.iter().map(|v| rational_to_f64(v).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let representatives = reps.data.iter().map(|v| KForm::from_dense(n, k, v)).collect();
        CohomologySpace { degree: k, betti, representatives, projector, differential_norm }
    }

    /// Coordinates of the class of a closed form in the representative basis.
    pub fn project<T: Coeff>(&self, form: &KForm<T>) -> Vec<T> {
        assert_eq!(form.degree(), self.degree, "projecting a form of the wrong degree");
        let dense = form.to_dense();
        self.projector
            .data
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&dense)
                    .filter(|(p, _)| !p.is_zero())
                    .fold(T::zero_value(), |acc, (p, v)| acc + T::from_q(p) * v.clone())
            })
            .collect()
    }

    pub fn projector(&self) -> &QMatrix {
        &self.projector
    }
}

fn unit(n: usize, i: usize) -> Vec<Rational> {
    let mut v = vec![Rational::zero(); n];
    v[i] = crate::scalar::int(1);
    v
}

/// Cohomology in all degrees together with the cup-product table.
#[derive(Clone, Debug)]
pub struct CohomologyRing {
    dim: usize,
    spaces: Vec<CohomologySpace>,
    /// `(k, i, l, j)` → coordinates of `[rep^k_i ∧ rep^l_j]` in degree `k + l`.
    cup: BTreeMap<(usize, usize, usize, usize), Vec<Rational>>,
}

impl CohomologyRing {
    pub fn compute(alg: &LieAlgebra) -> Self {
        let n = alg.dim();
        let spaces: Vec<CohomologySpace> = (0..=n).map(|k| CohomologySpace::compute(alg, k)).collect();
        let mut cup = BTreeMap::new();
        for k in 0..=n {
            for l in 0..=n - k {
                for (i, a) in spaces[k].representatives.iter().enumerate() {
                    for (j, b) in spaces[l].representatives.iter().enumerate() {
                        cup.insert((k, i, l, j), spaces[k + l].project(&a.wedge(b)));
                    }
                }
            }
        }
        CohomologyRing { dim: n, spaces, cup }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn betti(&self) -> Vec<usize> {
        self.spaces.iter().map(|s| s.betti).collect()
    }

    pub fn space(&self, k: usize) -> &CohomologySpace {
        &self.spaces[k]
    }

    pub fn spaces(&self) -> &[CohomologySpace] {
        &self.spaces
    }

    pub fn cup_table(&self) -> &BTreeMap<(usize, usize, usize, usize), Vec<Rational>> {
        &self.cup
    }

    /// `[rep^k_i] ∪ [rep^l_j]` in the degree `k + l` representative basis.
    pub fn cup_class(&self, k: usize, i: usize, l: usize, j: usize) -> Result<Vec<Rational>> {
        if k + l > self.dim {
            return Err(Error::DegreeOverflow { k, l, dim: self.dim });
        }
        self.cup.get(&(k, i, l, j)).cloned().ok_or_else(|| {
            Error::InvalidInput(format!(
                "class index out of range: H^{k} has {} classes, H^{l} has {}",
                self.spaces[k].betti, self.spaces[l].betti
            ))
        })
    }

    /// Bilinear extension of the cup table to coordinate vectors.
    pub fn cup_coords<T: Coeff>(&self, k: usize, a: &[T], l: usize, b: &[T]) -> Result<Vec<T>> {
        if k + l > self.dim {
            return Err(Error::DegreeOverflow { k, l, dim: self.dim });
        }
        let mut out = vec![T::zero_value(); self.spaces[k + l].betti];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                let entry = &self.cup[&(k, i, l, j)];
                for (o, c) in out.iter_mut().zip(entry) {
                    if !c.is_zero() {
                        *o = o.clone() + T::from_q(c) * x.clone() * y.clone();
                    }
                }
            }
        }
        Ok(out)
    }

    /// Rank of the cup pairing `H^k ⊗ H^l → H^{k+l}`.
    pub fn cup_rank(&self, k: usize, l: usize) -> usize {
        if k + l > self.dim {
            return 0;
        }
        let target = self.spaces[k + l].betti;
        let mut columns = Vec::new();
        for i in 0..self.spaces[k].betti {
            for j in 0..self.spaces[l].betti {
                columns.push(self.cup[&(k, i, l, j)].clone());
            }
        }
        if columns.is_empty() || target == 0 {
            return 0;
        }
        QMatrix::from_columns(target, &columns).rank()
    }

    pub fn invariants(&self) -> RingSignature {
        let mut cup_ranks = Vec::new();
        for k in 1..=self.dim {
            for l in k..=self.dim - k {
                cup_ranks.push(CupRank { k, l, rank: self.cup_rank(k, l) });
            }
        }
        RingSignature { betti: self.betti(), cup_ranks }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CupRank {
    pub k: usize,
    pub l: usize,
    pub rank: usize,
}

/// Basis-independent summary: Betti numbers and cup-pairing ranks for
/// `1 ≤ k ≤ l`, `k + l ≤ n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RingSignature {
    pub betti: Vec<usize>,
    pub cup_ranks: Vec<CupRank>,
}

impl RingSignature {
    pub fn cup_rank(&self, k: usize, l: usize) -> Option<usize> {
        let (k, l) = if k <= l { (k, l) } else { (l, k) };
        self.cup_ranks.iter().find(|c| c.k == k && c.l == l).map(|c| c.rank)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Distinguished,
    IndistinguishableByTheseInvariants,
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub verdict: Verdict,
    pub differences: Vec<String>,
    pub left: RingSignature,
    pub right: RingSignature,
}

pub fn compare(a: &LieAlgebra, b: &LieAlgebra) -> Comparison {
    let left = CohomologyRing::compute(a).invariants();
    let right = CohomologyRing::compute(b).invariants();
    let mut differences = Vec::new();
    if a.dim() != b.dim() {
        differences.push(format!("dimension {} vs {}", a.dim(), b.dim()));
    }
    if left.betti != right.betti {
        differences.push(format!("betti {:?} vs {:?}", left.betti, right.betti));
    }
    if a.dim() == b.dim() {
        for (x, y) in left.cup_ranks.iter().zip(&right.cup_ranks) {
            if x.rank != y.rank {
                differences.push(format!("cup rank ({}, {}): {} vs {}", x.k, x.l, x.rank, y.rank));
            }
        }
    }
    let verdict =
        if differences.is_empty() { Verdict::IndistinguishableByTheseInvariants } else { Verdict::Distinguished };
    Comparison { verdict, differences, left, right }
}
