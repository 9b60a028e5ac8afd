//! Simply connected nilpotent groups in exponential coordinates of the
//! first kind.
//!
//! The group law `log(exp x · exp y)` is the Baker–Campbell–Hausdorff series,
//! which is a polynomial because the algebra is nilpotent. It is expanded
//! once per algebra with Dynkin's formula truncated at the nilpotency class,
//! and stored as exact rational polynomials in `(x, y)`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;

use crate::algebra::LieAlgebra;
use crate::linalg::QMatrix;
use crate::poly::{CompiledPoly, Poly};
use crate::scalar::{rat, Jet, Rational, Scalar};

/// A group element, as the coordinates of its logarithm in the algebra's
/// basis.
pub type GroupPoint = Vec<f64>;

#[derive(Clone, Debug)]
pub struct NilpotentGroup {
    algebra: LieAlgebra,
    /// `z_k(x_1..x_n, y_1..y_n)` with `x ↦ vars 0..n`, `y ↦ vars n..2n`.
    product: Vec<Poly>,
    product_f: Vec<CompiledPoly>,
    /// `frame[k][i] = ∂z_k/∂y_i` at `y = 0`, a polynomial in `x`.
    frame: Vec<Vec<Poly>>,
    frame_f: Vec<Vec<CompiledPoly>>,
}

fn factorial(n: usize) -> i64 {
    (1..=n as i64).product()
}

/// All `((r_1, s_1), …, (r_m, s_m))` with `r_i + s_i ≥ 1` and total `total`.
fn dynkin_sequences(m: usize, total: usize) -> Vec<Vec<(usize, usize)>> {
    if m == 0 {
        return if total == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in 1..=total {
        for r in 0..=first {
            for mut rest in dynkin_sequences(m - 1, total - first) {
                rest.insert(0, (r, first - r));
                out.push(rest);
            }
        }
    }
    out
}

/// Coefficients of `log(e^X e^Y)` on right-nested bracket words in `X`
/// (`false`) and `Y` (`true`), up to the given length.
pub fn bch_word_coefficients(max_len: usize) -> BTreeMap<Vec<bool>, Rational> {
    let mut words: BTreeMap<Vec<bool>, Rational> = BTreeMap::new();
    for total in 1..=max_len {
        for m in 1..=total {
            for seq in dynkin_sequences(m, total) {
                // the innermost bracket [a, a] vanishes unless the word ends in a single letter
                let (r_last, s_last) = *seq.last().unwrap();
                if s_last > 1 || (s_last == 0 && r_last > 1) {
                    continue;
                }
                let denom: i64 = seq.iter().map(|&(r, s)| factorial(r) * factorial(s)).product();
                let sign = if m % 2 == 1 { 1 } else { -1 };
                let c = rat(sign, m as i64 * total as i64 * denom);
                let mut word = Vec::with_capacity(total);
                for &(r, s) in &seq {
                    word.extend(std::iter::repeat_n(false, r));
                    word.extend(std::iter::repeat_n(true, s));
                }
                *words.entry(word).or_insert_with(|| rat(0, 1)) += c;
            }
        }
    }
    words.retain(|_, c| *c != rat(0, 1));
    words
}

impl NilpotentGroup {
    pub fn new(algebra: LieAlgebra) -> Self {
        let n = algebra.dim();
        let nv = 2 * n;
        let x: Vec<Poly> = (0..n).map(|i| Poly::var(nv, i)).collect();
        let y: Vec<Poly> = (0..n).map(|i| Poly::var(nv, n + i)).collect();

        let mut product: Vec<Poly> = x.iter().zip(&y).map(|(a, b)| a.clone() + b.clone()).collect();
        if !algebra.is_abelian() {
            let mut memo: HashMap<Vec<bool>, Vec<Poly>> = HashMap::new();
            for (word, c) in bch_word_coefficients(algebra.class()) {
                if word.len() < 2 {
                    continue;
                }
                let term = nested_bracket(&algebra, &word, &x, &y, &mut memo);
                for (p, t) in product.iter_mut().zip(term) {
                    if !t.is_zero() {
                        *p = p.clone() + t.scale(&c);
                    }
                }
            }
        }

        let keep_x: Vec<usize> = (0..n).collect();
        let frame: Vec<Vec<Poly>> =
            product.iter().map(|z| (0..n).map(|i| z.derivative(n + i).restrict(&keep_x)).collect()).collect();
        let product_f = product.iter().map(Poly::compile).collect();
        let frame_f = frame.iter().map(|row| row.iter().map(Poly::compile).collect()).collect();
        NilpotentGroup { algebra, product, product_f, frame, frame_f }
    }

    pub fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn identity(&self) -> GroupPoint {
        vec![0.0; self.dim()]
    }

    /// Exact BCH polynomials of the group law.
    pub fn product_polys(&self) -> &[Poly] {
        &self.product
    }

    pub fn multiply(&self, x: &[f64], y: &[f64]) -> GroupPoint {
        let point: Vec<f64> = x.iter().chain(y).copied().collect();
        self.product_f.iter().map(|p| p.eval_f64(&point)).collect()
    }

    /// Group law over jets (or any scalar built from `f64` constants).
    pub fn multiply_jet(&self, x: &[Jet], y: &[Jet]) -> Vec<Jet> {
        let nv = x.first().or(y.first()).map(Jet::n_vars).unwrap_or(0);
        let point: Vec<Jet> = x.iter().chain(y).cloned().collect();
        self.product_f.iter().map(|p| p.eval(&point, |c| Jet::constant(c, nv))).collect()
    }

    /// Exact group law at rational points.
    pub fn multiply_exact(&self, x: &[Rational], y: &[Rational]) -> Vec<Rational> {
        let point: Vec<Rational> = x.iter().chain(y).cloned().collect();
        self.product.iter().map(|p| p.eval(&point)).collect()
    }

    pub fn inverse<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        x.iter().map(|v| -v.clone()).collect()
    }

    /// Columns are the left-invariant fields `V_i(g) = d(l_g)_0 e_i` in
    /// coordinate partials.
    pub fn left_frame(&self, g: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |k, i| self.frame_f[k][i].eval_f64(g))
    }

    pub fn left_frame_exact(&self, g: &[Rational]) -> QMatrix {
        let n = self.dim();
        let mut m = QMatrix::zeros(n, n);
        for k in 0..n {
            for i in 0..n {
                m.data[k][i] = if self.frame[k][i].is_zero() { rat(0, 1) } else { self.frame[k][i].eval(g) };
            }
        }
        m
    }

    /// Jacobian of `y ↦ g·y` at `y = h`, exactly.
    pub fn left_translation_jacobian_exact(&self, g: &[Rational], h: &[Rational]) -> QMatrix {
        let n = self.dim();
        let point: Vec<Rational> = g.iter().chain(h).cloned().collect();
        let mut m = QMatrix::zeros(n, n);
        for k in 0..n {
            for i in 0..n {
                m.data[k][i] = self.product[k].derivative(n + i).eval(&point);
            }
        }
        m
    }

    /// Dilation `δ_r`: coordinate `i` scales by `r^{w_i}`.
    pub fn dilate(&self, g: &[f64], r: f64) -> GroupPoint {
        g.iter().zip(self.algebra.weights()).map(|(x, &w)| x * r.powi(w as i32)).collect()
    }

    /// Homogeneous quasi-norm `max_i |x_i|^{1/w_i}`.
    pub fn quasi_norm(&self, g: &[f64]) -> f64 {
        quasi_norm(g, self.algebra.weights())
    }
}

pub fn quasi_norm(g: &[f64], weights: &[u32]) -> f64 {
    g.iter().zip(weights).map(|(x, &w)| x.abs().powf(1.0 / w as f64)).fold(0.0, f64::max)
}

fn nested_bracket(
    alg: &LieAlgebra,
    word: &[bool],
    x: &[Poly],
    y: &[Poly],
    memo: &mut HashMap<Vec<bool>, Vec<Poly>>,
) -> Vec<Poly> {
    let letter = |b: bool| if b { y.to_vec() } else { x.to_vec() };
    if word.len() == 1 {
        return letter(word[0]);
    }
    if let Some(v) = memo.get(word) {
        return v.clone();
    }
    let inner = nested_bracket(alg, &word[1..], x, y, memo);
    let out = if inner.iter().all(Poly::is_zero) { inner } else { alg.bracket(&letter(word[0]), &inner) };
    memo.insert(word.to_vec(), out.clone());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::int;

    #[test]
    fn low_order_bch_coefficients() {
        let w = bch_word_coefficients(3);
        assert_eq!(w[&vec![false]], int(1));
        assert_eq!(w[&vec![true]], int(1));
        // X + Y + [X,Y]/2 + ([X,[X,Y]] + [Y,[Y,X]])/12
        let yx = w.get(&vec![true, false]).cloned().unwrap_or(int(0));
        assert_eq!(w[&vec![false, true]].clone() - yx, rat(1, 2));
        let xxy = w[&vec![false, false, true]].clone();
        let yyx = w[&vec![true, true, false]].clone();
        let xyx = w.get(&vec![false, true, false]).cloned().unwrap_or(int(0));
        let yxy = w.get(&vec![true, false, true]).cloned().unwrap_or(int(0));
        // [X,[Y,X]] = -[X,[X,Y]] and [Y,[X,Y]] = -[Y,[Y,X]]
        assert_eq!(xxy - xyx, rat(1, 12));
        assert_eq!(yyx - yxy, rat(1, 12));
    }

    #[test]
    fn abelian_product_is_addition() {
        let g = NilpotentGroup::new(LieAlgebra::abelian(3).unwrap());
        assert_eq!(g.multiply(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]), vec![5.0, 7.0, 9.0]);
        assert_eq!(g.left_frame(&[1.0, -2.0, 0.5]), DMatrix::identity(3, 3));
    }

    #[test]
    fn heisenberg_product() {
        let g = NilpotentGroup::new(LieAlgebra::heisenberg(1).unwrap());
        assert_eq!(g.multiply(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]), vec![1.0, 1.0, 0.5]);
        let x = [0.3, -1.2, 2.5];
        assert_eq!(g.multiply(&x, &g.inverse(&x)), vec![0.0, 0.0, 0.0]);
        assert_eq!(g.inverse(&[1.0, 1.0, 0.5]), vec![-1.0, -1.0, -0.5]);
    }

    #[test]
    fn heisenberg_frame() {
        let g = NilpotentGroup::new(LieAlgebra::heisenberg(1).unwrap());
        let (a, b, c) = (0.7, -1.5, 3.0);
        let f = g.left_frame(&[a, b, c]);
        let expected = DMatrix::from_column_slice(3, 3, &[1.0, 0.0, -b / 2.0, 0.0, 1.0, a / 2.0, 0.0, 0.0, 1.0]);
        assert_eq!(f, expected);
        assert_eq!(g.left_frame(&[0.0; 3]), DMatrix::identity(3, 3));
    }

    #[test]
    fn quasi_norm_and_dilation() {
        let g = NilpotentGroup::new(LieAlgebra::heisenberg(1).unwrap());
        assert_eq!(g.quasi_norm(&[0.0, 0.0, 4.0]), 2.0);
        assert_eq!(g.quasi_norm(&[0.0; 3]), 0.0);
        assert_eq!(g.quasi_norm(&g.dilate(&[1.0, 0.0, 0.0], 3.0)), 3.0);
        let p = [0.4, -0.3, 1.7];
        assert!((g.quasi_norm(&g.dilate(&p, 2.5)) - 2.5 * g.quasi_norm(&p)).abs() < 1e-12);
    }

    fn rational_point(seed: u64, n: usize) -> Vec<Rational> {
        let mut state = seed;
        (0..n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                rat(((state >> 33) % 13) as i64 - 6, 1 + ((state >> 20) % 4) as i64)
            })
            .collect()
    }

    #[test]
    fn exact_associativity_inverse_and_frame_invariance() {
        for name in ["h3", "h5", "filiform4", "filiform5", "free2_3"] {
            let g = NilpotentGroup::new(LieAlgebra::builtin(name).unwrap());
            let n = g.dim();
            for t in 0..6 {
                let a = rational_point(3 * t + 1, n);
                let b = rational_point(3 * t + 2, n);
                let c = rational_point(3 * t + 3, n);
                let ab_c = g.multiply_exact(&g.multiply_exact(&a, &b), &c);
                let a_bc = g.multiply_exact(&a, &g.multiply_exact(&b, &c));
                assert_eq!(ab_c, a_bc, "{name}");
                assert!(g.multiply_exact(&a, &g.inverse(&a)).iter().all(|v| *v == int(0)));
                // d(l_a)_b F(b) = F(a·b)
                let lhs = g.left_translation_jacobian_exact(&a, &b).mul(&g.left_frame_exact(&b));
                let rhs = g.left_frame_exact(&g.multiply_exact(&a, &b));
                assert_eq!(lhs.data, rhs.data, "{name}");
            }
        }
    }
}
