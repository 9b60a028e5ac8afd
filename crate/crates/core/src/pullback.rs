//! Pullbacks of left-invariant forms and their ball averages.
//!
//! For a map `φ: G → H` and `ω ∈ C^k(𝔥)`, the function
//! `g ↦ (φ*ω)_g(V_λ1, …, V_λk)` is the contraction of `ω` with the `k × k`
//! minors of the frame differential `m(g)`. Averaging it over growing Følner
//! sets approximates the left-invariant form `overline{φ*}ω`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::cohomology::{CohomologyRing, CohomologySpace};
use crate::error::{Error, Result};
use crate::forms::{monomial_name, wedge_basis, KForm};
use crate::map::SmoothMap;
use crate::sampling::{monte_carlo, BallShape, BallSpec, MeanEstimate};
use crate::scalar::rational_to_f64;

/// Default tolerance for convergence and spread verdicts.
pub const DEFAULT_TOL: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub shape: BallShape,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        McConfig { samples, seed, shape: BallShape::Box }
    }

    pub fn ball(&self, map: &SmoothMap, radius: f64) -> Result<BallSpec> {
        BallSpec::new(radius, self.shape, map.domain().algebra().weights().to_vec())
    }
}

/// Validates a radius schedule: nonempty, positive and strictly increasing.
pub fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::InvalidInput("radius schedule is empty".into()));
    }
    if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(format!("radii must be positive and strictly increasing: {radii:?}")));
    }
    Ok(())
}

/// Parses `R0:factor:steps` (geometric, `steps` radii) or a comma-separated
/// list. Each number may be a constant expression such as `4*pi`.
pub fn parse_radii(text: &str) -> Result<Vec<f64>> {
    let constant = |s: &str| -> Result<f64> {
        crate::dsl::parse_with(s.trim(), &|_| None)?
            .constant_value()
            .ok_or_else(|| Error::InvalidInput(format!("`{s}` is not a constant")))
    };
    let radii = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidInput(format!("expected R0:factor:steps, got `{text}`")));
        }
        let r0 = constant(parts[0])?;
        let factor = constant(parts[1])?;
        let steps: usize =
            parts[2].trim().parse().map_err(|_| Error::InvalidInput(format!("bad step count `{}`", parts[2])))?;
        (0..steps).map(|k| r0 * factor.powi(k as i32)).collect()
    } else {
        text.split(',').map(constant).collect::<Result<Vec<_>>>()?
    };
    check_radii(&radii)?;
    Ok(radii)
}

/// `(φ*ω)_g(V_λ)` given the frame differential `d = m(g)` (`m × n`).
pub fn contract(form: &KForm<f64>, d: &DMatrix<f64>, lambda: &[usize]) -> f64 {
    let k = form.degree();
    if k == 0 {
        return form.coeff(&[]);
    }
    let mut total = 0.0;
    for (rows, c) in form.terms() {
        let minor = DMatrix::from_fn(k, k, |a, b| d[(rows[a], lambda[b])]);
        total += c * minor.determinant();
    }
    total
}

/// `φ*ω` evaluated on the basis k-vector `λ` at `g`.
pub fn pullback_eval(map: &SmoothMap, form: &KForm<f64>, lambda: &[usize], g: &[f64]) -> Result<f64> {
    check_form(map, form)?;
    if lambda.len() != form.degree() || lambda.iter().any(|&i| i >= map.domain().dim()) {
        return Err(Error::DimensionMismatch(format!("λ = {lambda:?} does not match the form degree or domain")));
    }
    Ok(contract(form, &map.differential(g)?, lambda))
}

/// Exact pullback along a linear differential: `(D*ω)(e_λ) = Σ_I ω_I det D[I, λ]`.
pub fn linear_pullback(form: &KForm<f64>, d: &DMatrix<f64>) -> KForm<f64> {
    let n = d.ncols();
    let values: Vec<f64> = wedge_basis(n, form.degree()).iter().map(|lam| contract(form, d, lam)).collect();
    KForm::from_dense(n, form.degree(), &values)
}

fn check_form(map: &SmoothMap, form: &KForm<f64>) -> Result<()> {
    if form.dim() != map.codomain().dim() {
        return Err(Error::DimensionMismatch(format!(
            "form lives on a {}-dimensional algebra, codomain has dimension {}",
            form.dim(),
            map.codomain().dim()
        )));
    }
    if form.degree() > map.domain().dim() {
        return Err(Error::DimensionMismatch(format!(
            "form degree {} exceeds domain dimension {}",
            form.degree(),
            map.domain().dim()
        )));
    }
    Ok(())
}

/// Ball averages of `φ*ω` along a radius schedule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AverageEstimate {
    /// Dimension of the domain algebra.
    pub dim: usize,
    pub degree: usize,
    pub radii: Vec<f64>,
    /// Labels of the domain wedge basis the coefficient vectors refer to.
    pub basis: Vec<String>,
    /// Per radius, the averaged coefficient on each basis k-vector.
    pub values: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// Largest coefficient change between consecutive radii.
    pub increments: Vec<f64>,
    /// The value at the final radius; no model extrapolation is attempted.
    pub extrapolated: Vec<f64>,
    pub non_convergent: bool,
}

impl AverageEstimate {
    pub fn form_at(&self, r: usize) -> KForm<f64> {
        KForm::from_dense(self.dim, self.degree, &self.values[r])
    }

    pub fn limit(&self) -> KForm<f64> {
        KForm::from_dense(self.dim, self.degree, &self.extrapolated)
    }

    pub fn final_stderr(&self) -> f64 {
        self.stderr.last().map(|v| v.iter().cloned().fold(0.0, f64::max)).unwrap_or(0.0)
    }
}

/// Everything shared by the forms averaged on one point cloud per radius.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AverageRun {
    pub radii: Vec<f64>,
    pub config: McConfig,
    pub ball_volumes: Vec<f64>,
    pub estimates: Vec<AverageEstimate>,
    /// Sampled `max |m_ij|` per radius: a heuristic bound on the derivative.
    pub derivative_bound: Vec<f64>,
    /// Samples whose evaluation touched a kink of `abs`, per radius.
    pub kink_samples: Vec<usize>,
}

/// Flags a trace whose increments grow beyond noise instead of settling.
pub fn increments_non_convergent(increments: &[f64], stderr: &[f64], tol: f64) -> bool {
    increments.windows(2).enumerate().any(|(k, w)| {
        let noise = 3.0 * (stderr[k + 1].powi(2) + stderr[k + 2].powi(2)).sqrt();
        w[1] > w[0] + noise.max(tol)
    })
}

/// Averages `φ*ω` for every form on the same samples at each radius.
/// Radius `r` uses random stream `r`.
pub fn average_forms(map: &SmoothMap, forms: &[KForm<f64>], radii: &[f64], cfg: &McConfig) -> Result<AverageRun> {
    check_radii(radii)?;
    for f in forms {
        check_form(map, f)?;
    }
    let n = map.domain().dim();
    let m = map.codomain().dim();
    let lambdas: Vec<Vec<Vec<usize>>> = forms.iter().map(|f| wedge_basis(n, f.degree())).collect();
    let form_width: usize = lambdas.iter().map(Vec::len).sum();
    let width = form_width + n * m + 1;

    let mut per_radius: Vec<MeanEstimate> = Vec::with_capacity(radii.len());
    let mut volumes = Vec::with_capacity(radii.len());
    for (r, &radius) in radii.iter().enumerate() {
        let ball = cfg.ball(map, radius)?;
        volumes.push(ball.volume());
        let est = monte_carlo(&ball, cfg.samples, cfg.seed, r as u64, width, |g, out| {
            let (d, kinks) = map.differential_counting(g)?;
            let mut at = 0;
            for (form, lams) in forms.iter().zip(&lambdas) {
                for lam in lams {
                    out[at] = contract(form, &d, lam);
                    at += 1;
                }
            }
            for v in d.iter() {
                out[at] = *v;
                at += 1;
            }
            out[at] = if kinks > 0 { 1.0 } else { 0.0 };
            Ok(kinks)
        })?;
        per_radius.push(est);
    }

    let names = map.domain().algebra().basis_names().to_vec();
    let mut estimates = Vec::with_capacity(forms.len());
    let mut offset = 0;
    for (form, lams) in forms.iter().zip(&lambdas) {
        let span = offset..offset + lams.len();
        let values: Vec<Vec<f64>> = per_radius.iter().map(|e| e.mean[span.clone()].to_vec()).collect();
        let stderr: Vec<Vec<f64>> = per_radius.iter().map(|e| e.stderr[span.clone()].to_vec()).collect();
        let increments: Vec<f64> = values
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .collect();
        let max_se: Vec<f64> = stderr.iter().map(|s| s.iter().cloned().fold(0.0, f64::max)).collect();
        let non_convergent = increments_non_convergent(&increments, &max_se, DEFAULT_TOL);
        estimates.push(AverageEstimate {
            dim: n,
            degree: form.degree(),
            radii: radii.to_vec(),
            basis: lams.iter().map(|l| monomial_name(l, &names)).collect(),
            extrapolated: values.last().cloned().unwrap_or_default(),
            values,
            stderr,
            increments,
            non_convergent,
        });
        offset += lams.len();
    }
    let derivative_bound = per_radius
        .iter()
        .map(|e| e.max_abs[form_width..form_width + n * m].iter().cloned().fold(0.0, f64::max))
        .collect();
    let kink_samples =
        per_radius.iter().map(|e| (e.mean[width - 1] * e.count as f64).round() as usize).collect();
    Ok(AverageRun {
        radii: radii.to_vec(),
        config: cfg.clone(),
        ball_volumes: volumes,
        estimates,
        derivative_bound,
        kink_samples,
    })
}

pub fn amenable_average(map: &SmoothMap, form: &KForm<f64>, radii: &[f64], cfg: &McConfig) -> Result<AverageEstimate> {
    Ok(average_forms(map, std::slice::from_ref(form), radii, cfg)?.estimates.remove(0))
}

/// Induced map on cohomology and its residual diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomomorphismReport {
    pub radii: Vec<f64>,
    /// `matrices[k][i][j]`: coordinate `i` (domain class) of the image of the
    /// `j`-th codomain class in degree `k`.
    pub matrices: Vec<Vec<Vec<f64>>>,
    /// `chain_residuals[k][r]`: `max |dA|` over degree-`k` averages at radius `r`.
    pub chain_residuals: Vec<Vec<f64>>,
    pub mult_residuals: Vec<MultResidual>,
    /// Largest Monte Carlo standard error per degree at the final radius.
    pub stderr: Vec<f64>,
    pub warnings: Vec<String>,
    /// Set when the map passes the randomized homomorphism test; holds the
    /// largest gap between the averages and the exact linear pullback.
    pub exact_shortcut_gap: Option<f64>,
    pub run: AverageRunSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultResidual {
    pub k: usize,
    pub i: usize,
    pub l: usize,
    pub j: usize,
    /// Per radius, `max |class(avg(ω_i ∧ ω_j)) − class(avg ω_i) ∪ class(avg ω_j)|`.
    pub residuals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AverageRunSummary {
    pub config: McConfig,
    pub ball_volumes: Vec<f64>,
    pub derivative_bound: Vec<f64>,
    pub kink_samples: Vec<usize>,
}

fn project_f64(space: &CohomologySpace, form: &KForm<f64>) -> Vec<f64> {
    space.project(form)
}

/// Averages every codomain representative (and every product of two), then
/// projects to domain cohomology. Also checks multiplicativity.
pub fn induced_cohomology_map(map: &SmoothMap, radii: &[f64], cfg: &McConfig) -> Result<HomomorphismReport> {
    let dom = map.domain().algebra();
    let cod = map.codomain().algebra();
    let ring_g = CohomologyRing::compute(dom);
    let ring_h = CohomologyRing::compute(cod);
    let top = dom.dim().min(cod.dim());

    // (degree, index) of each representative, then (k,i,l,j) of each product
    let mut forms: Vec<KForm<f64>> = Vec::new();
    let mut rep_slot: Vec<Vec<usize>> = vec![Vec::new(); top + 1];
    for (k, slots) in rep_slot.iter_mut().enumerate() {
        for rep in &ring_h.space(k).representatives {
            slots.push(forms.len());
            forms.push(rep.to_f64());
        }
    }
    let mut products: Vec<(usize, usize, usize, usize, usize)> = Vec::new();
    for k in 1..=top {
        for l in k..=top - k {
            for i in 0..rep_slot[k].len() {
                for j in 0..rep_slot[l].len() {
                    let w = forms[rep_slot[k][i]].wedge(&forms[rep_slot[l][j]]);
                    products.push((k, i, l, j, forms.len()));
                    forms.push(w);
                }
            }
        }
    }
    let run = average_forms(map, &forms, radii, cfg)?;
    let est = &run.estimates;

    let mut matrices = Vec::with_capacity(top + 1);
    let mut chain_residuals = Vec::with_capacity(top + 1);
    let mut stderr = Vec::with_capacity(top + 1);
    let mut warnings = Vec::new();
    for k in 0..=top {
        let space = ring_g.space(k);
        let columns: Vec<Vec<f64>> =
            rep_slot[k].iter().map(|&s| project_f64(space, &est[s].limit())).collect();
        matrices.push((0..space.betti).map(|i| columns.iter().map(|c| c[i]).collect()).collect());
        let residuals: Vec<f64> = (0..radii.len())
            .map(|r| {
                rep_slot[k].iter().map(|&s| est[s].form_at(r).differential(dom).max_abs()).fold(0.0, f64::max)
            })
            .collect();
        let se = rep_slot[k].iter().map(|&s| est[s].final_stderr()).fold(0.0, f64::max);
        let last = residuals.last().copied().unwrap_or(0.0);
        let threshold = (10.0 * se * space.differential_norm).max(1e-9);
        if last > threshold {
            warnings.push(format!(
                "projection: degree-{k} averages are not closed (max |dA| = {last:.3e} > {threshold:.3e}); \
                 cohomology coordinates discard the non-closed part"
            ));
        }
        chain_residuals.push(residuals);
        stderr.push(se);
    }

    let mut mult_residuals = Vec::new();
    for &(k, i, l, j, slot) in &products {
        if k + l > dom.dim() {
            continue;
        }
        let residuals = (0..radii.len())
            .map(|r| -> Result<f64> {
                let a = project_f64(ring_g.space(k), &est[rep_slot[k][i]].form_at(r));
                let b = project_f64(ring_g.space(l), &est[rep_slot[l][j]].form_at(r));
                let cup = ring_g.cup_coords(k, &a, l, &b)?;
                let direct = project_f64(ring_g.space(k + l), &est[slot].form_at(r));
                Ok(cup.iter().zip(&direct).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
            })
            .collect::<Result<Vec<f64>>>()?;
        mult_residuals.push(MultResidual { k, i, l, j, residuals });
    }

    let exact_shortcut_gap = if map.looks_like_homomorphism()? {
        let d0 = map.differential(&map.domain().identity())?;
        let gap = forms
            .iter()
            .zip(est)
            .map(|(f, e)| {
                let exact = linear_pullback(f, &d0);
                (0..radii.len()).map(|r| e.form_at(r).max_abs_diff(&exact)).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        Some(gap)
    } else {
        None
    };

    Ok(HomomorphismReport {
        radii: radii.to_vec(),
        matrices,
        chain_residuals,
        mult_residuals,
        stderr,
        warnings,
        exact_shortcut_gap,
        run: AverageRunSummary {
            config: run.config,
            ball_volumes: run.ball_volumes,
            derivative_bound: run.derivative_bound,
            kink_samples: run.kink_samples,
        },
    })
}

/// Exact induced map of a group homomorphism with differential `d0` at the
/// identity (as `m × n` frame matrix), degree by degree.
pub fn exact_induced_map(ring_g: &CohomologyRing, ring_h: &CohomologyRing, d0: &DMatrix<f64>) -> Vec<Vec<Vec<f64>>> {
    let top = ring_g.dim().min(ring_h.dim());
    (0..=top)
        .map(|k| {
            let cols: Vec<Vec<f64>> = ring_h
                .space(k)
                .representatives
                .iter()
                .map(|rep| project_f64(ring_g.space(k), &linear_pullback(&rep.to_f64(), d0)))
                .collect();
            (0..ring_g.space(k).betti).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
        })
        .collect()
}

/// Exact rational entry helper for reports.
pub fn rational_matrix_to_f64(m: &[Vec<crate::scalar::Rational>]) -> Vec<Vec<f64>> {
    m.iter().map(|row| row.iter().map(rational_to_f64).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::LieAlgebra;
    use crate::scalar::Rational;

    fn f1() -> SmoothMap {
        SmoothMap::from_algebras(LieAlgebra::abelian(1).unwrap(), LieAlgebra::abelian(2).unwrap(), &["x1", "sin(x1)"])
            .unwrap()
    }

    fn h3_auto() -> SmoothMap {
        let h = LieAlgebra::heisenberg(1).unwrap();
        SmoothMap::from_algebras(h.clone(), h, &["2*x1", "x2", "2*x3"]).unwrap()
    }

    fn form(text: &str, alg: &LieAlgebra) -> KForm<f64> {
        KForm::<Rational>::parse(text, alg).unwrap().to_f64()
    }

    #[test]
    fn radii_syntax() {
        assert_eq!(parse_radii("4:2:6").unwrap(), vec![4.0, 8.0, 16.0, 32.0, 64.0, 128.0]);
        assert_eq!(parse_radii("1, 2.5,10").unwrap(), vec![1.0, 2.5, 10.0]);
        let r = parse_radii("4*pi:2:3").unwrap();
        assert!((r[2] - 16.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!(parse_radii("4:0.5:3").is_err());
        assert!(parse_radii("4:2").is_err());
        assert!(parse_radii("x1:2:3").is_err());
    }

    #[test]
    fn pointwise_pullbacks() {
        let h = LieAlgebra::heisenberg(1).unwrap();
        let id = SmoothMap::from_algebras(h.clone(), h.clone(), &["x1", "x2", "x3"]).unwrap();
        let w = form("e1^e2", &h);
        assert!((pullback_eval(&id, &w, &[0, 1], &[3.0, -1.0, 2.0]).unwrap() - 1.0).abs() < 1e-14);
        let r2 = LieAlgebra::abelian(2).unwrap();
        for x in [0.0, 0.7, 2.0] {
            let v = pullback_eval(&f1(), &form("e2", &r2), &[0], &[x]).unwrap();
            assert!((v - x.cos()).abs() < 1e-14);
        }
        assert_eq!(pullback_eval(&f1(), &KForm::zero(2, 1), &[0], &[0.3]).unwrap(), 0.0);
    }

    #[test]
    fn identity_and_constant_integrands_are_exact() {
        let h = LieAlgebra::heisenberg(1).unwrap();
        let id = SmoothMap::from_algebras(h.clone(), h.clone(), &["x1", "x2", "x3"]).unwrap();
        let w = form("e1^e3 - 2*e2^e3", &h);
        let est = amenable_average(&id, &w, &[1.0, 2.0, 4.0], &McConfig::new(3000, 1)).unwrap();
        for r in 0..3 {
            assert!(est.form_at(r).max_abs_diff(&w) < 1e-12);
        }
        let r2 = LieAlgebra::abelian(2).unwrap();
        let est = amenable_average(&f1(), &form("e1", &r2), &[1.0, 5.0], &McConfig::new(4000, 3)).unwrap();
        assert!(est.values.iter().all(|v| (v[0] - 1.0).abs() < 1e-12));
        let unit = KForm::unit(2);
        let est = amenable_average(&f1(), &unit, &[1.0, 5.0], &McConfig::new(1000, 3)).unwrap();
        assert!(est.values.iter().all(|v| v[0] == 1.0));
    }

    #[test]
    fn linearity_on_shared_samples() {
        let r2 = LieAlgebra::abelian(2).unwrap();
        let map = f1();
        let cfg = McConfig::new(5000, 9);
        let radii = [2.0, 7.0];
        let (a, b) = (form("e1", &r2), form("e2", &r2));
        let combo = a.scale(&2.0).add(&b.scale(&-3.0));
        let run = average_forms(&map, &[a, b, combo], &radii, &cfg).unwrap();
        for r in 0..2 {
            let lhs = run.estimates[2].values[r][0];
            let rhs = 2.0 * run.estimates[0].values[r][0] - 3.0 * run.estimates[1].values[r][0];
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn automorphism_induces_exact_map() {
        let rep = induced_cohomology_map(&h3_auto(), &[1.0, 2.0, 4.0], &McConfig::new(2000, 5)).unwrap();
        let d1 = &rep.matrices[1];
        assert!((d1[0][0] - 2.0).abs() < 1e-9 && d1[0][1].abs() < 1e-9);
        assert!(d1[1][0].abs() < 1e-9 && (d1[1][1] - 1.0).abs() < 1e-9);
        assert!((rep.matrices[3][0][0] - 4.0).abs() < 1e-9);
        assert!(rep.chain_residuals.iter().flatten().all(|r| *r < 1e-9));
        assert!(rep.mult_residuals.iter().flat_map(|m| &m.residuals).all(|r| *r < 1e-9));
        assert!(rep.exact_shortcut_gap.unwrap() < 1e-9);
        assert!(rep.warnings.is_empty(), "{:?}", rep.warnings);
    }
}
