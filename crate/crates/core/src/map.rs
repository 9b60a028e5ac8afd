//! Smooth maps between nilpotent groups, given by coordinate expressions in
//! exponential coordinates, and the right action `(φ·g)(x) = φ(g)⁻¹ φ(g x)`.
//!
//! A map is stored as `x ↦ s · φ₀(t · x)` where `φ₀` is the parsed expression
//! tuple. Acting by `g` and normalizing only update `t` and `s`, so orbit
//! members share the parsed expressions and cost two extra group products per
//! evaluation.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::LieAlgebra;
use crate::dsl::{self, Expr};
use crate::error::{Error, Result};
use crate::group::{GroupPoint, NilpotentGroup};
use crate::sampling::chunk_rng;
use crate::scalar::Jet;

/// Below this `|det|` a frame is treated as singular.
pub const FRAME_DET_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SmoothMap {
    domain: Arc<NilpotentGroup>,
    codomain: Arc<NilpotentGroup>,
    components: Arc<Vec<Expr>>,
    pre: Option<GroupPoint>,
    post: Option<GroupPoint>,
}

/// Value and coordinate Jacobian (`m × n`) at a point.
#[derive(Clone, Debug)]
pub struct JetEval {
    pub value: GroupPoint,
    pub jacobian: DMatrix<f64>,
    /// `abs` evaluations that landed within the kink tolerance.
    pub kinks: usize,
}

fn with_point(err: Error, g: &[f64]) -> Error {
    match err {
        Error::Domain { message, .. } => Error::Domain { message, point: g.to_vec() },
        other => other,
    }
}

impl SmoothMap {
    pub fn new(domain: Arc<NilpotentGroup>, codomain: Arc<NilpotentGroup>, components: &[&str]) -> Result<Self> {
        if components.len() != codomain.dim() {
            return Err(Error::DimensionMismatch(format!(
                "codomain has dimension {} but {} components were given",
                codomain.dim(),
                components.len()
            )));
        }
        let n = domain.dim();
        let parsed = components.iter().map(|c| dsl::parse(c, n)).collect::<Result<Vec<_>>>()?;
        Ok(SmoothMap { domain, codomain, components: Arc::new(parsed), pre: None, post: None })
    }

    /// Convenience constructor building both groups from algebras.
    pub fn from_algebras(domain: LieAlgebra, codomain: LieAlgebra, components: &[&str]) -> Result<Self> {
        SmoothMap::new(Arc::new(NilpotentGroup::new(domain)), Arc::new(NilpotentGroup::new(codomain)), components)
    }

    pub fn identity(group: Arc<NilpotentGroup>) -> Self {
        let comps: Vec<String> = (1..=group.dim()).map(|i| format!("x{i}")).collect();
        let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
        SmoothMap::new(group.clone(), group, &refs).expect("identity components are well formed")
    }

    pub fn domain(&self) -> &Arc<NilpotentGroup> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<NilpotentGroup> {
        &self.codomain
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// Domain translation `t` and codomain shift `s` of `x ↦ s·φ₀(t·x)`.
    pub fn translations(&self) -> (Option<&GroupPoint>, Option<&GroupPoint>) {
        (self.pre.as_ref(), self.post.as_ref())
    }

    fn check_domain_point(&self, g: &[f64]) -> Result<()> {
        if g.len() != self.domain.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, domain has dimension {}",
                g.len(),
                self.domain.dim()
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, g: &[f64]) -> Result<GroupPoint> {
        self.evaluate_counting(g, &mut 0)
    }

    pub fn evaluate_counting(&self, g: &[f64], kinks: &mut usize) -> Result<GroupPoint> {
        self.check_domain_point(g)?;
        let x = match &self.pre {
            Some(t) => self.domain.multiply(t, g),
            None => g.to_vec(),
        };
        let y = self
            .components
            .iter()
            .map(|c| c.eval(&x, kinks))
            .collect::<Result<Vec<f64>>>()
            .map_err(|e| with_point(e, g))?;
        Ok(match &self.post {
            Some(s) => self.codomain.multiply(s, &y),
            None => y,
        })
    }

    /// Value and coordinate Jacobian by forward-mode propagation through the
    /// domain translation, the components and the codomain shift.
    pub fn jet(&self, g: &[f64]) -> Result<JetEval> {
        self.check_domain_point(g)?;
        let n = self.domain.dim();
        let m = self.codomain.dim();
        let vars: Vec<Jet> = g.iter().enumerate().map(|(i, &v)| Jet::variable(v, i, n)).collect();
        let x = match &self.pre {
            Some(t) => {
                let t: Vec<Jet> = t.iter().map(|&v| Jet::constant(v, n)).collect();
                self.domain.multiply_jet(&t, &vars)
            }
            None => vars,
        };
        let mut kinks = 0;
        let y = self
            .components
            .iter()
            .map(|c| c.eval(&x, &mut kinks))
            .collect::<Result<Vec<Jet>>>()
            .map_err(|e| with_point(e, g))?;
        let z = match &self.post {
            Some(s) => {
                let s: Vec<Jet> = s.iter().map(|&v| Jet::constant(v, n)).collect();
                self.codomain.multiply_jet(&s, &y)
            }
            None => y,
        };
        let jacobian = DMatrix::from_fn(m, n, |j, i| z[j].partials[i]);
        Ok(JetEval { value: z.iter().map(|j| j.value).collect(), jacobian, kinks })
    }

    /// Matrix coefficients `m_{ij}(g)` of the differential in left-invariant
    /// frames: `Dφ(V_i(g)) = Σ_j m_{ij}(g) U_j(φ(g))`. Entry `(j, i)` of the
    /// returned `m × n` matrix is `m_{ij}`.
    pub fn differential(&self, g: &[f64]) -> Result<DMatrix<f64>> {
        self.differential_counting(g).map(|(d, _)| d)
    }

    pub fn differential_counting(&self, g: &[f64]) -> Result<(DMatrix<f64>, usize)> {
        let jet = self.jet(g)?;
        let fg = self.domain.left_frame(g);
        let fh = self.codomain.left_frame(&jet.value);
        for (frame, point) in [(&fg, g), (&fh, jet.value.as_slice())] {
            let det = frame.determinant();
            if det.abs() < FRAME_DET_FLOOR {
                return Err(Error::IllConditionedFrame { det, point: point.to_vec() });
            }
        }
        let fh_inv = fh.try_inverse().ok_or_else(|| Error::IllConditionedFrame { det: 0.0, point: jet.value.clone() })?;
        Ok((fh_inv * jet.jacobian * fg, jet.kinks))
    }

    /// The right action `(φ·g)(x) = φ(g)⁻¹ φ(g x)`.
    pub fn act(&self, g: &[f64]) -> Result<SmoothMap> {
        let phi_g = self.evaluate(g)?;
        let pre = match &self.pre {
            Some(t) => self.domain.multiply(t, g),
            None => g.to_vec(),
        };
        let inv = self.codomain.inverse(&phi_g);
        let post = match &self.post {
            Some(s) => self.codomain.multiply(&inv, s),
            None => inv,
        };
        Ok(SmoothMap { pre: Some(pre), post: Some(post), ..self.clone() })
    }

    /// Left-translates the output by `φ(0)⁻¹` so that the origin is fixed.
    pub fn normalize_to_y0(&self) -> Result<SmoothMap> {
        let at_zero = self.evaluate(&self.domain.identity())?;
        if at_zero.iter().all(|v| *v == 0.0) {
            return Ok(self.clone());
        }
        let inv = self.codomain.inverse(&at_zero);
        let post = match &self.post {
            Some(s) => self.codomain.multiply(&inv, s),
            None => inv,
        };
        Ok(SmoothMap { post: Some(post), ..self.clone() })
    }

    pub fn is_normalized(&self, tol: f64) -> Result<bool> {
        Ok(self.evaluate(&self.domain.identity())?.iter().all(|v| v.abs() <= tol))
    }

    /// Largest discrepancy of `φ(gh)` against `φ(g)φ(h)` over `pairs` random
    /// pairs from the coordinate cube `[-scale, scale]^n`.
    pub fn homomorphism_defect(&self, pairs: usize, scale: f64, seed: u64) -> Result<f64> {
        let n = self.domain.dim();
        let mut rng = chunk_rng(seed, u64::MAX, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let g: Vec<f64> = (0..n).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
            let h: Vec<f64> = (0..n).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
            let lhs = self.evaluate(&self.domain.multiply(&g, &h))?;
            let rhs = self.codomain.multiply(&self.evaluate(&g)?, &self.evaluate(&h)?);
            for (a, b) in lhs.iter().zip(&rhs) {
                worst = worst.max((a - b).abs() / (1.0 + a.abs().max(b.abs())));
            }
        }
        Ok(worst)
    }

    /// Whether the map passes the randomized homomorphism test at `1e-9`.
    pub fn looks_like_homomorphism(&self) -> Result<bool> {
        Ok(self.is_normalized(1e-12)? && self.homomorphism_defect(32, 2.0, 0x5eed)? <= 1e-9)
    }

    pub fn load(path: &Path) -> Result<SmoothMap> {
        let text = std::fs::read_to_string(path)?;
        let file: MapFile = serde_json::from_str(&text).map_err(|e| Error::FileFormat {
            path: path.display().to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let dir = path.parent();
        let domain = LieAlgebra::load(&file.domain, dir)?;
        let codomain = LieAlgebra::load(&file.codomain, dir)?;
        let refs: Vec<&str> = file.components.iter().map(String::as_str).collect();
        SmoothMap::from_algebras(domain, codomain, &refs)
    }
}

/// On-disk map record. Algebra references are `builtin:<name>` or paths
/// relative to the map file.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub domain: String,
    pub codomain: String,
    pub components: Vec<String>,
}
