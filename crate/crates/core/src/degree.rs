//! Topological degree between equal-dimensional groups, the area formula,
//! and the asymptotic degree `τ(R)/|B_R|`.
//!
//! Everything is computed in exponential coordinates. Left-invariant frames
//! of nilpotent groups are unipotent, so coordinate and frame Jacobians have
//! the same determinant.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::KForm;
use crate::group::{quasi_norm, GroupPoint};
use crate::map::SmoothMap;
use crate::pullback::{average_forms, McConfig};
use crate::sampling::{chunk_rng, monte_carlo, BallShape, BallSpec, CoordBox, Region};

/// Targets closer than this to the sampled boundary image are rejected.
pub const BOUNDARY_TOL: f64 = 1e-6;
/// Preimages with `|det J|` below this trigger a target perturbation.
pub const SINGULAR_DET: f64 = 1e-8;
/// Located roots closer than this are the same preimage.
pub const DEDUP_TOL: f64 = 1e-6;
pub const MAX_RETRIES: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeOptions {
    /// Newton starts per axis.
    pub grid: usize,
    pub seed: u64,
    /// Repeat with a doubled grid and compare.
    pub stability_check: bool,
}

impl Default for DegreeOptions {
    fn default() -> Self {
        DegreeOptions { grid: 8, seed: 0, stability_check: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeResult {
    pub value: i64,
    /// The target actually used (perturbed when the requested one was singular).
    pub target: GroupPoint,
    pub requested_target: GroupPoint,
    pub window_radius: f64,
    pub preimage_count: usize,
    pub preimages: Vec<GroupPoint>,
    /// Smallest `|det J|` over located preimages.
    pub min_jacobian_margin: f64,
    /// Smallest sampled distance from the target to the boundary image.
    pub boundary_margin: f64,
    pub retries: usize,
    pub grid: usize,
    /// `Some(true)` when a denser grid reproduced the degree and preimage count.
    pub stable: Option<bool>,
}

fn check_square(map: &SmoothMap) -> Result<usize> {
    let n = map.domain().dim();
    if n != map.codomain().dim() {
        return Err(Error::DimensionMismatch(format!(
            "degree needs equal dimensions, got {n} and {}",
            map.codomain().dim()
        )));
    }
    Ok(n)
}

fn box_window(map: &SmoothMap, window: &BallSpec) -> Result<Vec<f64>> {
    if window.shape != BallShape::Box {
        return Err(Error::InvalidInput("degree windows must be boxes".into()));
    }
    if window.dim() != map.domain().dim() {
        return Err(Error::DimensionMismatch("window and domain dimensions differ".into()));
    }
    Ok(window.half_widths())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Points on the faces of the box `[-half, half]`, `per_axis` per free axis.
fn boundary_points(half: &[f64], per_axis: usize) -> Vec<GroupPoint> {
    let n = half.len();
    let ticks = |h: f64| -> Vec<f64> {
        if per_axis < 2 {
            return vec![0.0];
        }
        (0..per_axis).map(|k| -h + 2.0 * h * k as f64 / (per_axis - 1) as f64).collect()
    };
    let mut out = Vec::new();
    for face_axis in 0..n {
        for side in [-1.0, 1.0] {
            let mut pts: Vec<GroupPoint> = vec![Vec::with_capacity(n)];
            for (axis, &h) in half.iter().enumerate() {
                let choices = if axis == face_axis { vec![side * h] } else { ticks(h) };
                pts = pts
                    .into_iter()
                    .flat_map(|p| {
                        choices.iter().map(move |&c| {
                            let mut q = p.clone();
                            q.push(c);
                            q
                        })
                    })
                    .collect();
            }
            out.extend(pts);
        }
    }
    out
}

fn boundary_density(n: usize) -> usize {
    match n {
        1 => 2,
        2 => 512,
        3 => 64,
        4 => 16,
        _ => 8,
    }
}

fn inside(half: &[f64], x: &[f64]) -> bool {
    x.iter().zip(half).all(|(v, h)| v.abs() < *h)
}

/// Damped Newton for `f(x) = target` from `start`. Returns a converged point.
fn newton(map: &SmoothMap, target: &[f64], start: GroupPoint, half: &[f64]) -> Option<GroupPoint> {
    let scale = 1.0 + target.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut x = start;
    let residual = |x: &[f64]| -> Option<(DVector<f64>, f64)> {
        let y = map.evaluate(x).ok()?;
        let r = DVector::from_iterator(y.len(), y.iter().zip(target).map(|(a, b)| a - b));
        let norm = r.norm();
        norm.is_finite().then_some((r, norm))
    };
    let (mut r, mut norm) = residual(&x)?;
    let mut last_step = f64::INFINITY;
    for _ in 0..200 {
        // flat roots reach a tiny residual long before the iterates settle
        let size = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm <= 1e-12 * scale && last_step <= 1e-10 * size {
            return Some(x);
        }
        let jac: DMatrix<f64> = map.jet(&x).ok()?.jacobian;
        let step = jac.lu().solve(&r)?;
        let mut t = 1.0;
        loop {
            let trial: GroupPoint = x.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            if let Some((rt, nt)) = residual(&trial) {
                if nt < norm || t < 1e-6 || nt == 0.0 {
                    last_step = t * step.norm();
                    x = trial;
                    r = rt;
                    norm = nt;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-10 {
                return None;
            }
        }
        // wandering far outside the window will not produce an admissible root
        if x.iter().zip(half).any(|(v, h)| v.abs() > 4.0 * h + 1.0) {
            return None;
        }
    }
    (norm <= 1e-9 * scale).then_some(x)
}

fn locate_preimages(map: &SmoothMap, target: &[f64], half: &[f64], grid: usize) -> Vec<GroupPoint> {
    let n = half.len();
    let total = grid.pow(n as u32);
    let mut roots: Vec<GroupPoint> = Vec::new();
    for idx in 0..total {
        let mut rem = idx;
        let start: GroupPoint = half
            .iter()
            .map(|&h| {
                let k = rem % grid;
                rem /= grid;
                -h + 2.0 * h * (k as f64 + 0.5) / grid as f64
            })
            .collect();
        if let Some(root) = newton(map, target, start, half) {
            if inside(half, &root) && !roots.iter().any(|r| dist(r, &root) < DEDUP_TOL) {
                roots.push(root);
            }
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    roots
}

fn degree_once(map: &SmoothMap, window: &BallSpec, target: &[f64], opts: &DegreeOptions) -> Result<DegreeResult> {
    let n = check_square(map)?;
    let half = box_window(map, window)?;
    if target.len() != n {
        return Err(Error::DimensionMismatch(format!("target needs {n} coordinates")));
    }
    let boundary: Vec<GroupPoint> = boundary_points(&half, boundary_density(n))
        .iter()
        .map(|p| map.evaluate(p))
        .collect::<Result<_>>()?;

    let mut rng = chunk_rng(opts.seed, u64::MAX - 1, 0);
    let mut current = target.to_vec();
    for retry in 0..=MAX_RETRIES {
        let margin = boundary.iter().map(|b| dist(b, &current)).fold(f64::INFINITY, f64::min);
        if margin < BOUNDARY_TOL {
            return Err(Error::BoundaryTooClose { distance: margin });
        }
        let roots = locate_preimages(map, &current, &half, opts.grid);
        let dets: Vec<f64> =
            roots.iter().map(|r| map.jet(r).map(|j| j.jacobian.determinant())).collect::<Result<_>>()?;
        let min_det = dets.iter().map(|d| d.abs()).fold(f64::INFINITY, f64::min);
        if min_det >= SINGULAR_DET {
            return Ok(DegreeResult {
                value: dets.iter().map(|d| if *d > 0.0 { 1 } else { -1 }).sum(),
                target: current,
                requested_target: target.to_vec(),
                window_radius: window.radius,
                preimage_count: roots.len(),
                preimages: roots,
                min_jacobian_margin: if dets.is_empty() { f64::INFINITY } else { min_det },
                boundary_margin: margin,
                retries: retry,
                grid: opts.grid,
                stable: None,
            });
        }
        // move to a nearby (hopefully regular) value in the same component
        current = target
            .iter()
            .zip(&half)
            .map(|(t, h)| t + 0.01 * h.min(window.radius) * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
    }
    Err(Error::SingularTarget { retries: MAX_RETRIES })
}

/// Degree of `map` on the box `window` over `target`: the signed count of
/// preimages located by multi-start Newton.
pub fn local_degree(map: &SmoothMap, window: &BallSpec, target: &[f64], opts: &DegreeOptions) -> Result<DegreeResult> {
    let mut result = degree_once(map, window, target, opts)?;
    if opts.stability_check {
        let dense = DegreeOptions { grid: opts.grid * 2, stability_check: false, ..opts.clone() };
        let again = degree_once(map, window, &result.target, &dense)?;
        result.stable = Some(again.value == result.value && again.preimage_count == result.preimage_count);
    }
    Ok(result)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AreaReport {
    pub window_radius: f64,
    pub samples: usize,
    pub seed: u64,
    /// `∫_U det Df`.
    pub signed_area: f64,
    pub signed_stderr: f64,
    /// `∫_U |det Df|`.
    pub unsigned_area: f64,
    pub unsigned_stderr: f64,
    /// `∫ deg(f, U, h) dh` over a padded bounding box of `f(U)`.
    pub degree_integral: f64,
    pub degree_stderr: f64,
    pub image_box: CoordBox,
    pub difference: f64,
    pub combined_stderr: f64,
    /// Targets that could not be assigned a degree (boundary or singular).
    pub skipped_targets: usize,
}

/// Checks `∫_U det Df = ∫ deg(f, U, h) dh` by Monte Carlo on both sides.
pub fn area_formula_check(
    map: &SmoothMap,
    window: &BallSpec,
    samples: usize,
    seed: u64,
    grid: usize,
) -> Result<AreaReport> {
    let n = check_square(map)?;
    let half = box_window(map, window)?;
    let vol = Region::volume(window);
    let lhs = monte_carlo(window, samples, seed, 0, 2 + n, |g, out| {
        let jet = map.jet(g)?;
        let d = jet.jacobian.determinant();
        out[0] = d;
        out[1] = d.abs();
        out[2..].copy_from_slice(&jet.value);
        Ok(jet.kinks)
    })?;

    // a box containing the sampled image and the boundary image
    let mut hi: Vec<f64> = lhs.max_abs[2..].to_vec();
    let mut lo: Vec<f64> = hi.iter().map(|v| -v).collect();
    for p in boundary_points(&half, boundary_density(n)) {
        let y = map.evaluate(&p)?;
        for i in 0..n {
            hi[i] = hi[i].max(y[i]);
            lo[i] = lo[i].min(y[i]);
        }
    }
    let image_box = CoordBox {
        center: lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect(),
        half: lo.iter().zip(&hi).map(|(a, b)| 0.5 * (b - a) * 1.01 + 1e-9).collect(),
    };
    let opts = DegreeOptions { grid, seed, stability_check: false };
    let rhs = monte_carlo(&image_box, samples, seed, 1, 1, |h, out| {
        match degree_once(map, window, h, &opts) {
            Ok(d) => {
                out[0] = d.value as f64;
                Ok(0)
            }
            Err(Error::BoundaryTooClose { .. } | Error::SingularTarget { .. }) => {
                out[0] = 0.0;
                Ok(1)
            }
            Err(e) => Err(e),
        }
    })?;
    let box_vol = image_box.volume();
    let signed_area = lhs.mean[0] * vol;
    let signed_stderr = lhs.stderr[0] * vol;
    let degree_integral = rhs.mean[0] * box_vol;
    let degree_stderr = rhs.stderr[0] * box_vol;
    Ok(AreaReport {
        window_radius: window.radius,
        samples,
        seed,
        signed_area,
        signed_stderr,
        unsigned_area: lhs.mean[1] * vol,
        unsigned_stderr: lhs.stderr[1] * vol,
        degree_integral,
        degree_stderr,
        image_box,
        difference: signed_area - degree_integral,
        combined_stderr: (signed_stderr.powi(2) + degree_stderr.powi(2)).sqrt(),
        skipped_targets: rhs.flagged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsymptoticVerdict {
    PositiveAsymptoticDegree,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Distortion {
    pub pairs: usize,
    /// Extremes of `d_H(φg, φh) / d_G(g, h)` over sampled pairs with
    /// `d_G ≥ 1`, distances from the homogeneous quasi-norms.
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticDegreeTrace {
    pub radii: Vec<f64>,
    /// Signed `∫_{B_R} φ*ω`.
    pub tau: Vec<f64>,
    pub ball_volumes: Vec<f64>,
    pub ratio: Vec<f64>,
    pub stderr: Vec<f64>,
    pub verdict: AsymptoticVerdict,
    pub distortion: Distortion,
}

/// `τ(R)/|B_R|` for the codomain volume form (or the top form given).
pub fn asymptotic_degree(
    map: &SmoothMap,
    form: Option<&KForm<f64>>,
    radii: &[f64],
    cfg: &McConfig,
) -> Result<AsymptoticDegreeTrace> {
    let n = check_square(map)?;
    let volume_form = KForm::basis(n, &(0..n).collect::<Vec<_>>(), 1.0);
    let form = form.unwrap_or(&volume_form);
    if form.degree() != n {
        return Err(Error::InvalidInput(format!("asymptotic degree needs a top-degree form, got degree {}", form.degree())));
    }
    let run = average_forms(map, std::slice::from_ref(form), radii, cfg)?;
    let est = &run.estimates[0];
    let ratio: Vec<f64> = est.values.iter().map(|v| v[0]).collect();
    let stderr: Vec<f64> = est.stderr.iter().map(|v| v[0]).collect();
    let tau = ratio.iter().zip(&run.ball_volumes).map(|(r, v)| r * v).collect();
    let positive = ratio.len() >= 2
        && ratio.iter().zip(&stderr).rev().take(2).all(|(r, s)| *r > 3.0 * s && *r > 0.0);
    let distortion = distortion(map, *radii.last().unwrap(), cfg)?;
    Ok(AsymptoticDegreeTrace {
        radii: radii.to_vec(),
        tau,
        ball_volumes: run.ball_volumes,
        ratio,
        stderr,
        verdict: if positive { AsymptoticVerdict::PositiveAsymptoticDegree } else { AsymptoticVerdict::Inconclusive },
        distortion,
    })
}

fn distortion(map: &SmoothMap, radius: f64, cfg: &McConfig) -> Result<Distortion> {
    let dom = map.domain();
    let cod = map.codomain();
    let ball = BallSpec::new(radius, BallShape::Box, dom.algebra().weights().to_vec())?;
    let pairs = 512;
    let mut rng = chunk_rng(cfg.seed, u64::MAX - 2, 0);
    let (mut lo, mut hi, mut used) = (f64::INFINITY, 0.0f64, 0);
    for _ in 0..pairs {
        let g = ball.draw(&mut rng);
        let h = ball.draw(&mut rng);
        let dg = quasi_norm(&dom.multiply(&dom.inverse(&g), &h), dom.algebra().weights());
        if dg < 1.0 {
            continue;
        }
        let (fg, fh) = (map.evaluate(&g)?, map.evaluate(&h)?);
        let dh = quasi_norm(&cod.multiply(&cod.inverse(&fg), &fh), cod.algebra().weights());
        lo = lo.min(dh / dg);
        hi = hi.max(dh / dg);
        used += 1;
    }
    Ok(Distortion { pairs: used, min_ratio: if used == 0 { 0.0 } else { lo }, max_ratio: hi })
}
