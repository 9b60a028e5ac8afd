//! Følner sets in exponential coordinates and reproducible Monte Carlo.
//!
//! Haar measure of a simply connected nilpotent group is Lebesgue measure in
//! exponential coordinates, so uniform sampling of a coordinate region is
//! uniform Haar sampling.
//!
//! Samples are produced in fixed-size chunks. Chunk `c` of stream `s` under
//! seed `σ` always comes from the same ChaCha stream, and chunk results are
//! merged in chunk order, so estimates do not depend on the thread count.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{quasi_norm, GroupPoint};
use crate::scalar::CompensatedSum;

pub const CHUNK: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BallShape {
    /// `|x_i| ≤ R^{w_i}` for every coordinate; the ball of the max quasi-norm.
    Box,
    /// `(Σ |x_i|^{2/w_i})^{1/2} ≤ R`, a smooth homogeneous quasi-ball.
    QuasiBall,
}

impl fmt::Display for BallShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BallShape::Box => "box",
            BallShape::QuasiBall => "quasi-ball",
        })
    }
}

impl FromStr for BallShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(BallShape::Box),
            "quasi-ball" | "quasiball" | "ball" => Ok(BallShape::QuasiBall),
            other => Err(Error::InvalidInput(format!("unknown ball shape `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallSpec {
    pub radius: f64,
    pub shape: BallShape,
    pub weights: Vec<u32>,
}

/// `Γ(m/2)` for a positive integer `m`.
fn gamma_half(m: u32) -> f64 {
    let mut g = if m % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut k = if m % 2 == 0 { 2 } else { 1 };
    while k < m {
        g *= k as f64 / 2.0;
        k += 2;
    }
    g
}

impl BallSpec {
    pub fn new(radius: f64, shape: BallShape, weights: Vec<u32>) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("ball radius must be positive, got {radius}")));
        }
        if weights.is_empty() || weights.contains(&0) {
            return Err(Error::InvalidInput("ball weights must be at least 1".into()));
        }
        Ok(BallSpec { radius, shape, weights })
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        BallSpec::new(radius, self.shape, self.weights.clone())
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Half-widths `R^{w_i}` of the bounding box.
    pub fn half_widths(&self) -> Vec<f64> {
        self.weights.iter().map(|&w| self.radius.powi(w as i32)).collect()
    }

    /// Haar (Lebesgue) volume, exact for both shapes.
    pub fn volume(&self) -> f64 {
        let q: u32 = self.weights.iter().sum();
        match self.shape {
            BallShape::Box => self.half_widths().iter().map(|h| 2.0 * h).product(),
            BallShape::QuasiBall => {
                // Π 2Γ(w_i/2 + 1) / Γ(Q/2 + 1) · R^Q
                let num: f64 = self.weights.iter().map(|&w| 2.0 * gamma_half(w + 2)).product();
                num / gamma_half(q + 2) * self.radius.powi(q as i32)
            }
        }
    }

    pub fn contains(&self, g: &[f64]) -> bool {
        match self.shape {
            BallShape::Box => quasi_norm(g, &self.weights) <= self.radius,
            BallShape::QuasiBall => {
                let s: f64 = g
                    .iter()
                    .zip(&self.weights)
                    .map(|(x, &w)| (x.abs() / self.radius.powi(w as i32)).powf(2.0 / w as f64))
                    .sum();
                s <= 1.0
            }
        }
    }

}

/// A coordinate region with exact uniform sampling.
pub trait Region: Sync {
    fn draw(&self, rng: &mut ChaCha8Rng) -> GroupPoint;
    fn volume(&self) -> f64;
}

impl Region for BallSpec {
    fn draw(&self, rng: &mut ChaCha8Rng) -> GroupPoint {
        let half = self.half_widths();
        loop {
            let g: GroupPoint = half.iter().map(|h| h * (2.0 * rng.random::<f64>() - 1.0)).collect();
            if self.shape == BallShape::Box || self.contains(&g) {
                return g;
            }
        }
    }

    fn volume(&self) -> f64 {
        BallSpec::volume(self)
    }
}

/// An axis-aligned box `center ± half`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoordBox {
    pub center: Vec<f64>,
    pub half: Vec<f64>,
}

impl Region for CoordBox {
    fn draw(&self, rng: &mut ChaCha8Rng) -> GroupPoint {
        self.center.iter().zip(&self.half).map(|(c, h)| c + h * (2.0 * rng.random::<f64>() - 1.0)).collect()
    }

    fn volume(&self) -> f64 {
        self.half.iter().map(|h| 2.0 * h).product()
    }
}

/// Parses `shape=box,R=5` (either key optional).
pub fn parse_ball_args(text: &str, default_radius: f64) -> Result<(BallShape, f64)> {
    let mut shape = BallShape::Box;
    let mut radius = default_radius;
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| Error::InvalidInput(format!("expected key=value, got `{part}`")))?;
        match k.trim() {
            "shape" => shape = v.trim().parse()?,
            "R" | "r" | "radius" => {
                radius = v.trim().parse().map_err(|_| Error::InvalidInput(format!("bad radius `{v}`")))?
            }
            other => return Err(Error::InvalidInput(format!("unknown ball key `{other}`"))),
        }
    }
    Ok((shape, radius))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for chunk `chunk` of stream `stream`.
pub fn chunk_rng(seed: u64, stream: u64, chunk: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix(seed) ^ splitmix(stream.wrapping_add(0x5851_F42D_4C95_7F2D));
    for block in key.chunks_mut(8) {
        state = splitmix(state);
        block.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(chunk);
    rng
}

fn chunk_sizes(count: usize) -> Vec<usize> {
    let full = count / CHUNK;
    let mut sizes = vec![CHUNK; full];
    if count % CHUNK != 0 {
        sizes.push(count % CHUNK);
    }
    sizes
}

/// Uniform Haar samples of the ball, deterministic in `(seed, stream)`.
pub fn sample_ball(spec: &BallSpec, count: usize, seed: u64, stream: u64) -> Vec<GroupPoint> {
    sample_region(spec, count, seed, stream)
}

pub fn sample_region<R: Region>(region: &R, count: usize, seed: u64, stream: u64) -> Vec<GroupPoint> {
    chunk_sizes(count)
        .into_iter()
        .enumerate()
        .flat_map(|(c, size)| {
            let mut rng = chunk_rng(seed, stream, c as u64);
            (0..size).map(|_| region.draw(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

/// Per-component sample mean with Monte Carlo standard error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub count: usize,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub max_abs: Vec<f64>,
    /// Evaluations flagged by the integrand (e.g. near a kink of `abs`).
    pub flagged: usize,
}

#[derive(Clone)]
struct ChunkAcc {
    sum: Vec<CompensatedSum>,
    sum_sq: Vec<CompensatedSum>,
    max_abs: Vec<f64>,
    flagged: usize,
    count: usize,
}

impl ChunkAcc {
    fn new(width: usize) -> Self {
        ChunkAcc {
            sum: vec![CompensatedSum::default(); width],
            sum_sq: vec![CompensatedSum::default(); width],
            max_abs: vec![0.0; width],
            flagged: 0,
            count: 0,
        }
    }
}

/// Averages `f` over `count` uniform samples of `region`. `f` writes `width`
/// values per sample and returns how many of its evaluations were flagged.
pub fn monte_carlo<R, F>(region: &R, count: usize, seed: u64, stream: u64, width: usize, f: F) -> Result<MeanEstimate>
where
    R: Region,
    F: Fn(&[f64], &mut [f64]) -> Result<usize> + Sync,
{
    if count == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    let chunks: Vec<Result<ChunkAcc>> = chunk_sizes(count)
        .into_par_iter()
        .enumerate()
        .map(|(c, size)| {
            let mut rng = chunk_rng(seed, stream, c as u64);
            let mut acc = ChunkAcc::new(width);
            let mut buf = vec![0.0; width];
            for _ in 0..size {
                let g = region.draw(&mut rng);
                acc.flagged += f(&g, &mut buf)?;
                for (i, v) in buf.iter().enumerate() {
                    acc.sum[i].add(*v);
                    acc.sum_sq[i].add(v * v);
                    acc.max_abs[i] = acc.max_abs[i].max(v.abs());
                }
                acc.count += 1;
            }
            Ok(acc)
        })
        .collect();

    let mut total = ChunkAcc::new(width);
    for chunk in chunks {
        let chunk = chunk?;
        for i in 0..width {
            total.sum[i].merge(&chunk.sum[i]);
            total.sum_sq[i].merge(&chunk.sum_sq[i]);
            total.max_abs[i] = total.max_abs[i].max(chunk.max_abs[i]);
        }
        total.flagged += chunk.flagged;
        total.count += chunk.count;
    }
    let n = total.count as f64;
    let mean: Vec<f64> = total.sum.iter().map(|s| s.value() / n).collect();
    let stderr = total
        .sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| {
            if total.count < 2 {
                return 0.0;
            }
            let var = ((sq.value() - n * m * m) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(MeanEstimate { count: total.count, mean, stderr, max_abs: total.max_abs, flagged: total.flagged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_samples_stay_inside() {
        let spec = BallSpec::new(3.0, BallShape::Box, vec![1, 1, 2]).unwrap();
        let pts = sample_ball(&spec, 5000, 7, 0);
        assert_eq!(pts.len(), 5000);
        assert!(pts.iter().all(|p| quasi_norm(p, &spec.weights) <= 3.0));
        assert_eq!(pts, sample_ball(&spec, 5000, 7, 0));
        assert_ne!(pts, sample_ball(&spec, 5000, 8, 0));
    }

    #[test]
    fn quasi_ball_samples_satisfy_quasi_norm() {
        let spec = BallSpec::new(2.0, BallShape::QuasiBall, vec![1, 1, 2]).unwrap();
        let pts = sample_ball(&spec, 3000, 1, 0);
        assert!(pts.iter().all(|p| spec.contains(p) && quasi_norm(p, &spec.weights) <= 2.0));
    }

    #[test]
    fn exact_volumes() {
        let disk = BallSpec::new(1.0, BallShape::QuasiBall, vec![1, 1]).unwrap();
        assert!((disk.volume() - std::f64::consts::PI).abs() < 1e-12);
        let ball3 = BallSpec::new(2.0, BallShape::QuasiBall, vec![1, 1, 1]).unwrap();
        assert!((ball3.volume() - 4.0 / 3.0 * std::f64::consts::PI * 8.0).abs() < 1e-9);
        let b = BallSpec::new(2.0, BallShape::Box, vec![1, 1, 2]).unwrap();
        assert_eq!(b.volume(), 2.0 * 2.0 * 2.0 * 2.0 * 2.0 * 4.0);
    }

    #[test]
    fn mean_of_constant_has_zero_error() {
        let spec = BallSpec::new(1.0, BallShape::Box, vec![1]).unwrap();
        let est = monte_carlo(&spec, 10_000, 3, 0, 1, |_, out| {
            out[0] = 1.0;
            Ok(0)
        })
        .unwrap();
        assert_eq!(est.mean, vec![1.0]);
        assert_eq!(est.stderr, vec![0.0]);
    }

    #[test]
    fn coordinate_mean_within_clt_bound() {
        let spec = BallSpec::new(1.0, BallShape::Box, vec![1]).unwrap();
        let count = 200_000;
        let est = monte_carlo(&spec, count, 11, 0, 1, |g, out| {
            out[0] = g[0];
            Ok(0)
        })
        .unwrap();
        assert!(est.mean[0].abs() < 3.0 / (count as f64).sqrt(), "{}", est.mean[0]);
    }

    #[test]
    fn ball_args() {
        assert_eq!(parse_ball_args("shape=box,R=5", 1.0).unwrap(), (BallShape::Box, 5.0));
        assert_eq!(parse_ball_args("R=2", 1.0).unwrap(), (BallShape::Box, 2.0));
        assert_eq!(parse_ball_args("shape=quasi-ball", 3.0).unwrap(), (BallShape::QuasiBall, 3.0));
        assert!(parse_ball_args("shape=sphere", 1.0).is_err());
    }
}
