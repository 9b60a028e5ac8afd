//! Orbit statistics for the right action of the domain group on maps.
//!
//! An observable `A` is a function of a map; along the orbit of `φ` it
//! becomes `g ↦ A(φ·g)`. Averaging that over a Følner set gives `∫A dμ_R`
//! for the empirical measure `μ_R` of the orbit. Agreement of the large-`R`
//! averages across basepoints is consistent with ergodicity; disagreement is
//! evidence against it. Neither is a proof.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dsl::{self, Expr};
use crate::error::{Error, Result};
use crate::group::GroupPoint;
use crate::map::SmoothMap;
use crate::pullback::{check_radii, McConfig};
use crate::sampling::{monte_carlo, MeanEstimate};

#[derive(Clone, Debug, PartialEq)]
pub enum ObservableKind {
    /// `m_ij` of the translate at the identity (equivalently `m_ij(g)`),
    /// optionally squared. Indices are 0-based: `i` domain, `j` codomain.
    Entry { i: usize, j: usize, squared: bool },
    /// Coordinate `j` of the translate evaluated at a fixed probe point.
    Coordinate { j: usize, probe: GroupPoint },
    /// Expression over the entries `dIJ`.
    Expression(Expr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub name: String,
    pub kind: ObservableKind,
}

fn parse_entry_name(name: &str, n: usize, m: usize) -> Option<(usize, usize)> {
    let rest = name.strip_prefix('d')?;
    let (i, j): (usize, usize) = if let Some((a, b)) = rest.split_once('_') {
        (a.parse().ok()?, b.parse().ok()?)
    } else if rest.len() == 2 && rest.chars().all(|c| c.is_ascii_digit()) {
        (rest[..1].parse().ok()?, rest[1..].parse().ok()?)
    } else {
        return None;
    };
    ((1..=n).contains(&i) && (1..=m).contains(&j)).then(|| (i - 1, j - 1))
}

/// Parses a comma-free constant list like `1:2.5:-pi` into a point.
fn parse_point(text: &str, sep: char) -> Result<GroupPoint> {
    text.split(sep)
        .map(|s| {
            dsl::parse_with(s.trim(), &|_| None)?
                .constant_value()
                .ok_or_else(|| Error::InvalidInput(format!("`{s}` is not a constant")))
        })
        .collect()
}

impl Observable {
    /// Parses one observable name for maps from an `n`-dimensional domain
    /// to an `m`-dimensional codomain:
    ///
    /// * `d12` or `d1_2` — entry `m_12`; `d12sq` its square;
    /// * `c2@0.5` or `c2@1:0:0` — coordinate 2 of the translate at a probe point;
    /// * anything else — an expression over entries, e.g. `d11*d22 - d12*d21`.
    pub fn parse(text: &str, n: usize, m: usize) -> Result<Observable> {
        let name = text.trim().to_string();
        if let Some(base) = name.strip_suffix("sq") {
            if let Some((i, j)) = parse_entry_name(base, n, m) {
                return Ok(Observable { name, kind: ObservableKind::Entry { i, j, squared: true } });
            }
        }
        if let Some((i, j)) = parse_entry_name(&name, n, m) {
            return Ok(Observable { name, kind: ObservableKind::Entry { i, j, squared: false } });
        }
        if let Some((coord, probe)) = name.strip_prefix('c').and_then(|r| r.split_once('@')) {
            let j: usize = coord.parse().map_err(|_| Error::InvalidInput(format!("bad coordinate in `{name}`")))?;
            if !(1..=m).contains(&j) {
                return Err(Error::InvalidInput(format!("coordinate {j} out of range in `{name}`")));
            }
            let probe = parse_point(probe, ':')?;
            if probe.len() != n {
                return Err(Error::DimensionMismatch(format!("probe point in `{name}` needs {n} coordinates")));
            }
            return Ok(Observable { name, kind: ObservableKind::Coordinate { j: j - 1, probe } });
        }
        let expr = dsl::parse_with(&name, &|s| parse_entry_name(s, n, m).map(|(i, j)| i * m + j))?;
        Ok(Observable { name, kind: ObservableKind::Expression(expr) })
    }

    /// Splits a comma-separated list; commas inside parentheses are kept.
    pub fn parse_list(text: &str, n: usize, m: usize) -> Result<Vec<Observable>> {
        let mut out = Vec::new();
        let mut depth = 0i32;
        let mut start = 0;
        for (at, c) in text.char_indices() {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                ',' if depth == 0 => {
                    out.push(Observable::parse(&text[start..at], n, m)?);
                    start = at + 1;
                }
                _ => {}
            }
        }
        out.push(Observable::parse(&text[start..], n, m)?);
        Ok(out)
    }

    fn needs_differential(&self) -> bool {
        !matches!(self.kind, ObservableKind::Coordinate { .. })
    }

    /// `A(φ·g)`, given `m(g)` when the observable needs it.
    fn value(&self, map: &SmoothMap, g: &[f64], d: Option<&DMatrix<f64>>, kinks: &mut usize) -> Result<f64> {
        match &self.kind {
            ObservableKind::Entry { i, j, squared } => {
                let v = d.expect("differential computed")[(*j, *i)];
                Ok(if *squared { v * v } else { v })
            }
            ObservableKind::Coordinate { j, probe } => {
                let dom = map.domain();
                let cod = map.codomain();
                let phi_g = map.evaluate_counting(g, kinks)?;
                let phi_gp = map.evaluate_counting(&dom.multiply(g, probe), kinks)?;
                Ok(cod.multiply(&cod.inverse(&phi_g), &phi_gp)[*j])
            }
            ObservableKind::Expression(e) => {
                let d = d.expect("differential computed");
                let env: Vec<f64> = (0..d.ncols()).flat_map(|i| (0..d.nrows()).map(move |j| (i, j))).map(|(i, j)| d[(j, i)]).collect();
                e.eval(&env, kinks).map_err(|err| match err {
                    Error::Domain { message, .. } => Error::Domain { message, point: g.to_vec() },
                    other => other,
                })
            }
        }
    }

    /// Evaluates the observable on the single map `φ·g`.
    pub fn eval(&self, map: &SmoothMap, g: &[f64]) -> Result<f64> {
        let d = if self.needs_differential() { Some(map.differential(g)?) } else { None };
        self.value(map, g, d.as_ref(), &mut 0)
    }
}

/// `∫ A dμ_R` for each observable on one point cloud (stream `stream`).
pub fn empirical_measure(
    map: &SmoothMap,
    observables: &[Observable],
    radius: f64,
    cfg: &McConfig,
    stream: u64,
) -> Result<MeanEstimate> {
    let ball = cfg.ball(map, radius)?;
    let need_d = observables.iter().any(Observable::needs_differential);
    monte_carlo(&ball, cfg.samples, cfg.seed, stream, observables.len(), |g, out| {
        let mut kinks = 0;
        let d = if need_d {
            let (d, k) = map.differential_counting(g)?;
            kinks += k;
            Some(d)
        } else {
            None
        };
        for (o, slot) in observables.iter().zip(out.iter_mut()) {
            *slot = o.value(map, g, d.as_ref(), &mut kinks)?;
        }
        Ok(usize::from(kinks > 0))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceVerdict {
    Stable,
    Unsettled,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitTrace {
    pub observable: String,
    pub means: Vec<f64>,
    pub stderr: Vec<f64>,
    pub increments: Vec<f64>,
    /// Mean at the final radius.
    pub limit: f64,
    pub limit_stderr: f64,
    pub verdict: TraceVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub radii: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub traces: Vec<OrbitTrace>,
    /// Samples touching a kink of `abs`, per radius.
    pub kink_samples: Vec<usize>,
}

impl ConvergenceReport {
    pub fn all_stable(&self) -> bool {
        self.traces.iter().all(|t| t.verdict == TraceVerdict::Stable)
    }

    pub fn limits(&self) -> Vec<f64> {
        self.traces.iter().map(|t| t.limit).collect()
    }
}

/// Observable traces along a radius schedule. A trace is stable when each of
/// its last two increments is below `max(3·σ, tol)`, `σ` being the combined
/// standard error of the two means involved.
pub fn convergence_report(
    map: &SmoothMap,
    observables: &[Observable],
    radii: &[f64],
    cfg: &McConfig,
    tol: f64,
) -> Result<ConvergenceReport> {
    check_radii(radii)?;
    let per_radius = radii
        .iter()
        .enumerate()
        .map(|(r, &radius)| empirical_measure(map, observables, radius, cfg, r as u64))
        .collect::<Result<Vec<_>>>()?;
    let traces = observables
        .iter()
        .enumerate()
        .map(|(o, obs)| {
            let means: Vec<f64> = per_radius.iter().map(|e| e.mean[o]).collect();
            let stderr: Vec<f64> = per_radius.iter().map(|e| e.stderr[o]).collect();
            let increments: Vec<f64> = means.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
            let settled = (0..increments.len()).rev().take(2).all(|k| {
                let sigma = (stderr[k].powi(2) + stderr[k + 1].powi(2)).sqrt();
                increments[k] <= (3.0 * sigma).max(tol)
            });
            OrbitTrace {
                observable: obs.name.clone(),
                limit: *means.last().unwrap(),
                limit_stderr: *stderr.last().unwrap(),
                means,
                stderr,
                increments,
                verdict: if settled { TraceVerdict::Stable } else { TraceVerdict::Unsettled },
            }
        })
        .collect();
    Ok(ConvergenceReport {
        radii: radii.to_vec(),
        samples: cfg.samples,
        seed: cfg.seed,
        tol,
        traces,
        kink_samples: per_radius.iter().map(|e| e.flagged).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeVerdict {
    ConsistentWithErgodic,
    NonErgodicEvidence,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableSpread {
    pub observable: String,
    pub limits: Vec<f64>,
    pub spread: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub basepoints: Vec<GroupPoint>,
    pub reports: Vec<ConvergenceReport>,
    pub spreads: Vec<ObservableSpread>,
    pub verdict: ProbeVerdict,
}

/// Compares the orbit limits of `φ·p` across basepoints `p`. Every basepoint
/// uses the same sample streams.
pub fn ergodicity_probe(
    map: &SmoothMap,
    observables: &[Observable],
    basepoints: &[GroupPoint],
    radii: &[f64],
    cfg: &McConfig,
    tol: f64,
) -> Result<ProbeReport> {
    if basepoints.is_empty() {
        return Err(Error::InvalidInput("at least one basepoint is required".into()));
    }
    let reports = basepoints
        .iter()
        .map(|p| convergence_report(&map.act(p)?, observables, radii, cfg, tol))
        .collect::<Result<Vec<_>>>()?;
    let spreads: Vec<ObservableSpread> = observables
        .iter()
        .enumerate()
        .map(|(o, obs)| {
            let limits: Vec<f64> = reports.iter().map(|r| r.traces[o].limit).collect();
            let ses: Vec<f64> = reports.iter().map(|r| r.traces[o].limit_stderr).collect();
            let (lo, hi) = limits.iter().enumerate().fold((0, 0), |(lo, hi), (k, v)| {
                (if *v < limits[lo] { k } else { lo }, if *v > limits[hi] { k } else { hi })
            });
            let sigma = (ses[lo].powi(2) + ses[hi].powi(2)).sqrt();
            ObservableSpread {
                observable: obs.name.clone(),
                spread: limits[hi] - limits[lo],
                threshold: (3.0 * sigma).max(tol),
                limits,
            }
        })
        .collect();
    let verdict = if spreads.iter().all(|s| s.spread <= s.threshold) {
        ProbeVerdict::ConsistentWithErgodic
    } else {
        ProbeVerdict::NonErgodicEvidence
    };
    Ok(ProbeReport { basepoints: basepoints.to_vec(), reports, spreads, verdict })
}

/// Parses basepoints: `;`-separated points with `,`-separated coordinates,
/// or, for a one-dimensional domain, a `,`-separated list of numbers.
pub fn parse_basepoints(text: &str, n: usize) -> Result<Vec<GroupPoint>> {
    let points: Vec<GroupPoint> = if text.contains(';') || n > 1 {
        text.split(';').map(|p| parse_point(p, ',')).collect::<Result<_>>()?
    } else {
        parse_point(text, ',')?.into_iter().map(|v| vec![v]).collect()
    };
    if let Some(p) = points.iter().find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch(format!("basepoint {p:?} needs {n} coordinates")));
    }
    Ok(points)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormTrace {
    pub observable: String,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// `sqrt(avg_{B_R} |γ|²)` per radius, with delta-method standard errors.
pub fn amenable_norm(map: &SmoothMap, observable: &Observable, radii: &[f64], cfg: &McConfig) -> Result<NormTrace> {
    check_radii(radii)?;
    let squared = Observable {
        name: format!("({})^2", observable.name),
        kind: match &observable.kind {
            ObservableKind::Entry { i, j, .. } => ObservableKind::Entry { i: *i, j: *j, squared: true },
            ObservableKind::Coordinate { .. } => {
                return Err(Error::InvalidInput("amenable norms take derivative observables".into()))
            }
            ObservableKind::Expression(e) => ObservableKind::Expression(Expr::Pow(Box::new(e.clone()), 2)),
        },
    };
    let mut values = Vec::new();
    let mut stderr = Vec::new();
    for (r, &radius) in radii.iter().enumerate() {
        let est = empirical_measure(map, std::slice::from_ref(&squared), radius, cfg, r as u64)?;
        let v = est.mean[0].max(0.0).sqrt();
        values.push(v);
        stderr.push(if v > 0.0 { est.stderr[0] / (2.0 * v) } else { 0.0 });
    }
    Ok(NormTrace { observable: observable.name.clone(), radii: radii.to_vec(), values, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::LieAlgebra;
    use std::f64::consts::PI;

    fn line_to_plane(second: &str) -> SmoothMap {
        SmoothMap::from_algebras(LieAlgebra::abelian(1).unwrap(), LieAlgebra::abelian(2).unwrap(), &["x1", second])
            .unwrap()
    }

    #[test]
    fn observable_names() {
        let o = Observable::parse("d12", 1, 2).unwrap();
        assert_eq!(o.kind, ObservableKind::Entry { i: 0, j: 1, squared: false });
        let o = Observable::parse("d12sq", 1, 2).unwrap();
        assert_eq!(o.kind, ObservableKind::Entry { i: 0, j: 1, squared: true });
        assert!(matches!(Observable::parse("c2@0.5", 1, 2).unwrap().kind, ObservableKind::Coordinate { j: 1, .. }));
        assert!(matches!(Observable::parse("d11*d12", 1, 2).unwrap().kind, ObservableKind::Expression(_)));
        assert!(Observable::parse("d31", 1, 2).is_err());
        let list = Observable::parse_list("d11,d12sq,abs(d11 - d12)", 1, 2).unwrap();
        assert_eq!(list.len(), 3);
    }

    #[test]
    fn observable_values_on_f1() {
        let f1 = line_to_plane("sin(x1)");
        let g = [0.9];
        let obs = Observable::parse_list("d12,d12sq,c2@0.5,d11 + d12", 1, 2).unwrap();
        let v: Vec<f64> = obs.iter().map(|o| o.eval(&f1, &g).unwrap()).collect();
        assert!((v[0] - 0.9f64.cos()).abs() < 1e-14);
        assert!((v[1] - 0.9f64.cos().powi(2)).abs() < 1e-14);
        assert!((v[2] - (1.4f64.sin() - 0.9f64.sin())).abs() < 1e-14);
        assert!((v[3] - 1.0 - 0.9f64.cos()).abs() < 1e-14);
    }

    #[test]
    fn f1_empirical_measure_matches_closed_form() {
        let f1 = line_to_plane("sin(x1)");
        let obs = Observable::parse_list("d12,d12sq", 1, 2).unwrap();
        let cfg = McConfig::new(100_000, 7);
        let r = 2.5;
        let est = empirical_measure(&f1, &obs, r, &cfg, 0).unwrap();
        let exact = [r.sin() / r, 0.5 + (2.0 * r).sin() / (4.0 * r)];
        for k in 0..2 {
            assert!((est.mean[k] - exact[k]).abs() < 4.0 * est.stderr[k], "{k}: {} vs {}", est.mean[k], exact[k]);
        }
    }

    #[test]
    fn identity_orbit_is_constant() {
        let h = LieAlgebra::heisenberg(1).unwrap();
        let id = SmoothMap::from_algebras(h.clone(), h, &["x1", "x2", "x3"]).unwrap();
        let obs = Observable::parse_list("d11,d12,d33", 3, 3).unwrap();
        let rep = convergence_report(&id, &obs, &[1.0, 2.0, 4.0], &McConfig::new(2000, 1), 1e-2).unwrap();
        assert!(rep.all_stable());
        for (t, want) in rep.traces.iter().zip([1.0, 0.0, 1.0]) {
            assert!(t.means.iter().all(|m| (m - want).abs() < 1e-12));
            assert!(t.increments.iter().all(|i| *i < 1e-12));
        }
        let probe = ergodicity_probe(
            &id,
            &obs,
            &[vec![0.0; 3], vec![1.0, -2.0, 3.0]],
            &[1.0, 2.0],
            &McConfig::new(1000, 1),
            1e-2,
        )
        .unwrap();
        assert_eq!(probe.verdict, ProbeVerdict::ConsistentWithErgodic);
    }

    #[test]
    fn f2_sign_entry_separates_basepoints() {
        let f2 = line_to_plane("abs(x1)");
        let obs = Observable::parse_list("d12,d12sq", 1, 2).unwrap();
        let probe = ergodicity_probe(
            &f2,
            &obs,
            &parse_basepoints("-10,10", 1).unwrap(),
            &[1.0, 2.0, 4.0, 8.0],
            &McConfig::new(4000, 7),
            1e-2,
        )
        .unwrap();
        assert_eq!(probe.verdict, ProbeVerdict::NonErgodicEvidence);
        assert_eq!(probe.spreads[0].limits, vec![-1.0, 1.0]);
        assert_eq!(probe.spreads[1].spread, 0.0);
        // from the origin the sign average is symmetric
        let rep = convergence_report(&f2, &obs, &[1.0, 2.0, 4.0], &McConfig::new(50_000, 7), 1e-2).unwrap();
        assert!(rep.all_stable());
        assert!(rep.traces[0].limit.abs() < 4.0 * rep.traces[0].limit_stderr.max(1e-3));
        assert_eq!(rep.traces[1].limit, 1.0);
    }

    #[test]
    fn norms() {
        let f1 = line_to_plane("sin(x1)");
        let one = Observable::parse("d11", 1, 2).unwrap();
        let t = amenable_norm(&f1, &one, &[1.0, 3.0], &McConfig::new(1000, 2)).unwrap();
        assert!(t.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let cos = Observable::parse("d12", 1, 2).unwrap();
        let r = 4.0 * PI;
        let t = amenable_norm(&f1, &cos, &[r], &McConfig::new(100_000, 2)).unwrap();
        let want = (0.5 + (2.0 * r).sin() / (4.0 * r)).sqrt();
        assert!((t.values[0] - want).abs() < 4.0 * t.stderr[0]);
        let zero = Observable::parse("d12 - d12", 1, 2).unwrap();
        let t = amenable_norm(&f1, &zero, &[1.0], &McConfig::new(100, 2)).unwrap();
        assert_eq!(t.values, vec![0.0]);
    }

    #[test]
    fn basepoint_syntax() {
        assert_eq!(parse_basepoints("0,1,pi", 1).unwrap(), vec![vec![0.0], vec![1.0], vec![PI]]);
        assert_eq!(parse_basepoints("0,0,0;1,2,3", 3).unwrap(), vec![vec![0.0; 3], vec![1.0, 2.0, 3.0]]);
        assert!(parse_basepoints("1,2", 3).is_err());
    }
}
