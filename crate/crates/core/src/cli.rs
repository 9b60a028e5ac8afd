//! Command-line front end. `run` returns the exit code so it can be driven
//! from tests as well as from `main`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::algebra::LieAlgebra;
use crate::cohomology::{compare, CohomologyRing, Comparison, RingSignature};
use crate::degree::{area_formula_check, asymptotic_degree, local_degree, AreaReport, AsymptoticDegreeTrace, DegreeOptions, DegreeResult};
use crate::ergodic::{convergence_report, ergodicity_probe, parse_basepoints, ConvergenceReport, Observable, ProbeReport};
use crate::error::{Error, Result};
use crate::forms::{monomial_name, KForm};
use crate::map::{MapFile, SmoothMap};
use crate::pullback::{amenable_average, induced_cohomology_map, parse_radii, AverageEstimate, HomomorphismReport, McConfig, DEFAULT_TOL};
use crate::ergodic::{amenable_norm, NormTrace};
use crate::report::{digest_algebra, digest_file, CommandEcho, InputDigest, Report, Timing};
use crate::sampling::{parse_ball_args, BallShape, BallSpec};
use crate::scalar::{format_rational, Rational};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "nilcoh", version, about = "Cohomology of nilpotent Lie algebras and amenable averages of pullbacks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct Sampling {
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Samples per radius.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Radius schedule: `R0:factor:steps` or a comma list; numbers may use `pi`.
    #[arg(long, default_value = "4:2:6", value_parser = parse_radii_arg)]
    pub radii: Radii,
    /// Følner set shape, e.g. `shape=box` or `shape=quasi-ball`.
    #[arg(long, default_value = "shape=box", value_parser = parse_shape_arg)]
    pub ball: BallShape,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Betti numbers, representatives, cup table and ring invariants.
    Cohomology {
        /// Algebra file or `builtin:NAME` (R<n>, h<2m+1>, filiform<n>, free2_<r>).
        algebra: String,
        #[command(flatten)]
        common: Common,
    },
    /// Compare two algebras by Betti numbers and cup-pairing ranks.
    Compare {
        left: String,
        right: String,
        #[command(flatten)]
        common: Common,
    },
    /// Ball averages of a pulled-back form.
    Average {
        #[arg(long)]
        map: PathBuf,
        /// Codomain form, e.g. `e1^e2 - 2*e3`.
        #[arg(long)]
        form: Vec<String>,
        /// Also estimate the induced map on cohomology.
        #[arg(long)]
        induced: bool,
        /// Amenable norms of derivative observables, e.g. `d12`.
        #[arg(long)]
        norm: Vec<String>,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        common: Common,
    },
    /// Orbit averages of observables and an ergodicity probe.
    Orbit {
        #[arg(long)]
        map: PathBuf,
        /// Comma-separated observables: `d12`, `d12sq`, `c2@0.5`, or expressions over `dIJ`.
        #[arg(long)]
        observables: String,
        /// Basepoints: `0,1,pi` for a 1-dimensional domain, else `x,y,z;x,y,z`.
        #[arg(long)]
        basepoints: Option<String>,
        /// Spread and increment tolerance.
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        common: Common,
    },
    /// Local degree over a target, optionally with an area-formula check.
    Degree {
        #[arg(long)]
        map: PathBuf,
        /// Box window, e.g. `R=5`.
        #[arg(long, default_value = "R=5", value_parser = parse_window_arg)]
        window: f64,
        /// Target point, comma-separated.
        #[arg(long, value_parser = parse_point_arg)]
        target: Point,
        /// Newton starts per axis.
        #[arg(long, default_value_t = 8)]
        grid: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run the area-formula check with this many samples per side.
        #[arg(long)]
        area_samples: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Asymptotic degree `τ(R)/|B_R|` of the pulled-back volume form.
    Asymdeg {
        #[arg(long)]
        map: PathBuf,
        /// Top-degree codomain form (default: the volume form).
        #[arg(long)]
        form: Option<String>,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        common: Common,
    },
}

/// Parsed radius schedule (a newtype so clap treats it as one value).
#[derive(Clone, Debug)]
pub struct Radii(pub Vec<f64>);

#[derive(Clone, Debug)]
pub struct Point(pub Vec<f64>);

fn parse_radii_arg(s: &str) -> std::result::Result<Radii, String> {
    parse_radii(s).map(Radii).map_err(|e| e.to_string())
}

fn parse_shape_arg(s: &str) -> std::result::Result<BallShape, String> {
    parse_ball_args(s, 1.0).map(|(shape, _)| shape).map_err(|e| e.to_string())
}

fn parse_window_arg(s: &str) -> std::result::Result<f64, String> {
    let (shape, r) = parse_ball_args(s, 5.0).map_err(|e| e.to_string())?;
    if shape != BallShape::Box {
        return Err("degree windows must be boxes".into());
    }
    if !(r > 0.0) {
        return Err("window radius must be positive".into());
    }
    Ok(r)
}

fn parse_point_arg(s: &str) -> std::result::Result<Point, String> {
    parse_basepoints(s, 1).map(|p| Point(p.into_iter().flatten().collect())).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CohomologyResults {
    dim: usize,
    basis: Vec<String>,
    lower_central_series: Vec<usize>,
    weights: Vec<u32>,
    betti: Vec<usize>,
    representatives: Vec<Vec<String>>,
    cup_table: Vec<CupEntry>,
    invariants: RingSignature,
}

#[derive(Serialize)]
struct CupEntry {
    k: usize,
    i: usize,
    l: usize,
    j: usize,
    coords: Vec<String>,
}

#[derive(Serialize)]
struct CompareResults {
    left: String,
    right: String,
    comparison: Comparison,
}

#[derive(Serialize)]
struct FormAverage {
    form: String,
    estimate: AverageEstimate,
    /// Final-radius averages over the quasi-ball of the same radius, and the
    /// largest coefficient gap to the primary shape.
    other_shape: BallShape,
    other_shape_final: Vec<f64>,
    other_shape_gap: f64,
}

#[derive(Serialize)]
struct AverageResults {
    map: MapSummary,
    radii: Vec<f64>,
    samples: usize,
    shape: BallShape,
    averages: Vec<FormAverage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    induced: Option<HomomorphismReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    norms: Vec<NormTrace>,
}

#[derive(Serialize)]
struct MapSummary {
    domain: String,
    codomain: String,
    components: Vec<String>,
    normalized_shift: bool,
    homomorphism: bool,
}

#[derive(Serialize)]
struct OrbitResults {
    map: MapSummary,
    radii: Vec<f64>,
    samples: usize,
    shape: BallShape,
    observables: Vec<String>,
    convergence: ConvergenceReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    probe: Option<ProbeReport>,
}

#[derive(Serialize)]
struct DegreeResults {
    map: MapSummary,
    degree: DegreeResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    area: Option<AreaReport>,
}

#[derive(Serialize)]
struct AsymdegResults {
    map: MapSummary,
    form: String,
    samples: usize,
    shape: BallShape,
    trace: AsymptoticDegreeTrace,
}

struct Loaded {
    map: SmoothMap,
    summary: MapSummary,
    inputs: Vec<InputDigest>,
    warnings: Vec<String>,
}

fn load_map(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path)?;
    let file: MapFile = serde_json::from_str(&text).map_err(|e| Error::FileFormat {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let dir = path.parent();
    let inputs = vec![
        digest_file("map", path)?,
        digest_algebra("domain", &file.domain, dir)?,
        digest_algebra("codomain", &file.codomain, dir)?,
    ];
    let raw = SmoothMap::load(path)?;
    let mut warnings = Vec::new();
    let shifted = !raw.is_normalized(0.0)?;
    let map = raw.normalize_to_y0()?;
    if shifted {
        warnings.push("map does not fix the origin; its output was left-translated by φ(0)⁻¹".into());
    }
    let summary = MapSummary {
        domain: file.domain,
        codomain: file.codomain,
        components: map.components().iter().map(|c| c.to_string()).collect(),
        normalized_shift: shifted,
        homomorphism: map.looks_like_homomorphism()?,
    };
    Ok(Loaded { map, summary, inputs, warnings })
}

fn algebra_input(reference: &str) -> Result<(LieAlgebra, InputDigest)> {
    Ok((LieAlgebra::load(reference, None)?, digest_algebra("algebra", reference, None)?))
}

fn parse_form(text: &str, alg: &LieAlgebra) -> Result<KForm<f64>> {
    Ok(KForm::<Rational>::parse(text, alg)?.to_f64())
}

struct Outcome {
    json: String,
}

fn finish<T: Serialize>(
    echo: CommandEcho,
    inputs: Vec<InputDigest>,
    seed: Option<u64>,
    results: T,
    warnings: Vec<String>,
    started: Instant,
) -> Outcome {
    let report = Report {
        command: echo,
        inputs,
        seed,
        results,
        warnings,
        timing: Timing { wall_seconds: started.elapsed().as_secs_f64(), threads: rayon::current_num_threads() },
    };
    Outcome { json: report.to_json() }
}

fn execute(command: Command, echo: CommandEcho) -> Result<Outcome> {
    let started = Instant::now();
    match command {
        Command::Cohomology { algebra, .. } => {
            let (alg, digest) = algebra_input(&algebra)?;
            let ring = CohomologyRing::compute(&alg);
            let names = alg.basis_names().to_vec();
            let results = CohomologyResults {
                dim: alg.dim(),
                basis: names.clone(),
                lower_central_series: alg.lcs().to_vec(),
                weights: alg.weights().to_vec(),
                betti: ring.betti(),
                representatives: ring
                    .spaces()
                    .iter()
                    .map(|s| s.representatives.iter().map(|r| r.render(&names)).collect())
                    .collect(),
                cup_table: ring
                    .cup_table()
                    .iter()
                    .map(|(&(k, i, l, j), c)| CupEntry { k, i, l, j, coords: c.iter().map(format_rational).collect() })
                    .collect(),
                invariants: ring.invariants(),
            };
            Ok(finish(echo, vec![digest], None, results, Vec::new(), started))
        }
        Command::Compare { left, right, .. } => {
            let (a, da) = algebra_input(&left)?;
            let (b, mut db) = algebra_input(&right)?;
            db.role = "algebra-right".into();
            let results = CompareResults { comparison: compare(&a, &b), left, right };
            Ok(finish(echo, vec![da, db], None, results, Vec::new(), started))
        }
        Command::Average { map, form, induced, norm, sampling, .. } => {
            let loaded = load_map(&map)?;
            let m = &loaded.map;
            let cfg = McConfig { samples: sampling.samples, seed: sampling.seed, shape: sampling.ball };
            let other = match sampling.ball {
                BallShape::Box => BallShape::QuasiBall,
                BallShape::QuasiBall => BallShape::Box,
            };
            let other_cfg = McConfig { shape: other, ..cfg.clone() };
            let last = *sampling.radii.0.last().unwrap();
            let mut averages = Vec::new();
            for text in &form {
                let w = parse_form(text, m.codomain().algebra())?;
                let estimate = amenable_average(m, &w, &sampling.radii.0, &cfg)?;
                let alt = amenable_average(m, &w, &[last], &other_cfg)?;
                let other_final = alt.extrapolated.clone();
                let gap = other_final.iter().zip(&estimate.extrapolated).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                averages.push(FormAverage {
                    form: text.clone(),
                    estimate,
                    other_shape: other,
                    other_shape_final: other_final,
                    other_shape_gap: gap,
                });
            }
            let mut warnings = loaded.warnings;
            let induced = if induced {
                let rep = induced_cohomology_map(m, &sampling.radii.0, &cfg)?;
                warnings.extend(rep.warnings.iter().cloned());
                Some(rep)
            } else {
                None
            };
            let norms = norm
                .iter()
                .map(|o| {
                    let obs = Observable::parse(o, m.domain().dim(), m.codomain().dim())?;
                    amenable_norm(m, &obs, &sampling.radii.0, &cfg)
                })
                .collect::<Result<Vec<_>>>()?;
            if form.is_empty() && induced.is_none() && norms.is_empty() {
                return Err(Error::InvalidInput("nothing to average: give --form, --induced or --norm".into()));
            }
            warnings.push(format!(
                "Følner sets are {} sets in exponential coordinates, not Riemannian balls",
                sampling.ball
            ));
            let results = AverageResults {
                map: loaded.summary,
                radii: sampling.radii.0.clone(),
                samples: sampling.samples,
                shape: sampling.ball,
                averages,
                induced,
                norms,
            };
            Ok(finish(echo, loaded.inputs, Some(sampling.seed), results, warnings, started))
        }
        Command::Orbit { map, observables, basepoints, tol, sampling, .. } => {
            let loaded = load_map(&map)?;
            let m = &loaded.map;
            let (n, k) = (m.domain().dim(), m.codomain().dim());
            let obs = Observable::parse_list(&observables, n, k)?;
            let cfg = McConfig { samples: sampling.samples, seed: sampling.seed, shape: sampling.ball };
            let convergence = convergence_report(m, &obs, &sampling.radii.0, &cfg, tol)?;
            let probe = match basepoints {
                Some(text) => Some(ergodicity_probe(m, &obs, &parse_basepoints(&text, n)?, &sampling.radii.0, &cfg, tol)?),
                None => None,
            };
            let mut warnings = loaded.warnings;
            let kinks: usize = convergence.kink_samples.iter().sum();
            if kinks > 0 {
                warnings.push(format!("{kinks} samples evaluated abs within 1e-9 of its kink"));
            }
            let results = OrbitResults {
                map: loaded.summary,
                radii: sampling.radii.0.clone(),
                samples: sampling.samples,
                shape: sampling.ball,
                observables: obs.iter().map(|o| o.name.clone()).collect(),
                convergence,
                probe,
            };
            Ok(finish(echo, loaded.inputs, Some(sampling.seed), results, warnings, started))
        }
        Command::Degree { map, window, target, grid, seed, area_samples, .. } => {
            let loaded = load_map(&map)?;
            let m = &loaded.map;
            let spec = BallSpec::new(window, BallShape::Box, m.domain().algebra().weights().to_vec())?;
            let opts = DegreeOptions { grid, seed, stability_check: true };
            let degree = local_degree(m, &spec, &target.0, &opts)?;
            let mut warnings = loaded.warnings;
            if degree.stable == Some(false) {
                warnings.push("degree changed when the Newton grid was doubled; preimage capture is incomplete".into());
            }
            let area = match area_samples {
                Some(s) => Some(area_formula_check(m, &spec, s, seed, grid)?),
                None => None,
            };
            let results = DegreeResults { map: loaded.summary, degree, area };
            Ok(finish(echo, loaded.inputs, Some(seed), results, warnings, started))
        }
        Command::Asymdeg { map, form, sampling, .. } => {
            let loaded = load_map(&map)?;
            let m = &loaded.map;
            let cfg = McConfig { samples: sampling.samples, seed: sampling.seed, shape: sampling.ball };
            let n = m.codomain().dim();
            let w = match &form {
                Some(t) => parse_form(t, m.codomain().algebra())?,
                None => KForm::basis(n, &(0..n).collect::<Vec<_>>(), 1.0),
            };
            let trace = asymptotic_degree(m, Some(&w), &sampling.radii.0, &cfg)?;
            let label = form.unwrap_or_else(|| monomial_name(&(0..n).collect::<Vec<_>>(), m.codomain().algebra().basis_names()));
            let results = AsymdegResults { map: loaded.summary, form: label, samples: sampling.samples, shape: sampling.ball, trace };
            Ok(finish(echo, loaded.inputs, Some(sampling.seed), results, loaded.warnings, started))
        }
    }
}

fn common(command: &Command) -> &Common {
    match command {
        Command::Cohomology { common, .. }
        | Command::Compare { common, .. }
        | Command::Average { common, .. }
        | Command::Orbit { common, .. }
        | Command::Degree { common, .. }
        | Command::Asymdeg { common, .. } => common,
    }
}

fn name(command: &Command) -> &'static str {
    match command {
        Command::Cohomology { .. } => "cohomology",
        Command::Compare { .. } => "compare",
        Command::Average { .. } => "average",
        Command::Orbit { .. } => "orbit",
        Command::Degree { .. } => "degree",
        Command::Asymdeg { .. } => "asymdeg",
    }
}

/// Runs the CLI on `args` (including the program name), writing the report
/// to `stdout` (or `--out`) and diagnostics to `stderr`.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    let common = common(&cli.command).clone();
    let echo = CommandEcho {
        name: name(&cli.command).into(),
        args: args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect(),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(common.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot start worker threads: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| execute(cli.command, echo)) {
        Ok(outcome) => {
            let written = match &common.out {
                Some(path) => std::fs::write(path, &outcome.json),
                None => stdout.write_all(outcome.json.as_bytes()),
            };
            match written {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    EXIT_DOMAIN
                }
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_DOMAIN
        }
    }
}
