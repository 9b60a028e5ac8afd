//! Python bindings. Structured results come back as plain dicts and lists,
//! mirroring the `results` section of the CLI reports.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde::Serialize;
use serde_json::Value;

use nilcoh::algebra::LieAlgebra;
use nilcoh::cohomology::{compare as compare_algebras, CohomologyRing};
use nilcoh::degree::{area_formula_check, asymptotic_degree as asymptotic, local_degree as degree, DegreeOptions};
use nilcoh::ergodic::{convergence_report, ergodicity_probe, Observable};
use nilcoh::forms::KForm;
use nilcoh::group::NilpotentGroup;
use nilcoh::map::SmoothMap;
use nilcoh::pullback::{amenable_average as average, induced_cohomology_map, McConfig, DEFAULT_TOL};
use nilcoh::sampling::{BallShape, BallSpec};
use nilcoh::scalar::Rational;

fn err(e: nilcoh::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_py_any(py)?,
        Value::Number(n) => match (n.as_i64(), n.as_f64()) {
            (Some(i), _) => i.into_py_any(py)?,
            (None, Some(f)) => f.into_py_any(py)?,
            _ => py.None(),
        },
        Value::String(s) => s.into_py_any(py)?,
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn dict<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &v)
}

fn shape(name: &str) -> PyResult<BallShape> {
    name.parse::<BallShape>().map_err(err)
}

/// A nilpotent Lie algebra: `Algebra("builtin:h3")` or `Algebra("path.json")`.
#[pyclass(frozen, module = "pynilcoh")]
struct Algebra {
    inner: LieAlgebra,
    ring: CohomologyRing,
}

impl Algebra {
    fn wrap(inner: LieAlgebra) -> Algebra {
        let ring = CohomologyRing::compute(&inner);
        Algebra { inner, ring }
    }
}

#[pymethods]
impl Algebra {
    #[new]
    fn new(reference: &str) -> PyResult<Self> {
        Ok(Algebra::wrap(LieAlgebra::load(reference, None).map_err(err)?))
    }

    /// Parses the JSON algebra format from a string.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Algebra::wrap(LieAlgebra::parse_json(text, "<string>").map_err(err)?))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn basis(&self) -> Vec<String> {
        self.inner.basis_names().to_vec()
    }

    fn betti(&self) -> Vec<usize> {
        self.ring.betti()
    }

    fn cup_rank(&self, k: usize, l: usize) -> usize {
        self.ring.cup_rank(k, l)
    }

    /// Cohomology representatives of degree `k`, rendered over the basis.
    fn representatives(&self, k: usize) -> PyResult<Vec<String>> {
        if k > self.inner.dim() {
            return Err(PyValueError::new_err(format!("degree {k} exceeds dimension {}", self.inner.dim())));
        }
        Ok(self.ring.space(k).representatives.iter().map(|r| r.render(self.inner.basis_names())).collect())
    }

    /// `[rep^k_i] ∪ [rep^l_j]` in the degree-`k+l` representative basis, as
    /// `p/q` strings.
    fn cup(&self, k: usize, i: usize, l: usize, j: usize) -> PyResult<Vec<String>> {
        let coords: Vec<Rational> = self.ring.cup_class(k, i, l, j).map_err(err)?;
        Ok(coords.iter().map(nilcoh::scalar::format_rational).collect())
    }

    fn invariants(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        dict(py, &self.ring.invariants())
    }

    fn __repr__(&self) -> String {
        format!("Algebra(dim={}, betti={:?})", self.inner.dim(), self.ring.betti())
    }
}

#[pyfunction]
fn compare(py: Python<'_>, a: &Algebra, b: &Algebra) -> PyResult<Py<PyAny>> {
    dict(py, &compare_algebras(&a.inner, &b.inner))
}

/// A smooth map between nilpotent groups in exponential coordinates.
#[pyclass(frozen, module = "pynilcoh")]
struct Map {
    inner: SmoothMap,
}

#[pymethods]
impl Map {
    #[new]
    fn new(domain: &Algebra, codomain: &Algebra, components: Vec<String>) -> PyResult<Self> {
        let refs: Vec<&str> = components.iter().map(String::as_str).collect();
        let g = Arc::new(NilpotentGroup::new(domain.inner.clone()));
        let h = Arc::new(NilpotentGroup::new(codomain.inner.clone()));
        Ok(Map { inner: SmoothMap::new(g, h, &refs).map_err(err)? })
    }

    /// Loads a map file; the result is normalized to fix the origin.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let m = SmoothMap::load(&path).map_err(err)?;
        Ok(Map { inner: m.normalize_to_y0().map_err(err)? })
    }

    fn __call__(&self, g: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.evaluate(&g).map_err(err)
    }

    /// Matrix of the differential in left-invariant frames, rows indexed by
    /// codomain directions.
    fn differential(&self, g: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let d = self.inner.differential(&g).map_err(err)?;
        Ok((0..d.nrows()).map(|i| d.row(i).iter().copied().collect()).collect())
    }

    /// The translate `x ↦ φ(g)⁻¹ φ(g x)`.
    fn act(&self, g: Vec<f64>) -> PyResult<Map> {
        Ok(Map { inner: self.inner.act(&g).map_err(err)? })
    }

    fn normalize(&self) -> PyResult<Map> {
        Ok(Map { inner: self.inner.normalize_to_y0().map_err(err)? })
    }

    fn is_homomorphism(&self) -> PyResult<bool> {
        self.inner.looks_like_homomorphism().map_err(err)
    }

    fn __repr__(&self) -> String {
        let comps: Vec<String> = self.inner.components().iter().map(|c| c.to_string()).collect();
        format!("Map({})", comps.join(", "))
    }
}

fn config(samples: usize, seed: u64, ball: &str) -> PyResult<McConfig> {
    Ok(McConfig { shape: shape(ball)?, ..McConfig::new(samples, seed) })
}

/// Ball averages of the pullback of a codomain form such as `"e1^e2"`.
#[pyfunction]
#[pyo3(signature = (map, form, radii, samples = 100_000, seed = 0, ball = "box"))]
fn amenable_average(
    py: Python<'_>,
    map: &Map,
    form: &str,
    radii: Vec<f64>,
    samples: usize,
    seed: u64,
    ball: &str,
) -> PyResult<Py<PyAny>> {
    let w = KForm::<Rational>::parse(form, map.inner.codomain().algebra()).map_err(err)?.to_f64();
    let cfg = config(samples, seed, ball)?;
    let m = &map.inner;
    let est = py.detach(|| average(m, &w, &radii, &cfg)).map_err(err)?;
    dict(py, &est)
}

#[pyfunction]
#[pyo3(signature = (map, radii, samples = 20_000, seed = 0, ball = "box"))]
fn induced_map(py: Python<'_>, map: &Map, radii: Vec<f64>, samples: usize, seed: u64, ball: &str) -> PyResult<Py<PyAny>> {
    let cfg = config(samples, seed, ball)?;
    let m = &map.inner;
    let rep = py.detach(|| induced_cohomology_map(m, &radii, &cfg)).map_err(err)?;
    dict(py, &rep)
}

/// Orbit averages of comma-separated observables (`d12`, `d12sq`, `c2@0.5`,
/// …). With `basepoints`, runs the ergodicity probe instead.
#[pyfunction]
#[pyo3(signature = (map, observables, radii, samples = 50_000, seed = 0, basepoints = None, tol = DEFAULT_TOL, ball = "box"))]
#[allow(clippy::too_many_arguments)]
fn orbit(
    py: Python<'_>,
    map: &Map,
    observables: &str,
    radii: Vec<f64>,
    samples: usize,
    seed: u64,
    basepoints: Option<Vec<Vec<f64>>>,
    tol: f64,
    ball: &str,
) -> PyResult<Py<PyAny>> {
    let m = &map.inner;
    let obs = Observable::parse_list(observables, m.domain().dim(), m.codomain().dim()).map_err(err)?;
    let cfg = config(samples, seed, ball)?;
    match basepoints {
        Some(points) => {
            let rep = py.detach(|| ergodicity_probe(m, &obs, &points, &radii, &cfg, tol)).map_err(err)?;
            dict(py, &rep)
        }
        None => {
            let rep = py.detach(|| convergence_report(m, &obs, &radii, &cfg, tol)).map_err(err)?;
            dict(py, &rep)
        }
    }
}

/// Local degree over `target` in the box window of half-width `window`;
/// `area_samples` adds the area-formula check.
#[pyfunction]
#[pyo3(signature = (map, target, window = 5.0, grid = 8, seed = 0, area_samples = None))]
fn local_degree(
    py: Python<'_>,
    map: &Map,
    target: Vec<f64>,
    window: f64,
    grid: usize,
    seed: u64,
    area_samples: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let m = &map.inner;
    let spec = BallSpec::new(window, BallShape::Box, m.domain().algebra().weights().to_vec()).map_err(err)?;
    let opts = DegreeOptions { grid, seed, stability_check: true };
    let (deg, area) = py
        .detach(|| -> nilcoh::Result<_> {
            let d = degree(m, &spec, &target, &opts)?;
            let a = area_samples.map(|s| area_formula_check(m, &spec, s, seed, grid)).transpose()?;
            Ok((d, a))
        })
        .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("degree", dict(py, &deg)?)?;
    out.set_item("area", match area {
        Some(a) => dict(py, &a)?,
        None => py.None(),
    })?;
    Ok(out.into_any().unbind())
}

#[pyfunction]
#[pyo3(signature = (map, radii, samples = 200_000, seed = 0, ball = "box"))]
fn asymptotic_degree(py: Python<'_>, map: &Map, radii: Vec<f64>, samples: usize, seed: u64, ball: &str) -> PyResult<Py<PyAny>> {
    let cfg = config(samples, seed, ball)?;
    let m = &map.inner;
    let trace = py.detach(|| asymptotic(m, None, &radii, &cfg)).map_err(err)?;
    dict(py, &trace)
}

/// Runs the command-line interface; returns `(exit_code, stdout, stderr)`.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> (i32, String, String) {
    let (mut out, mut errs) = (Vec::new(), Vec::new());
    let argv: Vec<String> = std::iter::once("nilcoh".to_string()).chain(args).collect();
    let code = py.detach(|| nilcoh::cli::run(argv, &mut out, &mut errs));
    (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&errs).into_owned())
}

#[pymodule]
fn pynilcoh(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Algebra>()?;
    m.add_class::<Map>()?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(amenable_average, m)?)?;
    m.add_function(wrap_pyfunction!(induced_map, m)?)?;
    m.add_function(wrap_pyfunction!(orbit, m)?)?;
    m.add_function(wrap_pyfunction!(local_degree, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_degree, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
