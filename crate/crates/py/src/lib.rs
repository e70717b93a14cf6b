//! Python module `quasiconvex`: grid functions, transforms and the geometric checks.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use quasiconvex::alexandrov;
use quasiconvex::contact::global_contact_set;
use quasiconvex::convex::{self, Modulus};
use quasiconvex::corpus::{gen_max_quadratics, rasterize};
use quasiconvex::grid::region_ball;
use quasiconvex::legendre;
use quasiconvex::verify;
use quasiconvex::vertex::{self, Paraboloid};
use quasiconvex::{io, GridDomain, GridFunction, IndexRegion, SymMatrix};

fn py_err(e: quasiconvex::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "GridDomain", module = "quasiconvex", frozen, from_py_object)]
#[derive(Clone)]
struct PyDomain {
    inner: GridDomain,
}

#[pymethods]
impl PyDomain {
    #[new]
    fn new(mins: Vec<f64>, maxs: Vec<f64>, shape: Vec<usize>) -> PyResult<Self> {
        GridDomain::new(mins, maxs, shape).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn cube(dim: usize, lo: f64, hi: f64, points: usize) -> PyResult<Self> {
        GridDomain::cube(dim, lo, hi, points).map(|inner| Self { inner }).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    #[getter]
    fn mins(&self) -> Vec<f64> {
        self.inner.mins().to_vec()
    }
    #[getter]
    fn maxs(&self) -> Vec<f64> {
        self.inner.maxs().to_vec()
    }
    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape().to_vec()
    }
    #[getter]
    fn spacing(&self) -> Vec<f64> {
        self.inner.spacing().to_vec()
    }

    fn node(&self, lin: usize) -> PyResult<Vec<f64>> {
        if lin >= self.inner.len() {
            return Err(PyValueError::new_err(format!("node {lin} out of range")));
        }
        Ok(self.inner.node(lin))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("GridDomain(mins={:?}, maxs={:?}, shape={:?})", self.inner.mins(), self.inner.maxs(), self.inner.shape())
    }
}

#[pyclass(name = "GridFunction", module = "quasiconvex", frozen, from_py_object)]
#[derive(Clone)]
struct PyFunction {
    inner: GridFunction,
}

#[pymethods]
impl PyFunction {
    /// Values are flattened row-major, last axis fastest.
    #[new]
    fn new(domain: &PyDomain, values: Vec<f64>) -> PyResult<Self> {
        GridFunction::new(domain.inner.clone(), values).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        io::from_json(text).map(|inner| Self { inner }).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        io::to_json(&self.inner).map_err(py_err)
    }

    #[getter]
    fn domain(&self) -> PyDomain {
        PyDomain { inner: self.inner.domain().clone() }
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn value_at(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.value_at_point(&x).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.values().len()
    }

    fn __repr__(&self) -> String {
        format!("GridFunction(shape={:?})", self.inner.domain().shape())
    }
}

fn wrap(inner: GridFunction) -> PyFunction {
    PyFunction { inner }
}

/// Random maximum of `pieces` quadratics sampled on `domain`.
#[pyfunction]
#[pyo3(signature = (seed, domain, pieces=3, curv=(-1.0, 2.0)))]
fn generate(seed: u64, domain: &PyDomain, pieces: usize, curv: (f64, f64)) -> PyResult<PyFunction> {
    let f = gen_max_quadratics(seed, &domain.inner, pieces, curv).map_err(py_err)?;
    rasterize(&f, &domain.inner).map(wrap).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (u, dual=None))]
fn conjugate(u: &PyFunction, dual: Option<&PyDomain>) -> PyResult<PyFunction> {
    let dual = match dual {
        Some(d) => d.inner.clone(),
        None => legendre::auto_dual(&u.inner).map_err(py_err)?,
    };
    legendre::conjugate(&u.inner, &dual).map(wrap).map_err(py_err)
}

#[pyfunction]
fn auto_dual(u: &PyFunction) -> PyResult<PyDomain> {
    legendre::auto_dual(&u.inner).map(|inner| PyDomain { inner }).map_err(py_err)
}

#[pyfunction]
fn convex_envelope(u: &PyFunction) -> PyResult<PyFunction> {
    legendre::biconjugate_envelope(&u.inner).map(wrap).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (u, tol=1e-9))]
fn is_convex(u: &PyFunction, tol: f64) -> PyResult<bool> {
    convex::is_convex(&u.inner, tol).map_err(py_err)
}

/// `(lower, upper)` at a 1-D node.
#[pyfunction]
fn subdifferential_interval(u: &PyFunction, x: f64) -> PyResult<(f64, f64)> {
    convex::subdifferential_interval_1d(&u.inner, x).map(|iv| (iv.lower, iv.upper)).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (u, x, p, tol=1e-9))]
fn subdifferential_contains(u: &PyFunction, x: Vec<f64>, p: Vec<f64>, tol: f64) -> PyResult<bool> {
    convex::subdifferential_contains(&u.inner, &x, &p, tol).map_err(py_err)
}

/// `None` when the modulus exceeds `lambda_max`.
#[pyfunction]
#[pyo3(signature = (u, lambda_max=100.0, tol=1e-9))]
fn quasiconvex_modulus(u: &PyFunction, lambda_max: f64, tol: f64) -> PyResult<Option<f64>> {
    Ok(match convex::quasiconvex_modulus(&u.inner, lambda_max, tol).map_err(py_err)? {
        Modulus::Value(v) => Some(v),
        Modulus::ExceedsMax => None,
    })
}

fn region(u: &GridFunction, rho: Option<f64>, center: Option<Vec<f64>>) -> PyResult<IndexRegion> {
    let d = u.domain();
    match rho {
        Some(r) => region_ball(d, &center.unwrap_or_else(|| vec![0.0; d.dim()]), r).map_err(py_err),
        None => Ok(IndexRegion::full(d)),
    }
}

/// Contact nodes of type `lam * I` with their witness slopes, plus the contact measure.
#[pyfunction]
#[pyo3(signature = (u, lam, tol=1e-9, rho=None, center=None))]
fn contact_set(
    u: &PyFunction,
    lam: f64,
    tol: f64,
    rho: Option<f64>,
    center: Option<Vec<f64>>,
) -> PyResult<(Vec<usize>, Vec<Vec<f64>>, f64)> {
    let reg = region(&u.inner, rho, center)?;
    let a = SymMatrix::scaled_identity(u.inner.domain().dim(), lam);
    let set = global_contact_set(&u.inner, &reg, &a, tol).map_err(py_err)?;
    let witnesses = set.witnesses().to_vec();
    Ok((set.members.members().to_vec(), witnesses, set.measure()))
}

/// `[(node, x, v)]` for the radius-`r` contact points of a convex function.
#[pyfunction]
#[pyo3(signature = (u, r, tol=1e-9, rho=None, center=None))]
fn vertex_map(
    u: &PyFunction,
    r: f64,
    tol: f64,
    rho: Option<f64>,
    center: Option<Vec<f64>>,
) -> PyResult<Vec<(usize, Vec<f64>, Vec<f64>)>> {
    let reg = region(&u.inner, rho, center)?;
    let pairs = vertex::vertex_map(&u.inner, &reg, r, tol).map_err(py_err)?;
    Ok(pairs.into_iter().map(|p| (p.node, p.x, p.v)).collect())
}

#[pyfunction]
fn slab<'py>(py: Python<'py>, v1: Vec<f64>, c1: f64, v2: Vec<f64>, c2: f64, r: f64) -> PyResult<Bound<'py, PyDict>> {
    let p1 = Paraboloid::new(v1, c1, r).map_err(py_err)?;
    let p2 = Paraboloid::new(v2, c2, r).map_err(py_err)?;
    let s = vertex::slab_of_paraboloids(&p1, &p2).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("e", s.e)?;
    d.set_item("m", s.m)?;
    d.set_item("lo", s.lo)?;
    d.set_item("hi", s.hi)?;
    d.set_item("width", s.width)?;
    Ok(d)
}

/// `(x, p, objective)` for the grid proximal point of `y`.
#[pyfunction]
fn prox(u: &PyFunction, y: Vec<f64>, r: f64) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let pr = alexandrov::prox(&u.inner, &y, r).map_err(py_err)?;
    Ok((pr.x, pr.p, pr.objective))
}

/// `(fraction, nodes, passed)`; radii default to h, 2h, 3h.
#[pyfunction]
#[pyo3(signature = (u, lam=0.0, taylor_tol=1e-6, radii=None))]
fn alexandrov_statistic(
    u: &PyFunction,
    lam: f64,
    taylor_tol: f64,
    radii: Option<Vec<f64>>,
) -> PyResult<(f64, Vec<usize>, Vec<bool>)> {
    let h = u.inner.domain().max_spacing();
    let radii = radii.unwrap_or_else(|| vec![h, 2.0 * h, 3.0 * h]);
    let rep = alexandrov::alexandrov_statistic(&u.inner, lam, taylor_tol, &radii).map_err(py_err)?;
    Ok((rep.fraction, rep.nodes, rep.passed))
}

/// One property suite as a dict of its report fields.
#[pyfunction]
#[pyo3(signature = (suite, seed=0))]
fn run_suite<'py>(py: Python<'py>, suite: &str, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let r = verify::run_suite(suite, seed).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("suite", &r.suite)?;
    d.set_item("cases", r.cases)?;
    d.set_item("failures", r.failures)?;
    d.set_item("worst_defect", r.worst_defect)?;
    d.set_item("seed", r.seed)?;
    d.set_item("wall_time", r.wall_time)?;
    d.set_item("passed", r.passed())?;
    Ok(d)
}

#[pymodule(name = "quasiconvex")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDomain>()?;
    m.add_class::<PyFunction>()?;
    m.add("SUITES", verify::SUITES.to_vec())?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(conjugate, m)?)?;
    m.add_function(wrap_pyfunction!(auto_dual, m)?)?;
    m.add_function(wrap_pyfunction!(convex_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(is_convex, m)?)?;
    m.add_function(wrap_pyfunction!(subdifferential_interval, m)?)?;
    m.add_function(wrap_pyfunction!(subdifferential_contains, m)?)?;
    m.add_function(wrap_pyfunction!(quasiconvex_modulus, m)?)?;
    m.add_function(wrap_pyfunction!(contact_set, m)?)?;
    m.add_function(wrap_pyfunction!(vertex_map, m)?)?;
    m.add_function(wrap_pyfunction!(slab, m)?)?;
    m.add_function(wrap_pyfunction!(prox, m)?)?;
    m.add_function(wrap_pyfunction!(alexandrov_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    Ok(())
}
