//! Python bindings. Matrices cross the boundary as lists of rows, vectors as
//! flat lists.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rtrakf_core::config::ExperimentConfig;
use rtrakf_core::diagnostics::invariant_suite;
use rtrakf_core::mda::RegressorSample;
use rtrakf_core::rls::ThetaEstimate;
use rtrakf_core::sim::{csv_string, emit_csv, MetricRow};
use rtrakf_core::{spd, symvec, Error, BenchmarkSystem, Rtrakf, SpdMatrix};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(format!("{}: {other}", other.kind())),
    }
}

fn to_mat(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("matrix rows have different lengths"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn from_mat(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn to_spd(rows: Vec<Vec<f64>>) -> PyResult<SpdMatrix> {
    SpdMatrix::new(to_mat(rows)?).map_err(py_err)
}

#[pyfunction]
fn vech(x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    Ok(symvec::vech(&to_mat(x)?).map_err(py_err)?.as_slice().to_vec())
}

#[pyfunction]
fn unvech(v: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    Ok(from_mat(&symvec::unvech(&DVector::from_vec(v)).map_err(py_err)?))
}

#[pyfunction]
fn kron_h(a: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(from_mat(&symvec::kron_h(&to_mat(a)?)))
}

#[pyfunction]
fn kron_u(bt: Vec<Vec<f64>>, a: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(from_mat(&symvec::kron_u(&to_mat(bt)?, &to_mat(a)?).map_err(py_err)?))
}

#[pyfunction]
fn btr(m: Vec<Vec<f64>>, n: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(from_mat(&symvec::btr(&to_mat(m)?, n).map_err(py_err)?))
}

#[pyfunction]
fn sel_matrix(n: usize) -> Vec<Vec<f64>> {
    from_mat(&symvec::sel_matrix(n))
}

/// Exponential-map retraction `X^{1/2} Exp(s X^{-1/2} V X^{-1/2}) X^{1/2}`.
#[pyfunction]
#[pyo3(signature = (x, v, s = 1.0))]
fn retract(x: Vec<Vec<f64>>, v: Vec<Vec<f64>>, s: f64) -> PyResult<Vec<Vec<f64>>> {
    let y = spd::retract(&to_spd(x)?, &to_mat(v)?, s).map_err(py_err)?;
    Ok(from_mat(y.matrix()))
}

#[pyfunction]
fn geodesic(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, s: f64) -> PyResult<Vec<Vec<f64>>> {
    let g = spd::geodesic(&to_spd(x)?, &to_spd(y)?, s).map_err(py_err)?;
    Ok(from_mat(g.matrix()))
}

/// Affine-invariant inner product `Tr{X⁻¹ V₁ X⁻¹ V₂}`.
#[pyfunction]
fn ai_inner(x: Vec<Vec<f64>>, v1: Vec<Vec<f64>>, v2: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(spd::ai_inner(&to_spd(x)?, &to_mat(v1)?, &to_mat(v2)?))
}

type Rows = Vec<Vec<f64>>;

/// `(F_k, G_k, H_k)` of the benchmark system.
#[pyfunction]
#[pyo3(signature = (k, tau = 1e4))]
fn benchmark_system(k: usize, tau: f64) -> PyResult<(Rows, Rows, Rows)> {
    let (f, g, h) = rtrakf_core::sim::benchmark_system(k, tau).map_err(py_err)?;
    Ok((from_mat(&f), from_mat(&g), from_mat(&h)))
}

/// Simulated trajectory of the benchmark system as a dict of `xs`, `us`, `ys`.
#[pyfunction]
#[pyo3(signature = (q, r, steps, seed, tau = 1e4))]
fn simulate<'py>(
    py: Python<'py>,
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    steps: usize,
    seed: u64,
    tau: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let sys = BenchmarkSystem::new(tau).map_err(py_err)?;
    let traj = rtrakf_core::sim::simulate(&sys, &to_mat(q)?, &to_mat(r)?, steps, seed).map_err(py_err)?;
    let flat = |vs: &[DVector<f64>]| -> Vec<Vec<f64>> { vs.iter().map(|v| v.as_slice().to_vec()).collect() };
    let out = PyDict::new(py);
    out.set_item("xs", flat(&traj.xs))?;
    out.set_item("us", flat(&traj.us))?;
    out.set_item("ys", flat(&traj.ys))?;
    Ok(out)
}

/// One recursive least squares step; returns `(theta, psi)`.
#[pyfunction]
fn rls_update(
    theta: Vec<f64>,
    psi: Vec<Vec<f64>>,
    d: Vec<Vec<f64>>,
    b: Vec<f64>,
    r_w: Vec<Vec<f64>>,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let est = ThetaEstimate::new(DVector::from_vec(theta), to_spd(psi)?).map_err(py_err)?;
    let sample = RegressorSample {
        k: 0,
        lags: 0,
        d: to_mat(d)?,
        b: DVector::from_vec(b),
    };
    let next = rtrakf_core::rls::rls_update(&est, &sample, &to_spd(r_w)?).map_err(py_err)?;
    Ok((next.theta.as_slice().to_vec(), from_mat(next.psi.matrix())))
}

/// Experiment configuration. Keyword arguments are applied as `key = value`
/// pairs, e.g. `Config(method="rls", steps=500, seeds="1,2")`.
#[pyclass(name = "Config", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut inner = ExperimentConfig::default();
        if let Some(kw) = kwargs {
            for (k, v) in kw.iter() {
                inner.set(&k.extract::<String>()?, &v.str()?.to_string()).map_err(py_err)?;
            }
        }
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::from_kv_str(text).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::from_file(path.as_ref()).map_err(py_err)?,
        })
    }

    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.set(key, value).map_err(py_err)
    }

    fn to_text(&self) -> String {
        self.inner.to_kv_string()
    }

    #[getter]
    fn method(&self) -> String {
        self.inner.method.to_string()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.inner.seeds.clone()
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps
    }

    fn __repr__(&self) -> String {
        format!("Config({:?})", self.inner.to_kv_string())
    }
}

fn row_dict<'py>(py: Python<'py>, row: &MetricRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("k", row.k)?;
    d.set_item("q_err_fro", row.q_err_fro)?;
    d.set_item("r_err_fro", row.r_err_fro)?;
    d.set_item("p_gap_fro", row.p_gap_fro)?;
    d.set_item("q_eig", row.q_eig.clone())?;
    d.set_item("r_eig", row.r_eig.clone())?;
    d.set_item("p_pred_eig", row.p_pred_eig.clone())?;
    d.set_item("cost", row.cost)?;
    d.set_item("grad_norm", row.grad_norm)?;
    d.set_item("rtr_iters", row.rtr_iters)?;
    d.set_item("rtr_converged", row.rtr_converged)?;
    Ok(d)
}

/// Runs one seed of the benchmark experiment; returns a list of row dicts.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config: &PyConfig, seed: u64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let rows = py
        .detach(|| rtrakf_core::sim::run_experiment(&config.inner, seed))
        .map_err(py_err)?;
    rows.iter().map(|r| row_dict(py, r)).collect()
}

/// Runs one seed and returns the CSV text, or writes it when `path` is given.
#[pyfunction]
#[pyo3(signature = (config, seed, path = None))]
fn run_csv(py: Python<'_>, config: &PyConfig, seed: u64, path: Option<String>) -> PyResult<String> {
    let rows = py
        .detach(|| rtrakf_core::sim::run_experiment(&config.inner, seed))
        .map_err(py_err)?;
    if let Some(p) = &path {
        emit_csv(&rows, p.as_ref()).map_err(py_err)?;
    }
    csv_string(&rows).map_err(py_err)
}

/// The invariant suite of the `check` command as `(name, passed, worst, tolerance)` tuples.
#[pyfunction]
#[pyo3(signature = (steps = 500, seed = 1))]
fn check(py: Python<'_>, steps: usize, seed: u64) -> PyResult<Vec<(String, bool, f64, f64)>> {
    let cfg = ExperimentConfig {
        steps,
        ..ExperimentConfig::default()
    };
    let out = py.detach(|| invariant_suite(&cfg, seed)).map_err(py_err)?;
    Ok(out
        .into_iter()
        .map(|c| (c.name.to_string(), c.passed, c.worst, c.tolerance))
        .collect())
}

/// Streaming adaptive filter on the benchmark system.
#[pyclass(name = "Filter")]
struct PyFilter {
    sys: BenchmarkSystem,
    inner: Rtrakf,
}

#[pymethods]
impl PyFilter {
    #[new]
    #[pyo3(signature = (config = None))]
    fn new(config: Option<&PyConfig>) -> PyResult<Self> {
        let cfg = config.map(|c| c.inner.clone()).unwrap_or_default();
        let sys = BenchmarkSystem::new(cfg.tau).map_err(py_err)?;
        let fcfg = cfg.filter_config(2, 1).map_err(py_err)?;
        Ok(Self {
            sys,
            inner: Rtrakf::new(fcfg, 2, 1).map_err(py_err)?,
        })
    }

    /// Feeds `y_k` and `u_{k-1}` (None at k = 0); returns the step record as a dict.
    #[pyo3(signature = (y, u_prev = None))]
    fn step<'py>(&mut self, py: Python<'py>, y: Vec<f64>, u_prev: Option<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
        let u = u_prev.map(DVector::from_vec);
        let rec = self
            .inner
            .step(&self.sys, u.as_ref(), &DVector::from_vec(y))
            .map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("k", rec.k)?;
        d.set_item("x_post", rec.x_post.as_slice().to_vec())?;
        d.set_item("p_pred", from_mat(&rec.p_pred))?;
        d.set_item("p_post", from_mat(&rec.p_post))?;
        d.set_item("estimated", rec.estimated)?;
        d.set_item("q_hat", from_mat(&rec.q_hat))?;
        d.set_item("r_hat", from_mat(&rec.r_hat))?;
        d.set_item("cost", rec.cost)?;
        d.set_item("grad_norm", rec.grad_norm)?;
        d.set_item("rtr_iters", rec.rtr_iters)?;
        Ok(d)
    }

    /// Current `(Q̂, R̂)`.
    fn estimates(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let (q, r) = self.inner.estimates();
        (from_mat(q), from_mat(r))
    }

    #[getter]
    fn first_estimate_step(&self) -> usize {
        self.inner.first_estimate_step()
    }
}

#[pymodule]
fn rtrakf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(vech, m)?)?;
    m.add_function(wrap_pyfunction!(unvech, m)?)?;
    m.add_function(wrap_pyfunction!(kron_h, m)?)?;
    m.add_function(wrap_pyfunction!(kron_u, m)?)?;
    m.add_function(wrap_pyfunction!(btr, m)?)?;
    m.add_function(wrap_pyfunction!(sel_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(retract, m)?)?;
    m.add_function(wrap_pyfunction!(geodesic, m)?)?;
    m.add_function(wrap_pyfunction!(ai_inner, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark_system, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(rls_update, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_csv, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyFilter>()?;
    Ok(())
}
