//! Python bindings. Matrices cross the boundary as lists of rows.

use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qkl::qef::{qef_pipeline, ModeCount, DEFAULT_MASS_FRACTION};
use qkl::{ComplexMatrix, ErrorCategory, RealMatrix};

create_exception!(qkl, InfeasibleError, PyArithmeticError);

fn to_py(e: qkl::Error) -> PyErr {
    match e.category() {
        ErrorCategory::InvalidInput => PyValueError::new_err(e.to_string()),
        ErrorCategory::Infeasible => InfeasibleError::new_err(e.to_string()),
        ErrorCategory::Numerical => PyRuntimeError::new_err(e.to_string()),
    }
}

type Rows = Vec<Vec<f64>>;

fn matrix(rows: Rows) -> PyResult<RealMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("ragged matrix rows"));
    }
    Ok(RealMatrix::from_row_slice(r, c, &rows.concat()))
}

fn rows(m: &RealMatrix) -> Rows {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

fn split(m: &ComplexMatrix) -> (Rows, Rows) {
    (rows(&m.map(|z| z.re)), rows(&m.map(|z| z.im)))
}

#[pyclass(name = "OqhoModel", module = "qkl", frozen)]
pub struct PyModel {
    inner: qkl::OqhoModel,
}

#[pymethods]
impl PyModel {
    /// One mode with `A = -2I`, `B = 2J`, `Σ = I`.
    #[staticmethod]
    fn canonical() -> Self {
        Self {
            inner: qkl::OqhoModel::canonical(),
        }
    }

    #[staticmethod]
    fn from_hamiltonian(theta: Rows, r: Rows, m: Rows) -> PyResult<Self> {
        let inner = qkl::OqhoModel::from_hamiltonian(matrix(theta)?, matrix(r)?, matrix(m)?)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_drift(a: Rows, b: Rows, theta: Rows) -> PyResult<Self> {
        let inner =
            qkl::OqhoModel::from_drift(matrix(a)?, matrix(b)?, matrix(theta)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn a(&self) -> Rows {
        rows(self.inner.a())
    }

    #[getter]
    fn b(&self) -> Rows {
        rows(self.inner.b())
    }

    #[getter]
    fn theta(&self) -> Rows {
        rows(self.inner.theta())
    }

    fn pr_residual(&self) -> f64 {
        self.inner.pr_residual()
    }

    fn is_hurwitz(&self) -> bool {
        self.inner.is_hurwitz()
    }

    fn steady_covariance(&self) -> PyResult<PyKernel> {
        Ok(PyKernel {
            inner: qkl::steady_covariance(&self.inner).map_err(to_py)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("OqhoModel(n={}, m={})", self.inner.n(), self.inner.m())
    }
}

#[pyclass(name = "CovarianceKernel", module = "qkl", frozen)]
pub struct PyKernel {
    inner: qkl::CovarianceKernel,
}

#[pymethods]
impl PyKernel {
    #[getter]
    fn sigma(&self) -> Rows {
        rows(self.inner.sigma())
    }

    /// `(Re V, Im V)`.
    #[getter]
    fn v(&self) -> (Rows, Rows) {
        split(self.inner.v())
    }

    /// `(Re K(tau), Im K(tau))`.
    fn k(&self, tau: f64) -> (Rows, Rows) {
        split(&self.inner.k(tau))
    }

    fn operator_trace(&self, horizon: f64) -> f64 {
        self.inner.operator_trace(horizon)
    }
}

#[pyclass(name = "SinBasis", module = "qkl", frozen)]
pub struct PyBasis {
    inner: qkl::SinBasis,
}

#[pymethods]
impl PyBasis {
    #[new]
    fn new(horizon: f64, order: usize) -> PyResult<Self> {
        Ok(Self {
            inner: qkl::SinBasis::new(horizon, order).map_err(to_py)?,
        })
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    fn omega(&self, k: usize) -> f64 {
        self.inner.omega(k)
    }

    fn eigenvalue(&self, k: usize) -> f64 {
        self.inner.lambda(k)
    }

    fn f(&self, k: usize, t: f64) -> PyResult<f64> {
        self.inner.f(k, t).map_err(to_py)
    }

    fn g(&self, k: usize, t: f64) -> PyResult<f64> {
        self.inner.g(k, t).map_err(to_py)
    }

    fn eigenvalue_sum(&self) -> f64 {
        self.inner.lambda_sum()
    }

    fn mercer_min(&self, s: f64, t: f64) -> PyResult<f64> {
        self.inner.mercer_min(s, t).map_err(to_py)
    }
}

#[pyclass(name = "KernelEigDecomposition", module = "qkl", frozen)]
pub struct PyDecomposition {
    inner: qkl::KernelEigDecomposition,
}

#[pymethods]
impl PyDecomposition {
    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.inner.mu().to_vec()
    }

    #[getter]
    fn grid_nodes(&self) -> Vec<f64> {
        self.inner.grid().nodes().to_vec()
    }

    fn operator_trace(&self) -> f64 {
        self.inner.operator_trace()
    }

    fn trace_residual(&self) -> f64 {
        self.inner.trace_residual()
    }

    fn clipped_mass(&self) -> f64 {
        self.inner.clipped_mass()
    }

    fn modes_for_mass(&self, fraction: f64) -> PyResult<usize> {
        self.inner.modes_for_mass(fraction).map_err(to_py)
    }

    /// `(index, mu, cumulative_fraction)` rows.
    fn spectrum(&self) -> Vec<(usize, f64, f64)> {
        self.inner.spectrum_rows()
    }
}

#[pyfunction]
#[pyo3(signature = (model, horizon, grid=400, n_modes=None))]
fn nystrom_eig(
    model: &PyModel,
    horizon: f64,
    grid: usize,
    n_modes: Option<usize>,
) -> PyResult<PyDecomposition> {
    let kernel = qkl::steady_covariance(&model.inner).map_err(to_py)?;
    Ok(PyDecomposition {
        inner: qkl::nystrom_eig(&kernel, horizon, grid, n_modes).map_err(to_py)?,
    })
}

/// Symplectic diagonalization of a positive definite `H`: `(U, sigmas)`.
#[pyfunction]
fn williamson(h: Rows) -> PyResult<(Rows, Vec<f64>)> {
    let w = qkl::williamson(&matrix(h)?).map_err(to_py)?;
    Ok((rows(&w.u), w.sigmas))
}

/// Closed-form functional for a `2N×2N` quadratic form; raises
/// `InfeasibleError` outside the feasibility region.
#[pyfunction]
fn qef_value(h: Rows) -> PyResult<f64> {
    qkl::qef_value(&matrix(h)?).map_err(to_py)
}

/// Truncated Fock-space value for `N ≤ 3`: `(xi, refinement_delta)`.
#[pyfunction]
#[pyo3(signature = (h, levels=None))]
fn oracle_qef(h: Rows, levels: Option<usize>) -> PyResult<(f64, f64)> {
    let h = matrix(h)?;
    let d = levels.unwrap_or_else(|| qkl::fock_oracle::default_levels(h.nrows() / 2));
    let r = qkl::oracle_qef_h(&h, d).map_err(to_py)?;
    Ok((r.xi, r.refinement_delta))
}

/// Full pipeline from a model and weight `Π`; `n` is a mode count or `None`
/// for the smallest count capturing `mass_fraction` of the spectrum.
#[pyfunction]
#[pyo3(signature = (model, pi, horizon=1.0, grid=400, n=None, mass_fraction=DEFAULT_MASS_FRACTION))]
fn qef<'py>(
    py: Python<'py>,
    model: &PyModel,
    pi: Rows,
    horizon: f64,
    grid: usize,
    n: Option<usize>,
    mass_fraction: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let kernel = qkl::steady_covariance(&model.inner).map_err(to_py)?;
    let d = qkl::nystrom_eig(&kernel, horizon, grid, None).map_err(to_py)?;
    let modes = n.map_or(
        ModeCount::Auto {
            fraction: mass_fraction,
        },
        ModeCount::Fixed,
    );
    let p = qef_pipeline(&kernel, &d, &matrix(pi)?, modes).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("xi", p.xi)?;
    out.set_item("feasible", p.feasible)?;
    out.set_item("feasibility_radius", p.radius)?;
    out.set_item("sigmas", p.sigmas)?;
    out.set_item("requested_modes", p.requested_modes)?;
    out.set_item("kept_modes", p.kept_modes)?;
    out.set_item("tail_mass", p.tail_mass)?;
    out.set_item("mean_q", p.mean_q)?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "qkl")]
pub fn qkl_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyBasis>()?;
    m.add_class::<PyDecomposition>()?;
    m.add_function(wrap_pyfunction!(nystrom_eig, m)?)?;
    m.add_function(wrap_pyfunction!(williamson, m)?)?;
    m.add_function(wrap_pyfunction!(qef_value, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_qef, m)?)?;
    m.add_function(wrap_pyfunction!(qef, m)?)?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    Ok(())
}
