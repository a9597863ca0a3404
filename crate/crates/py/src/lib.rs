//! Python bindings for `mpsaqc`.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mpsaqc::ansatz as an;
use mpsaqc::cost::{self, CostConfig};
use mpsaqc::hamiltonian::{Preset, XyzHamiltonian};
use mpsaqc::pipeline::{self, RunConfig};
use mpsaqc::trotter;
use mpsaqc::{Error, TruncationPolicy};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_)
        | Error::Config(_)
        | Error::Parse { .. }
        | Error::SizeLimit { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn policy(chi_max: Option<usize>, cutoff: f64) -> PyResult<TruncationPolicy> {
    TruncationPolicy::new(chi_max, cutoff, true).map_err(to_py)
}

/// Matrix product state on a qubit chain.
#[pyclass(name = "Mps", module = "mpsaqc_py")]
struct PyMps {
    inner: mpsaqc::Mps,
}

#[pymethods]
impl PyMps {
    /// Product state from a bit string such as `"1010"`.
    #[staticmethod]
    fn product(bits: &str) -> PyResult<Self> {
        Ok(PyMps {
            inner: mpsaqc::Mps::from_product_state(bits).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn zeros(n: usize) -> PyResult<Self> {
        Ok(PyMps {
            inner: mpsaqc::Mps::zeros(n).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let data = serde_json::from_str(text).map_err(|e| to_py(e.into()))?;
        Ok(PyMps {
            inner: mpsaqc::Mps::from_data(&data).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner.to_data()).expect("plain data")
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn max_bond(&self) -> usize {
        self.inner.max_bond()
    }

    #[getter]
    fn bond_dims(&self) -> Vec<usize> {
        self.inner.bond_dims()
    }

    #[getter]
    fn discarded_weight(&self) -> f64 {
        self.inner.discarded_weight()
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn amplitude(&self, bits: &str) -> PyResult<Complex64> {
        self.inner.amplitude(bits).map_err(to_py)
    }

    /// Full amplitude vector, site 0 as the most significant bit.
    fn to_dense(&self) -> PyResult<Vec<Complex64>> {
        self.inner.to_dense().map_err(to_py)
    }

    fn overlap(&self, other: &PyMps) -> PyResult<Complex64> {
        self.inner.inner_product(&other.inner).map_err(to_py)
    }

    fn fidelity(&self, other: &PyMps) -> PyResult<f64> {
        self.inner.fidelity(&other.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Mps(n={}, max_bond={})",
            self.inner.n(),
            self.inner.max_bond()
        )
    }
}

/// Nearest-neighbour XYZ chain with longitudinal fields.
#[pyclass(name = "Hamiltonian", module = "mpsaqc_py")]
struct PyHamiltonian {
    inner: XyzHamiltonian,
}

#[pymethods]
impl PyHamiltonian {
    #[new]
    #[pyo3(signature = (alpha, beta, delta, h = None))]
    fn new(
        alpha: Vec<f64>,
        beta: Vec<f64>,
        delta: Vec<f64>,
        h: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let n = alpha.len() + 1;
        let inner = XyzHamiltonian::new(alpha, beta, delta, h.unwrap_or_else(|| vec![0.0; n]))
            .map_err(to_py)?;
        Ok(PyHamiltonian { inner })
    }

    /// One of `xxx`, `xxz`, `random-xyz`.
    #[staticmethod]
    #[pyo3(signature = (name, n, seed = 0))]
    fn preset(name: &str, n: usize, seed: u64) -> PyResult<Self> {
        let p: Preset = name.parse().map_err(to_py)?;
        Ok(PyHamiltonian {
            inner: XyzHamiltonian::preset(p, n, seed).map_err(to_py)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }
    #[getter]
    fn alpha(&self) -> Vec<f64> {
        self.inner.alpha.clone()
    }
    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.inner.beta.clone()
    }
    #[getter]
    fn delta(&self) -> Vec<f64> {
        self.inner.delta.clone()
    }
    #[getter]
    fn h(&self) -> Vec<f64> {
        self.inner.h.clone()
    }

    fn energy(&self, psi: &PyMps) -> PyResult<f64> {
        self.inner.energy(&psi.inner).map_err(to_py)
    }

    /// CNOT depth of the `steps`-step Trotter circuit.
    fn trotter_depth(&self, dt: f64, steps: usize) -> PyResult<usize> {
        Ok(trotter::build_trotter_schedule(&self.inner, dt, steps)
            .map_err(to_py)?
            .cnot_depth())
    }

    fn __repr__(&self) -> String {
        format!("Hamiltonian(n={})", self.inner.n)
    }
}

#[pyfunction]
#[pyo3(signature = (psi, h, dt, steps, chi_max = None, cutoff = 1e-12))]
fn tebd_evolve(
    psi: &PyMps,
    h: &PyHamiltonian,
    dt: f64,
    steps: usize,
    chi_max: Option<usize>,
    cutoff: f64,
) -> PyResult<PyMps> {
    let pol = policy(chi_max, cutoff)?;
    Ok(PyMps {
        inner: trotter::tebd_evolve(&psi.inner, &h.inner, dt, steps, &pol).map_err(to_py)?,
    })
}

/// Brickwork CNOT-block circuit mirroring a Trotter circuit.
#[pyclass(name = "Ansatz", module = "mpsaqc_py")]
struct PyAnsatz {
    inner: an::Ansatz,
}

#[pymethods]
impl PyAnsatz {
    #[new]
    fn new(n: usize, layers: usize, h: &PyHamiltonian, dt: f64) -> PyResult<Self> {
        Ok(PyAnsatz {
            inner: an::build_brickwork_ansatz(n, layers, &h.inner, dt).map_err(to_py)?,
        })
    }

    #[getter]
    fn n_params(&self) -> usize {
        self.inner.n_params()
    }

    #[getter]
    fn cnot_depth(&self) -> usize {
        self.inner.cnot_depth()
    }

    /// Parameters that make the circuit equal the Trotter circuit on `bits`.
    fn trotter_parameters(&self, h: &PyHamiltonian, dt: f64, bits: &str) -> PyResult<Vec<f64>> {
        an::trotter_initialize(&self.inner, &h.inner, dt, bits).map_err(to_py)
    }

    /// `V(θ)|0…0⟩`.
    #[pyo3(signature = (theta, chi_max = None, cutoff = 1e-12))]
    fn apply(&self, theta: Vec<f64>, chi_max: Option<usize>, cutoff: f64) -> PyResult<PyMps> {
        let zero = mpsaqc::Mps::zeros(self.inner.n).map_err(to_py)?;
        let pol = policy(chi_max, cutoff)?;
        Ok(PyMps {
            inner: an::apply_ansatz(&self.inner, &theta, &zero, &pol).map_err(to_py)?,
        })
    }

    /// Gate-list text of the circuit at `theta`.
    fn gate_list(&self, theta: Vec<f64>) -> PyResult<String> {
        Ok(self.inner.to_gate_list(&theta).map_err(to_py)?.to_text())
    }

    /// Local cost truncated at order `k` (`k = 0` is the global cost).
    #[pyo3(signature = (theta, target, k = 0))]
    fn cost(&self, theta: Vec<f64>, target: &PyMps, k: usize) -> PyResult<f64> {
        let cfg = CostConfig::new(
            CostConfig::local_weights(self.inner.n, k),
            TruncationPolicy::unbounded(),
        );
        Ok(
            cost::cost_local_truncated(&self.inner, &theta, &target.inner, &cfg)
                .map_err(to_py)?
                .total,
        )
    }

    /// Parameter-shift gradient of [`Self::cost`].
    #[pyo3(signature = (theta, target, k = 0))]
    fn gradient(&self, theta: Vec<f64>, target: &PyMps, k: usize) -> PyResult<Vec<f64>> {
        let cfg = CostConfig::new(
            CostConfig::local_weights(self.inner.n, k),
            TruncationPolicy::unbounded(),
        );
        cost::gradient(&self.inner, &theta, &target.inner, &cfg).map_err(to_py)
    }
}

/// Run the full compile-and-compare pipeline and return the report as JSON.
#[pyfunction]
#[pyo3(signature = (config_toml = None))]
fn run(py: Python<'_>, config_toml: Option<&str>) -> PyResult<String> {
    let cfg = match config_toml {
        Some(t) => RunConfig::from_toml(t).map_err(to_py)?,
        None => RunConfig::default(),
    };
    let report = py.detach(|| pipeline::run_aqctensor(&cfg)).map_err(to_py)?;
    report.to_json().map_err(to_py)
}

/// Monte-Carlo gradient variance of the product-rotation probe.
#[pyfunction]
#[pyo3(signature = (n, k, samples, seed = 0))]
fn variance_probe(n: usize, k: usize, samples: usize, seed: u64) -> PyResult<f64> {
    cost::variance_probe(n, k, samples, seed).map_err(to_py)
}

#[pymodule]
fn mpsaqc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMps>()?;
    m.add_class::<PyHamiltonian>()?;
    m.add_class::<PyAnsatz>()?;
    m.add_function(wrap_pyfunction!(tebd_evolve, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(variance_probe, m)?)?;
    Ok(())
}
