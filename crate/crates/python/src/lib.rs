//! Python bindings: field arithmetic, parameter checks, the ReLU fit,
//! quantization, single protocol rounds and training.

#![allow(clippy::useless_conversion)]

use byitfl::config::parse_config;
use byitfl::fl::train as core_train;
use byitfl::protocol::{self, run_round, synthetic_input, ProtocolParams, RoundAdversary};
use byitfl::quant;
use byitfl::relu::{fit_relu, ReluApprox};
use byitfl::{Error, FieldElement, PrimeField};
use num_bigint::{BigInt, BigUint};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::ParamsInfeasible(_) | Error::Config(_) | Error::Range(_) | Error::Shape(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_py_json(py: Python<'_>, v: &serde_json::Value) -> PyResult<PyObject> {
    let json = py.import_bound("json")?;
    Ok(json.call_method1("loads", (v.to_string(),))?.unbind())
}

/// Prime field `Z_p`; elements are Python ints in `[0, p)`.
#[pyclass(name = "Field", frozen)]
struct PyField(PrimeField);

impl PyField {
    fn elem(&self, v: &BigInt) -> FieldElement {
        self.0.from_bigint(v)
    }

    fn out(&self, v: FieldElement) -> BigUint {
        v.value().clone()
    }
}

#[pymethods]
impl PyField {
    #[new]
    fn new(modulus: BigUint) -> PyResult<Self> {
        PrimeField::new(modulus).map(PyField).map_err(py_err)
    }

    #[getter]
    fn modulus(&self) -> BigUint {
        self.0.modulus().clone()
    }

    #[getter]
    fn bits(&self) -> u64 {
        self.0.bits()
    }

    fn add(&self, a: BigInt, b: BigInt) -> BigUint {
        self.out(self.0.add(&self.elem(&a), &self.elem(&b)))
    }

    fn sub(&self, a: BigInt, b: BigInt) -> BigUint {
        self.out(self.0.sub(&self.elem(&a), &self.elem(&b)))
    }

    fn mul(&self, a: BigInt, b: BigInt) -> BigUint {
        self.out(self.0.mul(&self.elem(&a), &self.elem(&b)))
    }

    fn inv(&self, a: BigInt) -> PyResult<BigUint> {
        self.0
            .inv(&self.elem(&a))
            .map(|v| self.out(v))
            .map_err(py_err)
    }

    /// Centered representative in `(-p/2, p/2]`.
    fn lift(&self, a: BigInt) -> BigInt {
        self.0.lift(&self.elem(&a))
    }

    fn __repr__(&self) -> String {
        format!("Field(p={})", self.0.modulus())
    }
}

#[pyclass(name = "ParamSpec", get_all, set_all)]
#[derive(Clone)]
struct PyParamSpec {
    n: usize,
    b: usize,
    t: usize,
    p_drop: usize,
    m: usize,
    k: usize,
    d: usize,
    q: u64,
    epsilon: f64,
}

impl PyParamSpec {
    fn core(&self) -> protocol::ParamSpec {
        protocol::ParamSpec {
            q: self.q,
            epsilon: self.epsilon,
            ..protocol::ParamSpec::new(self.n, self.b, self.t, self.p_drop, self.m, self.k, self.d)
        }
    }
}

#[pymethods]
impl PyParamSpec {
    #[new]
    #[pyo3(signature = (n, b, t=1, p_drop=0, m=1, k=6, d=1, q=1024, epsilon=0.02))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n: usize,
        b: usize,
        t: usize,
        p_drop: usize,
        m: usize,
        k: usize,
        d: usize,
        q: u64,
        epsilon: f64,
    ) -> Self {
        PyParamSpec {
            n,
            b,
            t,
            p_drop,
            m,
            k,
            d,
            q,
            epsilon,
        }
    }

    #[getter]
    fn min_users(&self) -> usize {
        protocol::min_users(self.b, self.k, self.m, self.t, self.p_drop)
    }

    /// Raises `ValueError` when the user-count bound fails.
    fn check(&self) -> PyResult<()> {
        self.core().check().map_err(py_err)
    }

    /// Bits of the prime the protocol would use.
    fn prime_bits(&self) -> PyResult<u64> {
        ProtocolParams::new(self.core())
            .map(|p| p.field.bits())
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "ParamSpec(n={}, b={}, t={}, p_drop={}, m={}, k={}, d={}, q={}, epsilon={})",
            self.n, self.b, self.t, self.p_drop, self.m, self.k, self.d, self.q, self.epsilon
        )
    }
}

/// Least-squares polynomial fit of ReLU.
#[pyclass(name = "Relu", frozen)]
struct PyRelu(ReluApprox);

#[pymethods]
impl PyRelu {
    #[staticmethod]
    #[pyo3(signature = (k, lo=-1.0, hi=1.0, nodes=protocol::FIT_NODES))]
    fn fit(k: usize, lo: f64, hi: f64, nodes: usize) -> PyResult<Self> {
        fit_relu(k, (lo, hi), nodes).map(PyRelu).map_err(py_err)
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k
    }

    /// Lowest degree first.
    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.0.real_coeffs.clone()
    }

    #[getter]
    fn max_abs_error(&self) -> f64 {
        self.0.max_abs_error
    }

    fn __call__(&self, x: f64) -> f64 {
        self.0.eval(x)
    }
}

#[pyfunction]
#[pyo3(signature = (b, k=6, m=1, t=1, p_drop=0))]
fn min_users(b: usize, k: usize, m: usize, t: usize, p_drop: usize) -> usize {
    protocol::min_users(b, k, m, t, p_drop)
}

/// Stochastic rounding of `q * x`, returned as signed integers.
#[pyfunction]
#[pyo3(signature = (values, q=1024, seed=0))]
fn quantize(values: Vec<f64>, q: u64, seed: u64) -> PyResult<Vec<BigInt>> {
    let f = PrimeField::from_u64((1 << 61) - 1).map_err(py_err)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let v = quant::quantize(&f, &values, q, &mut rng).map_err(py_err)?;
    Ok(v.iter().map(|x| f.lift(x)).collect())
}

/// One protocol round on synthetic updates of dimension `d`.
#[pyfunction]
#[pyo3(signature = (config="", d=8, spread=0.5, round=0))]
fn run_protocol(
    py: Python<'_>,
    config: &str,
    d: usize,
    spread: f64,
    round: u64,
) -> PyResult<PyObject> {
    let cfg = parse_config(config, None).map_err(py_err)?;
    let (report, transcript) = py
        .allow_threads(|| {
            let params = ProtocolParams::new(cfg.param_spec(d))?;
            let input = synthetic_input(&params, cfg.seed, round, spread)?;
            let adv = RoundAdversary {
                attacks: Vec::new(),
                dropouts: cfg.dropouts.clone(),
            };
            run_round(&params, &input, &adv)
        })
        .map_err(py_err)?;
    let out = to_py_json(py, &report.to_json())?;
    out.bind(py)
        .downcast::<PyDict>()?
        .set_item("transcript_records", transcript.len())?;
    Ok(out)
}

/// Federated training; returns metrics and the run summary.
#[pyfunction]
#[pyo3(signature = (config=""))]
fn train(py: Python<'_>, config: &str) -> PyResult<PyObject> {
    let cfg = parse_config(config, None).map_err(py_err)?;
    let out = py.allow_threads(|| core_train(&cfg)).map_err(py_err)?;
    let v = serde_json::json!({
        "metrics": out.metrics,
        "final_accuracy": out.final_accuracy,
        "excluded": out.excluded,
        "attackers": out.attackers,
        "skipped_rounds": out.skipped_rounds,
    });
    to_py_json(py, &v)
}

#[pymodule]
fn byitfl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyField>()?;
    m.add_class::<PyParamSpec>()?;
    m.add_class::<PyRelu>()?;
    m.add_function(wrap_pyfunction!(min_users, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    m.add_function(wrap_pyfunction!(run_protocol, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
