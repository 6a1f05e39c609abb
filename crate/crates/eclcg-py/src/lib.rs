//! Python bindings for the recovery library.  Large integers cross the
//! boundary as decimal strings (or Python ints, which are stringified), so
//! no precision is lost at any size.

use eclcg::attack::{attack, refine_windows, AttackInput, RecoveredModel};
use eclcg::generator::{random_instance, GeneratorInstance, InstanceWire};
use eclcg::harness::{run_experiment, TrialConfig};
use eclcg::ring::coord_to_string;
use eclcg::BigInt;
use num_traits::Num;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn parse_int(label: &str, obj: &Bound<'_, PyAny>) -> PyResult<BigInt> {
    let text: String = obj.str()?.extract()?;
    BigInt::from_str_radix(text.trim(), 10)
        .map_err(|_| PyValueError::new_err(format!("{label}: not a decimal integer: {text:?}")))
}

fn parse_values(values: &Bound<'_, PyAny>) -> PyResult<Vec<BigInt>> {
    let seq: Vec<Bound<'_, PyAny>> = values.extract()?;
    seq.iter()
        .enumerate()
        .map(|(i, v)| parse_int(&format!("values[{i}]"), v))
        .collect()
}

fn json_to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<PyObject> {
    Ok(match v {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => PyBool::new_bound(py, *b).to_owned().into(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py(py)
            } else if let Some(u) = n.as_u64() {
                u.into_py(py)
            } else {
                n.as_f64().expect("json number").into_py(py)
            }
        }
        serde_json::Value::String(s) => s.into_py(py),
        serde_json::Value::Array(items) => {
            let list = PyList::empty_bound(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new_bound(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            dict.into()
        }
    })
}

/// A concrete generator: a curve over a prime field together with the
/// composer G and the hidden initial point W0.
#[pyclass]
struct Instance {
    inner: GeneratorInstance,
}

#[pymethods]
impl Instance {
    /// Builds an instance from explicit parameters.  Raises ValueError if p
    /// is not prime, the curve is singular, or a point is off the curve.
    #[new]
    fn new(
        p: &Bound<'_, PyAny>,
        a: &Bound<'_, PyAny>,
        b: &Bound<'_, PyAny>,
        gx: &Bound<'_, PyAny>,
        gy: &Bound<'_, PyAny>,
        w0x: &Bound<'_, PyAny>,
        w0y: &Bound<'_, PyAny>,
    ) -> PyResult<Self> {
        let wire = InstanceWire {
            p: parse_int("p", p)?,
            a: parse_int("a", a)?,
            b: parse_int("b", b)?,
            gx: parse_int("gx", gx)?,
            gy: parse_int("gy", gy)?,
            w0x: parse_int("w0x", w0x)?,
            w0y: parse_int("w0y", w0y)?,
        };
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let inner = wire
            .into_instance(&mut rng)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Instance { inner })
    }

    /// Samples a random instance over a fresh prime of the given bit size.
    #[staticmethod]
    #[pyo3(signature = (bits, seed=0))]
    fn random(bits: u64, seed: u64) -> PyResult<Self> {
        if !(5..=4096).contains(&bits) {
            return Err(PyValueError::new_err("bits must be in 5..=4096"));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Ok(Instance {
            inner: random_instance(bits, 40, &mut rng),
        })
    }

    /// The first `count` outputs x(W0 + nG), n = 1..count, as decimal
    /// strings.  Slots where the walk sits at infinity are reported as
    /// "infinity".
    fn outputs(&self, count: usize) -> Vec<String> {
        let report = self.inner.emit_sequence(count);
        let mut out: Vec<String> = report
            .values
            .iter()
            .map(|v| v.to_str_radix(10))
            .collect();
        if report.flags.last().is_some_and(|f| f.hit_infinity) {
            out.push("infinity".into());
        }
        out
    }

    #[getter]
    fn p(&self) -> String {
        self.inner.modulus().to_str_radix(10)
    }

    /// All seven defining parameters as decimal strings.
    fn secrets(&self) -> PyResult<Py<PyDict>> {
        let wire = InstanceWire::from_instance(&self.inner);
        let v = serde_json::to_value(&wire).expect("wire serializes");
        Python::with_gil(|py| Ok(json_to_py(py, &v)?.extract(py)?))
    }

    fn __repr__(&self) -> String {
        format!("Instance(p={})", self.inner.modulus().to_str_radix(10))
    }
}

/// A recovered description of the stream: either modular (parameters mod a
/// multiple m of the true prime) or exact rational.
#[pyclass]
struct Model {
    inner: RecoveredModel,
}

impl Model {
    fn params_strings(&self) -> (String, String, String, String) {
        let p = self.inner.params();
        (
            coord_to_string(&p.x_g),
            coord_to_string(&p.a),
            coord_to_string(&p.b),
            coord_to_string(&p.y_g2),
        )
    }
}

#[pymethods]
impl Model {
    #[getter]
    fn branch(&self) -> &'static str {
        match &self.inner {
            RecoveredModel::Modular { .. } => "modular",
            RecoveredModel::Rational { .. } => "rational",
        }
    }

    /// The recovered modulus (decimal string), or None on the rational
    /// branch.
    #[getter]
    fn m(&self) -> Option<String> {
        match &self.inner {
            RecoveredModel::Modular { m, .. } => Some(m.to_str_radix(10)),
            RecoveredModel::Rational { .. } => None,
        }
    }

    #[getter]
    fn x_g(&self) -> String {
        self.params_strings().0
    }

    #[getter]
    fn a(&self) -> String {
        self.params_strings().1
    }

    #[getter]
    fn b(&self) -> String {
        self.params_strings().2
    }

    #[getter]
    fn y_g2(&self) -> String {
        self.params_strings().3
    }

    /// Continues the stream from two consecutive outputs.  Returns a dict
    /// with the predictions for indices 3, 4, ... ("values") and, if a
    /// denominator collision ended the run early, the 1-based index and the
    /// exposed factor ("stop_index", "stop_factor").
    fn predict(
        &self,
        py: Python<'_>,
        x1: &Bound<'_, PyAny>,
        x2: &Bound<'_, PyAny>,
        count: usize,
    ) -> PyResult<Py<PyDict>> {
        let x1 = parse_int("x1", x1)?;
        let x2 = parse_int("x2", x2)?;
        let run = self.inner.params().predict_run_ints(&x1, &x2, count);
        let dict = PyDict::new_bound(py);
        let values: Vec<String> = run.values.iter().map(coord_to_string).collect();
        dict.set_item("values", values)?;
        match &run.stop {
            Some(stop) => {
                dict.set_item("stop_index", stop.step + 3)?;
                dict.set_item("stop_factor", stop.failure.g.to_str_radix(10))?;
            }
            None => {
                dict.set_item("stop_index", py.None())?;
                dict.set_item("stop_factor", py.None())?;
            }
        }
        Ok(dict.into())
    }

    /// Serializes the model; `Model.from_json` restores it.
    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("model serializes")
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: RecoveredModel = serde_json::from_str(text)
            .map_err(|e| PyValueError::new_err(format!("bad model JSON: {e}")))?;
        if !inner.validate() {
            return Err(PyValueError::new_err("model fails internal consistency"));
        }
        Ok(Model { inner })
    }

    fn __repr__(&self) -> String {
        match &self.inner {
            RecoveredModel::Modular { m, .. } => {
                format!("Model(modular, m={})", m.to_str_radix(10))
            }
            RecoveredModel::Rational { .. } => "Model(rational)".into(),
        }
    }
}

/// Recovers a model from exactly 7 consecutive outputs.  Raises ValueError
/// when the values cannot come from a generator of the assumed shape.
#[pyfunction(name = "attack")]
fn attack_py(values: &Bound<'_, PyAny>) -> PyResult<Model> {
    let vals = parse_values(values)?;
    let input = AttackInput::new(vals).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let inner = attack(&input).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(Model { inner })
}

/// Recovers a model from 7 or more consecutive outputs, folding every
/// 7-window into one refined model.  With 8 or more values the modulus is
/// almost always the prime itself.
#[pyfunction]
fn attack_windows(values: &Bound<'_, PyAny>) -> PyResult<Model> {
    let vals = parse_values(values)?;
    if vals.len() < 7 {
        return Err(PyValueError::new_err("need at least 7 values"));
    }
    let mut models = Vec::new();
    let mut first_err = None;
    for window in vals.windows(7) {
        let Ok(input) = AttackInput::new(window.to_vec()) else {
            continue;
        };
        match attack(&input) {
            Ok(model) => models.push(model),
            Err(e) => first_err = first_err.or(Some(e)),
        }
    }
    if models.is_empty() {
        let msg = first_err
            .map(|e| e.to_string())
            .unwrap_or_else(|| "no usable 7-window".into());
        return Err(PyValueError::new_err(msg));
    }
    let inner = refine_windows(&models).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(Model { inner })
}

/// Runs the recovery experiment and returns the aggregate report as a dict
/// (counts per status, exact-recovery rate, cofactor statistics).
#[pyfunction]
#[pyo3(signature = (bits=500, revealed=7, trials=100, seed=0, mr_rounds=40))]
fn experiment(
    py: Python<'_>,
    bits: u64,
    revealed: usize,
    trials: u64,
    seed: u64,
    mr_rounds: u32,
) -> PyResult<PyObject> {
    let config = TrialConfig {
        prime_bits: bits,
        revealed,
        trials,
        master_seed: seed,
        mr_rounds,
    };
    let run = py
        .allow_threads(|| run_experiment(&config))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let v = serde_json::to_value(&run.report).expect("report serializes");
    json_to_py(py, &v)
}

#[pymodule]
fn eclcg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(attack_py, m)?)?;
    m.add_function(wrap_pyfunction!(attack_windows, m)?)?;
    m.add_function(wrap_pyfunction!(experiment, m)?)?;
    Ok(())
}
