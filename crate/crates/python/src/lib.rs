//! Python bindings. The extension module is importable as `nmr_pops`.

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;

use nmr_pops::algebra::{self, PeakPicking};
use nmr_pops::gates::GateJson;
use nmr_pops::reference;
use nmr_pops::scenario::{self, parse_transition, RunOptions, Scenario};
use nmr_pops::spectrometer::{
    self, RenderOptions, SampledSpectrum, DEFAULT_NOISE_SIGMA, DEFAULT_TIP_ANGLE_RAD,
};
use nmr_pops::{config, gates, state};

fn err(e: nmr_pops::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

// serde_json::Value -> Python objects via the json module
fn to_py<'py>(py: Python<'py>, v: &impl std::fmt::Display) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (v.to_string(),))
}

fn parse_gate(n: usize, gate_json: &str) -> PyResult<gates::GateSpec> {
    let g: GateJson = GateJson::from_json(gate_json).map_err(err)?;
    g.to_spec(n).map_err(err)
}

#[pyclass(name = "SpinSystem", module = "nmr_pops", frozen)]
struct PySpinSystem(nmr_pops::SpinSystem);

#[pymethods]
impl PySpinSystem {
    /// The shipped five-qubit system.
    #[staticmethod]
    fn five_qubit() -> Self {
        PySpinSystem(config::five_qubit_system())
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let cfg = config::SystemConfig::from_json(text).map_err(err)?;
        Ok(PySpinSystem(config::build_system(&cfg).map_err(err)?))
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(PySpinSystem(config::load_system(path).map_err(err)?))
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn spin_names(&self) -> Vec<String> {
        self.0.spins().iter().map(|s| s.name.clone()).collect()
    }

    /// Signed peaks of a basis state, e.g. `["+A8", "+B8", ...]`.
    fn pattern(&self, state: &str) -> PyResult<Vec<String>> {
        let s = self.0.parse_state(state).map_err(err)?;
        Ok(self.0.pattern_of(s).iter().map(|p| p.to_string()).collect())
    }

    /// `(label, lower, upper, frequency_hz)` for every transition.
    fn transitions(&self) -> Vec<(String, String, String, f64)> {
        self.0
            .enumerate_transitions()
            .into_iter()
            .map(|t| {
                (
                    t.label.to_string(),
                    t.lower.bits(),
                    t.upper.bits(),
                    t.frequency_hz,
                )
            })
            .collect()
    }

    fn frequency(&self, transition: &str) -> PyResult<f64> {
        Ok(parse_transition(&self.0, transition)
            .map_err(err)?
            .frequency_hz)
    }

    /// Compare patterns with the embedded reference table.
    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &reference::validate(&self.0).to_json_value())
    }

    fn __repr__(&self) -> String {
        format!("SpinSystem(spins={:?})", self.spin_names())
    }
}

#[pyclass(name = "PopulationState", module = "nmr_pops", frozen)]
struct PyState(state::PopulationState);

#[pymethods]
impl PyState {
    #[getter]
    fn populations(&self) -> Vec<f64> {
        self.0.populations().to_vec()
    }

    #[getter]
    fn kind(&self) -> String {
        format!("{:?}", self.0.kind()).to_lowercase()
    }

    /// Population of a basis state given as a bit string.
    fn population(&self, bits: &str) -> PyResult<f64> {
        let s = nmr_pops::BasisState::from_bits(bits).map_err(err)?;
        if s.n() != self.0.n() {
            return Err(PyValueError::new_err(format!(
                "{bits} has the wrong length"
            )));
        }
        Ok(self.0.population(s))
    }

    /// `(positive, negative)` member states if this is a POPS.
    fn pops_members(&self) -> Option<(String, String)> {
        self.0.pops_members().map(|(a, b)| (a.bits(), b.bits()))
    }

    fn sum(&self) -> f64 {
        self.0.sum()
    }

    fn __sub__(&self, other: &PyState) -> PyResult<PyState> {
        if self.0.n() != other.0.n() {
            return Err(PyValueError::new_err("states of different sizes"));
        }
        Ok(PyState(&self.0 - &other.0))
    }
}

#[pyclass(name = "Spectrum", module = "nmr_pops", frozen)]
struct PySpectrum(SampledSpectrum);

#[pymethods]
impl PySpectrum {
    #[getter]
    fn species(&self) -> String {
        self.0.species.clone()
    }

    #[getter]
    fn frequencies(&self) -> Vec<f64> {
        (0..self.0.grid.count)
            .map(|k| self.0.grid.freq(k))
            .collect()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values.clone()
    }

    fn value_at(&self, freq_hz: f64) -> f64 {
        self.0.value_at(freq_hz)
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    fn __len__(&self) -> usize {
        self.0.values.len()
    }
}

#[pyfunction]
fn thermal_state(system: &PySpinSystem) -> PyState {
    PyState(state::thermal_state(&system.0))
}

#[pyfunction]
#[pyo3(signature = (system, state, epsilon = 1.0))]
fn pseudopure(system: &PySpinSystem, state: &str, epsilon: f64) -> PyResult<PyState> {
    let s = system.0.parse_state(state).map_err(err)?;
    Ok(PyState(
        state::pseudopure(&system.0, s, epsilon).map_err(err)?,
    ))
}

/// POPS from a transition label (`"B8"`) or state pair (`"00101-01101"`).
#[pyfunction]
fn make_pops(system: &PySpinSystem, transition: &str) -> PyResult<PyState> {
    let t = parse_transition(&system.0, transition).map_err(err)?;
    Ok(PyState(state::make_pops(&system.0, &t).map_err(err)?))
}

/// Pulse labels of a gate given as JSON, e.g.
/// `{"gate":"cnot","controls":{"1":0,"2":0,"3":1,"4":0},"target":5}`.
#[pyfunction]
fn compile_gate(system: &PySpinSystem, gate: &str) -> PyResult<Vec<String>> {
    let spec = parse_gate(system.0.n(), gate)?;
    Ok(gates::compile(&system.0, &spec).map_err(err)?.labels())
}

#[pyfunction]
#[pyo3(signature = (system, state, gate, relax = false))]
fn apply_gate(
    system: &PySpinSystem,
    state: &PyState,
    gate: &str,
    relax: bool,
) -> PyResult<PyState> {
    let spec = parse_gate(system.0.n(), gate)?;
    let seq = gates::compile(&system.0, &spec).map_err(err)?;
    Ok(PyState(
        gates::apply_sequence(&system.0, &state.0, &seq, relax).map_err(err)?,
    ))
}

/// Stick spectrum as `[(label, frequency_hz, amplitude)]`.
#[pyfunction]
#[pyo3(signature = (system, state, species, tip_angle_rad = DEFAULT_TIP_ANGLE_RAD))]
fn detect(
    system: &PySpinSystem,
    state: &PyState,
    species: &str,
    tip_angle_rad: f64,
) -> PyResult<Vec<(String, f64, f64)>> {
    let sticks = spectrometer::detect(&state.0, &system.0, species, tip_angle_rad).map_err(err)?;
    Ok(sticks
        .sticks
        .iter()
        .map(|s| (s.label.to_string(), s.freq_hz, s.amplitude))
        .collect())
}

/// Sampled POPS spectrum made by two-experiment subtraction, with an
/// optional gate (JSON) applied after preparation.
#[pyfunction]
#[pyo3(signature = (system, transition, species, gate = None, seed = 0, noise_sigma = DEFAULT_NOISE_SIGMA, relax = true))]
fn pops_spectrum(
    system: &PySpinSystem,
    transition: &str,
    species: &str,
    gate: Option<&str>,
    seed: u64,
    noise_sigma: f64,
    relax: bool,
) -> PyResult<PySpectrum> {
    let t = parse_transition(&system.0, transition).map_err(err)?;
    let seq = match gate {
        Some(g) => Some(gates::compile(&system.0, &parse_gate(system.0.n(), g)?).map_err(err)?),
        None => None,
    };
    let opts = RenderOptions {
        noise_sigma,
        seed,
        relax,
        ..RenderOptions::default()
    };
    spectrometer::pops_spectrum_by_subtraction(&system.0, &t, seq.as_ref(), species, &opts)
        .map(PySpectrum)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, b, abs_a = false, abs_b = false))]
fn multiply(a: &PySpectrum, b: &PySpectrum, abs_a: bool, abs_b: bool) -> PyResult<PySpectrum> {
    algebra::multiply(&a.0, &b.0, abs_a, abs_b)
        .map(PySpectrum)
        .map_err(err)
}

/// Signal-to-noise ratio in the species' default noise window; `None` for
/// a noiseless spectrum.
#[pyfunction]
fn snr(system: &PySpinSystem, spectrum: &PySpectrum) -> PyResult<Option<f64>> {
    let w = spectrometer::default_noise_window(&system.0, &spectrum.0.species).map_err(err)?;
    match spectrometer::snr(&spectrum.0, w) {
        Ok(v) => Ok(Some(v)),
        Err(nmr_pops::Error::UndefinedSnr) => Ok(None),
        Err(e) => Err(err(e)),
    }
}

#[pyfunction]
fn classify<'py>(
    py: Python<'py>,
    system: &PySpinSystem,
    spectra: Vec<PyRef<'py, PySpectrum>>,
) -> PyResult<Bound<'py, PyAny>> {
    let spectra: Vec<SampledSpectrum> = spectra.iter().map(|s| s.0.clone()).collect();
    let c = algebra::classify_sampled(&system.0, &spectra, &PeakPicking::default()).map_err(err)?;
    to_py(py, &c.to_json_value())
}

/// Run a built-in scenario (`fig1`, `fig2`, `fig3`, `table2`) and return its
/// report. Files are written only when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (name, seed = 0, noise_sigma = DEFAULT_NOISE_SIGMA, system = None, out_dir = None))]
fn run_scenario<'py>(
    py: Python<'py>,
    name: &str,
    seed: u64,
    noise_sigma: f64,
    system: Option<&PySpinSystem>,
    out_dir: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let sc = Scenario::builtin(name).map_err(|e| PyKeyError::new_err(e.to_string()))?;
    let sys = system.map_or_else(config::five_qubit_system, |s| s.0.clone());
    let opts = RunOptions {
        seed,
        noise_sigma,
        ..RunOptions::default()
    };
    let result = scenario::run(&sys, &sc, &opts).map_err(err)?;
    if let Some(dir) = out_dir {
        result.write(dir).map_err(err)?;
    }
    to_py(py, &result.report())
}

#[pymodule(name = "nmr_pops")]
fn nmr_pops_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpinSystem>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PySpectrum>()?;
    m.add_function(wrap_pyfunction!(thermal_state, m)?)?;
    m.add_function(wrap_pyfunction!(pseudopure, m)?)?;
    m.add_function(wrap_pyfunction!(make_pops, m)?)?;
    m.add_function(wrap_pyfunction!(compile_gate, m)?)?;
    m.add_function(wrap_pyfunction!(apply_gate, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(pops_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(multiply, m)?)?;
    m.add_function(wrap_pyfunction!(snr, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add("DEFAULT_NOISE_SIGMA", DEFAULT_NOISE_SIGMA)?;
    Ok(())
}
