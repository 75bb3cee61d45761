//! Python bindings. Structured results are returned as plain Python
//! objects decoded from the same JSON the CLI prints.

use std::collections::{BTreeMap, BTreeSet};

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use mlf_core::formula::{self, parse};
use mlf_core::kripke::{self, as_pba, enumerate_pbas, frame_properties, pba_frame, to_dot};
use mlf_core::labeling::{hybrid_labeling, product_labeling, verify_on};
use mlf_core::multiverse::{self, check_control_axioms, check_independence, MState, Multiverse};
use mlf_core::posets::{self, seq};
use mlf_core::theories::s42_decide;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(module = "mlf", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Formula(formula::Formula);

#[pymethods]
impl Formula {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        parse(text).map(Formula).map_err(err)
    }

    fn modal_depth(&self) -> usize {
        self.0.modal_depth()
    }

    fn size(&self) -> usize {
        self.0.size()
    }

    fn atoms(&self) -> Vec<String> {
        self.0.atoms().into_iter().collect()
    }

    /// Replaces atoms by formulas given as strings.
    fn substitute(&self, bindings: BTreeMap<String, String>) -> PyResult<Self> {
        let mut sigma = formula::Substitution::new();
        for (atom, text) in bindings {
            sigma = sigma.bind(atom, parse(&text).map_err(err)?);
        }
        Ok(Formula(self.0.substitute(&sigma)))
    }

    fn to_json<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Formula({:?})", self.0.to_string())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn __hash__(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.0.hash(&mut h);
        h.finish()
    }
}

fn formula_arg(f: &Bound<'_, PyAny>) -> PyResult<formula::Formula> {
    if let Ok(f) = f.cast::<Formula>() {
        return Ok(f.get().0.clone());
    }
    parse(&f.extract::<String>()?).map_err(err)
}

#[pyclass(module = "mlf", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Frame(kripke::Frame);

#[pymethods]
impl Frame {
    #[new]
    fn new(worlds: Vec<String>, relation: Vec<(String, String)>) -> PyResult<Self> {
        kripke::Frame::from_named(&worlds, &relation).map(Frame).map_err(err)
    }

    fn worlds(&self) -> Vec<String> {
        self.0.worlds().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn properties<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &frame_properties(&self.0))
    }

    /// Base size and cluster sizes, or `None` if the frame is not a pBA.
    fn as_pba(&self) -> Option<(usize, Vec<usize>)> {
        as_pba(&self.0).ok().map(|s| (s.base_size, s.cluster_sizes()))
    }

    fn valid(&self, f: &Bound<'_, PyAny>) -> PyResult<bool> {
        Ok(kripke::valid_on_frame(&self.0, &formula_arg(f)?))
    }

    fn to_dot(&self) -> String {
        to_dot(&self.0)
    }

    fn to_json<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0)
    }
}

#[pyclass(module = "mlf", frozen)]
struct Model(kripke::Model);

#[pymethods]
impl Model {
    #[new]
    fn new(frame: &Frame, valuation: BTreeMap<String, Vec<String>>) -> PyResult<Self> {
        let mut model = kripke::Model::new(frame.0.clone());
        for (atom, worlds) in valuation {
            let ids = worlds
                .iter()
                .map(|w| frame.0.world_index(w))
                .collect::<Result<Vec<_>, _>>()
                .map_err(err)?;
            model.set(&atom, ids).map_err(err)?;
        }
        Ok(Model(model))
    }

    fn satisfies(&self, world: &str, f: &Bound<'_, PyAny>) -> PyResult<bool> {
        let w = self.0.frame.world_index(world).map_err(err)?;
        self.0.satisfies(w, &formula_arg(f)?).map_err(err)
    }

    fn truth_set(&self, f: &Bound<'_, PyAny>) -> PyResult<Vec<String>> {
        let set = self.0.truth_set(&formula_arg(f)?);
        Ok(set.ones().map(|w| self.0.frame.worlds()[w].clone()).collect())
    }
}

/// Bounded S4.2 refutation search.
#[pyfunction]
#[pyo3(signature = (f, m_max = 3, cluster_max = 3))]
fn decide<'py>(py: Python<'py>, f: &Bound<'py, PyAny>, m_max: usize, cluster_max: usize) -> PyResult<Bound<'py, PyAny>> {
    let f = formula_arg(f)?;
    let outcome = py.detach(|| s42_decide(&f, m_max, cluster_max));
    to_py(py, &outcome)
}

#[pyfunction]
fn pbas(m: usize, cluster_max: usize) -> Vec<Frame> {
    enumerate_pbas(m, cluster_max).map(Frame).collect()
}

#[pyclass(module = "mlf", frozen, skip_from_py_object)]
#[derive(Clone)]
struct ControlFamily(multiverse::ControlFamily);

#[pymethods]
impl ControlFamily {
    #[staticmethod]
    #[pyo3(signature = (buttons, switches, nswitch = 0, ratchet = None))]
    fn independent(buttons: u32, switches: u32, nswitch: u32, ratchet: Option<(u16, u16)>) -> PyResult<Self> {
        let mut fam = multiverse::ControlFamily::independent(buttons, switches, nswitch);
        if let Some((a, k)) = ratchet {
            fam = fam.with_ratchet(a, k);
        }
        fam.validate().map_err(err)?;
        Ok(ControlFamily(fam))
    }

    #[staticmethod]
    #[pyo3(signature = (buttons, nswitch, t_buttons = 8, sw_decoupled = false))]
    fn hybrid(buttons: u32, nswitch: u32, t_buttons: u32, sw_decoupled: bool) -> PyResult<Self> {
        let fam = multiverse::ControlFamily::hybrid(buttons, nswitch, t_buttons, sw_decoupled);
        fam.validate().map_err(err)?;
        Ok(ControlFamily(fam))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let fam: multiverse::ControlFamily = serde_json::from_str(text).map_err(err)?;
        fam.validate().map_err(err)?;
        Ok(ControlFamily(fam))
    }

    fn rewired(&self, atom: &str, to: &str) -> Self {
        ControlFamily(self.0.clone().rewired(atom, to))
    }

    fn atoms(&self) -> Vec<String> {
        self.0.atoms()
    }

    fn state_count(&self) -> usize {
        self.0.state_count()
    }

    fn check_control_axioms<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let r = py.detach(|| check_control_axioms(&self.0, MState::default())).map_err(err)?;
        to_py(py, &r)
    }

    fn check_independence<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let r = py.detach(|| check_independence(&self.0, MState::default())).map_err(err)?;
        to_py(py, &r)
    }

    /// Truth set of a formula over the multiverse, as state ids.
    fn truth_set(&self, f: &Bound<'_, PyAny>) -> PyResult<Vec<String>> {
        let f = formula_arg(f)?;
        let mv = Multiverse::build(&self.0, MState::default()).map_err(err)?;
        let set = mv.truth_set(&f).map_err(err)?;
        Ok(set.ones().map(|i| mv.state_id(i)).collect())
    }

    fn to_json<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0)
    }
}

/// Labels the uniform pBA with `2^m` clusters of size `n` and verifies it.
#[pyfunction]
#[pyo3(signature = (m, n, regime = "product", t_buttons = 8, sw_decoupled = false))]
fn verify_labeling<'py>(
    py: Python<'py>,
    m: usize,
    n: usize,
    regime: &str,
    t_buttons: u32,
    sw_decoupled: bool,
) -> PyResult<Bound<'py, PyAny>> {
    if m > 5 || n == 0 {
        return Err(PyValueError::new_err("need m <= 5 and n >= 1"));
    }
    let pba = pba_frame(m, &vec![n; 1 << m]);
    let arity = if n == 1 { 0 } else { n as u32 };
    let (fam, lab) = match regime {
        "product" => {
            let fam = multiverse::ControlFamily::independent(m as u32, 0, arity);
            let lab = product_labeling(&pba, &fam);
            (fam, lab)
        }
        "hybrid" => {
            let fam = multiverse::ControlFamily::hybrid(m as u32, arity, t_buttons, sw_decoupled);
            let lab = hybrid_labeling(&pba, &fam);
            (fam, lab)
        }
        other => return Err(PyValueError::new_err(format!("unknown regime {other:?}"))),
    };
    let lab = lab.map_err(err)?;
    let mv = Multiverse::build(&fam, MState::default()).map_err(err)?;
    let report = verify_on(&lab, &mv).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
fn seq_of(index: u128) -> Vec<u64> {
    seq::seq_of(index)
}

#[pyfunction]
fn index_of(s: Vec<u64>) -> Option<u128> {
    seq::index_of(&s)
}

fn real(head: Vec<u64>, cycle: Vec<u64>) -> PyResult<posets::RealHandle> {
    if cycle.is_empty() {
        return Err(PyValueError::new_err("cycle must be non-empty"));
    }
    Ok(posets::RealHandle::periodic(head, cycle))
}

/// Reals are `(head, cycle)` pairs of eventually periodic sequences.
#[pyfunction]
fn avoid_basic_open(reals: Vec<(Vec<u64>, Vec<u64>)>) -> PyResult<Vec<u64>> {
    let rs = reals.into_iter().map(|(h, c)| real(h, c)).collect::<PyResult<Vec<_>>>()?;
    posets::avoid_basic_open(&rs).map_err(err)
}

#[pyfunction]
fn ad_code(head: Vec<u64>, cycle: Vec<u64>, count: usize) -> PyResult<Vec<u128>> {
    posets::ad_code(&real(head, cycle)?, count).map_err(err)
}

/// Builds a coding chain over ℙ_Y for reals `⟨i, 0, 0, …⟩` and returns its
/// certificate.
#[pyfunction]
#[pyo3(signature = (handles = 4, coded = vec![0, 2], steps = 200, growth = 20))]
fn coding_certificate<'py>(
    py: Python<'py>,
    handles: usize,
    coded: Vec<usize>,
    steps: usize,
    growth: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let a: BTreeSet<usize> = coded.into_iter().collect();
    if a.iter().any(|&i| i >= handles) {
        return Err(PyValueError::new_err("coded index out of range"));
    }
    let poset = posets::PyPoset::new(
        mlf_core::cli::coding_handles(handles)
            .into_iter()
            .map(posets::SetHandle::Code)
            .collect(),
    );
    let denses = posets::coding_schedule(handles, &a, steps);
    let chain = posets::rasiowa_sikorski(&poset, posets::PYCondition::default(), &denses).map_err(err)?;
    let report = posets::coding_certificate(&poset, &chain, &a, growth).map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn mlf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Formula>()?;
    m.add_class::<Frame>()?;
    m.add_class::<Model>()?;
    m.add_class::<ControlFamily>()?;
    m.add_function(wrap_pyfunction!(decide, m)?)?;
    m.add_function(wrap_pyfunction!(pbas, m)?)?;
    m.add_function(wrap_pyfunction!(verify_labeling, m)?)?;
    m.add_function(wrap_pyfunction!(seq_of, m)?)?;
    m.add_function(wrap_pyfunction!(index_of, m)?)?;
    m.add_function(wrap_pyfunction!(avoid_basic_open, m)?)?;
    m.add_function(wrap_pyfunction!(ad_code, m)?)?;
    m.add_function(wrap_pyfunction!(coding_certificate, m)?)?;
    Ok(())
}
