//! Python bindings for `mbs_core`.
//!
//! Exposes MDPs, policies, datasets, the offline learners and the
//! experiment runners. All randomness is seeded from Python arguments.

use std::io::BufReader;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use mbs_core::algo::RunTrace;
use mbs_core::data::{estimate_density, generate_dataset, Provenance, SamplingMode, Transition};
use mbs_core::env::{build_combination_lock_mdp, build_rare_transition_mdp, random_mdp};
use mbs_core::experiment::{parse_spec, run_to_dir, train, AlgorithmId, AlgorithmSpec, Threshold};
use mbs_core::mdp::{exact_value_iteration, policy_value, read_mdp, write_mdp};
use mbs_core::rng::rng_from_seed;
use mbs_core::theory::{run_suite, SuiteConfig, SuiteSummary};

create_exception!(mbs_lab, MbsError, PyException);

fn err(e: mbs_core::Error) -> PyErr {
    MbsError::new_err(e.to_string())
}

/// A finite discounted MDP.
#[pyclass(module = "mbs_lab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Mdp {
    inner: mbs_core::TabularMdp,
}

#[pymethods]
impl Mdp {
    /// Reads the plain-text `mbs-mdp 1` format.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let f = std::fs::File::open(path)?;
        Ok(Self { inner: read_mdp(BufReader::new(f)).map_err(err)? })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self { inner: read_mdp(text.as_bytes()).map_err(err)? })
    }

    /// Canonical rare-transition instance and its behavior policy.
    #[staticmethod]
    fn rare_transition() -> PyResult<(Self, Policy)> {
        let (m, b) = build_rare_transition_mdp(&Default::default()).map_err(err)?;
        Ok((Self { inner: m }, Policy { inner: b }))
    }

    /// Canonical combination lock and its behavior policy.
    #[staticmethod]
    fn combination_lock() -> PyResult<(Self, Policy)> {
        let (m, b) = build_combination_lock_mdp(&Default::default()).map_err(err)?;
        Ok((Self { inner: m }, Policy { inner: b }))
    }

    /// Dirichlet transitions, uniform rewards in `[0, 1]`.
    #[staticmethod]
    fn random(seed: u64, num_states: usize, num_actions: usize, gamma: f64) -> PyResult<Self> {
        let mut rng = rng_from_seed(seed);
        Ok(Self { inner: random_mdp(&mut rng, num_states, num_actions, gamma).map_err(err)? })
    }

    fn to_text(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        write_mdp(&self.inner, &mut buf)?;
        Ok(String::from_utf8(buf).expect("format is ASCII"))
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    #[getter]
    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    #[getter]
    fn v_max(&self) -> f64 {
        self.inner.v_max()
    }

    /// `(Q*, greedy policy)`; `Q*` as a flat row-major list.
    #[pyo3(signature = (tol = 1e-10))]
    fn value_iteration(&self, tol: f64) -> PyResult<(Vec<f64>, Policy)> {
        let (q, pi) = exact_value_iteration(&self.inner, tol).map_err(err)?;
        Ok((q.into_values(), Policy { inner: pi }))
    }

    #[pyo3(signature = (policy, tol = 1e-10))]
    fn policy_value(&self, policy: &Policy, tol: f64) -> PyResult<f64> {
        policy_value(&self.inner, &policy.inner, tol).map_err(err)
    }

    /// `mode` is `iid_occupancy` or `trajectory_pool:<max_steps>`.
    #[pyo3(signature = (behavior, n, seed, mode = "iid_occupancy"))]
    fn sample(&self, behavior: &Policy, n: usize, seed: u64, mode: &str) -> PyResult<Dataset> {
        let mode: SamplingMode = mode.parse().map_err(MbsError::new_err)?;
        let ds = generate_dataset(&self.inner, &behavior.inner, n, mode, seed).map_err(err)?;
        Ok(Dataset { inner: ds })
    }

    fn __repr__(&self) -> String {
        format!(
            "Mdp(states={}, actions={}, gamma={})",
            self.inner.num_states(),
            self.inner.num_actions(),
            self.inner.gamma()
        )
    }
}

#[pyclass(module = "mbs_lab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Policy {
    inner: mbs_core::Policy,
}

#[pymethods]
impl Policy {
    #[staticmethod]
    fn deterministic(actions: Vec<usize>, num_actions: usize) -> PyResult<Self> {
        Ok(Self { inner: mbs_core::Policy::deterministic(actions, num_actions).map_err(err)? })
    }

    #[staticmethod]
    fn stochastic(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let na = rows.first().map_or(0, Vec::len);
        Ok(Self { inner: mbs_core::Policy::stochastic(rows, na).map_err(err)? })
    }

    #[staticmethod]
    fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self { inner: mbs_core::Policy::uniform(num_states, num_actions) }
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    #[getter]
    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }

    fn prob(&self, s: usize, a: usize) -> f64 {
        self.inner.prob(s, a)
    }

    /// Chosen action per state, or `None` for stochastic policies.
    fn actions(&self) -> Option<Vec<usize>> {
        (0..self.inner.num_states()).map(|s| self.inner.action(s)).collect()
    }

    fn to_table(&self) -> Vec<Vec<f64>> {
        (0..self.inner.num_states()).map(|s| self.inner.row(s)).collect()
    }
}

#[pyclass(module = "mbs_lab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Dataset {
    inner: mbs_core::data::Dataset,
}

#[pymethods]
impl Dataset {
    /// Builds a dataset from `(s, a, r, s_next)` tuples.
    #[new]
    fn new(transitions: Vec<(usize, usize, f64, usize)>) -> Self {
        let ts = transitions.into_iter().map(|(s, a, r, s_next)| Transition { s, a, r, s_next }).collect();
        let prov = Provenance {
            mdp_id: "python".into(),
            behavior_id: "python".into(),
            seed: 0,
            mode: SamplingMode::IidOccupancy,
        };
        Self { inner: mbs_core::data::Dataset::new(ts, prov) }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn transitions(&self) -> Vec<(usize, usize, f64, usize)> {
        self.inner.transitions().iter().map(|t| (t.s, t.a, t.r, t.s_next)).collect()
    }

    /// Empirical `(μ̂(s,a), μ̂(a|s))` as flat row-major lists.
    fn density(&self, num_states: usize, num_actions: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let d = estimate_density(&self.inner, num_states, num_actions).map_err(err)?;
        Ok((d.joint_table().to_vec(), d.conditional_table().to_vec()))
    }
}

fn algorithm_id(name: &str) -> PyResult<AlgorithmId> {
    Ok(match name {
        "mbs_qi" => AlgorithmId::MbsQi,
        "mbs_pi" => AlgorithmId::MbsPi,
        "fqi" => AlgorithmId::Fqi,
        "api" => AlgorithmId::Api,
        "bcql" => AlgorithmId::Bcql,
        "spibb" => AlgorithmId::Spibb,
        "bc" => AlgorithmId::Bc,
        _ => return Err(MbsError::new_err(format!("unknown algorithm `{name}`"))),
    })
}

/// Trains an offline learner. `b` fixes the support threshold; by default
/// the filtered learners use `b = 10 / n`.
#[pyfunction]
#[pyo3(signature = (algorithm, dataset, num_states, num_actions, gamma, b = None, tau = None, iters = None))]
#[allow(clippy::too_many_arguments)]
fn learn(
    algorithm: &str,
    dataset: &Dataset,
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    b: Option<f64>,
    tau: Option<f64>,
    iters: Option<usize>,
) -> PyResult<Policy> {
    let mut spec = AlgorithmSpec::new(algorithm_id(algorithm)?);
    spec.threshold = b.map(Threshold::Fixed);
    spec.tau = tau;
    spec.iters = iters;
    let (pi, _): (mbs_core::Policy, RunTrace) =
        train(&spec, &dataset.inner, num_states, num_actions, gamma, None, 0).map_err(err)?;
    Ok(Policy { inner: pi })
}

/// Runs the property-check suite; returns pass counts keyed by check name.
#[pyfunction]
#[pyo3(signature = (cases = 200, seed = 0))]
fn verify_theory(cases: usize, seed: u64) -> PyResult<Vec<(String, usize)>> {
    let cfg = SuiteConfig { cases, ..Default::default() };
    let reports = run_suite(&cfg, seed).map_err(err)?;
    let s = SuiteSummary::from_cases(&reports);
    Ok(vec![
        ("cases".into(), s.cases),
        ("fixed_point".into(), s.fixed_point_pass),
        ("projection".into(), s.projection_pass),
        ("escape".into(), s.escape_pass),
        ("operator".into(), s.operator_pass),
        ("bookkeeping".into(), s.bookkeeping_pass),
    ])
}

/// Runs a TOML experiment spec and writes its CSVs into `out_dir`.
#[pyfunction]
fn run_experiment(py: Python<'_>, spec_toml: &str, out_dir: PathBuf) -> PyResult<Vec<PathBuf>> {
    let spec = parse_spec(spec_toml).map_err(err)?;
    let (paths, _) = py.detach(|| run_to_dir(&spec, &out_dir)).map_err(err)?;
    Ok(paths)
}

#[pymodule]
fn mbs_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Mdp>()?;
    m.add_class::<Policy>()?;
    m.add_class::<Dataset>()?;
    m.add_function(wrap_pyfunction!(learn, m)?)?;
    m.add_function(wrap_pyfunction!(verify_theory, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("MbsError", m.py().get_type::<MbsError>())?;
    Ok(())
}
