//! Python bindings. Reports come back as plain dicts and lists, with the
//! same field names as the JSON written by the `prrr` command.

use std::collections::BTreeMap;

use prrr_core::analysis::collusion::{check_coalition_equivalence, check_pub_val_collusion, check_sybil_proofness};
use prrr_core::analysis::impossibility::{self, Baseline};
use prrr_core::analysis::spne::verify_spne;
use prrr_core::analysis::{run_stability, ActionGrid};
use prrr_core::game::{self, GameConfig, StrategyProfile};
use prrr_core::protocol::{process_slots, EpochConfig};
use prrr_core::rvalue::{FixedValues, PropertyCheckConfig, RandomValueSpec};
use prrr_core::types::{PublisherId, ReportId, ReportMinter, Slot};
use prrr_core::{parse, vrf, AnalysisError, GameError, SpecError, ValidatorKeys};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

/// Usage mistakes become `ValueError`; engine faults `RuntimeError`.
trait IntoPyErr {
    fn py_err(self) -> PyErr;
}

impl IntoPyErr for SpecError {
    fn py_err(self) -> PyErr {
        PyValueError::new_err(self.to_string())
    }
}

impl IntoPyErr for GameError {
    fn py_err(self) -> PyErr {
        match self {
            GameError::Spec(_) | GameError::Strategy(_) | GameError::UnknownPublisher(_) => {
                PyValueError::new_err(self.to_string())
            }
            e => PyRuntimeError::new_err(e.to_string()),
        }
    }
}

impl IntoPyErr for AnalysisError {
    fn py_err(self) -> PyErr {
        match self {
            AnalysisError::Game(e) => e.py_err(),
            e => PyValueError::new_err(e.to_string()),
        }
    }
}

fn check<T, E: IntoPyErr>(r: Result<T, E>) -> PyResult<T> {
    r.map_err(IntoPyErr::py_err)
}

/// Round-trips through JSON so Python sees dicts, lists and floats.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A random-value function.
#[pyclass(name = "RandomValueSpec", frozen)]
struct PySpec {
    inner: RandomValueSpec,
}

#[pymethods]
impl PySpec {
    /// `r_min + Exp(lambda)`.
    #[staticmethod]
    #[pyo3(signature = (lam = 1.0, r_min = 2.0))]
    fn logarithmic(lam: f64, r_min: f64) -> PyResult<Self> {
        Ok(Self { inner: check(RandomValueSpec::logarithmic(lam, r_min))? })
    }

    /// `r_max` with probability `p`, otherwise `r_min`.
    #[staticmethod]
    fn polarized(p: f64, r_min: f64, r_max: f64) -> PyResult<Self> {
        Ok(Self { inner: check(RandomValueSpec::polarized(p, r_min, r_max))? })
    }

    #[getter]
    fn r_min(&self) -> f64 {
        self.inner.r_min()
    }

    /// Value for a uniform draw in [0, 1).
    fn value(&self, u: f64) -> PyResult<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(PyValueError::new_err(format!("u must lie in [0, 1), got {u}")));
        }
        Ok(self.inner.value_from_uniform(u))
    }

    /// Expected total publisher payout with `n` reports.
    fn rallpub(&self, n: u64) -> PyResult<f64> {
        check(self.inner.rallpub_closed_form(n))
    }

    /// Expected contract cost (the best value) with `n` reports.
    fn expected_contract_cost(&self, n: u64) -> PyResult<f64> {
        check(self.inner.expected_contract_cost(n))
    }

    #[pyo3(signature = (n, trials = 100_000, seed = 0))]
    fn monte_carlo<'py>(&self, py: Python<'py>, n: u64, trials: u64, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let spec = self.inner;
        let r = py.detach(|| spec.monte_carlo(n, trials, seed));
        to_py(py, &check(r)?)
    }

    /// Reward monotonicity and skipping resistance for `1..=n_max` reports.
    #[pyo3(signature = (n_max = 100))]
    fn check_properties<'py>(&self, py: Python<'py>, n_max: u64) -> PyResult<Bound<'py, PyAny>> {
        let pc = PropertyCheckConfig::new(n_max);
        let mono = check(self.inner.check_reward_monotonicity(&pc))?;
        let skip = check(self.inner.check_skipping_resistance(&pc))?;
        #[derive(Serialize)]
        struct Props {
            monotonicity: prrr_core::rvalue::MonotonicityVerdict,
            skipping_resistance: prrr_core::rvalue::SkippingVerdict,
            holds: bool,
        }
        to_py(py, &Props { holds: mono.holds && skip.holds, monotonicity: mono, skipping_resistance: skip })
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        match self.inner {
            RandomValueSpec::Logarithmic { lambda, r_min } => format!("RandomValueSpec.logarithmic({lambda}, {r_min})"),
            RandomValueSpec::Polarized { p, r_min, r_max } => {
                format!("RandomValueSpec.polarized({p}, {r_min}, {r_max})")
            }
        }
    }
}

/// A game instance: publishers with report counts, epoch length and window.
#[pyclass(name = "Game", frozen)]
struct PyGame {
    inner: GameConfig,
}

impl PyGame {
    fn profile(
        &self,
        strategies: Option<BTreeMap<String, String>>,
        validator: Option<&str>,
    ) -> PyResult<StrategyProfile> {
        let cfg = &self.inner;
        let mut profile = StrategyProfile::honest(cfg);
        for (label, text) in strategies.unwrap_or_default() {
            let j = check(parse::publisher_label(&label))?;
            if !cfg.roster.contains(&j) {
                return Err(GameError::UnknownPublisher(j.0).py_err());
            }
            profile = profile.with_publisher(j, check(parse::publisher_strategy(&text, cfg.epoch.window()))?);
        }
        if let Some(v) = validator {
            profile = profile.with_validator(check(parse::validator_strategy(v))?);
        }
        Ok(profile)
    }
}

#[pymethods]
impl PyGame {
    #[new]
    #[pyo3(signature = (spec, publishers = vec![2, 2], t_total = 3, t_pub = 1, seed = 0))]
    fn new(spec: PyRef<'_, PySpec>, publishers: Vec<u32>, t_total: u64, t_pub: u64, seed: u64) -> PyResult<Self> {
        if publishers.is_empty() {
            return Err(PyValueError::new_err("need at least one publisher"));
        }
        let epoch = check(EpochConfig::new(t_total, t_pub, spec.inner))?;
        Ok(Self { inner: check(GameConfig::new(epoch, &publishers, seed))? })
    }

    #[getter]
    fn total_reports(&self) -> usize {
        self.inner.total_reports()
    }

    #[getter]
    fn window(&self) -> u64 {
        self.inner.epoch.window()
    }

    /// Report ids per publisher label.
    #[getter]
    fn reports(&self) -> BTreeMap<String, Vec<u64>> {
        let cfg = &self.inner;
        cfg.roster.iter().map(|&p| (p.to_string(), cfg.reports_of(p).iter().map(|r| r.id().0).collect())).collect()
    }

    /// One epoch, e.g. `play({"p1": "withhold:keep=0"}, trial=3)`.
    #[pyo3(signature = (strategies = None, validator = None, trial = 0, seed = 0))]
    fn play<'py>(
        &self,
        py: Python<'py>,
        strategies: Option<BTreeMap<String, String>>,
        validator: Option<&str>,
        trial: u64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let profile = self.profile(strategies, validator)?;
        to_py(py, &check(game::play_trial(&self.inner, &profile, seed, trial))?)
    }

    #[pyo3(signature = (strategies = None, validator = None, trials = 10_000, seed = 0))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        strategies: Option<BTreeMap<String, String>>,
        validator: Option<&str>,
        trials: u64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let profile = self.profile(strategies, validator)?;
        let cfg = &self.inner;
        let r = py.detach(|| game::simulate(cfg, &profile, trials, seed));
        to_py(py, &check(r)?)
    }

    /// Grid search for a profitable deviation. `verdict["verdict"]` is
    /// `"no_profitable_deviation"` or `"violation"`.
    #[pyo3(signature = (epsilon = 3.0, trials = 20_000, seed = 0, delta = 1e-6))]
    fn verify_spne<'py>(
        &self,
        py: Python<'py>,
        epsilon: f64,
        trials: u64,
        seed: u64,
        delta: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let grid = ActionGrid::pivotal(delta);
        check(grid.validate())?;
        let cfg = &self.inner;
        let r = py.detach(|| verify_spne(cfg, &grid, epsilon, trials, seed));
        to_py(py, &check(r)?)
    }

    /// Publishers `members` (default: all) with the first validator.
    #[pyo3(signature = (members = None, trials = 10_000, seed = 0))]
    fn collusion<'py>(
        &self,
        py: Python<'py>,
        members: Option<Vec<u32>>,
        trials: u64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let cfg = &self.inner;
        let members: Vec<PublisherId> =
            members.map_or_else(|| cfg.roster.clone(), |m| m.into_iter().map(PublisherId).collect());
        let r = py.detach(|| -> Result<_, AnalysisError> {
            let collusion = check_pub_val_collusion(cfg, &members, trials, seed)?;
            let equivalence = if members.len() >= 2 {
                Some(check_coalition_equivalence(cfg, &members, &StrategyProfile::honest(cfg), trials.min(1000), seed)?)
            } else {
                None
            };
            Ok((collusion, equivalence))
        });
        let (collusion, equivalence) = check(r)?;
        #[derive(Serialize)]
        struct Out<T, U> {
            holds: bool,
            collusion: T,
            equivalence: U,
        }
        let holds = collusion.holds && equivalence.as_ref().is_none_or(|e| e.holds());
        to_py(py, &Out { holds, collusion, equivalence })
    }

    /// Splits `publisher`'s reports, in id order, into parts of the given
    /// sizes, which must add up to its report count.
    #[pyo3(signature = (publisher, split, epsilon = 3.0, trials = 10_000, seed = 0))]
    fn sybil<'py>(
        &self,
        py: Python<'py>,
        publisher: u32,
        split: Vec<usize>,
        epsilon: f64,
        trials: u64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let cfg = &self.inner;
        let j = PublisherId(publisher);
        let owned: Vec<ReportId> = cfg.reports_of(j).iter().map(|r| r.id()).collect();
        if split.iter().sum::<usize>() != owned.len() {
            return Err(PyValueError::new_err(format!(
                "split {split:?} does not cover the {} reports of {j}",
                owned.len()
            )));
        }
        let mut ids = owned.into_iter();
        let partition: Vec<Vec<ReportId>> = split.iter().map(|&k| ids.by_ref().take(k).collect()).collect();
        let r = py.detach(|| check_sybil_proofness(cfg, j, &partition, &ActionGrid::default(), epsilon, trials, seed));
        let report = check(r)?;
        let out = to_py(py, &report)?;
        out.set_item("holds", report.holds())?;
        Ok(out)
    }

    #[pyo3(signature = (trials = 5_000, seed = 0))]
    fn stability<'py>(&self, py: Python<'py>, trials: u64, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let cfg = &self.inner;
        let r = py.detach(|| run_stability(cfg, trials, seed));
        to_py(py, &check(r)?)
    }

    fn __repr__(&self) -> String {
        let counts: Vec<String> = self.inner.roster.iter().map(|&p| self.inner.report_count(p).to_string()).collect();
        format!(
            "Game(publishers=[{}], t_total={}, t_pub={}, seed={})",
            counts.join(", "),
            self.inner.epoch.t_total,
            self.inner.epoch.t_pub,
            self.inner.seed
        )
    }
}

/// Contract payouts for an inclusion vector of reports with the given
/// values. Report `i` belongs to publisher `i`; `None` is a dummy slot.
#[pyfunction]
#[pyo3(signature = (values, r_min = 2.0))]
fn process_values<'py>(py: Python<'py>, values: Vec<Option<f64>>, r_min: f64) -> PyResult<Bound<'py, PyAny>> {
    let mut minter = ReportMinter::new();
    let mut fixed = FixedValues::new(r_min);
    let mut slots = Vec::new();
    for (i, v) in values.iter().enumerate() {
        match v {
            Some(v) => {
                if !(v.is_finite() && *v >= r_min) {
                    return Err(PyValueError::new_err(format!("values must be finite and >= r_min, got {v}")));
                }
                let r = minter.mint_seeded(PublisherId(i as u32), 0);
                fixed = fixed.with(r.id(), *v);
                slots.push(Slot::Report(r));
            }
            None => slots.push(Slot::Dummy),
        }
    }
    let s = vrf::generate(&[0; 32], &ValidatorKeys::derive(0, 0));
    to_py(py, &process_slots(&slots, &s, &fixed))
}

/// Bribery against a fixed-bounty protocol, in exact arithmetic.
#[pyfunction]
#[pyo3(signature = (n = 2, r_fix = 10.0, v = 1.0, strings = 1, capacity = 1, seed = 0))]
fn impossibility_demo<'py>(
    py: Python<'py>,
    n: usize,
    r_fix: f64,
    v: f64,
    strings: usize,
    capacity: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &check(impossibility::impossibility_demo(n, Baseline { r_fix, v, capacity }, strings, seed))?)
}

#[pymodule]
fn prrr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add_class::<PyGame>()?;
    m.add_function(wrap_pyfunction!(process_values, m)?)?;
    m.add_function(wrap_pyfunction!(impossibility_demo, m)?)?;
    Ok(())
}
