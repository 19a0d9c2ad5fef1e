//! Python bindings. Every file format has a class with `from_text` and
//! `to_text`; the stages are plain functions over those classes.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use regwatch_core as rw;
use rw::property::PropertyStatus;
use rw::trace::{TestVerdict, Version};
use rw::verify::{Limits, Mode, DEFAULT_ENUM_CAP, DEFAULT_STEP_BUDGET};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mode(s: &str) -> PyResult<Mode> {
    s.parse().map_err(err)
}

fn limits(budget: u64, enum_cap: u64) -> Limits {
    Limits {
        step_budget: budget,
        enum_cap,
    }
}

/// A parsed MiniProc program.
#[pyclass(module = "regwatch", frozen)]
struct Program {
    inner: rw::lang::Program,
}

#[pymethods]
impl Program {
    #[new]
    fn new(source: &str) -> PyResult<Self> {
        rw::lang::parse_program(source).map(|inner| Program { inner }).map_err(err)
    }

    fn names(&self) -> Vec<String> {
        self.inner.names().map(str::to_string).collect()
    }

    fn entry(&self) -> String {
        self.inner.entry().name().to_string()
    }

    /// Runs the entry function untraced and returns the outcome, e.g.
    /// `"returned:3"` or `"error:div_by_zero"`.
    #[pyo3(signature = (args, budget = DEFAULT_STEP_BUDGET))]
    fn execute(&self, args: Vec<i64>, budget: u64) -> PyResult<String> {
        let plan = rw::trace::MonitorPlan::default();
        let (outcome, _) = rw::lang::execute(&self.inner, &args, budget, &plan).map_err(err)?;
        Ok(outcome.to_string())
    }

    fn __repr__(&self) -> String {
        format!("Program({})", self.names().join(", "))
    }
}

#[pyclass(module = "regwatch", frozen)]
struct Scenario {
    inner: rw::lang::Scenario,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        rw::lang::Scenario::parse(text).map(|inner| Scenario { inner }).map_err(err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn domains(&self) -> BTreeMap<String, (i64, i64)> {
        self.inner.domains().clone()
    }

    fn test_ids(&self) -> Vec<String> {
        self.inner.tests().iter().map(|t| t.id.clone()).collect()
    }
}

#[pyclass(module = "regwatch", frozen)]
struct Plan {
    inner: rw::trace::MonitorPlan,
}

#[pymethods]
impl Plan {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        rw::trace::decode_plan(text).map(|inner| Plan { inner }).map_err(err)
    }

    fn to_text(&self) -> String {
        rw::trace::encode_plan(&self.inner)
    }

    #[getter]
    fn changed(&self) -> Vec<String> {
        self.inner.changed().iter().cloned().collect()
    }

    #[getter]
    fn monitored(&self) -> Vec<String> {
        self.inner.monitored().iter().cloned().collect()
    }

    #[getter]
    fn distance(&self) -> u32 {
        self.inner.distance()
    }
}

#[pyclass(module = "regwatch", frozen)]
struct Traces {
    inner: Vec<rw::trace::Trace>,
}

#[pymethods]
impl Traces {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        rw::trace::decode_traces(text).map(|inner| Traces { inner }).map_err(err)
    }

    fn to_text(&self) -> String {
        rw::trace::encode_traces(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(version, test id, verdict)` for every trace.
    fn verdicts(&self) -> Vec<(String, String, String)> {
        self.inner
            .iter()
            .map(|t| (t.version.to_string(), t.test_id.clone(), t.verdict.to_string()))
            .collect()
    }
}

#[pyclass(module = "regwatch", frozen)]
struct Properties {
    inner: Vec<rw::property::Property>,
}

#[pymethods]
impl Properties {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        rw::property::decode_properties(text).map(|inner| Properties { inner }).map_err(err)
    }

    fn to_text(&self) -> String {
        rw::property::encode_properties(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.iter().map(|p| p.id.clone()).collect()
    }

    /// Property id to status name; obsolete and up-to-date entries carry
    /// their origin, as in `"uptodate/proved"`.
    fn statuses(&self) -> BTreeMap<String, String> {
        self.inner
            .iter()
            .map(|p| {
                let s = match p.status.origin() {
                    Some(o) if !matches!(p.status, PropertyStatus::Proved | PropertyStatus::Unknown) => {
                        format!("{}/{o}", p.status.name())
                    }
                    _ => p.status.name().to_string(),
                };
                (p.id.clone(), s)
            })
            .collect()
    }
}

#[pyclass(module = "regwatch", frozen)]
struct Analysis {
    inner: rw::analysis::Analysis,
}

#[pymethods]
impl Analysis {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        rw::analysis::decode_analysis(text).map(|inner| Analysis { inner }).map_err(err)
    }

    fn to_text(&self) -> String {
        rw::analysis::encode_analysis(&self.inner)
    }

    fn is_clean(&self) -> bool {
        self.inner.is_clean()
    }

    /// `(property id, test id, event seq, origin)` in priority order.
    fn anomalies(&self) -> Vec<(String, String, u64, String)> {
        self.inner
            .anomalies
            .iter()
            .map(|a| {
                let v = &a.violation;
                (v.property_id.clone(), v.test_id.clone(), v.event_seq, a.origin.to_string())
            })
            .collect()
    }

    /// `(from, to, reason)` between anomaly indices.
    fn edges(&self) -> Vec<(usize, usize, String)> {
        self.inner.edges.iter().map(|e| (e.from, e.to, e.reason.to_string())).collect()
    }

    /// `(property id, counterexample args, outcome)`.
    fn faults(&self) -> Vec<(String, Vec<i64>, String)> {
        self.inner
            .faults
            .iter()
            .map(|f| (f.property_id.clone(), f.args.clone(), f.outcome.to_string()))
            .collect()
    }

    /// Combines anomalies and faults from two analyses.
    fn merge(&self, other: &Analysis) -> Analysis {
        Analysis {
            inner: self.inner.clone().merge(other.inner.clone()),
        }
    }
}

#[pyfunction]
#[pyo3(signature = (base, upgraded, distance = rw::scope::DEFAULT_DISTANCE))]
fn build_plan(base: &Program, upgraded: &Program, distance: u32) -> Plan {
    Plan {
        inner: rw::scope::build_plan(&base.inner, &upgraded.inner, distance),
    }
}

#[pyfunction]
#[pyo3(signature = (program, scenario, plan, version = "base", budget = DEFAULT_STEP_BUDGET))]
fn run_suite(program: &Program, scenario: &Scenario, plan: &Plan, version: &str, budget: u64) -> PyResult<Traces> {
    let version: Version = version.parse().map_err(err)?;
    rw::lang::run_suite(&program.inner, &scenario.inner, &plan.inner, version, budget)
        .map(|inner| Traces { inner })
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (traces, plan, min_support = rw::miner::DEFAULT_MIN_SUPPORT, k = rw::miner::DEFAULT_K))]
fn mine(traces: &Traces, plan: &Plan, min_support: usize, k: usize) -> PyResult<Properties> {
    rw::miner::mine(&traces.inner, &plan.inner, min_support, k)
        .map(|inner| Properties { inner })
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (properties, program, scenario, budget = DEFAULT_STEP_BUDGET, enum_cap = DEFAULT_ENUM_CAP))]
fn prune(
    py: Python<'_>,
    properties: &Properties,
    program: &Program,
    scenario: &Scenario,
    budget: u64,
    enum_cap: u64,
) -> PyResult<Properties> {
    py.detach(|| {
        rw::verify::prune(&properties.inner, &program.inner, &scenario.inner, limits(budget, enum_cap))
    })
    .map(|inner| Properties { inner })
    .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (properties, mode = "strict"))]
fn survivors(properties: &Properties, mode: &str) -> PyResult<Properties> {
    Ok(Properties {
        inner: rw::verify::survivors(&properties.inner, self::mode(mode)?),
    })
}

/// Classifies the survivors of `mode` against the passing upgraded runs in
/// `traces`. Other properties are returned unchanged.
#[pyfunction]
#[pyo3(signature = (properties, traces, mode = "strict"))]
fn classify(properties: &Properties, traces: &Traces, mode: &str) -> PyResult<Properties> {
    let mode = self::mode(mode)?;
    let passing: Vec<_> = traces
        .inner
        .iter()
        .filter(|t| t.version == Version::Upgraded && t.verdict == TestVerdict::Pass)
        .cloned()
        .collect();
    let c = rw::analysis::classify_obsolete(&rw::verify::survivors(&properties.inner, mode), &passing).map_err(err)?;
    let mut inner: Vec<_> = properties.inner.iter().filter(|p| !mode.survives(p.status)).cloned().collect();
    inner.extend(c.obsolete);
    inner.extend(c.uptodate);
    inner.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(Properties { inner })
}

fn uptodate(p: &Properties) -> Vec<rw::property::Property> {
    p.inner
        .iter()
        .filter(|p| matches!(p.status, PropertyStatus::UpToDate(_)))
        .cloned()
        .collect()
}

/// Anomalies of the up-to-date properties in the failing upgraded runs.
#[pyfunction]
fn analyze(properties: &Properties, traces: &Traces, upgraded: &Program) -> PyResult<Analysis> {
    let failing: Vec<_> = traces
        .inner
        .iter()
        .filter(|t| t.version == Version::Upgraded && t.verdict == TestVerdict::Fail)
        .cloned()
        .collect();
    let cg = rw::lang::call_graph(&upgraded.inner);
    rw::analysis::analyze(&uptodate(properties), &failing, &cg)
        .map(|inner| Analysis { inner })
        .map_err(err)
}

/// Faults the up-to-date properties reveal in the upgraded program.
#[pyfunction]
#[pyo3(signature = (properties, upgraded, scenario, budget = DEFAULT_STEP_BUDGET, enum_cap = DEFAULT_ENUM_CAP))]
fn static_check(
    py: Python<'_>,
    properties: &Properties,
    upgraded: &Program,
    scenario: &Scenario,
    budget: u64,
    enum_cap: u64,
) -> PyResult<Analysis> {
    let props = uptodate(properties);
    let faults = py
        .detach(|| rw::analysis::static_check(&props, &upgraded.inner, &scenario.inner, limits(budget, enum_cap)))
        .map_err(err)?;
    Ok(Analysis {
        inner: rw::analysis::Analysis {
            faults,
            ..Default::default()
        },
    })
}

#[pyfunction]
#[pyo3(signature = (properties, traces, analysis, format = "text"))]
fn render(properties: &Properties, traces: &Traces, analysis: &Analysis, format: &str) -> PyResult<String> {
    let report = rw::report::Report::new(&properties.inner, &traces.inner, &analysis.inner);
    match format {
        "text" => Ok(rw::report::render_text(&report)),
        "html" => Ok(rw::report::render_html(&report)),
        other => Err(err(format!("unknown format {other:?}, expected text or html"))),
    }
}

/// Runs every stage on files, writing all artifacts into `out_dir`.
/// Returns true when anomalies or faults were found.
#[pyfunction]
#[pyo3(signature = (
    base, upgraded, scenario_base, scenario_upgraded, out_dir, *,
    distance = rw::scope::DEFAULT_DISTANCE, mode = "strict", budget = DEFAULT_STEP_BUDGET, format = "text"
))]
#[allow(clippy::too_many_arguments)]
fn pipeline(
    py: Python<'_>,
    base: PathBuf,
    upgraded: PathBuf,
    scenario_base: PathBuf,
    scenario_upgraded: PathBuf,
    out_dir: PathBuf,
    distance: u32,
    mode: &str,
    budget: u64,
    format: &str,
) -> PyResult<bool> {
    let flags = rw::cli::Shared {
        distance,
        mode: self::mode(mode)?,
        budget,
        format: match format {
            "text" => rw::cli::Format::Text,
            "html" => rw::cli::Format::Html,
            other => return Err(err(format!("unknown format {other:?}, expected text or html"))),
        },
        ..Default::default()
    };
    let found = py
        .detach(|| rw::cli::pipeline_stage(&base, &upgraded, &scenario_base, &scenario_upgraded, &out_dir, &flags))
        .map_err(err)?;
    Ok(found == rw::cli::Findings::Some)
}

#[pymodule]
fn regwatch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Program>()?;
    m.add_class::<Scenario>()?;
    m.add_class::<Plan>()?;
    m.add_class::<Traces>()?;
    m.add_class::<Properties>()?;
    m.add_class::<Analysis>()?;
    m.add_function(wrap_pyfunction!(build_plan, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add_function(wrap_pyfunction!(mine, m)?)?;
    m.add_function(wrap_pyfunction!(prune, m)?)?;
    m.add_function(wrap_pyfunction!(survivors, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(static_check, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(pipeline, m)?)?;
    Ok(())
}
