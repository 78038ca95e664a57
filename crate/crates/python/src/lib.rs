//! Python bindings for `livealloc`.
//!
//! Region sets, prices, traces and trained models are opaque handles; solve
//! reports and simulation metrics come back as plain Python values.

use std::path::PathBuf;

use livealloc::config::{self, DEFAULT_THRESHOLDS_MS};
use livealloc::domain::{CostParams, DemandVector, RegionSet};
use livealloc::error::Error;
use livealloc::geo::{self, GeoPoint};
use livealloc::optimizer::{self, SolveOptions, SolveReport, VideoInstance};
use livealloc::predictor::{self, Dataset, EncoderConfig, ForestParams, ModelFile};
use livealloc::simulator::{self, DemandSource, SimConfig, SimResult};
use livealloc::workload::{self, GeneratorConfig, Trace};
use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(
    livealloc_py,
    InfeasibleError,
    PyValueError,
    "No placement meets the delay threshold."
);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Infeasible {
            threshold_ms,
            min_avg_delay_ms,
        } => {
            let err = InfeasibleError::new_err(e.to_string());
            Python::attach(|py| {
                let v = err.value(py);
                let _ = v.setattr("threshold_ms", threshold_ms);
                let _ = v.setattr("min_avg_delay_ms", min_avg_delay_ms);
            });
            err
        }
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "RegionSet", module = "livealloc_py", frozen)]
struct PyRegionSet {
    inner: RegionSet,
}

#[pymethods]
impl PyRegionSet {
    /// The ten built-in regions with distance-derived round-trip times.
    #[staticmethod]
    fn default() -> Self {
        PyRegionSet {
            inner: config::default_region_set(),
        }
    }

    /// Regions from a JSON list of `{id, name, lat, lon}`; `rtt_json` is an
    /// optional n x n matrix in ms.
    #[staticmethod]
    #[pyo3(signature = (regions_json, rtt_json=None))]
    fn from_json(regions_json: &str, rtt_json: Option<&str>) -> PyResult<Self> {
        let regions: Vec<livealloc::domain::Region> =
            serde_json::from_str(regions_json).map_err(json_err)?;
        let inner = match rtt_json {
            Some(text) => {
                let rows: Vec<Vec<f64>> = serde_json::from_str(text).map_err(json_err)?;
                let rtt = livealloc::domain::RttMatrix::new(rows).map_err(to_py)?;
                RegionSet::new(regions, rtt)
            }
            None => geo::region_set_with_synthetic_rtt(regions),
        }
        .map_err(to_py)?;
        Ok(PyRegionSet { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.regions.iter().map(|r| r.name.clone()).collect()
    }

    fn rtt(&self, from: usize, to: usize) -> PyResult<f64> {
        self.inner.check_id(from).map_err(to_py)?;
        self.inner.check_id(to).map_err(to_py)?;
        Ok(self.inner.rtt.get(from, to))
    }

    fn nearest(&self, lat: f64, lon: f64) -> PyResult<usize> {
        geo::nearest_region(GeoPoint::new(lat, lon), &self.inner.regions).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("RegionSet({})", self.names().join(", "))
    }
}

#[pyclass(name = "CostParams", module = "livealloc_py", frozen)]
struct PyCostParams {
    inner: CostParams,
}

#[pymethods]
impl PyCostParams {
    /// Built-in price sheet prorated to `period_hours`.
    #[staticmethod]
    #[pyo3(signature = (period_hours=1.0))]
    fn default(period_hours: f64) -> Self {
        PyCostParams {
            inner: config::default_price_sheet().to_cost_params(period_hours),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyCostParams {
            inner: serde_json::from_str(text).map_err(json_err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    fn scaled(&self, c: f64) -> Self {
        PyCostParams {
            inner: self.inner.scaled(c),
        }
    }

    #[getter]
    fn alpha(&self) -> Vec<f64> {
        self.inner.alpha.clone()
    }

    #[getter]
    fn eta(&self) -> Vec<f64> {
        self.inner.eta.clone()
    }

    #[getter]
    fn omega(&self) -> Vec<f64> {
        self.inner.omega.clone()
    }
}

fn report_dict<'py>(py: Python<'py>, r: &SolveReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("allocate", r.decision.allocate.clone())?;
    d.set_item("serve", r.decision.serve.clone())?;
    d.set_item("storage_cost", r.storage_cost)?;
    d.set_item("migration_cost", r.migration_cost)?;
    d.set_item("serving_cost", r.serving_cost)?;
    d.set_item("total_cost", r.total_cost())?;
    d.set_item("avg_delay_ms", r.avg_delay_ms)?;
    d.set_item("optimal", r.optimal)?;
    Ok(d)
}

/// Cheapest placement of one video meeting `threshold_ms`. Raises
/// `InfeasibleError` when no placement does.
#[pyfunction]
#[pyo3(signature = (regions, prices, broadcaster_region, demand, size_gb, threshold_ms, brute_force=false))]
#[allow(clippy::too_many_arguments)]
fn solve_video<'py>(
    py: Python<'py>,
    regions: &PyRegionSet,
    prices: &PyCostParams,
    broadcaster_region: usize,
    demand: Vec<u64>,
    size_gb: f64,
    threshold_ms: f64,
    brute_force: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let inst = VideoInstance {
        broadcaster_region,
        demand: DemandVector::new(demand),
        size_gb,
    };
    let report = py
        .detach(|| {
            if brute_force {
                optimizer::brute_force_solve(&inst, &regions.inner, &prices.inner, threshold_ms)
            } else {
                optimizer::solve_video(
                    &inst,
                    &regions.inner,
                    &prices.inner,
                    threshold_ms,
                    &SolveOptions::default(),
                )
            }
        })
        .map_err(to_py)?;
    report_dict(py, &report)
}

#[pyfunction]
fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    geo::haversine_km(GeoPoint::new(lat1, lon1), GeoPoint::new(lat2, lon2))
}

#[pyfunction]
fn r_squared(actual: Vec<f64>, predicted: Vec<f64>) -> PyResult<f64> {
    predictor::r_squared(&actual, &predicted).map_err(to_py)
}

#[pyclass(name = "Trace", module = "livealloc_py", frozen)]
struct PyTrace {
    inner: Trace,
}

#[pymethods]
impl PyTrace {
    /// Synthetic trace over `periods` hours for `regions`.
    #[staticmethod]
    #[pyo3(signature = (regions, periods=24, seed=0, videos_per_period=None))]
    fn generate(
        regions: &PyRegionSet,
        periods: u32,
        seed: u64,
        videos_per_period: Option<f64>,
    ) -> PyResult<Self> {
        let mut cfg = GeneratorConfig::new(regions.inner.len(), seed);
        if let Some(rate) = videos_per_period {
            cfg.videos_per_period = rate;
        }
        let inner = workload::generate(&cfg, periods, &regions.inner.regions).map_err(to_py)?;
        Ok(PyTrace { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyTrace {
            inner: workload::load_trace(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        workload::save_trace(&path, &self.inner).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.records.len()
    }

    /// Recorded viewer counts per video, in trace order.
    fn actual_viewers(&self) -> Vec<Option<Vec<u64>>> {
        self.inner
            .records
            .iter()
            .map(|r| r.actual_viewers.as_ref().map(|d| d.counts().to_vec()))
            .collect()
    }

    fn broadcaster_regions(&self) -> Vec<usize> {
        self.inner
            .records
            .iter()
            .map(|r| r.broadcaster_region)
            .collect()
    }
}

#[pyclass(name = "Model", module = "livealloc_py", frozen)]
struct PyModel {
    inner: ModelFile,
}

#[pymethods]
impl PyModel {
    /// Random forest on every record of `trace`.
    #[staticmethod]
    #[pyo3(signature = (trace, regions, n_trees=100, max_depth=None, min_samples_leaf=1, seed=0))]
    fn train(
        py: Python<'_>,
        trace: &PyTrace,
        regions: &PyRegionSet,
        n_trees: usize,
        max_depth: Option<usize>,
        min_samples_leaf: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let encoder = EncoderConfig::new(regions.inner.len());
        let params = ForestParams {
            n_trees,
            max_depth,
            min_samples_leaf,
            rng_seed: seed,
            ..ForestParams::default()
        };
        let forest = py
            .detach(|| {
                let data =
                    Dataset::from_records(&trace.inner.records, &regions.inner.regions, &encoder)?;
                predictor::fit_forest(&data.x, &data.y, params)
            })
            .map_err(to_py)?;
        Ok(PyModel {
            inner: ModelFile::new(encoder, forest),
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: ModelFile::load(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    /// Predicted viewer counts for every record of `trace`.
    fn predict(&self, trace: &PyTrace, regions: &PyRegionSet) -> PyResult<Vec<Vec<u64>>> {
        let source = DemandSource::Model(Box::new(self.inner.clone()));
        trace
            .inner
            .records
            .iter()
            .map(|r| {
                source
                    .predict(r, &regions.inner)
                    .map(|d| d.counts().to_vec())
            })
            .collect::<Result<_, _>>()
            .map_err(to_py)
    }

    /// Pooled R² of raw predictions against the recorded viewers.
    fn score(&self, trace: &PyTrace, regions: &PyRegionSet) -> PyResult<f64> {
        let data = Dataset::from_records(
            &trace.inner.records,
            &regions.inner.regions,
            &self.inner.encoder,
        )
        .map_err(to_py)?;
        Ok(predictor::evaluate(&self.inner.forest, &data)
            .map_err(to_py)?
            .pooled)
    }
}

fn result_dict<'py>(py: Python<'py>, r: &SimResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("threshold_ms", r.threshold_ms)?;
    d.set_item("system_total_cost", r.system_total_cost)?;
    d.set_item("videos", r.videos.len())?;
    d.set_item(
        "infeasible_videos",
        r.videos.iter().filter(|v| v.infeasible).count(),
    )?;
    let periods = r
        .periods
        .iter()
        .map(|m| {
            let p = PyDict::new(py);
            p.set_item("period", m.period)?;
            p.set_item("storage_cost", m.storage_cost)?;
            p.set_item("migration_cost", m.migration_cost)?;
            p.set_item("serving_cost", m.serving_cost)?;
            p.set_item("network_cost", m.network_cost)?;
            p.set_item("carried_storage_cost", m.carried_storage_cost)?;
            p.set_item("hourly_total", m.hourly_total)?;
            p.set_item("hits_pct", m.hits_pct)?;
            p.set_item("avg_latency_predicted", m.avg_latency_predicted)?;
            p.set_item("avg_latency_actual", m.avg_latency_actual)?;
            p.set_item("arrivals", m.arrivals)?;
            p.set_item("infeasible", m.infeasible)?;
            Ok(p)
        })
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("periods", periods)?;
    Ok(d)
}

/// Hour-by-hour simulation at each threshold. Without a model the recorded
/// viewers serve as the prediction.
#[pyfunction]
#[pyo3(signature = (trace, regions, prices, thresholds_ms=None, model=None, periods=24))]
fn simulate<'py>(
    py: Python<'py>,
    trace: &PyTrace,
    regions: &PyRegionSet,
    prices: &PyCostParams,
    thresholds_ms: Option<Vec<f64>>,
    model: Option<&PyModel>,
    periods: u32,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let source = match model {
        Some(m) => DemandSource::Model(Box::new(m.inner.clone())),
        None => DemandSource::Oracle,
    };
    let cfg = SimConfig {
        periods,
        thresholds_ms: thresholds_ms.unwrap_or_else(|| DEFAULT_THRESHOLDS_MS.to_vec()),
        ..SimConfig::new(prices.inner.clone())
    };
    let results = py
        .detach(|| simulator::run_sweep(&trace.inner, &source, &regions.inner, &cfg))
        .map_err(to_py)?;
    results.iter().map(|r| result_dict(py, r)).collect()
}

#[pymodule]
fn livealloc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRegionSet>()?;
    m.add_class::<PyCostParams>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(solve_video, m)?)?;
    m.add_function(wrap_pyfunction!(haversine_km, m)?)?;
    m.add_function(wrap_pyfunction!(r_squared, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add("DEFAULT_THRESHOLDS_MS", DEFAULT_THRESHOLDS_MS.to_vec())?;
    Ok(())
}
