//! Python module `guided_forecast`.
//!
//! Structured results (run outcomes, automatic-search traces, sweep reports)
//! cross the boundary as plain dicts built from their JSON form.

use std::collections::BTreeSet;

use guided_forecast as gf;
use gf::data::{PredictionTask, SplitParams, SynthConfig};
use gf::forecaster::HistoricalPool;
use gf::modes::{AutoGuidanceSpec, SweepMode};
use gf::seldonian::{BoundParams, SeldonianConfig};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(guided_forecast, GuidedForecastError, PyException);

fn py_err(e: gf::Error) -> PyErr {
    GuidedForecastError::new_err(e.to_string())
}

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| py_err(e.into()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn config_from(json: Option<&str>) -> PyResult<SeldonianConfig> {
    match json {
        None => Ok(SeldonianConfig::default()),
        Some(s) => serde_json::from_str(s).map_err(|e| py_err(e.into())),
    }
}

/// Accepts one `Guidance` or a list of them.
fn guidance_list(obj: &Bound<'_, PyAny>) -> PyResult<Vec<gf::guidance::Guidance>> {
    if let Ok(g) = obj.extract::<PyRef<'_, Guidance>>() {
        return Ok(vec![g.inner.clone()]);
    }
    let list: Vec<PyRef<'_, Guidance>> = obj.extract()?;
    Ok(list.iter().map(|g| g.inner.clone()).collect())
}

/// Behavioral constraint with tolerance `epsilon` and confidence level `delta`.
#[pyclass(module = "guided_forecast", frozen)]
pub struct Guidance {
    inner: gf::guidance::Guidance,
}

#[pymethods]
impl Guidance {
    #[staticmethod]
    fn smoothness(epsilon: f64, delta: f64) -> PyResult<Self> {
        let inner = gf::guidance::Guidance::smoothness(epsilon, delta).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn regional_equity(epsilon: f64, delta: f64, region_a: String, region_b: String) -> PyResult<Self> {
        let inner = gf::guidance::Guidance::regional_equity(epsilon, delta, region_a, region_b).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: gf::guidance::Guidance = serde_json::from_str(text).map_err(|e| py_err(e.into()))?;
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| py_err(e.into()))
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    fn __repr__(&self) -> String {
        format!("Guidance({})", self.inner.label())
    }
}

/// Complete seasons keyed by region and season year.
#[pyclass(module = "guided_forecast", frozen)]
pub struct SeasonSet {
    inner: gf::data::SeasonSet,
}

#[pymethods]
impl SeasonSet {
    #[staticmethod]
    #[pyo3(signature = (path, regions=None))]
    fn read_csv(path: &str, regions: Option<Vec<String>>) -> PyResult<Self> {
        let filter: Option<BTreeSet<String>> = regions.map(|r| r.into_iter().collect());
        let inner = gf::data::ingest_wili(path, filter.as_ref()).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Synthetic seasons; `regions` is a list of `(name, noise_sd)` sharing each year's shape.
    #[staticmethod]
    #[pyo3(signature = (n=20, noise=0.0, seed=0, dip_week=None, dip_depth=0.0, amplitude_jitter=0.0, center_jitter=0.0, regions=None))]
    #[allow(clippy::too_many_arguments)]
    fn synthetic(
        n: usize,
        noise: f64,
        seed: u64,
        dip_week: Option<usize>,
        dip_depth: f64,
        amplitude_jitter: f64,
        center_jitter: f64,
        regions: Option<Vec<(String, f64)>>,
    ) -> PyResult<Self> {
        let cfg = SynthConfig {
            n,
            noise_sd: noise,
            seed,
            dip_week,
            dip_depth,
            amplitude_jitter,
            center_jitter,
            ..SynthConfig::default()
        };
        let inner = match regions {
            None => cfg.generate(),
            Some(r) => {
                let pairs: Vec<(&str, f64)> = r.iter().map(|(name, sd)| (name.as_str(), *sd)).collect();
                cfg.generate_regions(&pairs)
            }
        }
        .map_err(py_err)?;
        Ok(Self { inner })
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        gf::data::emit_wili(&self.inner, path).map_err(py_err)
    }

    fn regions(&self) -> Vec<String> {
        self.inner.regions().into_iter().collect()
    }

    fn year_labels(&self) -> Vec<String> {
        self.inner.year_labels().into_iter().collect()
    }

    /// Weekly values of one season, starting at week 40.
    fn values(&self, region: &str, year_label: &str) -> PyResult<Vec<f64>> {
        self.inner
            .get(region, year_label)
            .map(|s| s.values().to_vec())
            .ok_or_else(|| GuidedForecastError::new_err(format!("no season {region} {year_label}")))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("SeasonSet({} seasons, regions {:?})", self.inner.len(), self.regions())
    }
}

/// Trained forecaster.
#[pyclass(module = "guided_forecast", frozen)]
pub struct Model {
    inner: gf::forecaster::ForecastModel,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = gf::forecaster::load_model(path).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        gf::forecaster::save_model(&self.inner, path).map_err(py_err)
    }

    /// `(hidden, embed, neighbors)`.
    #[getter]
    fn arch(&self) -> (usize, usize, usize) {
        let a = self.inner.arch();
        (a.hidden, a.embed, a.neighbors)
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.theta().to_vec()
    }

    /// Next-week forecast after `history`, attending to the seasons in `pool`.
    fn predict(&self, history: Vec<f64>, pool: &SeasonSet) -> PyResult<f64> {
        let pool = HistoricalPool::new(&pool.inner);
        gf::forecaster::predict_history(&self.inner, &history, &pool, None).map_err(py_err)
    }

    /// RMSE at epidemiological `week` over `data`, attending to `pool`.
    fn rmse(&self, data: &SeasonSet, week: u32, pool: &SeasonSet) -> PyResult<f64> {
        let task = PredictionTask::for_epi_week(week).map_err(py_err)?;
        let pool = HistoricalPool::new(&pool.inner);
        gf::eval::rmse(&self.inner, &data.inner, task, &pool).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        let (h, d, k) = self.arch();
        format!("Model(hidden={h}, embed={d}, neighbors={k})")
    }
}

fn split_params(test_fraction: f64, candidate_fraction: f64) -> SplitParams {
    SplitParams {
        test_fraction,
        candidate_fraction,
    }
}

/// Trains under fixed guidance for one week and runs the safety test.
///
/// Returns `(outcome, model)`; `model` is `None` unless the run is certified.
#[pyfunction]
#[pyo3(signature = (data, guidance, week, seed=0, config=None, test_fraction=0.2, candidate_fraction=0.5))]
#[allow(clippy::too_many_arguments)]
fn direct(
    py: Python<'_>,
    data: &SeasonSet,
    guidance: &Bound<'_, PyAny>,
    week: u32,
    seed: u64,
    config: Option<&str>,
    test_fraction: f64,
    candidate_fraction: f64,
) -> PyResult<(Py<PyAny>, Option<Model>)> {
    let mut cfg = config_from(config)?;
    cfg.guidances = guidance_list(guidance)?;
    cfg.train.seed = seed;
    let task = PredictionTask::for_epi_week(week).map_err(py_err)?;
    let params = split_params(test_fraction, candidate_fraction);
    let outcome = py
        .detach(|| gf::modes::direct_guidance(&data.inner, &cfg, task, params, seed))
        .map_err(py_err)?;
    let model = outcome.model.clone().map(|inner| Model { inner });
    Ok((to_py(py, &outcome)?, model))
}

/// Searches the tolerance grid for one guidance at one week.
#[pyfunction]
#[pyo3(signature = (data, guidance, week, seed=0, epsilon_grid=None, performance=1.0, config=None, test_fraction=0.2, candidate_fraction=0.5))]
#[allow(clippy::too_many_arguments)]
fn auto(
    py: Python<'_>,
    data: &SeasonSet,
    guidance: &Guidance,
    week: u32,
    seed: u64,
    epsilon_grid: Option<Vec<f64>>,
    performance: f64,
    config: Option<&str>,
    test_fraction: f64,
    candidate_fraction: f64,
) -> PyResult<(Py<PyAny>, Option<Model>)> {
    let mut cfg = config_from(config)?;
    cfg.train.seed = seed;
    let mut spec = AutoGuidanceSpec::new(guidance.inner.clone());
    if let Some(grid) = epsilon_grid {
        spec.epsilon_grid = grid;
    }
    spec.performance_requirement = performance;
    let task = PredictionTask::for_epi_week(week).map_err(py_err)?;
    let params = split_params(test_fraction, candidate_fraction);
    let outcome = py
        .detach(|| gf::modes::automatic_guidance(&data.inner, &spec, &cfg, task, params, seed))
        .map_err(py_err)?;
    let model = outcome.model.clone().map(|inner| Model { inner });
    Ok((to_py(py, &outcome)?, model))
}

/// Runs direct guidance independently for each week in `weeks` ("START:END").
#[pyfunction]
#[pyo3(signature = (data, guidance, weeks="40:17", seed=0, config=None, test_fraction=0.2, candidate_fraction=0.5))]
#[allow(clippy::too_many_arguments)]
fn sweep(
    py: Python<'_>,
    data: &SeasonSet,
    guidance: &Bound<'_, PyAny>,
    weeks: &str,
    seed: u64,
    config: Option<&str>,
    test_fraction: f64,
    candidate_fraction: f64,
) -> PyResult<Py<PyAny>> {
    let mut cfg = config_from(config)?;
    cfg.guidances = guidance_list(guidance)?;
    let weeks = gf::modes::parse_week_range(weeks).map_err(py_err)?;
    let params = split_params(test_fraction, candidate_fraction);
    let mode = SweepMode::Direct(cfg);
    let (_, results) = py
        .detach(|| gf::modes::weekly_sweep(&data.inner, &mode, &weeks, params, seed))
        .map_err(py_err)?;
    to_py(py, &results)
}

/// One-sided `1 - delta` Student-t upper confidence bound on the mean of `z`.
#[pyfunction]
fn upper_bound(z: Vec<f64>, delta: f64) -> PyResult<f64> {
    gf::seldonian::upper_bound(&z, delta).map_err(py_err)
}

/// Inflated bound the safety test is predicted to return with `safety_size` samples.
#[pyfunction]
#[pyo3(signature = (z, delta, safety_size, inflation=2.0))]
fn predicted_bound(z: Vec<f64>, delta: f64, safety_size: usize, inflation: f64) -> PyResult<f64> {
    let params = BoundParams::new(delta, safety_size, inflation).map_err(py_err)?;
    gf::seldonian::predicted_bound(&z, params).map_err(py_err)
}

#[pyfunction]
fn t_quantile(p: f64, dof: f64) -> PyResult<f64> {
    gf::stats::t_quantile(p, dof).map_err(py_err)
}

#[pymodule]
#[pyo3(name = "guided_forecast")]
fn guided_forecast_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GuidedForecastError", m.py().get_type::<GuidedForecastError>())?;
    m.add_class::<Guidance>()?;
    m.add_class::<SeasonSet>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(direct, m)?)?;
    m.add_function(wrap_pyfunction!(auto, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(predicted_bound, m)?)?;
    m.add_function(wrap_pyfunction!(t_quantile, m)?)?;
    Ok(())
}
