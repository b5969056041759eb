use std::collections::BTreeMap;

use crate::data::SeasonSet;
use crate::error::{Error, Result};
use crate::forecaster::model::ForecastModel;
use crate::forecaster::network::{backward, forward_trace, HistoricalPool, Trace};

/// Memoized forward passes over one season set, keyed by `(season index, target position)`.
///
/// Gradient contributions are accumulated per pass and pushed back through
/// each trace exactly once by [`Predictor::backprop`].
pub(crate) struct Predictor<'a> {
    pub model: &'a ForecastModel,
    pub data: &'a SeasonSet,
    pool: &'a HistoricalPool,
    traces: BTreeMap<(usize, usize), Trace>,
    partials: BTreeMap<(usize, usize), (f64, f64)>,
}

impl<'a> Predictor<'a> {
    pub fn new(model: &'a ForecastModel, data: &'a SeasonSet, pool: &'a HistoricalPool) -> Self {
        Self {
            model,
            data,
            pool,
            traces: BTreeMap::new(),
            partials: BTreeMap::new(),
        }
    }

    fn trace(&mut self, season: usize, pos: usize) -> Result<&Trace> {
        if !self.traces.contains_key(&(season, pos)) {
            let s = &self.data.seasons()[season];
            if pos == 0 || pos >= s.len() {
                return Err(Error::Index(format!(
                    "target position {pos} outside season {} of length {}",
                    s.key(),
                    s.len()
                )));
            }
            let key = s.key();
            let tr = forward_trace(self.model, &s.values()[..pos], self.pool, Some(&key))?;
            if !tr.y.is_finite() {
                return Err(Error::NonFinite(format!("forecast for {key} is {}", tr.y)));
            }
            self.traces.insert((season, pos), tr);
        }
        Ok(&self.traces[&(season, pos)])
    }

    /// Normalized-scale forecast and embedding distance.
    pub fn normalized(&mut self, season: usize, pos: usize) -> Result<(f64, f64)> {
        let tr = self.trace(season, pos)?;
        Ok((tr.y, tr.beta))
    }

    /// Raw-scale forecast.
    pub fn raw(&mut self, season: usize, pos: usize) -> Result<f64> {
        let norm = self.model.normalizer();
        Ok(self.normalized(season, pos)?.0 * norm)
    }

    /// Adds `d(loss)/d(normalized forecast)` and `d(loss)/d(beta)` for one pass.
    pub fn add_partial(&mut self, season: usize, pos: usize, g_y_norm: f64, g_beta: f64) {
        let e = self.partials.entry((season, pos)).or_insert((0.0, 0.0));
        e.0 += g_y_norm;
        e.1 += g_beta;
    }

    /// Adds `d(loss)/d(raw forecast)`.
    pub fn add_raw_partial(&mut self, season: usize, pos: usize, g_y_raw: f64) {
        let norm = self.model.normalizer();
        self.add_partial(season, pos, g_y_raw * norm, 0.0);
    }

    pub fn backprop(&self) -> Vec<f64> {
        let mut grad = vec![0.0; self.model.theta().len()];
        for (key, (g_y, g_beta)) in &self.partials {
            if *g_y == 0.0 && *g_beta == 0.0 {
                continue;
            }
            let tr = &self.traces[key];
            backward(self.model, tr, *g_y, *g_beta, &mut grad);
        }
        grad
    }
}
