//! Expert guidance `<g, epsilon, delta>` and the deviation samples `Z` it induces.
//!
//! Smoothness: `Z = |y_{t+1} - Y_t|`, the jump between the forecast and the
//! last observed value. Regional equity: `Z = |mu(R1) - mu(R2)|`, the gap in
//! forecast quality between two regions for the same season-year.
//! A sample with `Z <= epsilon` satisfies the guidance.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{PredictionTask, SeasonSet};
use crate::error::{Error, Result};
use crate::forecaster::{sign, ForecastModel, HistoricalPool, Prediction, Predictor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceKind {
    Smoothness,
    RegionalEquity,
}

impl fmt::Display for GuidanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GuidanceKind::Smoothness => "smoothness",
            GuidanceKind::RegionalEquity => "regional_equity",
        })
    }
}

/// Forecast-quality measure used by regional equity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    #[default]
    Rmse,
    Mae,
}

fn one() -> usize {
    1
}

fn is_default_quality(q: &Quality) -> bool {
    *q == Quality::Rmse
}

fn is_one(w: &usize) -> bool {
    *w == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Guidance {
    pub kind: GuidanceKind,
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<(String, String)>,
    #[serde(default, skip_serializing_if = "is_default_quality")]
    pub quality: Quality,
    /// Number of target weeks, ending at the task week, pooled into each regional quality value.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub window: usize,
}

impl Guidance {
    pub fn smoothness(epsilon: f64, delta: f64) -> Result<Self> {
        let g = Self {
            kind: GuidanceKind::Smoothness,
            epsilon,
            delta,
            regions: None,
            quality: Quality::Rmse,
            window: 1,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn regional_equity(epsilon: f64, delta: f64, r1: impl Into<String>, r2: impl Into<String>) -> Result<Self> {
        let g = Self {
            kind: GuidanceKind::RegionalEquity,
            epsilon,
            delta,
            regions: Some((r1.into(), r2.into())),
            quality: Quality::Rmse,
            window: 1,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self {
            delta,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must be in (0,1), got {}", self.delta)));
        }
        if self.window < 1 {
            return Err(Error::InvalidArgument("window must be >= 1".into()));
        }
        match (self.kind, &self.regions) {
            (GuidanceKind::Smoothness, None) => Ok(()),
            (GuidanceKind::Smoothness, Some(_)) => Err(Error::InvalidArgument(
                "smoothness guidance takes no region pair".into(),
            )),
            (GuidanceKind::RegionalEquity, Some((a, b))) if a != b => Ok(()),
            (GuidanceKind::RegionalEquity, Some(_)) => Err(Error::InvalidArgument(
                "regional equity needs two different regions".into(),
            )),
            (GuidanceKind::RegionalEquity, None) => Err(Error::InvalidArgument(
                "regional equity needs a region pair".into(),
            )),
        }
    }

    /// Short human label, e.g. `smoothness(eps=0.25, delta=0.2)`.
    pub fn label(&self) -> String {
        match &self.regions {
            Some((a, b)) => format!("{}[{a},{b}](eps={}, delta={})", self.kind, self.epsilon, self.delta),
            None => format!("{}(eps={}, delta={})", self.kind, self.epsilon, self.delta),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(Guidance),
    Many(Vec<Guidance>),
}

/// Parses one guidance object or an array of them.
pub fn parse_guidances(json: &str) -> Result<Vec<Guidance>> {
    let list = match serde_json::from_str::<OneOrMany>(json)? {
        OneOrMany::One(g) => vec![g],
        OneOrMany::Many(v) => v,
    };
    for g in &list {
        g.validate()?;
    }
    Ok(list)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub regions: Vec<String>,
    pub year_label: String,
}

/// One realization of a guidance deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZSample {
    pub value: f64,
    pub week_index: usize,
    pub provenance: Provenance,
}

pub fn z_values(z: &[ZSample]) -> Vec<f64> {
    z.iter().map(|s| s.value).collect()
}

pub fn z_smooth(prediction: &Prediction, last_observed: f64) -> ZSample {
    ZSample {
        value: (prediction.value - last_observed).abs(),
        week_index: prediction.week_index,
        provenance: Provenance {
            regions: vec![prediction.season.region.clone()],
            year_label: prediction.season.year_label.clone(),
        },
    }
}

/// A Z sample with `dZ / d(raw forecast)` for every forecast it depends on.
pub(crate) struct ZTerm {
    pub sample: ZSample,
    pub partials: Vec<((usize, usize), f64)>,
}

fn window_positions(task: PredictionTask, window: usize) -> std::ops::RangeInclusive<usize> {
    let w = task.week_index();
    (w + 1).saturating_sub(window).max(1)..=w
}

/// Quality of the forecasts for `seasons` over the window, with partials.
fn region_quality(
    pred: &mut Predictor<'_>,
    seasons: &[usize],
    task: PredictionTask,
    window: usize,
    quality: Quality,
) -> Result<(f64, Vec<((usize, usize), f64)>)> {
    let mut errors = Vec::new();
    for &i in seasons {
        task.check(&pred.data.seasons()[i])?;
        for pos in window_positions(task, window) {
            let y = pred.raw(i, pos)?;
            errors.push(((i, pos), y - pred.data.seasons()[i].values()[pos]));
        }
    }
    let n = errors.len() as f64;
    Ok(match quality {
        Quality::Rmse => {
            let rmse = (errors.iter().map(|(_, e)| e * e).sum::<f64>() / n).sqrt();
            let partials = errors
                .iter()
                .map(|(k, e)| (*k, if rmse > 0.0 { e / (n * rmse) } else { 0.0 }))
                .collect();
            (rmse, partials)
        }
        Quality::Mae => {
            let mae = errors.iter().map(|(_, e)| e.abs()).sum::<f64>() / n;
            let partials = errors.iter().map(|(k, e)| (*k, sign(*e) / n)).collect();
            (mae, partials)
        }
    })
}

fn region_indices(data: &SeasonSet, region: &str) -> Result<Vec<usize>> {
    let idx: Vec<usize> = data
        .iter()
        .enumerate()
        .filter(|(_, s)| s.region() == region)
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        return Err(Error::MissingRegion(region.to_string()));
    }
    Ok(idx)
}

fn regional_term(
    pred: &mut Predictor<'_>,
    idx1: &[usize],
    idx2: &[usize],
    task: PredictionTask,
    guidance_quality: Quality,
    window: usize,
    pair: &(String, String),
    year_label: String,
) -> Result<ZTerm> {
    let (mu1, p1) = region_quality(pred, idx1, task, window, guidance_quality)?;
    let (mu2, p2) = region_quality(pred, idx2, task, window, guidance_quality)?;
    let s = sign(mu1 - mu2);
    let partials = p1
        .into_iter()
        .map(|(k, g)| (k, s * g))
        .chain(p2.into_iter().map(|(k, g)| (k, -s * g)))
        .collect();
    Ok(ZTerm {
        sample: ZSample {
            value: (mu1 - mu2).abs(),
            week_index: task.week_index(),
            provenance: Provenance {
                regions: vec![pair.0.clone(), pair.1.clone()],
                year_label,
            },
        },
        partials,
    })
}

pub(crate) fn smoothness_terms(pred: &mut Predictor<'_>, task: PredictionTask) -> Result<Vec<ZTerm>> {
    let w = task.week_index();
    (0..pred.data.len())
        .map(|i| {
            let season = &pred.data.seasons()[i];
            task.check(season)?;
            let last = season.values()[w - 1];
            let key = season.key();
            let y = pred.raw(i, w)?;
            Ok(ZTerm {
                sample: ZSample {
                    value: (y - last).abs(),
                    week_index: w,
                    provenance: Provenance {
                        regions: vec![key.region],
                        year_label: key.year_label,
                    },
                },
                partials: vec![((i, w), sign(y - last))],
            })
        })
        .collect()
}

pub(crate) fn regional_terms(pred: &mut Predictor<'_>, guidance: &Guidance, task: PredictionTask) -> Result<Vec<ZTerm>> {
    let pair = guidance
        .regions
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("regional equity needs a region pair".into()))?;
    let data = pred.data;
    let r1 = region_indices(data, &pair.0)?;
    let r2 = region_indices(data, &pair.1)?;
    let mut terms = Vec::new();
    for &i in &r1 {
        let year = data.seasons()[i].year_label();
        let Some(&j) = r2.iter().find(|&&j| data.seasons()[j].year_label() == year) else {
            continue;
        };
        terms.push(regional_term(pred, &[i], &[j], task, guidance.quality, guidance.window, pair, year)?);
    }
    if terms.is_empty() {
        return Err(Error::Validation(format!(
            "regions {} and {} share no season-year",
            pair.0, pair.1
        )));
    }
    Ok(terms)
}

pub(crate) fn z_terms(pred: &mut Predictor<'_>, guidance: &Guidance, task: PredictionTask) -> Result<Vec<ZTerm>> {
    match guidance.kind {
        GuidanceKind::Smoothness => smoothness_terms(pred, task),
        GuidanceKind::RegionalEquity => regional_terms(pred, guidance, task),
    }
}

/// Gap in forecast quality between two regions over every season of each region in `data`.
pub fn z_regional(
    model: &ForecastModel,
    task: PredictionTask,
    data: &SeasonSet,
    pool: &HistoricalPool,
    quality: Quality,
    window: usize,
    pair: (&str, &str),
) -> Result<ZSample> {
    let r1 = region_indices(data, pair.0)?;
    let r2 = region_indices(data, pair.1)?;
    let years = data.year_labels().into_iter().collect::<Vec<_>>().join(",");
    let mut pred = Predictor::new(model, data, pool);
    let pair = (pair.0.to_string(), pair.1.to_string());
    Ok(regional_term(&mut pred, &r1, &r2, task, quality, window.max(1), &pair, years)?.sample)
}

/// Z samples of `guidance` over `data`, ordered by `(year_label, region)`.
///
/// Smoothness yields one sample per season; regional equity one per
/// season-year in which both regions appear.
pub fn collect_z(
    model: &ForecastModel,
    guidance: &Guidance,
    data: &SeasonSet,
    task: PredictionTask,
    pool: &HistoricalPool,
) -> Result<Vec<ZSample>> {
    guidance.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot collect Z over an empty season set".into()));
    }
    let mut pred = Predictor::new(model, data, pool);
    Ok(z_terms(&mut pred, guidance, task)?
        .into_iter()
        .map(|t| t.sample)
        .collect())
}

/// Number of Z samples `guidance` yields on `data`, without running the model.
pub fn z_sample_count(guidance: &Guidance, data: &SeasonSet) -> usize {
    match (&guidance.kind, &guidance.regions) {
        (GuidanceKind::RegionalEquity, Some((a, b))) => data
            .year_labels()
            .iter()
            .filter(|y| data.get(a, y).is_some() && data.get(b, y).is_some())
            .count(),
        _ => data.len(),
    }
}

/// Fraction of samples strictly above `epsilon`.
pub fn failure_rate(z: &[ZSample], epsilon: f64) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::SampleSize { required: 1, got: 0 });
    }
    Ok(z.iter().filter(|s| s.value > epsilon).count() as f64 / z.len() as f64)
}
