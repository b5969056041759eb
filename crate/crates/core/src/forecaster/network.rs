//! Forward pass and reverse-mode gradient of the forecaster.
//!
//! The network has three parts. An Elman recurrence
//! `r_t = tanh(w_in * x_t + W_rec r_{t-1} + b_rec)` encodes the normalized
//! history. A similarity embedding maps summary statistics of every
//! historical season through one affine map and those of the current
//! history through another; softmax attention over negative squared
//! distances to the `k` nearest historical embeddings gives `e`. The decoder
//! is `y = w_out . [r_w ; e] + b_out` on the normalized scale.

use serde::{Deserialize, Serialize};

use crate::data::{PredictionTask, Season, SeasonKey, SeasonSet};
use crate::error::{Error, Result};
use crate::forecaster::model::{ForecastModel, Layout, N_STATS};

/// `[mean, max, argmax / len, last]` of a raw series.
pub fn season_stats(values: &[f64]) -> [f64; N_STATS] {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (argmax, max) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let last = values.last().copied().unwrap_or(0.0);
    [mean, max.max(0.0), argmax as f64 / n, last]
}

fn scale_stats(stats: &[f64; N_STATS], normalizer: f64) -> [f64; N_STATS] {
    [
        stats[0] / normalizer,
        stats[1] / normalizer,
        stats[2],
        stats[3] / normalizer,
    ]
}

/// Full historical seasons available for similarity attention.
///
/// Entries are kept in `(year_label, region)` order, which also breaks ties
/// between equally distant neighbours.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HistoricalPool {
    keys: Vec<SeasonKey>,
    stats: Vec<[f64; N_STATS]>,
}

impl HistoricalPool {
    pub fn new(seasons: &SeasonSet) -> Self {
        let mut entries: Vec<(SeasonKey, [f64; N_STATS])> = seasons
            .iter()
            .map(|s| (s.key(), season_stats(s.values())))
            .collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let (keys, stats) = entries.into_iter().unzip();
        Self { keys, stats }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[SeasonKey] {
        &self.keys
    }
}

/// Normalized-scale intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    x: Vec<f64>,
    r: Vec<Vec<f64>>,
    f_cur: [f64; N_STATS],
    q: Vec<f64>,
    f_sel: Vec<[f64; N_STATS]>,
    emb_sel: Vec<Vec<f64>>,
    att: Vec<f64>,
    e: Vec<f64>,
    pub y: f64,
    pub beta: f64,
}

fn affine(theta: &[f64], a: usize, c: usize, d: usize, f: &[f64; N_STATS]) -> Vec<f64> {
    (0..d)
        .map(|m| theta[c + m] + (0..N_STATS).map(|j| theta[a + m * N_STATS + j] * f[j]).sum::<f64>())
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn forward_trace(
    model: &ForecastModel,
    history: &[f64],
    pool: &HistoricalPool,
    exclude: Option<&SeasonKey>,
) -> Result<Trace> {
    if history.is_empty() {
        return Err(Error::Index("history must contain at least one week".into()));
    }
    let theta = model.theta();
    let l: Layout = model.layout();
    let (h, d) = (l.hidden, l.embed);
    let norm = model.normalizer();

    let x: Vec<f64> = history.iter().map(|v| v / norm).collect();
    let mut r = Vec::with_capacity(x.len() + 1);
    r.push(vec![0.0; h]);
    for &xt in &x {
        let prev = r.last().expect("non-empty");
        let next: Vec<f64> = (0..h)
            .map(|i| {
                let row = &theta[l.w_rec + i * h..l.w_rec + (i + 1) * h];
                let pre = theta[l.w_in + i] * xt
                    + row.iter().zip(prev).map(|(u, p)| u * p).sum::<f64>()
                    + theta[l.b_rec + i];
                pre.tanh()
            })
            .collect();
        r.push(next);
    }

    let f_cur = scale_stats(&season_stats(history), norm);
    let q = affine(theta, l.a_cur, l.c_cur, d, &f_cur);

    let mut candidates: Vec<(usize, f64, [f64; N_STATS], Vec<f64>)> = pool
        .keys
        .iter()
        .zip(&pool.stats)
        .enumerate()
        .filter(|(_, (k, _))| Some(*k) != exclude)
        .map(|(idx, (_, st))| {
            let f = scale_stats(st, norm);
            let emb = affine(theta, l.a_hist, l.c_hist, d, &f);
            (idx, sq_dist(&q, &emb), f, emb)
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::InvalidArgument(
            "no historical seasons available for the similarity embedding".into(),
        ));
    }
    // stable sort keeps pool (key) order among equal distances
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1));
    candidates.truncate(model.arch().neighbors.min(candidates.len()));

    let s_max = candidates
        .iter()
        .map(|c| -c.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = candidates.iter().map(|c| (-c.1 - s_max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let att: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut e = vec![0.0; d];
    for (a, c) in att.iter().zip(&candidates) {
        for m in 0..d {
            e[m] += a * c.3[m];
        }
    }

    let r_last = r.last().expect("non-empty");
    let y = theta[l.b_out]
        + (0..h).map(|i| theta[l.w_out + i] * r_last[i]).sum::<f64>()
        + (0..d).map(|m| theta[l.w_out + h + m] * e[m]).sum::<f64>();
    let beta = sq_dist(&q, &e);

    let (f_sel, emb_sel) = candidates.into_iter().map(|c| (c.2, c.3)).unzip();
    Ok(Trace {
        x,
        r,
        f_cur,
        q,
        f_sel,
        emb_sel,
        att,
        e,
        y,
        beta,
    })
}

/// Accumulates `g_y * dy/dtheta + g_beta * dbeta/dtheta` into `grad`.
pub(crate) fn backward(model: &ForecastModel, tr: &Trace, g_y: f64, g_beta: f64, grad: &mut [f64]) {
    let theta = model.theta();
    let l = model.layout();
    let (h, d) = (l.hidden, l.embed);
    let r_last = tr.r.last().expect("non-empty");

    grad[l.b_out] += g_y;
    let mut g_r: Vec<f64> = (0..h)
        .map(|i| {
            grad[l.w_out + i] += g_y * r_last[i];
            g_y * theta[l.w_out + i]
        })
        .collect();
    let mut g_e: Vec<f64> = (0..d)
        .map(|m| {
            grad[l.w_out + h + m] += g_y * tr.e[m];
            g_y * theta[l.w_out + h + m]
        })
        .collect();

    let mut g_q = vec![0.0; d];
    for m in 0..d {
        let diff = tr.q[m] - tr.e[m];
        g_e[m] -= 2.0 * g_beta * diff;
        g_q[m] += 2.0 * g_beta * diff;
    }

    // attention
    let g_att: Vec<f64> = tr
        .emb_sel
        .iter()
        .map(|emb| emb.iter().zip(&g_e).map(|(a, b)| a * b).sum())
        .collect();
    let g_bar: f64 = tr.att.iter().zip(&g_att).map(|(a, g)| a * g).sum();
    for (j, emb) in tr.emb_sel.iter().enumerate() {
        let g_score = tr.att[j] * (g_att[j] - g_bar);
        let mut g_emb: Vec<f64> = g_e.iter().map(|g| tr.att[j] * g).collect();
        for m in 0..d {
            let diff = tr.q[m] - emb[m];
            g_q[m] -= 2.0 * g_score * diff;
            g_emb[m] += 2.0 * g_score * diff;
        }
        let f = &tr.f_sel[j];
        for m in 0..d {
            grad[l.c_hist + m] += g_emb[m];
            for k in 0..N_STATS {
                grad[l.a_hist + m * N_STATS + k] += g_emb[m] * f[k];
            }
        }
    }
    for m in 0..d {
        grad[l.c_cur + m] += g_q[m];
        for k in 0..N_STATS {
            grad[l.a_cur + m * N_STATS + k] += g_q[m] * tr.f_cur[k];
        }
    }

    // backpropagation through time
    for t in (1..tr.r.len()).rev() {
        let r_t = &tr.r[t];
        let r_prev = &tr.r[t - 1];
        let x_t = tr.x[t - 1];
        let g_pre: Vec<f64> = (0..h).map(|i| g_r[i] * (1.0 - r_t[i] * r_t[i])).collect();
        let mut g_prev = vec![0.0; h];
        for i in 0..h {
            grad[l.w_in + i] += g_pre[i] * x_t;
            grad[l.b_rec + i] += g_pre[i];
            for j in 0..h {
                grad[l.w_rec + i * h + j] += g_pre[i] * r_prev[j];
                g_prev[j] += theta[l.w_rec + i * h + j] * g_pre[i];
            }
        }
        g_r = g_prev;
    }
}

/// Next-week forecast on the raw wILI scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: f64,
    pub week_index: usize,
    pub season: SeasonKey,
}

/// Raw-scale forecast for an arbitrary observed history.
pub fn predict_history(
    model: &ForecastModel,
    history: &[f64],
    pool: &HistoricalPool,
    exclude: Option<&SeasonKey>,
) -> Result<f64> {
    let tr = forward_trace(model, history, pool, exclude)?;
    Ok(tr.y * model.normalizer())
}

/// Forecast of `season` at `task`, using only the weeks before the target.
///
/// The season itself is never attended to, even when it is part of `pool`.
pub fn forward(model: &ForecastModel, season: &Season, task: PredictionTask, pool: &HistoricalPool) -> Result<Prediction> {
    task.check(season)?;
    let key = season.key();
    let history = &season.values()[..task.week_index()];
    let value = predict_history(model, history, pool, Some(&key))?;
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("forecast for {key} is {value}")));
    }
    Ok(Prediction {
        value,
        week_index: task.week_index(),
        season: key,
    })
}
