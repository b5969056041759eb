use serde::{Deserialize, Serialize};

use crate::data::{PredictionTask, SeasonSet};
use crate::error::{Error, Result};
use crate::forecaster::model::ForecastModel;
use crate::forecaster::network::{backward, forward_trace, HistoricalPool, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Weight on the embedding-consistency term.
    pub beta_weight: f64,
    pub seed: u64,
    /// Maximum L2 norm of an update direction.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.02,
            epochs: 1000,
            beta_weight: 0.1,
            seed: 0,
            grad_clip: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be positive".into()));
        }
        if !(self.beta_weight >= 0.0 && self.beta_weight.is_finite()) {
            return Err(Error::InvalidArgument("beta_weight must be >= 0".into()));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::InvalidArgument("grad_clip must be positive".into()));
        }
        Ok(())
    }
}

/// A scalar function of the parameters with its exact gradient.
pub trait Objective {
    fn evaluate(&self, model: &ForecastModel) -> Result<(f64, Vec<f64>)>;

    fn value(&self, model: &ForecastModel) -> Result<f64> {
        self.evaluate(model).map(|(v, _)| v)
    }
}

impl<F> Objective for F
where
    F: Fn(&ForecastModel) -> Result<(f64, Vec<f64>)>,
{
    fn evaluate(&self, model: &ForecastModel) -> Result<(f64, Vec<f64>)> {
        self(model)
    }
}

pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One forward pass per season at the task week, with its normalized target.
pub(crate) struct SeasonPass {
    pub trace: Trace,
    pub target: f64,
}

pub(crate) fn season_passes(
    model: &ForecastModel,
    data: &SeasonSet,
    task: PredictionTask,
    pool: &HistoricalPool,
) -> Result<Vec<SeasonPass>> {
    data.iter()
        .map(|season| {
            task.check(season)?;
            let w = task.week_index();
            let key = season.key();
            let trace = forward_trace(model, &season.values()[..w], pool, Some(&key))?;
            Ok(SeasonPass {
                trace,
                target: season.values()[w] / model.normalizer(),
            })
        })
        .collect()
}

/// Sum of absolute normalized errors plus the weighted mean embedding distance.
pub(crate) fn task_value(passes: &[SeasonPass], beta_weight: f64) -> f64 {
    let n = passes.len() as f64;
    let err: f64 = passes.iter().map(|p| (p.trace.y - p.target).abs()).sum();
    let beta: f64 = passes.iter().map(|p| p.trace.beta).sum::<f64>() / n;
    err + beta_weight * beta
}

/// Per-pass `(dL/dy, dL/dbeta)` of [`task_value`].
pub(crate) fn task_partials(passes: &[SeasonPass], beta_weight: f64) -> Vec<(f64, f64)> {
    let n = passes.len() as f64;
    passes
        .iter()
        .map(|p| (sign(p.trace.y - p.target), beta_weight / n))
        .collect()
}

pub(crate) fn backprop_passes(model: &ForecastModel, passes: &[SeasonPass], partials: &[(f64, f64)]) -> Vec<f64> {
    let mut grad = vec![0.0; model.theta().len()];
    for (p, (g_y, g_beta)) in passes.iter().zip(partials) {
        if *g_y != 0.0 || *g_beta != 0.0 {
            backward(model, &p.trace, *g_y, *g_beta, &mut grad);
        }
    }
    grad
}

/// Forecasting loss over a set of seasons for one prediction task.
#[derive(Debug, Clone, Copy)]
pub struct TaskLoss<'a> {
    pub data: &'a SeasonSet,
    pub task: PredictionTask,
    pub pool: &'a HistoricalPool,
    pub beta_weight: f64,
}

impl<'a> TaskLoss<'a> {
    pub fn new(data: &'a SeasonSet, task: PredictionTask, pool: &'a HistoricalPool, beta_weight: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("task loss over an empty season set".into()));
        }
        for s in data {
            task.check(s)?;
        }
        Ok(Self {
            data,
            task,
            pool,
            beta_weight,
        })
    }
}

impl Objective for TaskLoss<'_> {
    fn evaluate(&self, model: &ForecastModel) -> Result<(f64, Vec<f64>)> {
        let passes = season_passes(model, self.data, self.task, self.pool)?;
        let partials = task_partials(&passes, self.beta_weight);
        Ok((task_value(&passes, self.beta_weight), backprop_passes(model, &passes, &partials)))
    }

    fn value(&self, model: &ForecastModel) -> Result<f64> {
        let passes = season_passes(model, self.data, self.task, self.pool)?;
        Ok(task_value(&passes, self.beta_weight))
    }
}

pub fn task_loss(
    model: &ForecastModel,
    data: &SeasonSet,
    task: PredictionTask,
    pool: &HistoricalPool,
    beta_weight: f64,
) -> Result<f64> {
    TaskLoss::new(data, task, pool, beta_weight)?.value(model)
}

/// Exact gradient of `objective` at the model's parameters.
pub fn grad(model: &ForecastModel, objective: &impl Objective) -> Result<Vec<f64>> {
    let (value, g) = objective.evaluate(model)?;
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("loss is {value}")));
    }
    if g.len() != model.theta().len() {
        return Err(Error::InvalidArgument(format!(
            "gradient has {} entries for {} parameters",
            g.len(),
            model.theta().len()
        )));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient has non-finite entries".into()));
    }
    Ok(g)
}

pub(crate) fn clipped_step(model: &ForecastModel, g: &[f64], config: &TrainConfig) -> Result<ForecastModel> {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if norm > config.grad_clip {
        config.grad_clip / norm
    } else {
        1.0
    };
    let theta = model
        .theta()
        .iter()
        .zip(g)
        .map(|(t, gi)| t - config.learning_rate * scale * gi)
        .collect();
    model.with_theta(theta)
}

/// `theta - learning_rate * clip(grad)`, with the gradient clipped to `grad_clip` in L2 norm.
pub fn train_step(model: &ForecastModel, objective: &impl Objective, config: &TrainConfig) -> Result<ForecastModel> {
    config.validate()?;
    let g = grad(model, objective)?;
    clipped_step(model, &g, config)
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: ForecastModel,
    /// Objective value before each step, then after the last one.
    pub losses: Vec<f64>,
}

/// Plain full-batch clipped gradient descent for `config.epochs` steps.
pub fn fit(model: &ForecastModel, objective: &impl Objective, config: &TrainConfig) -> Result<FitResult> {
    config.validate()?;
    let mut current = model.clone();
    let mut losses = Vec::with_capacity(config.epochs + 1);
    for epoch in 0..config.epochs {
        let (value, g) = objective.evaluate(&current)?;
        if !value.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                msg: format!("loss {value}"),
            });
        }
        losses.push(value);
        current = clipped_step(&current, &g, config)?;
    }
    losses.push(objective.value(&current)?);
    Ok(FitResult {
        model: current,
        losses,
    })
}
