use serde::{Deserialize, Serialize};

use crate::data::{DataSplit, PredictionTask, SeasonSet};
use crate::error::{Error, Result};
use crate::forecaster::{
    clipped_step, fit, init_model, sign, Arch, ForecastModel, HistoricalPool, Objective, Predictor, TaskLoss,
    TrainConfig,
};
use crate::guidance::{z_sample_count, z_terms, Guidance};
use crate::seldonian::bound::{predicted_scale, shifted_mean_with_grad, BoundParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeldonianConfig {
    /// Weight of the mean deviation term while every guidance is predicted to hold.
    pub lambda: f64,
    /// Task-loss ceiling on the penalty branch; estimated from warmup epochs when absent.
    pub u_loss: Option<f64>,
    pub guidances: Vec<Guidance>,
    pub train: TrainConfig,
    pub arch: Arch,
    pub inflation: f64,
    pub warmup_epochs: usize,
    pub u_loss_factor: f64,
}

impl Default for SeldonianConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            u_loss: None,
            guidances: Vec::new(),
            train: TrainConfig::default(),
            arch: Arch::default(),
            inflation: 2.0,
            warmup_epochs: 5,
            u_loss_factor: 2.0,
        }
    }
}

impl SeldonianConfig {
    pub fn new(guidances: Vec<Guidance>) -> Self {
        Self {
            guidances,
            ..Self::default()
        }
    }

    /// Configuration for the unconstrained baseline: no guidance, `lambda = 0`.
    pub fn unconstrained(&self) -> Self {
        Self {
            lambda: 0.0,
            guidances: Vec::new(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if let Some(u) = self.u_loss {
            if !(u > 0.0 && u.is_finite()) {
                return Err(Error::InvalidArgument(format!("u_loss must be positive, got {u}")));
            }
        }
        if !(self.inflation >= 1.0 && self.inflation.is_finite()) {
            return Err(Error::InvalidArgument(format!("inflation must be >= 1, got {}", self.inflation)));
        }
        if !(self.u_loss_factor >= 1.0 && self.u_loss_factor.is_finite()) {
            return Err(Error::InvalidArgument("u_loss_factor must be >= 1".into()));
        }
        if self.warmup_epochs == 0 && self.u_loss.is_none() && !self.guidances.is_empty() {
            return Err(Error::InvalidArgument(
                "u_loss must be given when warmup_epochs is 0".into(),
            ));
        }
        self.arch.validate()?;
        self.train.validate()?;
        self.guidances.iter().try_for_each(Guidance::validate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Every guidance predicted to pass; task loss plus weighted mean deviation.
    Task,
    /// Some guidance predicted to fail; penalty on the worst violating bound.
    Penalty,
}

/// Value of the candidate objective with the bounds that decided its branch.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateEval {
    pub value: f64,
    pub branch: Branch,
    pub task_loss: f64,
    pub predicted_bounds: Vec<f64>,
}

/// Switched candidate-selection objective over the candidate set.
#[derive(Debug, Clone)]
pub struct CandidateLoss<'a> {
    pub data: &'a SeasonSet,
    pub task: PredictionTask,
    pub pool: &'a HistoricalPool,
    pub guidances: &'a [Guidance],
    /// Predicted-bound parameters, one per guidance.
    pub bounds: Vec<BoundParams>,
    pub lambda: f64,
    pub u_loss: f64,
    pub beta_weight: f64,
}

impl<'a> CandidateLoss<'a> {
    /// Objective for `config` with safety sizes counted on `safety`.
    pub fn new(
        data: &'a SeasonSet,
        safety: &SeasonSet,
        task: PredictionTask,
        pool: &'a HistoricalPool,
        config: &'a SeldonianConfig,
        u_loss: f64,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("candidate set is empty".into()));
        }
        if !(u_loss > 0.0 && u_loss.is_finite()) {
            return Err(Error::InvalidArgument(format!("u_loss must be positive, got {u_loss}")));
        }
        let bounds = config
            .guidances
            .iter()
            .map(|g| BoundParams::new(g.delta, z_sample_count(g, safety), config.inflation))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            data,
            task,
            pool,
            guidances: &config.guidances,
            bounds,
            lambda: config.lambda,
            u_loss,
            beta_weight: config.train.beta_weight,
        })
    }

    fn run(&self, model: &ForecastModel, with_grad: bool) -> Result<(CandidateEval, Vec<f64>)> {
        let mut pred = Predictor::new(model, self.data, self.pool);
        let w = self.task.week_index();
        let n = self.data.len() as f64;
        let mut task = 0.0;
        let mut beta_sum = 0.0;
        let mut task_partials = Vec::with_capacity(self.data.len());
        for i in 0..self.data.len() {
            let season = &self.data.seasons()[i];
            self.task.check(season)?;
            let (y, beta) = pred.normalized(i, w)?;
            let target = season.values()[w] / model.normalizer();
            task += (y - target).abs();
            beta_sum += beta;
            task_partials.push((i, sign(y - target)));
        }
        task += self.beta_weight * beta_sum / n;

        let mut terms = Vec::with_capacity(self.guidances.len());
        let mut bounds = Vec::with_capacity(self.guidances.len());
        for (g, params) in self.guidances.iter().zip(&self.bounds) {
            let t = z_terms(&mut pred, g, self.task)?;
            let z: Vec<f64> = t.iter().map(|t| t.sample.value).collect();
            if z.len() < 2 {
                return Err(Error::SampleSize {
                    required: 2,
                    got: z.len(),
                });
            }
            let (ub, ub_grad) = shifted_mean_with_grad(&z, predicted_scale(params)?);
            bounds.push(ub);
            terms.push((t, z, ub_grad));
        }

        let worst = self
            .guidances
            .iter()
            .zip(&bounds)
            .enumerate()
            .filter(|(_, (g, &b))| b > g.epsilon)
            .max_by(|a, b| a.1 .1.total_cmp(b.1 .1))
            .map(|(i, _)| i);

        let (value, branch) = match worst {
            None => {
                // deviations enter on the normalized scale, like the task loss
                let k = self.guidances.len();
                let norm = model.normalizer();
                let dev = if k == 0 {
                    0.0
                } else {
                    terms.iter().map(|(_, z, _)| z.iter().sum::<f64>() / z.len() as f64).sum::<f64>() / (k as f64 * norm)
                };
                if with_grad {
                    for &(i, s) in &task_partials {
                        pred.add_partial(i, w, s, self.beta_weight / n);
                    }
                    for (t, z, _) in &terms {
                        let c = self.lambda / (k as f64 * z.len() as f64 * norm);
                        for term in t {
                            for &((i, pos), d) in &term.partials {
                                pred.add_raw_partial(i, pos, c * d);
                            }
                        }
                    }
                }
                (task + self.lambda * dev, Branch::Task)
            }
            Some(j) => {
                if with_grad {
                    let (t, _, ub_grad) = &terms[j];
                    for (term, gz) in t.iter().zip(ub_grad) {
                        for &((i, pos), d) in &term.partials {
                            pred.add_raw_partial(i, pos, gz * d);
                        }
                    }
                }
                let eps = self.guidances[j].epsilon;
                (self.u_loss + bounds[j] + (self.lambda - 1.0) * eps, Branch::Penalty)
            }
        };
        let grad = if with_grad { pred.backprop() } else { Vec::new() };
        Ok((
            CandidateEval {
                value,
                branch,
                task_loss: task,
                predicted_bounds: bounds,
            },
            grad,
        ))
    }

    pub fn inspect(&self, model: &ForecastModel) -> Result<CandidateEval> {
        self.run(model, false).map(|(e, _)| e)
    }
}

impl Objective for CandidateLoss<'_> {
    fn evaluate(&self, model: &ForecastModel) -> Result<(f64, Vec<f64>)> {
        self.run(model, true).map(|(e, g)| (e.value, g))
    }

    fn value(&self, model: &ForecastModel) -> Result<f64> {
        self.inspect(model).map(|e| e.value)
    }
}

/// Candidate objective of `model` on `split.candidate`.
pub fn candidate_loss(
    model: &ForecastModel,
    split: &DataSplit,
    config: &SeldonianConfig,
    task: PredictionTask,
    u_loss: f64,
) -> Result<f64> {
    let pool = HistoricalPool::new(&split.training());
    CandidateLoss::new(&split.candidate, &split.safety, task, &pool, config, u_loss)?.value(model)
}

/// Scale shared by every model trained on `data`: its largest value, or 1 when all zero.
pub fn normalizer_for(data: &SeasonSet) -> f64 {
    let m = data.max_value();
    if m > 0.0 && m.is_finite() {
        m
    } else {
        1.0
    }
}

/// Initial model for a split: seeded weights, normalizer from the training seasons.
pub fn initial_model(split: &DataSplit, config: &SeldonianConfig) -> Result<ForecastModel> {
    init_model(config.arch, config.train.seed)?.with_normalizer(normalizer_for(&split.training()))
}

/// `u_loss_factor` times the largest task loss seen over the warmup epochs.
pub fn estimate_u_loss(
    start: &ForecastModel,
    data: &SeasonSet,
    task: PredictionTask,
    pool: &HistoricalPool,
    config: &SeldonianConfig,
) -> Result<f64> {
    let objective = TaskLoss::new(data, task, pool, config.train.beta_weight)?;
    let warm = TrainConfig {
        epochs: config.warmup_epochs.max(1),
        ..config.train
    };
    let run = fit(start, &objective, &warm)?;
    let max = run.losses.iter().copied().fold(0.0, f64::max);
    Ok((config.u_loss_factor * max).max(f64::MIN_POSITIVE))
}

/// Result of candidate selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub model: ForecastModel,
    /// Lowest candidate objective seen; `model` is the parameter vector that produced it.
    pub loss: f64,
    pub epoch: usize,
    pub u_loss: f64,
    pub eval: CandidateEval,
}

/// Gradient descent on the candidate objective over `split.candidate`, keeping the best iterate.
///
/// Every forward pass attends over the full candidate and safety seasons
/// except the one being forecast.
pub fn select_candidate(split: &DataSplit, config: &SeldonianConfig, task: PredictionTask) -> Result<Candidate> {
    config.validate()?;
    split.check()?;
    for g in &config.guidances {
        let m = z_sample_count(g, &split.safety);
        if m < 2 {
            return Err(Error::SampleSize { required: 2, got: m });
        }
    }
    let training = split.training();
    let pool = HistoricalPool::new(&training);
    let start = initial_model(split, config)?;
    let u_loss = match config.u_loss {
        Some(u) => u,
        None if config.guidances.is_empty() => 1.0,
        None => estimate_u_loss(&start, &split.candidate, task, &pool, config)?,
    };
    let objective = CandidateLoss::new(&split.candidate, &split.safety, task, &pool, config, u_loss)?;

    let mut current = start;
    let mut best: Option<(f64, usize, ForecastModel)> = None;
    for epoch in 0..=config.train.epochs {
        let last = epoch == config.train.epochs;
        let (value, g) = if last {
            (objective.value(&current)?, Vec::new())
        } else {
            objective.evaluate(&current)?
        };
        if !value.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                msg: format!("candidate loss {value}"),
            });
        }
        if best.as_ref().is_none_or(|b| value < b.0) {
            best = Some((value, epoch, current.clone()));
        }
        if !last {
            current = clipped_step(&current, &g, &config.train)?;
        }
    }
    let (loss, epoch, model) = best.expect("at least one epoch evaluated");
    let eval = objective.inspect(&model)?;
    log::debug!("candidate: loss {loss:.6} at epoch {epoch}, u_loss {u_loss:.6}, branch {:?}", eval.branch);
    Ok(Candidate {
        model,
        loss,
        epoch,
        u_loss,
        eval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split, synth_seasons, SynthConfig};
    use crate::forecaster::task_loss;
    use crate::guidance::{collect_z, z_values};
    use crate::seldonian::bound::predicted_bound;

    fn fast_config(guidances: Vec<Guidance>) -> SeldonianConfig {
        SeldonianConfig {
            arch: Arch::new(3, 2, 3).unwrap(),
            train: TrainConfig {
                epochs: 30,
                ..TrainConfig::default()
            },
            ..SeldonianConfig::new(guidances)
        }
    }

    fn noisy_split() -> DataSplit {
        split(&synth_seasons(12, None, 0.0, 0.3, 5).unwrap(), 0.2, 0.5, 1).unwrap()
    }

    fn task() -> PredictionTask {
        PredictionTask::new(10).unwrap()
    }

    fn fd_check(objective: &CandidateLoss<'_>, model: &ForecastModel) {
        let (_, g) = objective.evaluate(model).unwrap();
        let h = 1e-5;
        for i in 0..g.len() {
            let mut up = model.theta().to_vec();
            up[i] += h;
            let mut dn = model.theta().to_vec();
            dn[i] -= h;
            let fd = (objective.value(&model.with_theta(up).unwrap()).unwrap()
                - objective.value(&model.with_theta(dn).unwrap()).unwrap())
                / (2.0 * h);
            assert!(
                (fd - g[i]).abs() <= 1e-6 + 1e-4 * fd.abs().max(g[i].abs()),
                "param {i}: analytic {} vs numeric {fd}",
                g[i]
            );
        }
    }

    #[test]
    fn penalty_branch_value() {
        let s = noisy_split();
        let g = Guidance::smoothness(1e-3, 0.1).unwrap();
        let mut config = fast_config(vec![g.clone()]);
        let pool = HistoricalPool::new(&s.training());
        let m = initial_model(&s, &config).unwrap();
        let z = z_values(&collect_z(&m, &g, &s.candidate, task(), &pool).unwrap());
        let pb = predicted_bound(&z, BoundParams::new(0.1, z_sample_count(&g, &s.safety), 2.0).unwrap()).unwrap();
        for lambda in [1.0, 2.5] {
            config.lambda = lambda;
            let eval = CandidateLoss::new(&s.candidate, &s.safety, task(), &pool, &config, 10.0)
                .unwrap()
                .inspect(&m)
                .unwrap();
            assert_eq!(eval.branch, Branch::Penalty);
            assert!((eval.predicted_bounds[0] - pb).abs() < 1e-12);
            assert!((eval.value - (10.0 + pb + (lambda - 1.0) * 1e-3)).abs() < 1e-12);
        }
    }

    #[test]
    fn penalty_uses_largest_violating_bound() {
        let s = noisy_split();
        let tight = Guidance::smoothness(1e-3, 0.1).unwrap();
        let loose = Guidance::smoothness(1e-3, 0.4).unwrap();
        let config = fast_config(vec![loose, tight]);
        let pool = HistoricalPool::new(&s.training());
        let m = initial_model(&s, &config).unwrap();
        let eval = CandidateLoss::new(&s.candidate, &s.safety, task(), &pool, &config, 3.0)
            .unwrap()
            .inspect(&m)
            .unwrap();
        let worst = eval.predicted_bounds.iter().copied().fold(f64::MIN, f64::max);
        assert!(eval.predicted_bounds[1] > eval.predicted_bounds[0]);
        assert!((eval.value - (3.0 + worst)).abs() < 1e-12);
    }

    #[test]
    fn zero_lambda_task_branch_is_task_loss() {
        let s = noisy_split();
        let mut config = fast_config(vec![Guidance::smoothness(1e6, 0.1).unwrap()]);
        config.lambda = 0.0;
        let pool = HistoricalPool::new(&s.training());
        let m = initial_model(&s, &config).unwrap();
        let eval = CandidateLoss::new(&s.candidate, &s.safety, task(), &pool, &config, 1.0)
            .unwrap()
            .inspect(&m)
            .unwrap();
        assert_eq!(eval.branch, Branch::Task);
        let tl = task_loss(&m, &s.candidate, task(), &pool, config.train.beta_weight).unwrap();
        assert!((eval.value - tl).abs() < 1e-12);
    }

    #[test]
    fn identical_regions_have_zero_deviation() {
        let data = SynthConfig {
            n: 10,
            amplitude_jitter: 0.3,
            center_jitter: 2.0,
            seed: 3,
            ..SynthConfig::default()
        }
        .generate_regions(&[("a", 0.0), ("b", 0.0)])
        .unwrap();
        let s = split(&data, 0.2, 0.5, 2).unwrap();
        let config = fast_config(vec![Guidance::regional_equity(0.01, 0.1, "a", "b").unwrap()]);
        let pool = HistoricalPool::new(&s.training());
        let m = initial_model(&s, &config).unwrap();
        let eval = CandidateLoss::new(&s.candidate, &s.safety, task(), &pool, &config, 1.0)
            .unwrap()
            .inspect(&m)
            .unwrap();
        assert_eq!(eval.branch, Branch::Task);
        assert_eq!(eval.predicted_bounds, vec![0.0]);
        assert!((eval.value - eval.task_loss).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences_on_both_branches() {
        let s = noisy_split();
        let pool = HistoricalPool::new(&s.training());
        for (eps, branch) in [(1e6, Branch::Task), (1e-3, Branch::Penalty)] {
            let mut config = fast_config(vec![Guidance::smoothness(eps, 0.1).unwrap()]);
            config.lambda = 1.5;
            let objective = CandidateLoss::new(&s.candidate, &s.safety, task(), &pool, &config, 4.0).unwrap();
            for seed in 0..4 {
                let m = init_model(config.arch, seed).unwrap().with_normalizer(normalizer_for(&s.training())).unwrap();
                assert_eq!(objective.inspect(&m).unwrap().branch, branch);
                fd_check(&objective, &m);
            }
        }
    }

    #[test]
    fn selection_is_deterministic_and_keeps_the_best_iterate() {
        let s = noisy_split();
        let config = fast_config(vec![Guidance::smoothness(0.8, 0.1).unwrap()]);
        let a = select_candidate(&s, &config, task()).unwrap();
        let b = select_candidate(&s, &config, task()).unwrap();
        assert_eq!(a, b);
        let start = initial_model(&s, &config).unwrap();
        let at_start = candidate_loss(&start, &s, &config, task(), a.u_loss).unwrap();
        assert!(a.loss <= at_start);
        assert!((candidate_loss(&a.model, &s, &config, task(), a.u_loss).unwrap() - a.loss).abs() < 1e-12);
    }

    #[test]
    fn unconstrained_u_loss_defaults_to_one() {
        let s = noisy_split();
        let config = fast_config(Vec::new());
        let c = select_candidate(&s, &config, task()).unwrap();
        assert_eq!(c.u_loss, 1.0);
        assert_eq!(c.eval.branch, Branch::Task);
    }

    #[test]
    fn config_validation() {
        let mut c = SeldonianConfig::default();
        assert!(c.validate().is_ok());
        c.lambda = -1.0;
        assert!(c.validate().is_err());
        let c = SeldonianConfig {
            warmup_epochs: 0,
            ..SeldonianConfig::new(vec![Guidance::smoothness(1.0, 0.1).unwrap()])
        };
        assert!(c.validate().is_err());
        let c = SeldonianConfig { u_loss: Some(2.0), ..c };
        assert!(c.validate().is_ok());
    }
}
