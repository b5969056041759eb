//! Direct guidance (every knob supplied), automatic guidance (search over the
//! tolerance under a performance requirement), and per-week sweeps of either.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split_with, DataSplit, PredictionTask, SeasonSet, SplitParams};
use crate::error::{Error, Result};
use crate::eval::rmse;
use crate::forecaster::{ForecastModel, HistoricalPool};
use crate::guidance::Guidance;
use crate::seldonian::{run_seldonian, safety_test, select_candidate, RunOutcome, SeldonianConfig, Status};

pub const DEFAULT_EPSILON_GRID: [f64; 7] = [0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0];

/// Splits `data` with `seed`, then selects a candidate and runs the safety test.
pub fn direct_guidance(
    data: &SeasonSet,
    config: &SeldonianConfig,
    task: PredictionTask,
    split_params: SplitParams,
    seed: u64,
) -> Result<RunOutcome> {
    let split = split_with(data, split_params, seed)?;
    Ok(run_seldonian(&split, config, task)?.1)
}

/// Tolerance search for one guidance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoGuidanceSpec {
    /// Kind, delta and regions; the tolerance is replaced by each grid value.
    pub guidance: Guidance,
    pub epsilon_grid: Vec<f64>,
    /// Largest allowed ratio of guided to unconstrained RMSE on the safety set.
    pub performance_requirement: f64,
}

impl AutoGuidanceSpec {
    pub fn new(guidance: Guidance) -> Self {
        Self {
            guidance,
            epsilon_grid: DEFAULT_EPSILON_GRID.to_vec(),
            performance_requirement: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon_grid.is_empty() {
            return Err(Error::InvalidArgument("epsilon grid is empty".into()));
        }
        if self.epsilon_grid.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidArgument("epsilon grid values must be positive".into()));
        }
        if self.epsilon_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("epsilon grid must be strictly ascending".into()));
        }
        if !(self.performance_requirement > 0.0) {
            return Err(Error::InvalidArgument("performance requirement must be positive".into()));
        }
        self.guidance.with_epsilon(self.epsilon_grid[0]).validate()
    }

    fn config_at(&self, base: &SeldonianConfig, epsilon: f64) -> SeldonianConfig {
        SeldonianConfig {
            guidances: vec![self.guidance.with_epsilon(epsilon)],
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoStatus {
    Found,
    #[serde(rename = "NSF")]
    Nsf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub epsilon: f64,
    pub certified: bool,
    pub safety_bound: f64,
    pub rmse: f64,
    pub rmse_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoOutcome {
    pub status: AutoStatus,
    pub epsilon: Option<f64>,
    pub performance_requirement: f64,
    pub baseline_rmse: f64,
    /// One entry per grid value tried, in grid order, up to the stopping point.
    pub trace: Vec<TracePoint>,
    /// Safety-test outcome at the accepted tolerance, or at the last one tried.
    pub outcome: RunOutcome,
    #[serde(skip)]
    pub model: Option<ForecastModel>,
    #[serde(skip)]
    pub baseline: Option<ForecastModel>,
}

fn ratio(value: f64, baseline: f64) -> f64 {
    if baseline > 0.0 {
        value / baseline
    } else if value == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Unconstrained candidate on `split`: same seed, architecture and epochs, no guidance.
pub fn train_baseline(split: &DataSplit, config: &SeldonianConfig, task: PredictionTask) -> Result<ForecastModel> {
    Ok(select_candidate(split, &config.unconstrained(), task)?.model)
}

/// Tries each tolerance in ascending order and stops at the first certified
/// one whose safety-set RMSE ratio meets the requirement.
pub fn auto_on_split(
    split: &DataSplit,
    spec: &AutoGuidanceSpec,
    config: &SeldonianConfig,
    task: PredictionTask,
) -> Result<AutoOutcome> {
    spec.validate()?;
    let pool = HistoricalPool::new(&split.training());
    let baseline = train_baseline(split, config, task)?;
    let baseline_rmse = rmse(&baseline, &split.safety, task, &pool)?;
    let mut trace = Vec::new();
    let mut last = None;
    for &epsilon in &spec.epsilon_grid {
        let cfg = spec.config_at(config, epsilon);
        let (candidate, outcome) = run_seldonian(split, &cfg, task)?;
        let value = rmse(&candidate.model, &split.safety, task, &pool)?;
        let point = TracePoint {
            epsilon,
            certified: outcome.is_certified(),
            safety_bound: outcome.safety_bound().unwrap_or(0.0),
            rmse: value,
            rmse_ratio: ratio(value, baseline_rmse),
        };
        log::debug!("auto: eps {epsilon} certified {} ratio {:.4}", point.certified, point.rmse_ratio);
        let found = point.certified && point.rmse_ratio <= spec.performance_requirement;
        trace.push(point);
        if found {
            return Ok(AutoOutcome {
                status: AutoStatus::Found,
                epsilon: Some(epsilon),
                performance_requirement: spec.performance_requirement,
                baseline_rmse,
                trace,
                model: outcome.model.clone(),
                outcome,
                baseline: Some(baseline),
            });
        }
        last = Some(outcome);
    }
    Ok(AutoOutcome {
        status: AutoStatus::Nsf,
        epsilon: None,
        performance_requirement: spec.performance_requirement,
        baseline_rmse,
        trace,
        outcome: last.expect("grid is non-empty"),
        model: None,
        baseline: Some(baseline),
    })
}

pub fn automatic_guidance(
    data: &SeasonSet,
    spec: &AutoGuidanceSpec,
    config: &SeldonianConfig,
    task: PredictionTask,
    split_params: SplitParams,
    seed: u64,
) -> Result<AutoOutcome> {
    let split = split_with(data, split_params, seed)?;
    auto_on_split(&split, spec, config, task)
}

/// Trains once at the smallest grid tolerance and reruns only the safety test
/// at every grid value. Returns `(epsilon, certified)` in grid order.
pub fn recheck_grid(
    split: &DataSplit,
    spec: &AutoGuidanceSpec,
    config: &SeldonianConfig,
    task: PredictionTask,
) -> Result<Vec<(f64, bool)>> {
    spec.validate()?;
    let first = spec.config_at(config, spec.epsilon_grid[0]);
    let candidate = select_candidate(split, &first, task)?;
    spec.epsilon_grid
        .iter()
        .map(|&eps| {
            let outcome = safety_test(&candidate, split, &spec.config_at(config, eps), task)?;
            Ok((eps, outcome.is_certified()))
        })
        .collect()
}

/// Epidemiological weeks from `start` to `end` inclusive, wrapping after week 52.
pub fn week_range(start: u32, end: u32) -> Result<Vec<u32>> {
    for w in [start, end] {
        if !(1..=52).contains(&w) {
            return Err(Error::InvalidArgument(format!("epidemiological week {w} outside 1..=52")));
        }
    }
    let mut weeks = vec![start];
    let mut w = start;
    while w != end {
        w = if w == 52 { 1 } else { w + 1 };
        weeks.push(w);
    }
    for &w in &weeks {
        if PredictionTask::for_epi_week(w).is_err() && w != crate::data::FIRST_WEEK {
            return Err(Error::InvalidArgument(format!("week {w} is outside the flu season")));
        }
    }
    Ok(weeks)
}

/// Parses `START:END` or a single week.
pub fn parse_week_range(text: &str) -> Result<Vec<u32>> {
    let parse = |s: &str| {
        s.trim()
            .parse::<u32>()
            .map_err(|_| Error::InvalidArgument(format!("bad week '{s}'")))
    };
    match text.split_once(':') {
        Some((a, b)) => week_range(parse(a)?, parse(b)?),
        None => {
            let w = parse(text)?;
            week_range(w, w)
        }
    }
}

/// Training seed for one week, mixed from the base seed.
pub fn week_seed(base: u64, week: u32) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ (u64::from(week)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepMode {
    Direct(SeldonianConfig),
    Auto(AutoGuidanceSpec, SeldonianConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WeekOutcome {
    Direct { outcome: RunOutcome },
    Auto { outcome: AutoOutcome },
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekResult {
    pub week: u32,
    pub week_index: Option<usize>,
    pub train_seed: u64,
    #[serde(flatten)]
    pub result: WeekOutcome,
    #[serde(skip)]
    pub baseline: Option<ForecastModel>,
}

impl WeekResult {
    pub fn status(&self) -> Option<Status> {
        match &self.result {
            WeekOutcome::Direct { outcome } => Some(outcome.status),
            WeekOutcome::Auto { outcome } => Some(match outcome.status {
                AutoStatus::Found => Status::Certified,
                AutoStatus::Nsf => Status::Nsf,
            }),
            WeekOutcome::Error { .. } => None,
        }
    }

    /// Safety-test outcome of the accepted (or last tried) guided model.
    pub fn run_outcome(&self) -> Option<&RunOutcome> {
        match &self.result {
            WeekOutcome::Direct { outcome } => Some(outcome),
            WeekOutcome::Auto { outcome } => Some(&outcome.outcome),
            WeekOutcome::Error { .. } => None,
        }
    }

    /// Certified guided model, if any.
    pub fn model(&self) -> Option<&ForecastModel> {
        match &self.result {
            WeekOutcome::Direct { outcome } => outcome.model.as_ref(),
            WeekOutcome::Auto { outcome } => outcome.model.as_ref(),
            WeekOutcome::Error { .. } => None,
        }
    }
}

fn run_week(split: &DataSplit, mode: &SweepMode, week: u32, base_seed: u64) -> WeekResult {
    let train_seed = week_seed(base_seed, week);
    let week_index = PredictionTask::for_epi_week(week).ok().map(|t| t.week_index());
    let run = || -> Result<(WeekOutcome, ForecastModel)> {
        let task = PredictionTask::for_epi_week(week)?;
        match mode {
            SweepMode::Direct(cfg) => {
                let mut cfg = cfg.clone();
                cfg.train.seed = train_seed;
                let (_, outcome) = run_seldonian(split, &cfg, task)?;
                let baseline = train_baseline(split, &cfg, task)?;
                Ok((WeekOutcome::Direct { outcome }, baseline))
            }
            SweepMode::Auto(spec, cfg) => {
                let mut cfg = cfg.clone();
                cfg.train.seed = train_seed;
                let mut outcome = auto_on_split(split, spec, &cfg, task)?;
                let baseline = outcome.baseline.take().expect("auto mode trains a baseline");
                Ok((WeekOutcome::Auto { outcome }, baseline))
            }
        }
    };
    match run() {
        Ok((result, baseline)) => WeekResult {
            week,
            week_index,
            train_seed,
            result,
            baseline: Some(baseline),
        },
        Err(e) => {
            log::warn!("week {week}: {e}");
            WeekResult {
                week,
                week_index,
                train_seed,
                result: WeekOutcome::Error { message: e.to_string() },
                baseline: None,
            }
        }
    }
}

/// Runs `mode` independently for every week on one shared split.
///
/// Weeks run in parallel; results come back in the order of `weeks`. A week
/// that fails records its error and does not stop the others.
pub fn sweep_on_split(split: &DataSplit, mode: &SweepMode, weeks: &[u32], base_seed: u64) -> Vec<WeekResult> {
    weeks
        .par_iter()
        .map(|&w| run_week(split, mode, w, base_seed))
        .collect()
}

pub fn weekly_sweep(
    data: &SeasonSet,
    mode: &SweepMode,
    weeks: &[u32],
    split_params: SplitParams,
    seed: u64,
) -> Result<(DataSplit, Vec<WeekResult>)> {
    if weeks.is_empty() {
        return Err(Error::InvalidArgument("empty week range".into()));
    }
    if let SweepMode::Auto(spec, _) = mode {
        spec.validate()?;
    }
    let split = split_with(data, split_params, seed)?;
    let results = sweep_on_split(&split, mode, weeks, seed);
    Ok((split, results))
}
