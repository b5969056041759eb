use serde::{Deserialize, Serialize};

use crate::data::{DataSplit, PredictionTask};
use crate::error::Result;
use crate::forecaster::{ForecastModel, HistoricalPool};
use crate::guidance::{collect_z, z_values, Guidance};
use crate::seldonian::bound::{delta_needed, predicted_bound, samples_needed, upper_bound, BoundParams};
use crate::seldonian::candidate::{select_candidate, Candidate, SeldonianConfig};

/// Largest safety set size considered when suggesting more data.
const MAX_SUGGESTED_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Certified,
    #[serde(rename = "NSF")]
    Nsf,
}

impl Status {
    /// Process exit code for scripts: 0 certified, 3 no solution found.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Certified => 0,
            Status::Nsf => 3,
        }
    }
}

/// Knob the user can turn to make a failing guidance certifiable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "knob", rename_all = "snake_case")]
pub enum Suggestion {
    /// Tolerance at which this model's bound would pass.
    RaiseEpsilon { to: f64 },
    /// Confidence level at which this model's bound would pass.
    RaiseDelta { to: f64 },
    /// Safety-set Z count that would pass at the observed mean and spread.
    EnlargeSafetySet { samples: usize },
    /// Safety seasons whose deviation exceeds the tolerance.
    ExcludeSeasons { seasons: Vec<String> },
    /// The model itself deviates too much on average; change data or architecture.
    ChangeModel,
}

/// Safety-test result for one guidance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceCheck {
    pub guidance: Guidance,
    /// Predicted bound on the candidate set at selection time.
    pub candidate_bound: f64,
    /// Upper confidence bound on the safety set.
    pub safety_bound: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// `epsilon - safety_bound`; negative when the guidance fails.
    pub margin: f64,
    pub samples: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub guidance: String,
    pub bound: f64,
    pub epsilon: f64,
    pub margin: f64,
    pub suggestions: Vec<Suggestion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub status: Status,
    /// Present only when certified.
    #[serde(skip)]
    pub model: Option<ForecastModel>,
    pub checks: Vec<GuidanceCheck>,
    pub feedback: Vec<Feedback>,
    pub candidate_loss: f64,
    pub candidate_epoch: usize,
    pub u_loss: f64,
    pub lambda: f64,
    /// How the penalty branch picks among several violated guidances.
    pub penalty_rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

impl RunOutcome {
    pub fn is_certified(&self) -> bool {
        self.status == Status::Certified
    }

    /// Largest safety bound over the guidances.
    pub fn safety_bound(&self) -> Option<f64> {
        self.checks.iter().map(|c| c.safety_bound).reduce(f64::max)
    }

    /// Largest candidate-time predicted bound over the guidances.
    pub fn candidate_bound(&self) -> Option<f64> {
        self.checks.iter().map(|c| c.candidate_bound).reduce(f64::max)
    }
}

fn suggestions(z: &[f64], labels: &[String], guidance: &Guidance, bound: f64) -> Vec<Suggestion> {
    let mut out = vec![Suggestion::RaiseEpsilon { to: bound }];
    if let Some(d) = delta_needed(z, guidance.epsilon).filter(|d| *d > guidance.delta && *d < 1.0) {
        out.push(Suggestion::RaiseDelta { to: d });
    }
    match samples_needed(z, guidance.epsilon, guidance.delta, MAX_SUGGESTED_SAMPLES) {
        Some(m) if m > z.len() => out.push(Suggestion::EnlargeSafetySet { samples: m }),
        Some(_) => {}
        None => out.push(Suggestion::ChangeModel),
    }
    let worst: Vec<String> = z
        .iter()
        .zip(labels)
        .filter(|(v, _)| **v > guidance.epsilon)
        .map(|(_, l)| l.clone())
        .collect();
    if !worst.is_empty() && worst.len() < z.len() {
        out.push(Suggestion::ExcludeSeasons { seasons: worst });
    }
    out
}

/// Held-out test of `candidate` on the safety set.
///
/// Certified iff every guidance's upper confidence bound on the safety set is
/// at most its tolerance; otherwise NSF with per-guidance feedback.
pub fn safety_test(
    candidate: &Candidate,
    split: &DataSplit,
    config: &SeldonianConfig,
    task: PredictionTask,
) -> Result<RunOutcome> {
    let pool = HistoricalPool::new(&split.training());
    let mut checks = Vec::with_capacity(config.guidances.len());
    let mut feedback = Vec::new();
    for (i, g) in config.guidances.iter().enumerate() {
        let samples = collect_z(&candidate.model, g, &split.safety, task, &pool)?;
        let z = z_values(&samples);
        let bound = upper_bound(&z, g.delta)?;
        let candidate_bound = match candidate.eval.predicted_bounds.get(i) {
            Some(b) => *b,
            None => {
                let cz = z_values(&collect_z(&candidate.model, g, &split.candidate, task, &pool)?);
                predicted_bound(&cz, BoundParams::new(g.delta, z.len(), config.inflation)?)?
            }
        };
        let passed = bound <= g.epsilon;
        if !passed {
            let labels: Vec<String> = samples
                .iter()
                .map(|s| format!("{} {}", s.provenance.regions.join("/"), s.provenance.year_label))
                .collect();
            feedback.push(Feedback {
                guidance: g.label(),
                bound,
                epsilon: g.epsilon,
                margin: g.epsilon - bound,
                suggestions: suggestions(&z, &labels, g, bound),
            });
        }
        checks.push(GuidanceCheck {
            guidance: g.clone(),
            candidate_bound,
            safety_bound: bound,
            epsilon: g.epsilon,
            delta: g.delta,
            margin: g.epsilon - bound,
            samples: z.len(),
            passed,
        });
    }
    let status = if feedback.is_empty() {
        Status::Certified
    } else {
        Status::Nsf
    };
    log::debug!("safety test: {status:?}, bounds {:?}", checks.iter().map(|c| c.safety_bound).collect::<Vec<_>>());
    Ok(RunOutcome {
        status,
        model: (status == Status::Certified).then(|| candidate.model.clone()),
        checks,
        feedback,
        candidate_loss: candidate.loss,
        candidate_epoch: candidate.epoch,
        u_loss: candidate.u_loss,
        lambda: config.lambda,
        penalty_rule: "max_violating_bound".into(),
        checkpoint: None,
    })
}

/// Candidate selection followed by the safety test.
pub fn run_seldonian(split: &DataSplit, config: &SeldonianConfig, task: PredictionTask) -> Result<(Candidate, RunOutcome)> {
    let candidate = select_candidate(split, config, task)?;
    let outcome = safety_test(&candidate, split, config, task)?;
    Ok((candidate, outcome))
}
