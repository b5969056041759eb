//! Test-set evaluation of guided against unconstrained models, scoring of
//! externally supplied forecasts, and bit-stable report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{index_of_epi_week, PredictionTask, SeasonSet};
use crate::error::{Error, Result};
use crate::forecaster::{forward, ForecastModel, HistoricalPool};
use crate::guidance::{collect_z, failure_rate, Guidance, GuidanceKind};
use crate::seldonian::{RunOutcome, Status};

/// Root mean squared next-week error of `model` over `data`, on the raw scale.
pub fn rmse(model: &ForecastModel, data: &SeasonSet, task: PredictionTask, pool: &HistoricalPool) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("RMSE over an empty season set".into()));
    }
    let mut ss = 0.0;
    for season in data {
        let p = forward(model, season, task, pool)?;
        ss += (p.value - season.values()[task.week_index()]).powi(2);
    }
    Ok((ss / data.len() as f64).sqrt())
}

/// RMSE of forecasting next week as the last observed value.
pub fn persistence_rmse(data: &SeasonSet, task: PredictionTask) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("RMSE over an empty season set".into()));
    }
    let w = task.week_index();
    let mut ss = 0.0;
    for season in data {
        task.check(season)?;
        ss += (season.values()[w] - season.values()[w - 1]).powi(2);
    }
    Ok((ss / data.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekRow {
    pub week: u32,
    pub failure_rate_guided: Option<f64>,
    pub failure_rate_unconstrained: Option<f64>,
    pub delta: f64,
    pub rmse_guided: Option<f64>,
    pub rmse_unconstrained: Option<f64>,
    /// `Certified`, `NSF` or `error`.
    pub status: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Mean over certified weeks of guided RMSE over unconstrained RMSE.
    pub mean_rmse_ratio: Option<f64>,
    /// Certified weeks whose guided failure rate exceeds delta.
    pub weeks_violating_delta: usize,
    pub weeks_total: usize,
    pub weeks_certified: usize,
    pub weeks_nsf: usize,
    pub weeks_error: usize,
    /// Certified weeks where the unconstrained failure rate exceeds the guided one.
    pub weeks_baseline_fails_more: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_week: Vec<WeekRow>,
    pub summary: Summary,
}

/// One week to evaluate: the guided run (absent when the week errored) and
/// the unconstrained model trained for the same week.
#[derive(Debug, Clone, Copy)]
pub struct WeekRun<'a> {
    pub week: u32,
    pub outcome: Option<&'a RunOutcome>,
    pub model: Option<&'a ForecastModel>,
}

#[derive(Debug, Clone, Copy)]
pub struct BaselineRun<'a> {
    pub week: u32,
    pub model: Option<&'a ForecastModel>,
}

/// Guidance actually certified for a week: the run's own tolerance when it
/// checked one of the same kind, `guidance` otherwise.
fn week_guidance(guidance: &Guidance, outcome: Option<&RunOutcome>) -> Guidance {
    outcome
        .and_then(|o| {
            o.checks
                .iter()
                .find(|c| c.guidance.kind == guidance.kind && c.guidance.regions == guidance.regions)
        })
        .map(|c| c.guidance.clone())
        .unwrap_or_else(|| guidance.clone())
}

/// Failure rates and RMSE on the test set for each week, guided versus unconstrained.
///
/// NSF and errored weeks appear as rows without guided metrics and are left
/// out of the failure-rate summary.
pub fn evaluate(
    runs: &[WeekRun<'_>],
    baselines: &[BaselineRun<'_>],
    test: &SeasonSet,
    guidance: &Guidance,
    pool: &HistoricalPool,
) -> Result<EvalReport> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("no weekly outcomes to evaluate".into()));
    }
    if runs.len() != baselines.len() || runs.iter().zip(baselines).any(|(r, b)| r.week != b.week) {
        return Err(Error::Alignment(format!(
            "guided weeks {:?} do not match baseline weeks {:?}",
            runs.iter().map(|r| r.week).collect::<Vec<_>>(),
            baselines.iter().map(|b| b.week).collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::with_capacity(runs.len());
    let mut summary = Summary {
        weeks_total: runs.len(),
        ..Summary::default()
    };
    let mut ratios = Vec::new();
    for (run, base) in runs.iter().zip(baselines) {
        let g = week_guidance(guidance, run.outcome);
        let status = match run.outcome.map(|o| o.status) {
            Some(Status::Certified) => "Certified",
            Some(Status::Nsf) => "NSF",
            None => "error",
        };
        let task = PredictionTask::for_epi_week(run.week);
        let metrics = |model: Option<&ForecastModel>| -> Result<(Option<f64>, Option<f64>)> {
            match (model, &task) {
                (Some(m), Ok(task)) => {
                    let z = collect_z(m, &g, test, *task, pool)?;
                    Ok((Some(failure_rate(&z, g.epsilon)?), Some(rmse(m, test, *task, pool)?)))
                }
                _ => Ok((None, None)),
            }
        };
        let (f_base, r_base) = metrics(base.model)?;
        let (f_guided, r_guided) = if status == "Certified" {
            metrics(run.model)?
        } else {
            (None, None)
        };
        match status {
            "Certified" => summary.weeks_certified += 1,
            "NSF" => summary.weeks_nsf += 1,
            _ => summary.weeks_error += 1,
        }
        if let Some(f) = f_guided {
            if f > g.delta {
                summary.weeks_violating_delta += 1;
            }
            if f_base.is_some_and(|b| b > f) {
                summary.weeks_baseline_fails_more += 1;
            }
        }
        if let (Some(a), Some(b)) = (r_guided, r_base) {
            if b > 0.0 {
                ratios.push(a / b);
            }
        }
        rows.push(WeekRow {
            week: run.week,
            failure_rate_guided: f_guided,
            failure_rate_unconstrained: f_base,
            delta: g.delta,
            rmse_guided: r_guided,
            rmse_unconstrained: r_base,
            status: status.to_string(),
        });
    }
    summary.mean_rmse_ratio = (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
    Ok(EvalReport {
        per_week: rows,
        summary,
    })
}

/// One externally produced forecast: a team's value for one region and epidemiological week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalPoint {
    pub region: String,
    /// Calendar year of the forecast week.
    pub year: i32,
    pub week: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalForecast {
    pub team_id: String,
    pub predictions: Vec<ExternalPoint>,
}

pub const EXTERNAL_HEADER: [&str; 5] = ["team", "region", "year", "week", "value"];

#[derive(Debug, Deserialize)]
struct ExternalRow {
    team: String,
    region: String,
    year: i32,
    week: u32,
    value: f64,
}

/// Reads `team,region,year,week,value` rows, grouped by team in name order.
pub fn read_external<R: Read>(reader: R) -> Result<Vec<ExternalForecast>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    if header.iter().ne(EXTERNAL_HEADER) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header {}", EXTERNAL_HEADER.join(",")),
        });
    }
    let mut teams: BTreeMap<String, Vec<ExternalPoint>> = BTreeMap::new();
    for row in rdr.deserialize::<ExternalRow>() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        if !row.value.is_finite() {
            return Err(Error::NonFinite(format!("forecast of team {} is {}", row.team, row.value)));
        }
        teams.entry(row.team).or_default().push(ExternalPoint {
            region: row.region,
            year: row.year,
            week: row.week,
            value: row.value,
        });
    }
    Ok(teams
        .into_iter()
        .map(|(team_id, predictions)| ExternalForecast { team_id, predictions })
        .collect())
}

pub fn load_external(path: impl AsRef<Path>) -> Result<Vec<ExternalForecast>> {
    read_external(std::fs::File::open(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamScore {
    pub team_id: String,
    pub rmse: Option<f64>,
    pub z_value: Option<f64>,
    /// Seasons scored.
    pub scored: usize,
    /// True when the team has no forecast for the evaluation week of some season.
    pub gap: bool,
}

/// RMSE and guidance deviation of each team's forecasts for epidemiological week `week`.
///
/// Every season of `truth` that contains the week is an evaluation target.
/// Smoothness scores the mean `|forecast - last observed|`; regional equity
/// scores `|RMSE(R1) - RMSE(R2)|`.
pub fn score_external(
    forecasts: &[ExternalForecast],
    truth: &SeasonSet,
    guidance: &Guidance,
    week: u32,
) -> Result<Vec<TeamScore>> {
    let idx = index_of_epi_week(week, false)
        .filter(|&i| i >= 1)
        .ok_or_else(|| Error::InvalidArgument(format!("week {week} has no previous in-season week")))?;
    let targets: Vec<_> = truth.iter().filter(|s| idx < s.len()).collect();
    if targets.is_empty() {
        return Err(Error::InvalidArgument("no truth season covers the evaluation week".into()));
    }
    forecasts
        .iter()
        .map(|team| {
            let mut hits = Vec::new();
            for season in &targets {
                let year = season.calendar_year(idx).expect("index inside season");
                let p = team
                    .predictions
                    .iter()
                    .find(|p| p.region == season.region() && p.year == year && p.week == week);
                if let Some(p) = p {
                    hits.push((season.region(), p.value, season.values()[idx], season.values()[idx - 1]));
                }
            }
            let gap = hits.len() < targets.len();
            if hits.is_empty() {
                return Ok(TeamScore {
                    team_id: team.team_id.clone(),
                    rmse: None,
                    z_value: None,
                    scored: 0,
                    gap,
                });
            }
            let rmse_of = |rows: &[&(&str, f64, f64, f64)]| {
                (rows.iter().map(|r| (r.1 - r.2).powi(2)).sum::<f64>() / rows.len() as f64).sqrt()
            };
            let all: Vec<_> = hits.iter().collect();
            let z_value = match (guidance.kind, &guidance.regions) {
                (GuidanceKind::Smoothness, _) => {
                    Some(hits.iter().map(|h| (h.1 - h.3).abs()).sum::<f64>() / hits.len() as f64)
                }
                (GuidanceKind::RegionalEquity, Some((a, b))) => {
                    let ra: Vec<_> = hits.iter().filter(|h| h.0 == a).collect();
                    let rb: Vec<_> = hits.iter().filter(|h| h.0 == b).collect();
                    (!ra.is_empty() && !rb.is_empty()).then(|| (rmse_of(&ra) - rmse_of(&rb)).abs())
                }
                (GuidanceKind::RegionalEquity, None) => None,
            };
            Ok(TeamScore {
                team_id: team.team_id.clone(),
                rmse: Some(rmse_of(&all)),
                z_value,
                scored: hits.len(),
                gap,
            })
        })
        .collect()
}

/// JSON with object keys in sorted order and every non-integer number printed with six decimals.
pub fn to_stable_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, value: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                write!(out, "{i}").unwrap();
            } else if let Some(u) = n.as_u64() {
                write!(out, "{u}").unwrap();
            } else {
                let f = n.as_f64().unwrap_or(0.0);
                // avoid "-0.000000"
                let s = format!("{f:.6}");
                out.push_str(if s == "-0.000000" { "0.000000" } else { &s });
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(out, item, indent + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).expect("string serializes"));
                out.push_str(": ");
                write_value(out, &map[*k], indent + 1);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Serializes any value through [`to_stable_json`].
pub fn stable_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(to_stable_json(&serde_json::to_value(value)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidArgument(format!("unknown report format '{other}'"))),
        }
    }
}

pub const REPORT_COLUMNS: [&str; 7] = [
    "week",
    "failure_rate_guided",
    "failure_rate_unconstrained",
    "delta",
    "rmse_guided",
    "rmse_unconstrained",
    "status",
];

fn fixed(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

pub fn report_csv(report: &EvalReport) -> String {
    let mut out = REPORT_COLUMNS.join(",");
    out.push('\n');
    for r in &report.per_week {
        writeln!(
            out,
            "{},{},{},{:.6},{},{},{}",
            r.week,
            fixed(r.failure_rate_guided),
            fixed(r.failure_rate_unconstrained),
            r.delta,
            fixed(r.rmse_guided),
            fixed(r.rmse_unconstrained),
            r.status
        )
        .unwrap();
    }
    out
}

pub fn emit_report(report: &EvalReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Json => stable_json(report)?,
        ReportFormat::Csv => report_csv(report),
    };
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Season, SynthConfig};
    use crate::forecaster::{Arch, ForecastModel};
    use crate::seldonian::{GuidanceCheck, Status};

    fn constant_model(c: f64) -> ForecastModel {
        let arch = Arch::new(2, 1, 2).unwrap();
        let mut theta = vec![0.0; arch.param_count()];
        theta[arch.layout().b_out] = c;
        ForecastModel::new(arch, theta, 1.0).unwrap()
    }

    fn outcome(status: Status, guidance: &Guidance) -> RunOutcome {
        RunOutcome {
            status,
            model: None,
            checks: vec![GuidanceCheck {
                guidance: guidance.clone(),
                candidate_bound: 0.0,
                safety_bound: 0.0,
                epsilon: guidance.epsilon,
                delta: guidance.delta,
                margin: guidance.epsilon,
                samples: 2,
                passed: status == Status::Certified,
            }],
            feedback: Vec::new(),
            candidate_loss: 0.0,
            candidate_epoch: 0,
            u_loss: 1.0,
            lambda: 1.0,
            penalty_rule: "max_violating_bound".into(),
            checkpoint: None,
        }
    }

    fn flat_test() -> SeasonSet {
        // five seasons, last observed value at week 45 (index 5) = 1.0,
        // so Z = |c - 1| for a constant model c
        SeasonSet::new(
            (0..5)
                .map(|i| {
                    let mut v = vec![1.0; 30];
                    v[6] = 1.0 + 0.1 * i as f64;
                    Season::new("nat", 2000 + i, v).unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn failure_rate_hand_count() {
        let test = flat_test();
        let pool = HistoricalPool::new(&SynthConfig { n: 3, ..Default::default() }.generate().unwrap());
        let g = Guidance::smoothness(0.25, 0.2).unwrap();
        // constant 1.3 -> Z = 0.3 > 0.25 on all five; constant 1.2 -> Z = 0.2 on all five
        let guided = constant_model(1.2);
        let base = constant_model(1.3);
        let o = outcome(Status::Certified, &g);
        let report = evaluate(
            &[WeekRun { week: 46, outcome: Some(&o), model: Some(&guided) }],
            &[BaselineRun { week: 46, model: Some(&base) }],
            &test,
            &g,
            &pool,
        )
        .unwrap();
        let row = &report.per_week[0];
        assert_eq!(row.failure_rate_guided, Some(0.0));
        assert_eq!(row.failure_rate_unconstrained, Some(1.0));
        // targets 1.0..1.4 against 1.2
        let expected = ((0.04 + 0.01 + 0.0 + 0.01 + 0.04) / 5.0f64).sqrt();
        assert!((row.rmse_guided.unwrap() - expected).abs() < 1e-12);
        assert_eq!(report.summary.weeks_violating_delta, 0);
        assert_eq!(report.summary.weeks_baseline_fails_more, 1);
    }

    #[test]
    fn nsf_and_alignment() {
        let test = flat_test();
        let pool = HistoricalPool::new(&SynthConfig { n: 3, ..Default::default() }.generate().unwrap());
        let g = Guidance::smoothness(0.25, 0.2).unwrap();
        let m = constant_model(1.0);
        let nsf = outcome(Status::Nsf, &g);
        let report = evaluate(
            &[
                WeekRun { week: 46, outcome: Some(&nsf), model: None },
                WeekRun { week: 47, outcome: None, model: None },
            ],
            &[BaselineRun { week: 46, model: Some(&m) }, BaselineRun { week: 47, model: None }],
            &test,
            &g,
            &pool,
        )
        .unwrap();
        assert_eq!(report.per_week[0].status, "NSF");
        assert_eq!(report.per_week[0].failure_rate_guided, None);
        assert!(report.per_week[0].failure_rate_unconstrained.is_some());
        assert_eq!(report.per_week[1].status, "error");
        assert_eq!(report.summary.weeks_nsf, 1);
        assert_eq!(report.summary.weeks_error, 1);
        assert_eq!(report.summary.weeks_total, 2);
        assert!(matches!(
            evaluate(
                &[WeekRun { week: 46, outcome: Some(&nsf), model: None }],
                &[BaselineRun { week: 47, model: Some(&m) }],
                &test,
                &g,
                &pool
            ),
            Err(Error::Alignment(_))
        ));
        assert!(evaluate(&[], &[], &test, &g, &pool).is_err());
    }

    #[test]
    fn persistence_behaviour_never_fails() {
        // on flat seasons a constant forecast equals the last observed value
        let test = SeasonSet::new((0..4).map(|i| Season::new("nat", 2000 + i, vec![0.7; 30]).unwrap()).collect()).unwrap();
        let pool = HistoricalPool::new(&SynthConfig { n: 3, ..Default::default() }.generate().unwrap());
        let g = Guidance::smoothness(0.0, 0.1).unwrap();
        let m = constant_model(0.7);
        let o = outcome(Status::Certified, &g);
        let weeks: Vec<u32> = vec![41, 50, 3, 17];
        let runs: Vec<_> = weeks.iter().map(|&w| WeekRun { week: w, outcome: Some(&o), model: Some(&m) }).collect();
        let bases: Vec<_> = weeks.iter().map(|&w| BaselineRun { week: w, model: Some(&m) }).collect();
        let report = evaluate(&runs, &bases, &test, &g, &pool).unwrap();
        assert!(report.per_week.iter().all(|r| r.failure_rate_guided == Some(0.0)));
    }

    #[test]
    fn persistence_rmse_is_the_jump() {
        let test = flat_test();
        let r = persistence_rmse(&test, PredictionTask::new(6).unwrap()).unwrap();
        let expected = ((0.0 + 0.01 + 0.04 + 0.09 + 0.16) / 5.0f64).sqrt();
        assert!((r - expected).abs() < 1e-12);
    }

    fn truth() -> SeasonSet {
        // week 1 of 2016 is index 13; week 52 of 2015 is index 12
        let mut a = vec![1.0; 30];
        a[12] = 2.0;
        a[13] = 2.5;
        let mut b = vec![1.0; 30];
        b[12] = 3.0;
        b[13] = 2.0;
        SeasonSet::new(vec![Season::new("r1", 2015, a).unwrap(), Season::new("r2", 2015, b).unwrap()]).unwrap()
    }

    fn team(id: &str, v1: f64, v2: Option<f64>) -> ExternalForecast {
        let mut predictions = vec![ExternalPoint { region: "r1".into(), year: 2016, week: 1, value: v1 }];
        if let Some(v2) = v2 {
            predictions.push(ExternalPoint { region: "r2".into(), year: 2016, week: 1, value: v2 });
        }
        ExternalForecast { team_id: id.into(), predictions }
    }

    #[test]
    fn external_scores() {
        let g = Guidance::smoothness(0.5, 0.1).unwrap();
        let teams = vec![
            team("exact", 2.5, Some(2.0)),
            team("persist", 2.0, Some(3.0)),
            team("high", 3.0, Some(3.5)),
            team("partial", 2.5, None),
        ];
        let s = score_external(&teams, &truth(), &g, 1).unwrap();
        assert_eq!(s[0].rmse, Some(0.0));
        assert_eq!(s[1].z_value, Some(0.0));
        // persistence errors 0.5 and 1.0
        assert!((s[1].rmse.unwrap() - ((0.25 + 1.0) / 2.0f64).sqrt()).abs() < 1e-12);
        // high: errors 0.5 and 1.5
        assert!((s[2].rmse.unwrap() - ((0.25 + 2.25) / 2.0f64).sqrt()).abs() < 1e-12);
        assert!(s[0].rmse < s[1].rmse && s[1].rmse < s[2].rmse);
        assert!(s[3].gap && !s[0].gap);
        assert_eq!(s[3].scored, 1);

        let eq = Guidance::regional_equity(0.5, 0.1, "r1", "r2").unwrap();
        let s = score_external(&teams, &truth(), &eq, 1).unwrap();
        assert!((s[2].z_value.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(s[3].z_value, None);
    }

    #[test]
    fn external_csv() {
        let text = "team,region,year,week,value\nB,nat,2016,1,2.0\nA,nat,2016,1,1.5\nA,nat,2016,2,1.7\n";
        let f = read_external(text.as_bytes()).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[0].team_id, "A");
        assert_eq!(f[0].predictions.len(), 2);
        assert!(read_external("team,region,week\n".as_bytes()).is_err());
        assert!(read_external("team,region,year,week,value\nA,nat,x,1,2\n".as_bytes()).is_err());
    }

    fn sample_report() -> EvalReport {
        EvalReport {
            per_week: vec![
                WeekRow {
                    week: 41,
                    failure_rate_guided: Some(0.25),
                    failure_rate_unconstrained: Some(0.5),
                    delta: 0.2,
                    rmse_guided: Some(0.123_456_7),
                    rmse_unconstrained: Some(0.2),
                    status: "Certified".into(),
                },
                WeekRow {
                    week: 42,
                    failure_rate_guided: None,
                    failure_rate_unconstrained: Some(0.0),
                    delta: 0.2,
                    rmse_guided: None,
                    rmse_unconstrained: Some(0.3),
                    status: "NSF".into(),
                },
            ],
            summary: Summary {
                mean_rmse_ratio: Some(0.617_283_5),
                weeks_violating_delta: 1,
                weeks_total: 2,
                weeks_certified: 1,
                weeks_nsf: 1,
                weeks_error: 0,
                weeks_baseline_fails_more: 1,
            },
        }
    }

    const GOLDEN_CSV: &str = "week,failure_rate_guided,failure_rate_unconstrained,delta,rmse_guided,rmse_unconstrained,status
41,0.250000,0.500000,0.200000,0.123457,0.200000,Certified
42,,0.000000,0.200000,,0.300000,NSF
";

    #[test]
    fn golden_files() {
        assert_eq!(report_csv(&sample_report()), GOLDEN_CSV);
        let json = stable_json(&sample_report()).unwrap();
        assert!(json.starts_with("{\n  \"per_week\": [\n    {\n      \"delta\": 0.200000,"));
        assert!(json.contains("\"rmse_guided\": 0.123457"));
        assert!(json.contains("\"rmse_guided\": null"));
        assert!(json.contains("\"weeks_total\": 2"));
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let report = sample_report();
        emit_report(&report, &path, ReportFormat::Json).unwrap();
        let back = read_report(&path).unwrap();
        assert_eq!(back.per_week.len(), 2);
        assert_eq!(back.summary.weeks_total, 2);
        assert!((back.per_week[0].rmse_guided.unwrap() - 0.123457).abs() < 1e-12);
        assert_eq!(back.per_week[1].status, "NSF");

        let empty = EvalReport::default();
        emit_report(&empty, &path, ReportFormat::Json).unwrap();
        assert_eq!(read_report(&path).unwrap(), empty);
        emit_report(&empty, dir.path().join("r.csv"), ReportFormat::Csv).unwrap();
    }

    #[test]
    fn io_errors_surface() {
        let r = emit_report(&EvalReport::default(), "/nonexistent-dir/x.json", ReportFormat::Json);
        assert!(matches!(r, Err(Error::Io(_))));
    }
}
