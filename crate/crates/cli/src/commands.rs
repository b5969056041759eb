use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use guided_forecast::data::{emit_wili, ingest_wili, SeasonKey, SeasonSet, SplitMembership, SynthConfig};
use guided_forecast::eval::{
    emit_report, evaluate, load_external, report_csv, score_external, stable_json, BaselineRun, ReportFormat, WeekRun,
};
use guided_forecast::forecaster::{load_model, save_model, ForecastModel, HistoricalPool};
use guided_forecast::guidance::{parse_guidances, Guidance};
use guided_forecast::modes::{
    parse_week_range, weekly_sweep, AutoGuidanceSpec, SweepMode, WeekOutcome, WeekResult, DEFAULT_EPSILON_GRID,
};
use guided_forecast::seldonian::Status;
use guided_forecast::{Error, Result};
use log::info;

use crate::report::{
    baseline_checkpoint, guided_checkpoint, inline_or_file, AutoSettings, RunConfig, RunMetadata, RunReport, SplitInfo,
};
use crate::{AutoArgs, Cli, Command, EvaluateArgs, IngestArgs, RunArgs, ScoreArgs, SynthArgs};

pub fn run(cli: &Cli) -> Result<u8> {
    let config = RunConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Synth(a) => synth(a, cli.seed),
        Command::Direct(a) => direct(a, &config, cli.seed),
        Command::Auto(a) => auto(a, &config, cli.seed),
        Command::Evaluate(a) => evaluate_run(a),
        Command::ScoreExternal(a) => score(a),
    }
}

fn write_output(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn region_filter(regions: &[String]) -> Option<BTreeSet<String>> {
    (!regions.is_empty()).then(|| regions.iter().cloned().collect())
}

fn ingest(a: &IngestArgs) -> Result<u8> {
    let data = ingest_wili(&a.data, region_filter(&a.regions).as_ref())?;
    let mut per_region: BTreeMap<String, usize> = BTreeMap::new();
    for s in &data {
        *per_region.entry(s.region().to_string()).or_default() += 1;
    }
    let years = data.year_labels();
    let summary = serde_json::json!({
        "seasons": data.len(),
        "regions": per_region,
        "first_season": years.iter().next(),
        "last_season": years.iter().next_back(),
    });
    print!("{}", stable_json(&summary)?);
    if let Some(out) = &a.out {
        emit_wili(&data, out)?;
    }
    Ok(0)
}

fn synth(a: &SynthArgs, seed: u64) -> Result<u8> {
    let config = SynthConfig {
        n: a.n,
        dip_week: a.dip_week,
        dip_depth: a.dip_depth,
        noise_sd: a.noise,
        seed,
        amplitude_jitter: a.amplitude_jitter,
        center_jitter: a.center_jitter,
        ..SynthConfig::default()
    };
    let data = if a.regions.is_empty() {
        config.generate()?
    } else {
        let pairs = a
            .regions
            .iter()
            .map(|r| {
                let (name, noise) = r
                    .split_once(':')
                    .ok_or_else(|| Error::InvalidArgument(format!("region '{r}' is not name:noise")))?;
                let noise: f64 = noise
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad noise level in '{r}'")))?;
                Ok((name.to_string(), noise))
            })
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<(&str, f64)> = pairs.iter().map(|(n, v)| (n.as_str(), *v)).collect();
        config.generate_regions(&refs)?
    };
    emit_wili(&data, &a.out)?;
    eprintln!("wrote {} seasons to {}", data.len(), a.out.display());
    Ok(0)
}

fn run_guidances(a: &RunArgs, config: &RunConfig) -> Result<Vec<Guidance>> {
    let mut gs = match &a.guidance {
        Some(g) => parse_guidances(&inline_or_file(g)?)?,
        None => config.seldonian.guidances.clone(),
    };
    if gs.is_empty() {
        return Err(Error::InvalidArgument("no guidance given (--guidance or config)".into()));
    }
    if let Some(d) = a.delta {
        gs = gs.iter().map(|g| g.with_delta(d)).collect();
    }
    gs.iter().try_for_each(Guidance::validate)?;
    Ok(gs)
}

fn set_checkpoint(r: &mut WeekResult, path: String) {
    match &mut r.result {
        WeekOutcome::Direct { outcome } => outcome.checkpoint = Some(path),
        WeekOutcome::Auto { outcome } => outcome.outcome.checkpoint = Some(path),
        WeekOutcome::Error { .. } => {}
    }
}

fn save_checkpoints(results: &mut [WeekResult], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for r in results.iter_mut() {
        if let Some(m) = r.model().cloned() {
            let path = dir.join(guided_checkpoint(r.week));
            save_model(&m, &path)?;
            set_checkpoint(r, path.display().to_string());
        }
        if let Some(b) = &r.baseline {
            save_model(b, dir.join(baseline_checkpoint(r.week)))?;
        }
    }
    Ok(())
}

/// 1 when every week failed, 3 when any week ended without a solution, else 0.
fn exit_code(results: &[WeekResult]) -> u8 {
    let statuses: Vec<Status> = results.iter().filter_map(WeekResult::status).collect();
    if statuses.is_empty() {
        eprintln!("error: every week failed");
        1
    } else if statuses.contains(&Status::Nsf) {
        3
    } else {
        0
    }
}

fn sweep(a: &RunArgs, config: &RunConfig, seed: u64, mode: SweepMode, command: &str) -> Result<u8> {
    let weeks = parse_week_range(&a.weeks)?;
    let data = ingest_wili(&a.data, region_filter(&a.regions).as_ref())?;
    let (split, mut results) = weekly_sweep(&data, &mode, &weeks, config.split, seed)?;
    if let Some(dir) = &a.save_model {
        save_checkpoints(&mut results, dir)?;
    }
    let (cfg, auto) = match &mode {
        SweepMode::Direct(cfg) => (cfg.clone(), None),
        SweepMode::Auto(spec, cfg) => (
            cfg.clone(),
            Some(AutoSettings {
                guidance: spec.guidance.clone(),
                epsilon_grid: spec.epsilon_grid.clone(),
                performance_requirement: spec.performance_requirement,
            }),
        ),
    };
    let certified = results.iter().filter(|r| r.status() == Some(Status::Certified)).count();
    let nsf = results.iter().filter(|r| r.status() == Some(Status::Nsf)).count();
    eprintln!(
        "{command}: {certified} certified, {nsf} NSF, {} error of {} weeks",
        results.len() - certified - nsf,
        results.len()
    );
    let code = exit_code(&results);
    let report = RunReport {
        command: command.into(),
        seed,
        weeks: a.weeks.clone(),
        split: SplitInfo {
            params: config.split,
            membership: SplitMembership::from(&split),
        },
        config: cfg,
        auto,
        metadata: RunMetadata::new(a.regions.clone()),
        model_dir: a.save_model.as_ref().map(|d| d.display().to_string()),
        results,
    };
    write_output(&stable_json(&report)?, a.report.as_deref())?;
    Ok(code)
}

fn direct(a: &RunArgs, config: &RunConfig, seed: u64) -> Result<u8> {
    let mut cfg = config.seldonian.clone();
    cfg.guidances = run_guidances(a, config)?;
    cfg.validate()?;
    info!("direct: {} guidances, weeks {}", cfg.guidances.len(), a.weeks);
    sweep(a, config, seed, SweepMode::Direct(cfg), "direct")
}

fn auto(a: &AutoArgs, config: &RunConfig, seed: u64) -> Result<u8> {
    let gs = run_guidances(&a.run, config)?;
    if gs.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "auto mode searches one guidance, got {}",
            gs.len()
        )));
    }
    let mut spec = AutoGuidanceSpec::new(gs[0].clone());
    spec.epsilon_grid = if !a.epsilon_grid.is_empty() {
        a.epsilon_grid.clone()
    } else {
        config.epsilon_grid.clone().unwrap_or_else(|| DEFAULT_EPSILON_GRID.to_vec())
    };
    spec.performance_requirement = a.performance.or(config.performance_requirement).unwrap_or(1.0);
    spec.validate()?;
    let cfg = guided_forecast::seldonian::SeldonianConfig {
        guidances: Vec::new(),
        ..config.seldonian.clone()
    };
    cfg.validate()?;
    sweep(&a.run, config, seed, SweepMode::Auto(spec, cfg), "auto")
}

fn partition(data: &SeasonSet, keys: &[SeasonKey]) -> Result<SeasonSet> {
    let wanted: BTreeSet<&SeasonKey> = keys.iter().collect();
    let set = data.filter(|s| wanted.contains(&s.key()));
    if set.len() != keys.len() {
        let have: BTreeSet<SeasonKey> = set.keys().into_iter().collect();
        let missing: Vec<String> = keys.iter().filter(|k| !have.contains(*k)).map(|k| k.to_string()).collect();
        return Err(Error::Validation(format!(
            "seasons from the run report are missing in the data: {}",
            missing.join(", ")
        )));
    }
    Ok(set)
}

fn load_checked(path: &Path, run: &RunReport) -> Result<Option<ForecastModel>> {
    if !path.exists() {
        return Ok(None);
    }
    let m = load_model(path)?;
    if m.arch() != run.config.arch {
        return Err(Error::Validation(format!(
            "{} has architecture {:?}, the run used {:?}",
            path.display(),
            m.arch(),
            run.config.arch
        )));
    }
    Ok(Some(m))
}

fn evaluate_run(a: &EvaluateArgs) -> Result<u8> {
    let format: ReportFormat = a.format.parse()?;
    let run: RunReport = serde_json::from_str(&std::fs::read_to_string(&a.run)?)?;
    let data = ingest_wili(&a.data, region_filter(&run.metadata.region_filter).as_ref())?;
    let m = &run.split.membership;
    let test = partition(&data, &m.test)?;
    let training = partition(&data, &m.candidate)?.union(&partition(&data, &m.safety)?)?;
    let pool = HistoricalPool::new(&training);

    let dir: PathBuf = match (&a.load_model, &run.model_dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => {
            return Err(Error::InvalidArgument(
                "no checkpoints: pass --load-model or rerun with --save-model".into(),
            ))
        }
    };
    let guidance = match &run.auto {
        Some(auto) => auto.guidance.clone(),
        None => run
            .config
            .guidances
            .first()
            .cloned()
            .ok_or_else(|| Error::Validation("run report has no guidance".into()))?,
    };

    let mut guided = Vec::with_capacity(run.results.len());
    let mut baselines = Vec::with_capacity(run.results.len());
    for r in &run.results {
        let g = if r.status() == Some(Status::Certified) {
            load_checked(&dir.join(guided_checkpoint(r.week)), &run)?
        } else {
            None
        };
        guided.push(g);
        baselines.push(load_checked(&dir.join(baseline_checkpoint(r.week)), &run)?);
    }
    let runs: Vec<WeekRun> = run
        .results
        .iter()
        .zip(&guided)
        .map(|(r, g)| WeekRun {
            week: r.week,
            outcome: r.run_outcome(),
            model: g.as_ref(),
        })
        .collect();
    let base_runs: Vec<BaselineRun> = run
        .results
        .iter()
        .zip(&baselines)
        .map(|(r, b)| BaselineRun {
            week: r.week,
            model: b.as_ref(),
        })
        .collect();
    let report = evaluate(&runs, &base_runs, &test, &guidance, &pool)?;
    match &a.report {
        Some(p) => emit_report(&report, p, format)?,
        None => match format {
            ReportFormat::Json => print!("{}", stable_json(&report)?),
            ReportFormat::Csv => print!("{}", report_csv(&report)),
        },
    }
    Ok(0)
}

fn score(a: &ScoreArgs) -> Result<u8> {
    let forecasts = load_external(&a.forecasts)?;
    let truth = ingest_wili(&a.data, None)?;
    let guidance = parse_guidances(&inline_or_file(&a.guidance)?)?
        .into_iter()
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty guidance list".into()))?;
    let scores = score_external(&forecasts, &truth, &guidance, a.week)?;
    write_output(&stable_json(&scores)?, a.report.as_deref())?;
    Ok(0)
}
