use std::path::Path;

use guided_forecast::data::{SplitMembership, SplitParams};
use guided_forecast::guidance::Guidance;
use guided_forecast::modes::WeekResult;
use guided_forecast::seldonian::SeldonianConfig;
use guided_forecast::{Error, Result};
use serde::{Deserialize, Serialize};

/// Contents of `--config`: the training configuration plus split and search settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub seldonian: SeldonianConfig,
    pub split: SplitParams,
    pub epsilon_grid: Option<Vec<f64>>,
    pub performance_requirement: Option<f64>,
}

impl RunConfig {
    pub fn load(source: Option<&str>) -> Result<Self> {
        match source {
            None => Ok(Self::default()),
            Some(s) => Ok(serde_json::from_str(&inline_or_file(s)?)?),
        }
    }
}

/// Returns `s` itself when it looks like JSON, otherwise the contents of the file it names.
pub fn inline_or_file(s: &str) -> Result<String> {
    let t = s.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        Ok(s.to_string())
    } else {
        std::fs::read_to_string(Path::new(s)).map_err(|e| Error::InvalidArgument(format!("cannot read {s}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub params: SplitParams,
    pub membership: SplitMembership,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoSettings {
    pub guidance: Guidance,
    pub epsilon_grid: Vec<f64>,
    pub performance_requirement: f64,
}

/// Modelling choices that the run depends on, echoed for later audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub penalty_rule: String,
    pub deviation_mean: String,
    pub regional_history: String,
    /// Regions kept from the data; empty means all.
    pub region_filter: Vec<String>,
    pub week_seed_rule: String,
    pub baseline: String,
}

impl RunMetadata {
    pub fn new(region_filter: Vec<String>) -> Self {
        Self {
            penalty_rule: "max_violating_bound".into(),
            deviation_mean: "per_guidance_then_across_guidances".into(),
            regional_history: "region_specific_history_shared_parameters".into(),
            region_filter,
            week_seed_rule: "splitmix64(seed, week)".into(),
            baseline: "unconstrained; same split, week seed, architecture and epochs".into(),
        }
    }
}

/// Output of `direct` and `auto`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub seed: u64,
    pub weeks: String,
    pub split: SplitInfo,
    pub config: SeldonianConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto: Option<AutoSettings>,
    pub metadata: RunMetadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_dir: Option<String>,
    pub results: Vec<WeekResult>,
}

pub fn guided_checkpoint(week: u32) -> String {
    format!("week{week:02}_guided.ckpt")
}

pub fn baseline_checkpoint(week: u32) -> String {
    format!("week{week:02}_baseline.ckpt")
}
