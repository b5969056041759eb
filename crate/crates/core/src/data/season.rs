use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First epidemiological week of a season.
pub const FIRST_WEEK: u32 = 40;
/// Last epidemiological week of a season.
pub const LAST_WEEK: u32 = 17;
/// Entries in a season without week 53.
pub const STANDARD_LEN: usize = 30;
/// Entries in a season that contains week 53.
pub const LONG_LEN: usize = 31;

/// Epidemiological week at position `index` of a season.
pub fn epi_week_at(index: usize, has_week_53: bool) -> Option<u32> {
    let len = if has_week_53 { LONG_LEN } else { STANDARD_LEN };
    if index >= len {
        return None;
    }
    let last_of_year = if has_week_53 { 53 } else { 52 };
    let week = FIRST_WEEK + index as u32;
    Some(if week <= last_of_year {
        week
    } else {
        week - last_of_year
    })
}

/// Position of epidemiological week `week` within a season, if the season covers it.
pub fn index_of_epi_week(week: u32, has_week_53: bool) -> Option<usize> {
    let last_of_year = if has_week_53 { 53 } else { 52 };
    if (FIRST_WEEK..=last_of_year).contains(&week) {
        Some((week - FIRST_WEEK) as usize)
    } else if (1..=LAST_WEEK).contains(&week) {
        Some((last_of_year - FIRST_WEEK + week) as usize)
    } else {
        None
    }
}

/// Label like `2015/16` for a season starting in `start_year`.
pub fn year_label(start_year: i32) -> String {
    format!("{}/{:02}", start_year, (start_year + 1).rem_euclid(100))
}

/// Identity of a season; orders by year first, then region.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeasonKey {
    pub year_label: String,
    pub region: String,
}

impl fmt::Display for SeasonKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.region, self.year_label)
    }
}

/// One region-year of weekly wILI values, week 40 through week 17.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Season {
    region: String,
    start_year: i32,
    values: Vec<f64>,
}

impl Season {
    pub fn new(region: impl Into<String>, start_year: i32, values: Vec<f64>) -> Result<Self> {
        let region = region.into();
        if region.is_empty() {
            return Err(Error::Validation("empty region identifier".into()));
        }
        if values.len() != STANDARD_LEN && values.len() != LONG_LEN {
            return Err(Error::Validation(format!(
                "season {} {} has {} weeks, expected {} or {}",
                region,
                year_label(start_year),
                values.len(),
                STANDARD_LEN,
                LONG_LEN
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::Validation(format!(
                "season {} {} week {}: wILI must be finite and non-negative, got {}",
                region,
                year_label(start_year),
                epi_week_at(i, values.len() == LONG_LEN).unwrap_or(0),
                v
            )));
        }
        Ok(Self {
            region,
            start_year,
            values,
        })
    }

    pub fn region(&self) -> &str {
        &self.region
    }

    pub fn start_year(&self) -> i32 {
        self.start_year
    }

    pub fn year_label(&self) -> String {
        year_label(self.start_year)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn has_week_53(&self) -> bool {
        self.values.len() == LONG_LEN
    }

    pub fn key(&self) -> SeasonKey {
        SeasonKey {
            year_label: self.year_label(),
            region: self.region.clone(),
        }
    }

    pub fn epi_week(&self, index: usize) -> Option<u32> {
        epi_week_at(index, self.has_week_53())
    }

    pub fn index_of_week(&self, week: u32) -> Option<usize> {
        index_of_epi_week(week, self.has_week_53())
    }

    /// Calendar year in which the week at `index` falls.
    pub fn calendar_year(&self, index: usize) -> Option<i32> {
        self.epi_week(index).map(|w| {
            if w >= FIRST_WEEK {
                self.start_year
            } else {
                self.start_year + 1
            }
        })
    }

    /// Copy with week 53 removed, so every season has the standard length.
    pub fn without_week_53(&self) -> Season {
        if !self.has_week_53() {
            return self.clone();
        }
        let idx53 = (53 - FIRST_WEEK) as usize;
        let values = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != idx53)
            .map(|(_, v)| *v)
            .collect();
        Season {
            region: self.region.clone(),
            start_year: self.start_year,
            values,
        }
    }
}

/// A collection of seasons with unique `(region, year_label)` keys, kept in key order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeasonSet {
    seasons: Vec<Season>,
}

impl SeasonSet {
    pub fn new(mut seasons: Vec<Season>) -> Result<Self> {
        seasons.sort_by_key(|s| s.key());
        for pair in seasons.windows(2) {
            if pair[0].key() == pair[1].key() {
                return Err(Error::Validation(format!(
                    "duplicate season {}",
                    pair[0].key()
                )));
            }
        }
        if let Some(first) = seasons.first() {
            if let Some(odd) = seasons.iter().find(|s| s.len() != first.len()) {
                return Err(Error::Validation(format!(
                    "season {} has {} weeks but {} has {}; seasons must share week alignment",
                    odd.key(),
                    odd.len(),
                    first.key(),
                    first.len()
                )));
            }
        }
        Ok(Self { seasons })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn seasons(&self) -> &[Season] {
        &self.seasons
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Season> {
        self.seasons.iter()
    }

    pub fn len(&self) -> usize {
        self.seasons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seasons.is_empty()
    }

    pub fn regions(&self) -> BTreeSet<String> {
        self.seasons.iter().map(|s| s.region.clone()).collect()
    }

    pub fn year_labels(&self) -> BTreeSet<String> {
        self.seasons.iter().map(|s| s.year_label()).collect()
    }

    pub fn keys(&self) -> Vec<SeasonKey> {
        self.seasons.iter().map(Season::key).collect()
    }

    pub fn get(&self, region: &str, year_label: &str) -> Option<&Season> {
        self.seasons
            .iter()
            .find(|s| s.region == region && s.year_label() == year_label)
    }

    /// Length shared by every season, if any.
    pub fn season_len(&self) -> Option<usize> {
        self.seasons.first().map(Season::len)
    }

    pub fn filter_regions(&self, regions: &BTreeSet<String>) -> SeasonSet {
        SeasonSet {
            seasons: self
                .seasons
                .iter()
                .filter(|s| regions.contains(&s.region))
                .cloned()
                .collect(),
        }
    }

    pub fn filter(&self, mut keep: impl FnMut(&Season) -> bool) -> SeasonSet {
        SeasonSet {
            seasons: self.seasons.iter().filter(|s| keep(s)).cloned().collect(),
        }
    }

    pub fn union(&self, other: &SeasonSet) -> Result<SeasonSet> {
        SeasonSet::new(
            self.seasons
                .iter()
                .chain(other.seasons.iter())
                .cloned()
                .collect(),
        )
    }

    /// Largest wILI value across all seasons (0 when empty).
    pub fn max_value(&self) -> f64 {
        self.seasons
            .iter()
            .flat_map(|s| s.values.iter().copied())
            .fold(0.0, f64::max)
    }
}

impl<'a> IntoIterator for &'a SeasonSet {
    type Item = &'a Season;
    type IntoIter = std::slice::Iter<'a, Season>;

    fn into_iter(self) -> Self::IntoIter {
        self.seasons.iter()
    }
}

/// Next-week incidence task: predict position `week_index` from the weeks before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredictionTask {
    week_index: usize,
}

impl PredictionTask {
    pub fn new(week_index: usize) -> Result<Self> {
        if week_index < 1 {
            return Err(Error::Index(
                "prediction target needs at least one observed week".into(),
            ));
        }
        Ok(Self { week_index })
    }

    /// Task whose target is the given epidemiological week of a standard-length season.
    pub fn for_epi_week(week: u32) -> Result<Self> {
        let index = index_of_epi_week(week, false)
            .ok_or_else(|| Error::Index(format!("week {week} is outside weeks 40-17")))?;
        Self::new(index)
    }

    /// Position of the target; equals the number of observed weeks.
    pub fn week_index(&self) -> usize {
        self.week_index
    }

    pub fn horizon(&self) -> usize {
        1
    }

    pub fn epi_week(&self) -> Option<u32> {
        epi_week_at(self.week_index, false)
    }

    pub fn check(&self, season: &Season) -> Result<()> {
        if self.week_index >= season.len() {
            return Err(Error::Index(format!(
                "target position {} beyond season {} of length {}",
                self.week_index,
                season.key(),
                season.len()
            )));
        }
        Ok(())
    }
}
