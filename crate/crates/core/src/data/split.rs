use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::season::{Season, SeasonKey, SeasonSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitParams {
    pub test_fraction: f64,
    pub candidate_fraction: f64,
}

impl Default for SplitParams {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            candidate_fraction: 0.5,
        }
    }
}

/// Disjoint candidate (D_c), safety (D_s) and test partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSplit {
    pub candidate: SeasonSet,
    pub safety: SeasonSet,
    pub test: SeasonSet,
    pub seed: u64,
}

impl DataSplit {
    /// Candidate and safety seasons together.
    pub fn training(&self) -> SeasonSet {
        self.candidate
            .union(&self.safety)
            .expect("split partitions are disjoint")
    }

    pub fn check(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for key in self
            .candidate
            .keys()
            .into_iter()
            .chain(self.safety.keys())
            .chain(self.test.keys())
        {
            if !seen.insert(key.clone()) {
                return Err(Error::Validation(format!("season {key} in two partitions")));
            }
        }
        if self.candidate.is_empty() {
            return Err(Error::Validation("empty candidate partition".into()));
        }
        if self.safety.len() < 2 {
            return Err(Error::Validation(
                "safety partition needs at least two seasons".into(),
            ));
        }
        Ok(())
    }
}

fn sizes(units: usize, test_fraction: f64, candidate_fraction: f64) -> Option<(usize, usize, usize)> {
    let test = ((test_fraction * units as f64).round() as usize).max(1);
    let rest = units.checked_sub(test)?;
    let candidate = ((candidate_fraction * rest as f64).floor() as usize).max(1);
    let safety = rest.checked_sub(candidate)?;
    (safety >= 2).then_some((test, candidate, safety))
}

/// Shuffles season-years with `seed` and deals them into test, candidate and safety sets.
///
/// All regions of one season-year land in the same partition, so multi-region
/// guidance can pair regions within each partition. With a single region this
/// is a plain per-season split. Test receives `round(test_fraction * n)`
/// years (at least one); the candidate set receives `floor(candidate_fraction)`
/// of the remainder (at least one) and the safety set the rest.
pub fn split(data: &SeasonSet, test_fraction: f64, candidate_fraction: f64, seed: u64) -> Result<DataSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test_fraction must be in (0,1), got {test_fraction}"
        )));
    }
    if !(candidate_fraction > 0.0 && candidate_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "candidate_fraction must be in (0,1), got {candidate_fraction}"
        )));
    }

    let mut by_year: BTreeMap<String, Vec<Season>> = BTreeMap::new();
    for s in data {
        by_year.entry(s.year_label()).or_default().push(s.clone());
    }
    let n = by_year.len();
    let Some((n_test, n_cand, _)) = sizes(n, test_fraction, candidate_fraction) else {
        let required = (n + 1..n + 10_000)
            .find(|&m| sizes(m, test_fraction, candidate_fraction).is_some())
            .unwrap_or(usize::MAX);
        return Err(Error::Sizing {
            required,
            available: n,
        });
    };

    let mut years: Vec<Vec<Season>> = by_year.into_values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    years.shuffle(&mut rng);

    let mut it = years.into_iter();
    let take = |it: &mut std::vec::IntoIter<Vec<Season>>, k: usize| -> Result<SeasonSet> {
        SeasonSet::new(it.by_ref().take(k).flatten().collect())
    };
    let test = take(&mut it, n_test)?;
    let candidate = take(&mut it, n_cand)?;
    let safety = SeasonSet::new(it.flatten().collect())?;
    Ok(DataSplit {
        candidate,
        safety,
        test,
        seed,
    })
}

pub fn split_with(data: &SeasonSet, params: SplitParams, seed: u64) -> Result<DataSplit> {
    split(data, params.test_fraction, params.candidate_fraction, seed)
}

/// Membership of each partition, for run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMembership {
    pub candidate: Vec<SeasonKey>,
    pub safety: Vec<SeasonKey>,
    pub test: Vec<SeasonKey>,
    pub seed: u64,
}

impl From<&DataSplit> for SplitMembership {
    fn from(s: &DataSplit) -> Self {
        Self {
            candidate: s.candidate.keys(),
            safety: s.safety.keys(),
            test: s.test.keys(),
            seed: s.seed,
        }
    }
}
