//! Reading and writing the `region,year,week,wili` surveillance CSV.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::season::{index_of_epi_week, Season, SeasonSet, STANDARD_LEN};
use crate::error::{Error, Result};

pub const WILI_HEADER: [&str; 4] = ["region", "year", "week", "wili"];

pub fn ingest_wili(path: impl AsRef<Path>, region_filter: Option<&BTreeSet<String>>) -> Result<SeasonSet> {
    let file = File::open(path.as_ref())?;
    read_wili(file, region_filter)
}

/// Assembles seasons from CSV rows in any order.
///
/// Rows outside weeks 40-17 and week-53 rows are dropped. A season that stops
/// early but is complete up to its last row (the season in progress at the
/// end of a file) is skipped with a warning; any other missing week is an error.
pub fn read_wili<R: Read>(reader: R, region_filter: Option<&BTreeSet<String>>) -> Result<SeasonSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers().map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != WILI_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header {}", WILI_HEADER.join(",")),
        });
    }

    let mut groups: BTreeMap<(String, i32), BTreeMap<usize, f64>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |msg: String| Error::Parse { line, msg };
        if record.len() != 4 {
            return Err(parse_err(format!("expected 4 fields, got {}", record.len())));
        }
        let region = record[0].to_string();
        if region.is_empty() {
            return Err(parse_err("empty region".into()));
        }
        let year: i32 = record[1]
            .parse()
            .map_err(|_| parse_err(format!("bad year {:?}", &record[1])))?;
        let week: u32 = record[2]
            .parse()
            .map_err(|_| parse_err(format!("bad week {:?}", &record[2])))?;
        if !(1..=53).contains(&week) {
            return Err(parse_err(format!("week {week} outside 1-53")));
        }
        let wili: f64 = record[3]
            .parse()
            .map_err(|_| parse_err(format!("bad wili {:?}", &record[3])))?;
        if !wili.is_finite() {
            return Err(parse_err(format!("non-finite wili {wili}")));
        }
        if wili < 0.0 {
            return Err(Error::Validation(format!(
                "line {line}: negative wILI {wili} for {region} {year} week {week}"
            )));
        }
        if let Some(filter) = region_filter {
            if !filter.contains(&region) {
                continue;
            }
        }
        let Some(index) = index_of_epi_week(week, false) else {
            continue;
        };
        let start_year = if week >= 40 { year } else { year - 1 };
        let weeks = groups.entry((region.clone(), start_year)).or_default();
        if weeks.insert(index, wili).is_some() {
            return Err(Error::Validation(format!(
                "line {line}: duplicate row for {region} {year} week {week}"
            )));
        }
    }

    let mut seasons = Vec::with_capacity(groups.len());
    for ((region, start_year), weeks) in groups {
        if weeks.len() == STANDARD_LEN {
            seasons.push(Season::new(region, start_year, weeks.into_values().collect())?);
            continue;
        }
        let first_missing = (0..STANDARD_LEN).find(|i| !weeks.contains_key(i)).unwrap_or(0);
        let last_present = weeks.keys().next_back().copied().unwrap_or(0);
        if last_present < first_missing {
            log::warn!(
                "skipping incomplete season {} {} ({} of {} weeks)",
                region,
                crate::data::year_label(start_year),
                weeks.len(),
                STANDARD_LEN
            );
            continue;
        }
        return Err(Error::Gap {
            region,
            year_label: crate::data::year_label(start_year),
            week: crate::data::epi_week_at(first_missing, false).unwrap_or(0),
        });
    }
    SeasonSet::new(seasons)
}

/// Writes seasons in the ingest schema; values use shortest round-trip formatting.
pub fn write_wili<W: Write>(set: &SeasonSet, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(WILI_HEADER).map_err(to_io)?;
    for season in set {
        for (i, v) in season.values().iter().enumerate() {
            let week = season.epi_week(i).expect("index within season");
            let year = season.calendar_year(i).expect("index within season");
            w.write_record([
                season.region().to_string(),
                year.to_string(),
                week.to_string(),
                v.to_string(),
            ])
            .map_err(to_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn emit_wili(set: &SeasonSet, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    write_wili(set, std::io::BufWriter::new(file))
}
