//! Plain-text model checkpoints.
//!
//! ```text
//! guided-forecast-model v1
//! hidden 8
//! embed 4
//! neighbors 5
//! normalizer 6.1
//! theta 133
//! <one parameter per line>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::forecaster::model::{Arch, ForecastModel};

pub const CHECKPOINT_HEADER: &str = "guided-forecast-model v1";

pub fn to_checkpoint_string(model: &ForecastModel) -> String {
    let arch = model.arch();
    let mut out = String::new();
    writeln!(out, "{CHECKPOINT_HEADER}").unwrap();
    writeln!(out, "hidden {}", arch.hidden).unwrap();
    writeln!(out, "embed {}", arch.embed).unwrap();
    writeln!(out, "neighbors {}", arch.neighbors).unwrap();
    writeln!(out, "normalizer {}", model.normalizer()).unwrap();
    writeln!(out, "theta {}", model.theta().len()).unwrap();
    for v in model.theta() {
        writeln!(out, "{v}").unwrap();
    }
    out
}

fn field<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, name: &str) -> Result<&'a str> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| Error::Checkpoint(format!("missing `{name}` line")))?;
    line.strip_prefix(name)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| Error::Checkpoint(format!("line {}: expected `{name} <value>`", no + 1)))
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Checkpoint(format!("bad {what}: {s:?}")))
}

pub fn from_checkpoint_str(text: &str) -> Result<ForecastModel> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == CHECKPOINT_HEADER => {}
        _ => return Err(Error::Checkpoint(format!("first line must be `{CHECKPOINT_HEADER}`"))),
    }
    let hidden = parse(field(&mut lines, "hidden")?, "hidden")?;
    let embed = parse(field(&mut lines, "embed")?, "embed")?;
    let neighbors = parse(field(&mut lines, "neighbors")?, "neighbors")?;
    let normalizer: f64 = parse(field(&mut lines, "normalizer")?, "normalizer")?;
    let count: usize = parse(field(&mut lines, "theta")?, "theta count")?;
    let theta = lines
        .map(|(_, l)| parse::<f64>(l, "parameter"))
        .collect::<Result<Vec<_>>>()?;
    if theta.len() != count {
        return Err(Error::Checkpoint(format!(
            "header announces {count} parameters, found {}",
            theta.len()
        )));
    }
    let arch = Arch::new(hidden, embed, neighbors)?;
    ForecastModel::new(arch, theta, normalizer)
}

pub fn save_model(model: &ForecastModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_checkpoint_string(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ForecastModel> {
    from_checkpoint_str(&std::fs::read_to_string(path)?)
}
