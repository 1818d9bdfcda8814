use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use crate::data::Interaction;
use crate::error::{Error, Result};

/// Users with fewer events than this are dropped by [`five_core_filter`].
pub const MIN_USER_EVENTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Tsv,
    Csv,
}

impl InputFormat {
    fn delimiter(self) -> u8 {
        match self {
            InputFormat::Tsv => b'\t',
            InputFormat::Csv => b',',
        }
    }

    /// Guesses from the file extension, defaulting to TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => InputFormat::Csv,
            _ => InputFormat::Tsv,
        }
    }
}

impl std::str::FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(InputFormat::Tsv),
            "csv" => Ok(InputFormat::Csv),
            other => Err(Error::InvalidInput(format!("unknown input format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub interactions: Vec<Interaction>,
    /// Rows skipped because they did not parse.
    pub malformed: usize,
}

/// Reads `user, item, timestamp[, category]` rows.
///
/// Rows with missing ids or a timestamp that is not a non-negative integer
/// are skipped and counted. More than half the rows malformed is an error.
pub fn ingest(path: &Path, format: InputFormat, has_header: bool) -> Result<IngestReport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .has_headers(has_header)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(file);

    let mut report = IngestReport::default();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) if e.is_io_error() => {
                return Err(match e.into_kind() {
                    csv::ErrorKind::Io(io) => Error::io(path, io),
                    _ => unreachable!(),
                })
            }
            Err(_) => {
                report.malformed += 1;
                continue;
            }
        };
        match parse_row(&record) {
            Some(ev) => report.interactions.push(ev),
            None => report.malformed += 1,
        }
    }
    let total = report.interactions.len() + report.malformed;
    if report.malformed * 2 > total {
        return Err(Error::Format(format!(
            "{} of {total} rows in {} are malformed",
            report.malformed,
            path.display()
        )));
    }
    Ok(report)
}

fn parse_row(record: &csv::StringRecord) -> Option<Interaction> {
    if record.len() < 3 || record.len() > 4 {
        return None;
    }
    let user = record.get(0)?.trim();
    let item = record.get(1)?.trim();
    if user.is_empty() || item.is_empty() {
        return None;
    }
    let timestamp: i64 = record.get(2)?.trim().parse().ok()?;
    if timestamp < 0 {
        return None;
    }
    let category = record
        .get(3)
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(str::to_owned);
    Some(Interaction {
        user: user.to_owned(),
        item: item.to_owned(),
        timestamp,
        category,
    })
}

/// Drops every event of users with fewer than five events. Items are not
/// filtered and the pass is not iterated.
pub fn five_core_filter(events: Vec<Interaction>) -> Result<Vec<Interaction>> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for ev in &events {
        *counts.entry(ev.user.as_str()).or_default() += 1;
    }
    let keep: std::collections::HashSet<String> = counts
        .into_iter()
        .filter(|&(_, c)| c >= MIN_USER_EVENTS)
        .map(|(u, _)| u.to_owned())
        .collect();
    let kept: Vec<Interaction> = events.into_iter().filter(|e| keep.contains(&e.user)).collect();
    if kept.is_empty() {
        return Err(Error::EmptyDataset("5-core filtering".into()));
    }
    Ok(kept)
}
