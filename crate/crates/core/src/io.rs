//! Series CSV and group JSON reading and writing.
//!
//! Series CSV: header `entity_id,date,frequency`, ISO dates, decimal
//! frequencies. Days missing between an entity's first and last date are
//! filled with zero. Written CSV uses the shortest round-trip float format, so
//! re-reading reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::series::{FrequencySeries, GroupDefinition};

pub const SERIES_HEADER: [&str; 3] = ["entity_id", "date", "frequency"];

pub type SeriesMap = BTreeMap<String, FrequencySeries>;

pub fn read_series_csv(path: impl AsRef<Path>) -> Result<SeriesMap> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_series_csv(file, &path.display().to_string())
}

/// Parses series CSV from any reader; `source` names the input in errors.
pub fn parse_series_csv<R: Read>(reader: R, source: &str) -> Result<SeriesMap> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != SERIES_HEADER {
        return Err(Error::Parse {
            file: source.to_string(),
            row: 1,
            message: format!("expected header `{}`, found `{}`", SERIES_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut points: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        // header is line 1
        let row = i + 2;
        let parse_err = |message: String| Error::Parse {
            file: source.to_string(),
            row,
            message,
        };
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        if record.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, found {}", record.len())));
        }
        let entity = record[0].to_string();
        if entity.is_empty() {
            return Err(parse_err("empty entity_id".into()));
        }
        let date = NaiveDate::parse_from_str(&record[1], "%Y-%m-%d")
            .map_err(|e| parse_err(format!("bad date `{}`: {e}", &record[1])))?;
        let freq: f64 = record[2]
            .parse()
            .map_err(|_| parse_err(format!("bad frequency `{}`", &record[2])))?;
        if !freq.is_finite() || freq < 0.0 {
            return Err(parse_err(format!("frequency must be a non-negative number, got `{}`", &record[2])));
        }
        if points.entry(entity.clone()).or_default().insert(date, freq).is_some() {
            return Err(parse_err(format!("duplicate row for `{entity}` on {date}")));
        }
    }

    points
        .into_iter()
        .map(|(entity, days)| {
            let start = *days.keys().next().expect("entity has at least one row");
            let end = *days.keys().next_back().expect("entity has at least one row");
            let mut values = vec![0.0; (end - start).num_days() as usize + 1];
            for (d, f) in days {
                values[(d - start).num_days() as usize] = f;
            }
            Ok((entity.clone(), FrequencySeries::new(entity, start, values)?))
        })
        .collect()
}

pub fn write_series_csv<'a, W: Write>(
    writer: W,
    series: impl IntoIterator<Item = &'a FrequencySeries>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SERIES_HEADER)?;
    for s in series {
        for (i, v) in s.values().iter().enumerate() {
            wtr.write_record([
                s.entity_id().to_string(),
                s.date_at(i).format("%Y-%m-%d").to_string(),
                format!("{v}"),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_series_csv(path: impl AsRef<Path>, series: &SeriesMap) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_series_csv(file, series.values())
}

pub fn read_group_json(path: impl AsRef<Path>) -> Result<GroupDefinition> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_group_json(path: impl AsRef<Path>, group: &GroupDefinition) -> Result<()> {
    write_json(path, group)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
