//! Monthly series CSV files: `date` (YYYY-MM), `value`, optional `subsystem`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{MonthlySeries, YearMonth};

/// Column names to read. Defaults to `date`, `value`, `subsystem`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub date: String,
    pub value: String,
    pub subsystem: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            date: "date".into(),
            value: "value".into(),
            subsystem: "subsystem".into(),
        }
    }
}

/// Reads a series file. When the file has a subsystem column and `subsystem`
/// is given, only matching rows are kept; without a filter the column must
/// hold a single value, which becomes the label. Otherwise the label is the
/// file stem.
pub fn ingest_csv(path: &Path, columns: &ColumnMap, subsystem: Option<&str>) -> Result<MonthlySeries> {
    let file = std::fs::File::open(path)?;
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into());
    read_series(file, columns, subsystem, &fallback)
}

pub fn read_series<R: Read>(
    reader: R,
    columns: &ColumnMap,
    subsystem: Option<&str>,
    default_label: &str,
) -> Result<MonthlySeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let date_col = find(&columns.date).ok_or_else(|| Error::Parse {
        row: 0,
        message: format!("missing column {:?}", columns.date),
    })?;
    let value_col = find(&columns.value).ok_or_else(|| Error::Parse {
        row: 0,
        message: format!("missing column {:?}", columns.value),
    })?;
    let sub_col = find(&columns.subsystem);

    let mut label: Option<String> = None;
    let mut start: Option<YearMonth> = None;
    let mut prev: Option<YearMonth> = None;
    let mut values = Vec::new();

    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if let Some(c) = sub_col {
            let name = record.get(c).unwrap_or_default();
            match (subsystem, &label) {
                (Some(want), _) if name != want => continue,
                (None, Some(seen)) if seen != name => {
                    return Err(Error::Validation {
                        row,
                        message: format!("file mixes subsystems {seen:?} and {name:?}"),
                    })
                }
                _ => {}
            }
            label.get_or_insert_with(|| name.to_string());
        }
        let date_text = record.get(date_col).unwrap_or_default();
        let date: YearMonth = date_text.parse().map_err(|_| Error::Parse {
            row,
            message: format!("bad date {date_text:?}, expected YYYY-MM"),
        })?;
        let value_text = record.get(value_col).unwrap_or_default();
        let value: f64 = value_text.parse().map_err(|_| Error::Parse {
            row,
            message: format!("bad value {value_text:?}"),
        })?;
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Validation {
                row,
                message: format!("value {value} at {date} must be positive"),
            });
        }
        if let Some(p) = prev {
            let expected = p.add_months(1);
            if date > expected {
                return Err(Error::Gap { missing: expected, row });
            }
            if date < expected {
                return Err(Error::Validation {
                    row,
                    message: format!("{date} follows {p}; rows must be sorted and unique"),
                });
            }
        }
        start.get_or_insert(date);
        prev = Some(date);
        values.push(value);
    }

    let start = start.ok_or_else(|| {
        Error::InsufficientData(match subsystem {
            Some(s) => format!("no rows for subsystem {s:?}"),
            None => "no data rows".into(),
        })
    })?;
    let label = label
        .or_else(|| subsystem.map(str::to_string))
        .unwrap_or_else(|| default_label.to_string());
    MonthlySeries::new(label, start, values)
}

/// Writes `date,value,subsystem` rows; reading them back yields an equal series.
pub fn write_series<W: Write>(series: &MonthlySeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "value", "subsystem"])?;
    for (i, v) in series.values().iter().enumerate() {
        w.write_record([series.date_of(i).to_string(), v.to_string(), series.label().to_string()])?;
    }
    w.flush()?;
    Ok(())
}
