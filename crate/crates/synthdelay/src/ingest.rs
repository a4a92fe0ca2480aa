//! Raw flight records in, per-airport hourly delay matrices out.
//!
//! The CSV adapter is deliberately forgiving: rows it cannot parse become
//! entries in a rejects report instead of aborting the run, because raw
//! exports routinely contain a handful of malformed lines. Aggregation
//! buckets each operation by its *scheduled* time converted to the airport's
//! local time zone, averages the observed delays per (day, hour) cell, and
//! records which cells saw at least one operation in the mask.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc};
use chrono_tz::Tz;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DelayMatrix, Kind, Unit, HOURS};
use crate::npy;

/// One flight movement. Timestamps are UTC; actual times are optional since
/// exports include flights with missing out/in reports.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightRecord {
    pub flight_id: String,
    pub origin: String,
    pub destination: String,
    pub sched_dep: DateTime<Utc>,
    pub act_dep: Option<DateTime<Utc>>,
    pub sched_arr: DateTime<Utc>,
    pub act_arr: Option<DateTime<Utc>>,
}

impl FlightRecord {
    fn validate(&self) -> std::result::Result<(), String> {
        for (label, code) in [("origin", &self.origin), ("destination", &self.destination)] {
            if code.is_empty()
                || !code.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit())
            {
                return Err(format!("{label} code {code:?} is not uppercase alphanumeric"));
            }
        }
        if self.sched_arr <= self.sched_dep {
            return Err(format!(
                "scheduled arrival {} is not after scheduled departure {}",
                self.sched_arr, self.sched_dep
            ));
        }
        Ok(())
    }

    /// Scheduled time and delay (actual − scheduled, in seconds) for the
    /// given movement kind at this record, if the actual time was reported.
    fn movement(&self, kind: Kind) -> (&str, DateTime<Utc>, Option<f64>) {
        let (airport, sched, act) = match kind {
            Kind::Departure => (&self.origin, self.sched_dep, self.act_dep),
            Kind::Arrival => (&self.destination, self.sched_arr, self.act_arr),
        };
        let delay = act.map(|a| (a - sched).num_seconds() as f64);
        (airport, sched, delay)
    }
}

/// Column mapping and timestamp format for a raw CSV export.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub flight_id: String,
    pub origin: String,
    pub destination: String,
    pub sched_dep: String,
    pub act_dep: String,
    pub sched_arr: String,
    pub act_arr: String,
    /// `chrono` format string; parsed values are taken as UTC.
    #[serde(default = "default_timestamp_format")]
    pub timestamp_format: String,
}

fn default_timestamp_format() -> String {
    "%Y-%m-%d %H:%M:%S".to_string()
}

/// Everything `ingest` needs besides the raw files: the column mapping, the
/// local time zone of every airport, and the calendar window.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub schema: CsvSchema,
    /// IANA zone name per airport code, e.g. `EGLL = "Europe/London"`.
    pub timezones: BTreeMap<String, String>,
    /// First calendar day covered (inclusive), local to each airport.
    pub start_date: NaiveDate,
    /// Last calendar day covered (inclusive).
    pub end_date: NaiveDate,
}

impl IngestConfig {
    pub fn load(path: &Path) -> Result<IngestConfig> {
        // An unreadable config file is a usage problem (exit code 1), unlike
        // unreadable data files.
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: IngestConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.end_date < self.start_date {
            return Err(Error::Config(format!(
                "end_date {} precedes start_date {}",
                self.end_date, self.start_date
            )));
        }
        for (airport, zone) in &self.timezones {
            zone.parse::<Tz>().map_err(|_| {
                Error::Config(format!("unknown time zone {zone:?} for airport {airport}"))
            })?;
        }
        Ok(())
    }

    pub fn timezone(&self, airport: &str) -> Result<Tz> {
        let zone = self.timezones.get(airport).ok_or_else(|| {
            Error::Config(format!("no time zone configured for airport {airport}"))
        })?;
        zone.parse::<Tz>()
            .map_err(|_| Error::Config(format!("unknown time zone {zone:?} for airport {airport}")))
    }

    /// All days from `start_date` through `end_date`, in order.
    pub fn calendar(&self) -> Vec<NaiveDate> {
        let mut days = Vec::new();
        let mut d = self.start_date;
        while d <= self.end_date {
            days.push(d);
            d = d.succ_opt().expect("calendar within chrono range");
        }
        days
    }
}

/// A row the parser could not turn into a valid record.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RejectEntry {
    /// 1-based data row number (excluding the header line).
    pub row: usize,
    pub message: String,
}

struct ColumnIndices {
    flight_id: usize,
    origin: usize,
    destination: usize,
    sched_dep: usize,
    act_dep: usize,
    sched_arr: usize,
    act_arr: usize,
}

fn find_column(path: &Path, headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::format(path, format!("missing column {name:?}")))
}

fn parse_timestamp(field: &str, format: &str) -> std::result::Result<DateTime<Utc>, String> {
    NaiveDateTime::parse_from_str(field, format)
        .map(|naive| naive.and_utc())
        .map_err(|e| format!("bad timestamp {field:?}: {e}"))
}

fn parse_optional_timestamp(
    field: &str,
    format: &str,
) -> std::result::Result<Option<DateTime<Utc>>, String> {
    if field.trim().is_empty() {
        return Ok(None);
    }
    parse_timestamp(field, format).map(Some)
}

/// Parse a raw CSV export. Malformed rows (bad timestamps, invalid airport
/// codes, inconsistent schedules) are returned as rejects, not errors; only
/// an unreadable file or a header missing mapped columns is fatal.
pub fn parse_flight_csv(
    path: &Path,
    schema: &CsvSchema,
) -> Result<(Vec<FlightRecord>, Vec<RejectEntry>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::format(path, format!("unreadable header: {e}")))?
        .clone();
    let cols = ColumnIndices {
        flight_id: find_column(path, &headers, &schema.flight_id)?,
        origin: find_column(path, &headers, &schema.origin)?,
        destination: find_column(path, &headers, &schema.destination)?,
        sched_dep: find_column(path, &headers, &schema.sched_dep)?,
        act_dep: find_column(path, &headers, &schema.act_dep)?,
        sched_arr: find_column(path, &headers, &schema.sched_arr)?,
        act_arr: find_column(path, &headers, &schema.act_arr)?,
    };

    let mut records = Vec::new();
    let mut rejects = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let mut reject = |message: String| rejects.push(RejectEntry { row: row_no, message });
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                reject(format!("unparseable row: {e}"));
                continue;
            }
        };
        let field = |idx: usize| row.get(idx).unwrap_or("");
        let parsed = (|| {
            let record = FlightRecord {
                flight_id: field(cols.flight_id).to_string(),
                origin: field(cols.origin).to_string(),
                destination: field(cols.destination).to_string(),
                sched_dep: parse_timestamp(field(cols.sched_dep), &schema.timestamp_format)?,
                act_dep: parse_optional_timestamp(field(cols.act_dep), &schema.timestamp_format)?,
                sched_arr: parse_timestamp(field(cols.sched_arr), &schema.timestamp_format)?,
                act_arr: parse_optional_timestamp(field(cols.act_arr), &schema.timestamp_format)?,
            };
            record.validate()?;
            Ok::<FlightRecord, String>(record)
        })();
        match parsed {
            Ok(record) => records.push(record),
            Err(message) => reject(message),
        }
    }
    Ok((records, rejects))
}

fn convert_seconds(unit: Unit, seconds: f64) -> f64 {
    match unit {
        Unit::Seconds => seconds,
        Unit::Minutes => seconds / 60.0,
    }
}

/// Average observed delays into a days × 24 matrix for one airport and
/// movement kind.
///
/// Bucketing uses the scheduled time shifted into `tz`; operations whose
/// local day falls outside `calendar`, or whose actual time is missing, are
/// skipped. Cells with no operations hold 0 with mask false.
pub fn aggregate_hourly(
    records: &[FlightRecord],
    airport: &str,
    kind: Kind,
    unit: Unit,
    tz: Tz,
    calendar: &[NaiveDate],
) -> Result<DelayMatrix> {
    if calendar.is_empty() {
        return Err(Error::InvalidArgument("aggregate_hourly: empty calendar".into()));
    }
    let day_index: BTreeMap<NaiveDate, usize> =
        calendar.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    if day_index.len() != calendar.len() {
        return Err(Error::InvalidArgument("aggregate_hourly: duplicate calendar days".into()));
    }

    let mut sums = Array2::<f64>::zeros((calendar.len(), HOURS));
    let mut counts = Array2::<u64>::zeros((calendar.len(), HOURS));
    for record in records {
        let (movement_airport, sched, delay) = record.movement(kind);
        if movement_airport != airport {
            continue;
        }
        let Some(delay_seconds) = delay else { continue };
        // A UTC instant maps to exactly one local time, so shifting after
        // parsing sidesteps DST ambiguity entirely.
        let local = tz.from_utc_datetime(&sched.naive_utc());
        let Some(&day) = day_index.get(&local.date_naive()) else { continue };
        let hour = local.time().hour() as usize;
        sums[[day, hour]] += convert_seconds(unit, delay_seconds);
        counts[[day, hour]] += 1;
    }

    let mut values = Array2::<f64>::zeros((calendar.len(), HOURS));
    let mut mask = Array2::<bool>::from_elem((calendar.len(), HOURS), false);
    for ((idx, value), cell) in values.indexed_iter_mut().zip(mask.iter_mut()) {
        let n = counts[idx];
        if n > 0 {
            *value = sums[idx] / n as f64;
            *cell = true;
        }
    }
    DelayMatrix::new(airport, kind, unit, values, mask, calendar.to_vec())
}

/// JSON sidecar stored next to the values file.
#[derive(Debug, Serialize, Deserialize)]
struct MatrixMeta {
    airport: String,
    kind: Kind,
    unit: Unit,
    day_labels: Vec<NaiveDate>,
    /// File name (relative to the values file) of the 0/1 mask array.
    mask: String,
}

fn sibling(path: &Path, suffix: &str) -> Result<PathBuf> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::format(path, "matrix path has no file stem"))?;
    Ok(path.with_file_name(format!("{stem}{suffix}")))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Persist a matrix as `<stem>.npy` (values) plus `<stem>.mask.npy` and
/// `<stem>.meta.json` sidecars. `path` names the values file.
pub fn save_matrix(m: &DelayMatrix, path: &Path) -> Result<()> {
    m.validate()?;
    let mask_path = sibling(path, ".mask.npy")?;
    let meta_path = sibling(path, ".meta.json")?;

    let values: Vec<f64> = m.values.iter().copied().collect();
    npy::write_npy(path, &[m.days(), HOURS], &values)?;
    let mask: Vec<f64> = m.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    npy::write_npy(&mask_path, &[m.days(), HOURS], &mask)?;

    let meta = MatrixMeta {
        airport: m.airport.clone(),
        kind: m.kind,
        unit: m.unit,
        day_labels: m.day_labels.clone(),
        mask: mask_path
            .file_name()
            .and_then(|s| s.to_str())
            .expect("sibling built from str stem")
            .to_string(),
    };
    let json = serde_json::to_vec_pretty(&meta)
        .map_err(|e| Error::format(&meta_path, format!("cannot encode metadata: {e}")))?;
    write_atomic(&meta_path, &json)
}

/// Load a matrix saved by [`save_matrix`]. The reverse is lossless: values,
/// mask, and metadata all round-trip bitwise.
pub fn load_matrix(path: &Path) -> Result<DelayMatrix> {
    let meta_path = sibling(path, ".meta.json")?;
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: MatrixMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::format(&meta_path, format!("bad metadata: {e}")))?;

    let (shape, values) = npy::read_npy(path)?;
    if shape.len() != 2 || shape[1] != HOURS {
        return Err(Error::format(
            path,
            format!("expected a days × {HOURS} matrix, found shape {shape:?}"),
        ));
    }
    let mask_path = path.with_file_name(&meta.mask);
    let (mask_shape, mask_values) = npy::read_npy(&mask_path)?;
    if mask_shape != shape {
        return Err(Error::format(
            &mask_path,
            format!("mask shape {mask_shape:?} does not match values shape {shape:?}"),
        ));
    }
    if meta.day_labels.len() != shape[0] {
        return Err(Error::format(
            &meta_path,
            format!("{} day labels for {} rows", meta.day_labels.len(), shape[0]),
        ));
    }
    for m in &mask_values {
        if *m != 0.0 && *m != 1.0 {
            return Err(Error::format(&mask_path, format!("mask entry {m} is not 0 or 1")));
        }
    }

    let days = shape[0];
    let values = Array2::from_shape_vec((days, HOURS), values)
        .expect("shape checked against element count by the reader");
    let mask = Array2::from_shape_vec((days, HOURS), mask_values)
        .expect("shape checked against element count by the reader")
        .mapv(|v| v == 1.0);
    DelayMatrix::new(meta.airport, meta.kind, meta.unit, values, mask, meta.day_labels)
}

/// [`load_matrix`] plus the per-region unit check (EU data is in seconds, US
/// in minutes); a mismatch is a format error.
pub fn load_matrix_for_region(path: &Path, region: crate::matrix::Region) -> Result<DelayMatrix> {
    let m = load_matrix(path)?;
    if m.unit != region.unit {
        return Err(Error::format(
            path,
            format!(
                "matrix unit {:?} does not match region {:?} unit {:?}",
                m.unit, region.name, region.unit
            ),
        ));
    }
    Ok(m)
}
