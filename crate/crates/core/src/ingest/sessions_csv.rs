use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::{ChargingSession, IngestError, Result};

pub const SESSION_COLUMNS: [&str; 9] = [
    "ev_id",
    "plug_in",
    "plug_out",
    "c_cons_kwh",
    "c_max_kwh",
    "p_max_kw",
    "p_min_kw",
    "c_arr_kwh",
    "c_dep_kwh",
];
const MANDATORY: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based data row (the header is row 0).
    pub row: usize,
    pub message: String,
}

/// What happened to every input row. `emitted + dropped + errors` equals
/// `input_rows`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input_rows: usize,
    pub emitted: usize,
    /// `plug_out ≤ plug_in`.
    pub dropped_non_positive_duration: usize,
    /// `c_cons > c_max`.
    pub dropped_over_consumption: usize,
    pub row_errors: Vec<RowError>,
}

impl CleaningReport {
    pub fn dropped(&self) -> usize {
        self.dropped_non_positive_duration + self.dropped_over_consumption
    }
}

fn parse_timestamp(raw: &str) -> std::result::Result<DateTime<Utc>, String> {
    if let Ok(ts) = DateTime::parse_from_rfc3339(raw) {
        return Ok(ts.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Ok(naive.and_utc());
        }
    }
    Err(format!("cannot parse timestamp `{raw}`"))
}

enum Row {
    Session(ChargingSession),
    BadOrder,
    OverConsumption,
}

fn parse_row(rec: &csv::StringRecord, cols: &[Option<usize>; 9]) -> std::result::Result<Row, String> {
    let text = |k: usize| cols[k].and_then(|c| rec.get(c)).map(str::trim).unwrap_or("");
    let number = |k: usize| -> std::result::Result<Option<f64>, String> {
        let raw = text(k);
        if raw.is_empty() {
            return Ok(None);
        }
        let v: f64 = raw
            .parse()
            .map_err(|_| format!("`{}`: cannot parse `{raw}`", SESSION_COLUMNS[k]))?;
        if !v.is_finite() {
            return Err(format!("`{}` is not finite", SESSION_COLUMNS[k]));
        }
        Ok(Some(v))
    };
    let required = |k: usize| number(k)?.ok_or_else(|| format!("`{}` is empty", SESSION_COLUMNS[k]));

    let ev_id = text(0).to_string();
    if ev_id.is_empty() {
        return Err("`ev_id` is empty".into());
    }
    let plug_in = parse_timestamp(text(1))?;
    let plug_out = parse_timestamp(text(2))?;
    let c_cons = required(3)?;
    let c_max = required(4)?;
    let p_max = required(5)?;
    let p_min = number(6)?;
    let c_arr = number(7)?;
    let c_dep = number(8)?;
    if c_cons < 0.0 {
        return Err(format!("negative consumed energy {c_cons}"));
    }
    if c_max <= 0.0 || p_max <= 0.0 {
        return Err(format!("capacity {c_max} and port power {p_max} must be positive"));
    }
    if let Some(p) = p_min.filter(|p| *p > 0.0) {
        return Err(format!("discharge limit must be ≤ 0, got {p}"));
    }
    for v in c_arr.iter().chain(c_dep.iter()) {
        if !(0.0..=c_max).contains(v) {
            return Err(format!("energy {v} outside [0, {c_max}]"));
        }
    }
    if plug_out <= plug_in {
        return Ok(Row::BadOrder);
    }
    if c_cons > c_max {
        return Ok(Row::OverConsumption);
    }
    Ok(Row::Session(ChargingSession {
        ev_id,
        plug_in,
        plug_out,
        c_cons,
        c_max,
        p_max,
        p_min,
        c_arr,
        c_dep,
    }))
}

/// Streams a session CSV. Unknown extra columns are ignored; bad rows are
/// collected in the report rather than aborting the read.
pub fn read_sessions<R: Read>(input: R) -> Result<(Vec<ChargingSession>, CleaningReport)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = reader.headers()?.clone();
    let mut cols = [None; 9];
    for (k, name) in SESSION_COLUMNS.iter().enumerate() {
        cols[k] = headers.iter().position(|h| h.trim() == *name);
        if k < MANDATORY && cols[k].is_none() {
            return Err(IngestError::MissingColumn(name.to_string()));
        }
    }
    let mut report = CleaningReport::default();
    let mut sessions = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        report.input_rows += 1;
        let row = i + 1;
        let parsed = rec.map_err(|e| e.to_string()).and_then(|r| parse_row(&r, &cols));
        match parsed {
            Ok(Row::Session(s)) => sessions.push(s),
            Ok(Row::BadOrder) => report.dropped_non_positive_duration += 1,
            Ok(Row::OverConsumption) => report.dropped_over_consumption += 1,
            Err(message) => report.row_errors.push(RowError { row, message }),
        }
    }
    report.emitted = sessions.len();
    Ok((sessions, report))
}

pub fn parse_sessions(path: &Path) -> Result<(Vec<ChargingSession>, CleaningReport)> {
    read_sessions(std::fs::File::open(path)?)
}

pub fn write_sessions<W: Write>(sessions: &[ChargingSession], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SESSION_COLUMNS)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in sessions {
        w.write_record([
            s.ev_id.clone(),
            s.plug_in.to_rfc3339_opts(SecondsFormat::Secs, true),
            s.plug_out.to_rfc3339_opts(SecondsFormat::Secs, true),
            s.c_cons.to_string(),
            s.c_max.to_string(),
            s.p_max.to_string(),
            opt(s.p_min),
            opt(s.c_arr),
            opt(s.c_dep),
        ])?;
    }
    w.flush()?;
    Ok(())
}
