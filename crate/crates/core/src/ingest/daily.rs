use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{split_multiday, ChargingSession, DayCalendar, IngestError, Result};
use crate::polytope::io::{load_csv, save_csv};
use crate::polytope::{aggregate, build_b_ev, EnvelopeVector, EvSessionParams, FleetParams, TimeGrid};

const MANIFEST_VERSION: u32 = 1;
const MANIFEST_FILE: &str = "manifest.json";

/// Virtual EVs present on one date and their aggregate envelope.
///
/// Per-EV envelopes are not stored; [`DayFleet::envelopes`] rebuilds them
/// from the session parameters on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct DayFleet {
    pub ev_ids: Vec<String>,
    pub sessions: Vec<EvSessionParams>,
    pub aggregate: EnvelopeVector,
}

impl DayFleet {
    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn envelopes(&self) -> Result<Vec<EnvelopeVector>> {
        let grid = self.aggregate.grid();
        let fleet = self.aggregate.fleet();
        self.sessions
            .iter()
            .map(|ev| build_b_ev(ev, fleet, grid).map_err(IngestError::from))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedSession {
    /// Position in the input list.
    pub index: usize,
    pub ev_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyEnvelopeSeries {
    pub grid: TimeGrid,
    pub fleet: FleetParams,
    pub utc_offset_minutes: i32,
    pub days: BTreeMap<NaiveDate, DayFleet>,
    pub skipped: Vec<SkippedSession>,
}

impl DailyEnvelopeSeries {
    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn get(&self, date: NaiveDate) -> Option<&DayFleet> {
        self.days.get(&date)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.days.keys().copied()
    }

    /// Keeps only dates in `first..=last`.
    pub fn retain_dates(&mut self, first: NaiveDate, last: NaiveDate) {
        self.days.retain(|d, _| (first..=last).contains(d));
    }

    pub fn aggregates(&self) -> impl Iterator<Item = (NaiveDate, &EnvelopeVector)> + '_ {
        self.days.iter().map(|(d, f)| (*d, &f.aggregate))
    }
}

/// Splits every session by calendar day and aggregates each day.
///
/// Every date between the first and last one touched gets an entry; dates
/// without sessions carry the zero envelope. Within a day the aggregate sums
/// sessions in input order.
pub fn sessions_to_daily_envelopes(
    sessions: &[ChargingSession],
    fleet: FleetParams,
    calendar: &DayCalendar,
) -> Result<DailyEnvelopeSeries> {
    fleet.validate()?;
    let grid = *calendar.grid();
    let mut per_day: BTreeMap<NaiveDate, (Vec<String>, Vec<EvSessionParams>)> = BTreeMap::new();
    let mut skipped = Vec::new();
    for (index, s) in sessions.iter().enumerate() {
        match split_multiday(s, calendar) {
            Ok(days) => {
                for (date, ev) in days {
                    let entry = per_day.entry(date).or_default();
                    entry.0.push(s.ev_id.clone());
                    entry.1.push(ev);
                }
            }
            Err(reason) => {
                log::debug!("skipping session {index}: {reason}");
                skipped.push(SkippedSession {
                    index,
                    ev_id: s.ev_id.clone(),
                    reason,
                });
            }
        }
    }
    if let (Some(first), Some(last)) = (
        per_day.keys().next().copied(),
        per_day.keys().next_back().copied(),
    ) {
        for date in first.iter_days().take_while(|d| *d <= last) {
            per_day.entry(date).or_default();
        }
    }

    let built: Vec<(NaiveDate, DayFleet)> = per_day
        .into_par_iter()
        .map(|(date, (ev_ids, sessions))| {
            let aggregate = day_aggregate(&sessions, &fleet, &grid)?;
            Ok((
                date,
                DayFleet {
                    ev_ids,
                    sessions,
                    aggregate,
                },
            ))
        })
        .collect::<Result<_>>()?;

    Ok(DailyEnvelopeSeries {
        grid,
        fleet,
        utc_offset_minutes: calendar.utc_offset_minutes(),
        days: built.into_iter().collect(),
        skipped,
    })
}

fn day_aggregate(sessions: &[EvSessionParams], fleet: &FleetParams, grid: &TimeGrid) -> Result<EnvelopeVector> {
    if sessions.is_empty() {
        return Ok(EnvelopeVector::zeros(*grid, *fleet));
    }
    let envs = sessions
        .iter()
        .map(|ev| build_b_ev(ev, fleet, grid))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(aggregate(&envs)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub date: NaiveDate,
    pub envelope: String,
    pub sessions: String,
    pub n_sessions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub grid: TimeGrid,
    pub fleet: FleetParams,
    pub utc_offset_minutes: i32,
    pub days: Vec<ManifestEntry>,
}

const DAY_SESSION_COLUMNS: [&str; 9] = [
    "ev_id", "t_arr", "t_dep", "p_max", "p_min", "c_max", "c_min", "c_arr", "c_dep",
];

impl DailyEnvelopeSeries {
    /// Writes `envelopes/<date>.csv`, `sessions/<date>.csv` and
    /// `manifest.json` under `dir`.
    pub fn export(&self, dir: &Path) -> Result<Manifest> {
        std::fs::create_dir_all(dir.join("envelopes"))?;
        std::fs::create_dir_all(dir.join("sessions"))?;
        let mut days = Vec::with_capacity(self.days.len());
        for (date, day) in &self.days {
            let envelope = format!("envelopes/{date}.csv");
            let sessions = format!("sessions/{date}.csv");
            save_csv(&day.aggregate, &dir.join(&envelope))?;
            write_day_sessions(day, std::fs::File::create(dir.join(&sessions))?)?;
            days.push(ManifestEntry {
                date: *date,
                envelope,
                sessions,
                n_sessions: day.len(),
            });
        }
        let manifest = Manifest {
            version: MANIFEST_VERSION,
            grid: self.grid,
            fleet: self.fleet,
            utc_offset_minutes: self.utc_offset_minutes,
            days,
        };
        let mut f = std::fs::File::create(dir.join(MANIFEST_FILE))?;
        serde_json::to_writer_pretty(&mut f, &manifest)?;
        f.write_all(b"\n")?;
        Ok(manifest)
    }

    /// Reads a directory written by [`DailyEnvelopeSeries::export`].
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_reader(std::fs::File::open(dir.join(MANIFEST_FILE))?)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(IngestError::Format(format!(
                "unsupported manifest version {}",
                manifest.version
            )));
        }
        manifest.fleet.validate()?;
        let mut days = BTreeMap::new();
        for entry in &manifest.days {
            let path: PathBuf = dir.join(&entry.envelope);
            let aggregate = load_csv(&path, manifest.fleet, manifest.grid.slot_hours())?;
            if aggregate.grid() != &manifest.grid {
                return Err(IngestError::Format(format!(
                    "{}: {} slots, manifest says {}",
                    path.display(),
                    aggregate.slots(),
                    manifest.grid.slots()
                )));
            }
            let (ev_ids, sessions) = read_day_sessions(&dir.join(&entry.sessions))?;
            if sessions.len() != entry.n_sessions {
                return Err(IngestError::Format(format!(
                    "{}: {} sessions, manifest says {}",
                    entry.sessions,
                    sessions.len(),
                    entry.n_sessions
                )));
            }
            days.insert(
                entry.date,
                DayFleet {
                    ev_ids,
                    sessions,
                    aggregate,
                },
            );
        }
        Ok(Self {
            grid: manifest.grid,
            fleet: manifest.fleet,
            utc_offset_minutes: manifest.utc_offset_minutes,
            days,
            skipped: Vec::new(),
        })
    }
}

fn write_day_sessions<W: Write>(day: &DayFleet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DAY_SESSION_COLUMNS)?;
    for (id, ev) in day.ev_ids.iter().zip(&day.sessions) {
        w.write_record([
            id.clone(),
            ev.t_arr.to_string(),
            ev.t_dep.to_string(),
            ev.p_max.to_string(),
            ev.p_min.to_string(),
            ev.c_max.to_string(),
            ev.c_min.to_string(),
            ev.c_arr.to_string(),
            ev.c_dep.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn read_day_sessions(path: &Path) -> Result<(Vec<String>, Vec<EvSessionParams>)> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(DAY_SESSION_COLUMNS) {
        return Err(IngestError::Format(format!("{}: unexpected header", path.display())));
    }
    let mut ids = Vec::new();
    let mut sessions = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = || IngestError::Format(format!("{}: row {} is malformed", path.display(), i + 1));
        let f = |k: usize| rec[k].parse::<f64>().map_err(|_| bad());
        let u = |k: usize| rec[k].parse::<usize>().map_err(|_| bad());
        ids.push(rec[0].to_string());
        sessions.push(EvSessionParams {
            t_arr: u(1)?,
            t_dep: u(2)?,
            p_max: f(3)?,
            p_min: f(4)?,
            c_max: f(5)?,
            c_min: f(6)?,
            c_arr: f(7)?,
            c_dep: f(8)?,
        });
    }
    Ok((ids, sessions))
}
