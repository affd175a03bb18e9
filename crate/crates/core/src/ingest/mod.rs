//! Charging sessions to daily fleet envelopes.
//!
//! Sessions come from a CSV export or from [`generate_synthetic_fleet`].
//! Missing arrival/departure energies are approximated from the consumed
//! energy, sessions spanning midnight are split into per-day virtual EVs,
//! and each calendar day is aggregated into one
//! [`EnvelopeVector`](crate::polytope::EnvelopeVector).

mod daily;
mod sessions_csv;
mod synthetic;

use chrono::{DateTime, Datelike, FixedOffset, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polytope::{EvSessionParams, PolytopeError, TimeGrid};

pub use daily::{sessions_to_daily_envelopes, DailyEnvelopeSeries, DayFleet, SkippedSession};
pub use sessions_csv::{parse_sessions, read_sessions, write_sessions, CleaningReport, RowError};
pub use synthetic::{generate_synthetic_fleet, synthetic_envelopes, SyntheticFleetConfig, WeightedRange, WeightedValue};

/// Share of capacity assumed at arrival when the record has no SOC.
pub const ARRIVAL_SOC_GUESS: f64 = 0.2;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("{0}")]
    Format(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

impl From<crate::polytope::io::EnvelopeIoError> for IngestError {
    fn from(e: crate::polytope::io::EnvelopeIoError) -> Self {
        IngestError::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, IngestError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingSession {
    pub ev_id: String,
    pub plug_in: DateTime<Utc>,
    pub plug_out: DateTime<Utc>,
    /// Energy delivered during the session, kWh.
    pub c_cons: f64,
    /// Battery capacity, kWh.
    pub c_max: f64,
    /// Port power, kW.
    pub p_max: f64,
    /// Discharge limit (≤ 0); `-p_max` when absent.
    pub p_min: Option<f64>,
    pub c_arr: Option<f64>,
    pub c_dep: Option<f64>,
}

/// Energies used to build the session's envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capacities {
    pub c_arr: f64,
    pub c_dep: f64,
    pub c_min: f64,
}

/// Fills in arrival and departure energy from the consumed energy.
///
/// Assumes the car arrives at 20 % and leaves with what it consumed on top,
/// unless that overflows the battery, in which case it leaves full. Values
/// present in the record win.
pub fn approximate_capacities(s: &ChargingSession) -> Capacities {
    let (c_arr, c_dep) = if ARRIVAL_SOC_GUESS * s.c_max + s.c_cons <= s.c_max {
        let c_arr = ARRIVAL_SOC_GUESS * s.c_max;
        (c_arr, c_arr + s.c_cons)
    } else {
        (s.c_max - s.c_cons, s.c_max)
    };
    Capacities {
        c_arr: s.c_arr.unwrap_or(c_arr),
        c_dep: s.c_dep.unwrap_or(c_dep),
        c_min: 0.0,
    }
}

/// Maps instants onto per-day slot grids with a fixed UTC offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayCalendar {
    grid: TimeGrid,
    offset: FixedOffset,
    slot_secs: i64,
}

impl DayCalendar {
    /// `grid` must cover exactly 24 h in whole-second slots.
    pub fn new(grid: TimeGrid, utc_offset_minutes: i32) -> Result<Self> {
        let secs = grid.slot_hours() * 3600.0;
        if (secs - secs.round()).abs() > 1e-9 || secs.round() < 1.0 {
            return Err(IngestError::Config(format!(
                "slot length of {} h is not a whole number of seconds",
                grid.slot_hours()
            )));
        }
        let slot_secs = secs.round() as i64;
        if slot_secs * grid.slots() as i64 != 86_400 {
            return Err(IngestError::Config(format!(
                "daily grid must span 24 h, got {} h",
                grid.horizon_hours()
            )));
        }
        let offset = FixedOffset::east_opt(utc_offset_minutes * 60).ok_or_else(|| {
            IngestError::Config(format!("UTC offset of {utc_offset_minutes} min out of range"))
        })?;
        Ok(Self {
            grid,
            offset,
            slot_secs,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn utc_offset_minutes(&self) -> i32 {
        self.offset.local_minus_utc() / 60
    }

    fn local_secs(&self, ts: &DateTime<Utc>) -> i64 {
        ts.timestamp() + self.offset.local_minus_utc() as i64
    }

    /// Global slot containing `ts` (counted from the local epoch day).
    pub fn floor_slot(&self, ts: &DateTime<Utc>) -> i64 {
        self.local_secs(ts).div_euclid(self.slot_secs)
    }

    /// First global slot boundary at or after `ts`.
    pub fn ceil_slot(&self, ts: &DateTime<Utc>) -> i64 {
        -(-self.local_secs(ts)).div_euclid(self.slot_secs)
    }

    pub fn date_of_slot(&self, slot: i64) -> NaiveDate {
        let day = slot.div_euclid(self.grid.slots() as i64);
        NaiveDate::from_num_days_from_ce_opt(719_163 + day as i32).expect("date in range")
    }

    /// Global index of slot 0 on `date`.
    pub fn first_slot(&self, date: NaiveDate) -> i64 {
        (date.num_days_from_ce() as i64 - 719_163) * self.grid.slots() as i64
    }

    pub fn local_date(&self, ts: &DateTime<Utc>) -> NaiveDate {
        ts.with_timezone(&self.offset).date_naive()
    }
}

/// Splits a session into one [`EvSessionParams`] per calendar day.
///
/// Day `j` of a session covering `n_1 + … + n_m = n` slots must reach
/// `(n_1 + … + n_j) / n · C_dep`, starting from the previous day's target.
/// Sessions shorter than one slot are rejected.
pub fn split_multiday(
    s: &ChargingSession,
    calendar: &DayCalendar,
) -> std::result::Result<Vec<(NaiveDate, EvSessionParams)>, String> {
    let dt_secs = calendar.slot_secs;
    if (s.plug_out - s.plug_in).num_seconds() < dt_secs {
        return Err(format!(
            "session {} lasts less than one {}-minute slot",
            s.ev_id,
            dt_secs / 60
        ));
    }
    let caps = approximate_capacities(s);
    let first = calendar.floor_slot(&s.plug_in);
    let last = calendar.ceil_slot(&s.plug_out);
    let n = (last - first) as f64;
    let t = calendar.grid.slots() as i64;
    let p_min = s.p_min.unwrap_or(0.0 - s.p_max);

    let mut out = Vec::new();
    let mut start = first;
    let mut c_arr = caps.c_arr;
    while start < last {
        let day_end = (start.div_euclid(t) + 1) * t;
        let end = day_end.min(last);
        let date = calendar.date_of_slot(start);
        let day0 = calendar.first_slot(date);
        let c_dep = if end == last {
            caps.c_dep
        } else {
            (end - first) as f64 / n * caps.c_dep
        };
        out.push((
            date,
            EvSessionParams {
                t_arr: (start - day0) as usize,
                t_dep: (end - day0) as usize,
                p_max: s.p_max,
                p_min,
                c_max: s.c_max,
                c_min: caps.c_min,
                c_arr,
                c_dep,
            },
        ));
        c_arr = c_dep;
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn at(d: u32, h: u32, m: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2017, 3, d, h, m, 0).unwrap()
    }

    fn session(c_max: f64, c_cons: f64) -> ChargingSession {
        ChargingSession {
            ev_id: "a".into(),
            plug_in: at(1, 18, 0),
            plug_out: at(1, 20, 0),
            c_cons,
            c_max,
            p_max: 7.0,
            p_min: None,
            c_arr: None,
            c_dep: None,
        }
    }

    #[test]
    fn capacity_branches() {
        let c = approximate_capacities(&session(20.0, 5.0));
        assert_eq!((c.c_arr, c.c_dep, c.c_min), (4.0, 9.0, 0.0));
        let c = approximate_capacities(&session(20.0, 18.0));
        assert_eq!((c.c_arr, c.c_dep), (2.0, 20.0));
        // 0.2·20 + 16 = 20 sits on the first branch.
        let c = approximate_capacities(&session(20.0, 16.0));
        assert_eq!((c.c_arr, c.c_dep), (4.0, 20.0));
    }

    #[test]
    fn explicit_energies_override() {
        let mut s = session(20.0, 5.0);
        s.c_arr = Some(1.0);
        s.c_dep = Some(15.0);
        let c = approximate_capacities(&s);
        assert_eq!((c.c_arr, c.c_dep), (1.0, 15.0));
    }

    fn quarter_hours() -> DayCalendar {
        DayCalendar::new(TimeGrid::default(), 0).unwrap()
    }

    #[test]
    fn slots_floor_arrival_and_ceil_departure() {
        let cal = quarter_hours();
        let mut s = session(40.0, 4.0);
        s.plug_in = at(1, 17, 37);
        s.plug_out = at(1, 19, 2);
        let days = split_multiday(&s, &cal).unwrap();
        assert_eq!(days.len(), 1);
        assert_eq!((days[0].1.t_arr, days[0].1.t_dep), (70, 77));
        assert_eq!(days[0].1.p_min, -7.0);
    }

    #[test]
    fn single_day_keeps_energies() {
        let days = split_multiday(&session(20.0, 5.0), &quarter_hours()).unwrap();
        assert_eq!(days.len(), 1);
        assert_eq!(days[0].0, NaiveDate::from_ymd_opt(2017, 3, 1).unwrap());
        assert_eq!((days[0].1.c_arr, days[0].1.c_dep), (4.0, 9.0));
    }

    #[test]
    fn four_plus_two_split() {
        let mut s = session(60.0, 0.0);
        s.plug_in = at(1, 23, 0);
        s.plug_out = at(2, 0, 30);
        s.c_arr = Some(10.0);
        s.c_dep = Some(30.0);
        let days = split_multiday(&s, &quarter_hours()).unwrap();
        assert_eq!(days.len(), 2);
        let (d1, d2) = (days[0].1, days[1].1);
        assert_eq!((d1.t_arr, d1.t_dep, d2.t_arr, d2.t_dep), (92, 96, 0, 2));
        assert_eq!(d1.c_arr, 10.0);
        assert!((d1.c_dep - 4.0 / 6.0 * 30.0).abs() < 1e-12);
        assert_eq!(d2.c_arr, d1.c_dep);
        assert_eq!(d2.c_dep, 30.0);
    }

    #[test]
    fn three_day_split_targets() {
        let mut s = session(100.0, 0.0);
        s.plug_in = at(1, 23, 30);
        s.plug_out = at(3, 0, 30);
        s.c_arr = Some(10.0);
        s.c_dep = Some(50.0);
        let days = split_multiday(&s, &quarter_hours()).unwrap();
        let lens: Vec<_> = days.iter().map(|(_, e)| e.t_dep - e.t_arr).collect();
        assert_eq!(lens, vec![2, 96, 2]);
        assert!((days[0].1.c_dep - 0.02 * 50.0).abs() < 1e-12);
        assert!((days[1].1.c_dep - 0.98 * 50.0).abs() < 1e-12);
        assert_eq!(days[2].1.c_dep, 50.0);
    }

    #[test]
    fn local_offset_moves_the_day_boundary() {
        let cal = DayCalendar::new(TimeGrid::default(), 60).unwrap();
        let mut s = session(40.0, 4.0);
        s.plug_in = at(1, 22, 0);
        s.plug_out = at(1, 23, 30);
        let days = split_multiday(&s, &cal).unwrap();
        assert_eq!(days.len(), 2);
        assert_eq!(days[1].0, NaiveDate::from_ymd_opt(2017, 3, 2).unwrap());
        assert_eq!((days[1].1.t_arr, days[1].1.t_dep), (0, 2));
    }

    #[test]
    fn sub_slot_session_is_rejected() {
        let mut s = session(40.0, 1.0);
        s.plug_out = s.plug_in + chrono::Duration::minutes(10);
        assert!(split_multiday(&s, &quarter_hours()).is_err());
    }

    #[test]
    fn calendar_needs_a_full_day() {
        assert!(DayCalendar::new(TimeGrid::new(48, 0.25).unwrap(), 0).is_err());
        assert!(DayCalendar::new(TimeGrid::new(24, 1.0).unwrap(), 0).is_ok());
    }
}
