//! Feasibility studies over historical days, bid selection and delivery
//! scoring.
//!
//! A date's availability in a window is the maximum sustained upward
//! flexibility on top of that date's cost-optimal baseline. Dates are
//! solved in parallel and reported in date order.

mod report;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::DailyEnvelopeSeries;
use crate::lp::Tolerances;
use crate::polytope::{build_A, ConstraintMatrix, EnvelopeVector, TimeGrid};
use crate::scheduling::{baseline_schedule, max_upward_flex, FlexWindow, PriceSignal, ScheduleError};

pub use report::{write_delivery_csv, write_delivery_json, write_study_csv, write_study_json};

/// Success needs at least this share of the bid.
pub const SUCCESS_FRACTION: f64 = 0.9;
/// Below this share the delivery failed.
pub const PARTIAL_FRACTION: f64 = 0.5;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("{0}")]
    Input(String),
    #[error("no prices for {0}")]
    MissingPrices(NaiveDate),
    #[error("{0}")]
    Empty(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

pub type Result<T> = std::result::Result<T, MarketError>;

/// Inclusive range of calendar dates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DateRange {
    pub first: NaiveDate,
    pub last: NaiveDate,
}

impl DateRange {
    pub fn new(first: NaiveDate, last: NaiveDate) -> Result<Self> {
        if last < first {
            return Err(MarketError::Input(format!("date range {first}..{last} is empty")));
        }
        Ok(Self { first, last })
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        (self.first..=self.last).contains(&d)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> {
        let last = self.last;
        self.first.iter_days().take_while(move |d| *d <= last)
    }
}

/// A flexibility window with a display label such as `17:30-20:00`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyWindow {
    pub label: String,
    pub window: FlexWindow,
}

impl StudyWindow {
    pub fn from_hours(grid: &TimeGrid, from_hour: f64, to_hour: f64) -> Result<Self> {
        let window = FlexWindow::from_hours(grid, from_hour, to_hour)?;
        Ok(Self {
            label: format!("{}-{}", clock(from_hour), clock(to_hour)),
            window,
        })
    }
}

fn clock(hour: f64) -> String {
    let minutes = (hour * 60.0).round() as i64;
    format!("{:02}:{:02}", minutes / 60, minutes % 60)
}

/// Prices for each study date.
#[derive(Debug, Clone, PartialEq)]
pub enum DailyPrices {
    Uniform(PriceSignal),
    PerDate(BTreeMap<NaiveDate, PriceSignal>),
}

impl DailyPrices {
    pub fn get(&self, date: NaiveDate) -> Option<&PriceSignal> {
        match self {
            Self::Uniform(p) => Some(p),
            Self::PerDate(m) => m.get(&date),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantile {
    Q1,
    Median,
    Q3,
}

impl Quantile {
    pub fn level(self) -> f64 {
        match self {
            Self::Q1 => 0.25,
            Self::Median => 0.5,
            Self::Q3 => 0.75,
        }
    }
}

/// Linear interpolation between order statistics at position `q·(n−1)`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(MarketError::Empty("quantile of no values".into()));
    }
    if !(0.0..=1.0).contains(&q) || values.iter().any(|v| v.is_nan()) {
        return Err(MarketError::Input(format!("bad quantile input (q = {q})")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        Ok(Self {
            q1: quantile(values, 0.25)?,
            median: quantile(values, 0.5)?,
            q3: quantile(values, 0.75)?,
        })
    }

    pub fn get(&self, q: Quantile) -> f64 {
        match q {
            Quantile::Q1 => self.q1,
            Quantile::Median => self.median,
            Quantile::Q3 => self.q3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DateFailure {
    pub date: NaiveDate,
    pub message: String,
}

/// Study outcome for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStudy {
    pub window: StudyWindow,
    /// Maximum upward flexibility (kW) per successfully solved date.
    pub flex: Vec<(NaiveDate, f64)>,
    pub failures: Vec<DateFailure>,
    /// `None` when no date solved.
    pub summary: Option<Summary>,
}

impl WindowStudy {
    fn from_rows(window: StudyWindow, rows: Vec<(NaiveDate, std::result::Result<f64, String>)>) -> Result<Self> {
        let mut flex = Vec::new();
        let mut failures = Vec::new();
        for (date, r) in rows {
            match r {
                Ok(v) => flex.push((date, v)),
                Err(message) => failures.push(DateFailure { date, message }),
            }
        }
        let values: Vec<f64> = flex.iter().map(|(_, v)| *v).collect();
        let summary = if values.is_empty() { None } else { Some(Summary::of(&values)?) };
        Ok(Self { window, flex, failures, summary })
    }

    pub fn values(&self) -> Vec<f64> {
        self.flex.iter().map(|(_, v)| *v).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexStudyResult {
    pub range: DateRange,
    pub windows: Vec<WindowStudy>,
}

impl FlexStudyResult {
    pub fn window(&self, label: &str) -> Option<&WindowStudy> {
        self.windows.iter().find(|w| w.window.label == label)
    }
}

/// Baseline followed by the maximum upward flexibility in each window.
///
/// The outer error covers the baseline; each window has its own result.
pub fn date_availability(
    b_agg: &EnvelopeVector,
    a: &ConstraintMatrix,
    prices: &PriceSignal,
    windows: &[StudyWindow],
    tol: &Tolerances,
) -> std::result::Result<Vec<std::result::Result<f64, String>>, String> {
    let baseline = baseline_schedule(b_agg, a, prices, tol).map_err(|e| format!("baseline: {e}"))?;
    Ok(windows
        .iter()
        .map(|w| {
            max_upward_flex(b_agg, a, &baseline, w.window, tol)
                .map(|r| r.flex)
                .map_err(|e| format!("flex {}: {e}", w.label))
        })
        .collect())
}

/// Availability per window (outer) and date (inner, date order).
fn availability(
    series: &DailyEnvelopeSeries,
    prices: &DailyPrices,
    windows: &[StudyWindow],
    range: DateRange,
    tol: &Tolerances,
) -> Result<Vec<Vec<(NaiveDate, std::result::Result<f64, String>)>>> {
    if windows.is_empty() {
        return Err(MarketError::Input("no flexibility windows given".into()));
    }
    let dates: Vec<NaiveDate> = range.dates().collect();
    for &d in &dates {
        if series.get(d).is_none() {
            return Err(MarketError::Input(format!("no envelope for {d}")));
        }
        if prices.get(d).is_none() {
            return Err(MarketError::MissingPrices(d));
        }
    }
    let a = build_A(&series.fleet, &series.grid).map_err(ScheduleError::from)?;
    let per_date: Vec<Vec<std::result::Result<f64, String>>> = dates
        .par_iter()
        .map(|&d| {
            let day = series.get(d).expect("checked above");
            let p = prices.get(d).expect("checked above");
            match date_availability(&day.aggregate, &a, p, windows, tol) {
                Ok(v) => v,
                Err(e) => vec![Err(e); windows.len()],
            }
        })
        .collect();
    Ok((0..windows.len())
        .map(|w| dates.iter().zip(&per_date).map(|(d, r)| (*d, r[w].clone())).collect())
        .collect())
}

pub fn flexibility_study(
    series: &DailyEnvelopeSeries,
    prices: &DailyPrices,
    windows: &[StudyWindow],
    range: DateRange,
    tol: &Tolerances,
) -> Result<FlexStudyResult> {
    let rows = availability(series, prices, windows, range, tol)?;
    let windows = windows
        .iter()
        .cloned()
        .zip(rows)
        .map(|(w, r)| WindowStudy::from_rows(w, r))
        .collect::<Result<_>>()?;
    Ok(FlexStudyResult { range, windows })
}

pub fn select_bid(result: &FlexStudyResult, window: &str, q: Quantile) -> Result<f64> {
    let w = result
        .window(window)
        .ok_or_else(|| MarketError::Input(format!("no study for window {window}")))?;
    w.summary
        .map(|s| s.get(q))
        .ok_or_else(|| MarketError::Empty(format!("window {window} has no solved dates")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeliveryClass {
    Success,
    Partial,
    Failure,
}

/// Delivered share `min(available, bid)/bid`; 1 for a zero bid.
pub fn delivered_fraction(available: f64, bid: f64) -> f64 {
    if bid == 0.0 {
        1.0
    } else {
        available.max(0.0).min(bid) / bid
    }
}

pub fn classify(fraction: f64) -> DeliveryClass {
    if fraction >= SUCCESS_FRACTION {
        DeliveryClass::Success
    } else if fraction >= PARTIAL_FRACTION {
        DeliveryClass::Partial
    } else {
        DeliveryClass::Failure
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRow {
    pub date: NaiveDate,
    pub available: f64,
    pub fraction: f64,
    pub class: DeliveryClass,
}

/// Shares of evaluated dates per class, in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassRates {
    pub success: f64,
    pub partial: f64,
    pub failure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryReport {
    pub window: StudyWindow,
    pub bid: f64,
    pub rows: Vec<DeliveryRow>,
    pub failures: Vec<DateFailure>,
    pub rates: ClassRates,
}

/// Scores a bid against already computed availabilities.
pub fn score_bid(window: &StudyWindow, bid: f64, availability: &[(NaiveDate, f64)], failures: Vec<DateFailure>) -> Result<DeliveryReport> {
    if !(bid >= 0.0 && bid.is_finite()) {
        return Err(MarketError::Input(format!("bid must be finite and ≥ 0, got {bid}")));
    }
    if availability.is_empty() {
        return Err(MarketError::Empty(format!("no evaluated dates in window {}", window.label)));
    }
    let rows: Vec<DeliveryRow> = availability
        .iter()
        .map(|&(date, available)| {
            let fraction = delivered_fraction(available, bid);
            DeliveryRow { date, available, fraction, class: classify(fraction) }
        })
        .collect();
    let n = rows.len();
    let count = |c: DeliveryClass| rows.iter().filter(|r| r.class == c).count();
    let (s, p) = (count(DeliveryClass::Success), count(DeliveryClass::Partial));
    let f = n - s - p;
    let rates = ClassRates {
        success: s as f64 / n as f64,
        partial: p as f64 / n as f64,
        failure: f as f64 / n as f64,
    };
    Ok(DeliveryReport { window: window.clone(), bid, rows, failures, rates })
}

pub fn evaluate_delivery(
    bid: f64,
    series: &DailyEnvelopeSeries,
    prices: &DailyPrices,
    window: &StudyWindow,
    range: DateRange,
    tol: &Tolerances,
) -> Result<DeliveryReport> {
    if !(bid >= 0.0 && bid.is_finite()) {
        return Err(MarketError::Input(format!("bid must be finite and ≥ 0, got {bid}")));
    }
    let study = flexibility_study(series, prices, std::slice::from_ref(window), range, tol)?;
    let w = study.windows.into_iter().next().expect("one window");
    score_bid(window, bid, &w.flex, w.failures)
}

#[cfg(test)]
mod tests;
