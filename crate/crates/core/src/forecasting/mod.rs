//! Day-ahead forecasts of the aggregate envelope.
//!
//! Three quarter-hourly series are forecast: the aggregate charging limit
//! `P_max^agg` and the two capacity rows of `b_agg`. `P_min^agg` is never
//! forecast; it is `-P_max^agg`. A sample at slot `t` with lead `k`
//! predicts the 96 slots `t+k ..= t+k+95` from features available at `t`:
//!
//! | block        | entries | values                                    |
//! |--------------|---------|-------------------------------------------|
//! | current      | 3       | `x(t)`                                    |
//! | quarter-hour | 3 × 92  | `x(t-1) … x(t-92)` (23 h)                 |
//! | daily        | 3 × 6   | `x(t+k-96·d)`, `d = 1..=6`                |
//! | weekly       | 3 × 5   | `x(t+k-672·w)`, `w = 1..=5`               |
//!
//! Within a block, lags are listed for `P_max`, then `C_max`, then `C_min`.
//! Daily and weekly lags point at the slot the forecast starts on, which is
//! only observed at `t` when `k ≤ 96`; longer leads are rejected.

mod model;
mod ridge;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::DailyEnvelopeSeries;
use crate::polytope::{EnvelopeVector, FleetParams, TimeGrid};

pub use model::{
    chronological_split, evaluate, fit, forecast_envelope, predict, ForecastModel, ModelKind, RidgeHyperparams,
    RmseReport, MODEL_FORMAT_VERSION,
};
pub use ridge::RidgeRegression;

pub const SLOTS_PER_DAY: usize = 96;
pub const SLOTS_PER_WEEK: usize = 7 * SLOTS_PER_DAY;
pub const QUARTER_HOUR_LAGS: usize = 92;
pub const DAILY_LAGS: usize = 6;
pub const WEEKLY_LAGS: usize = 5;
pub const VARIABLES: usize = 3;
pub const FEATURES: usize = VARIABLES * (1 + QUARTER_HOUR_LAGS + DAILY_LAGS + WEEKLY_LAGS);
pub const TARGETS: usize = VARIABLES * SLOTS_PER_DAY;
pub const VARIABLE_NAMES: [&str; 3] = ["p_max_agg", "c_max_agg", "c_min_agg"];
pub const VARIABLE_UNITS: [&str; 3] = ["kW", "kWh", "kWh"];

/// History needed before the first target slot.
const LOOKBACK: usize = WEEKLY_LAGS * SLOTS_PER_WEEK;
/// Shortest series that yields one sample.
pub const MIN_SERIES_LEN: usize = LOOKBACK + SLOTS_PER_DAY;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("series has {got} slots, at least {required} are needed")]
    TooShort { required: usize, got: usize },
    #[error("lead must lie in 1..={max}, got {got}")]
    Lead { got: usize, max: usize },
    #[error("{0}")]
    Layout(String),
    #[error("normal equations are rank deficient; use a positive ridge penalty")]
    RankDeficient,
    #[error("{0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, ForecastError>;

/// Quarter-hourly `[P_max, C_max, C_min]` with a gap mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSeries {
    pub values: Vec<[f64; 3]>,
    /// `true` where no observation exists.
    pub gap: Vec<bool>,
}

impl EnvelopeSeries {
    pub fn new(values: Vec<[f64; 3]>) -> Self {
        let gap = vec![false; values.len()];
        Self { values, gap }
    }

    pub fn with_gaps(values: Vec<[f64; 3]>, gap: Vec<bool>) -> Result<Self> {
        if gap.len() != values.len() {
            return Err(ForecastError::Input("gap mask length differs from series".into()));
        }
        Ok(Self { values, gap })
    }

    /// Concatenates the daily aggregates, using each day's `p_max`,
    /// `c_max_row` and `c_min_row` blocks.
    pub fn from_daily(daily: &DailyEnvelopeSeries) -> Result<Self> {
        if daily.grid != TimeGrid::default() {
            return Err(ForecastError::Input("forecasting needs a 96 × 15 min daily grid".into()));
        }
        let mut values = Vec::with_capacity(daily.len() * SLOTS_PER_DAY);
        let mut gap = Vec::with_capacity(values.capacity());
        let mut expected = daily.dates().next();
        for (date, env) in daily.aggregates() {
            // Dates skipped by the caller become flagged gaps.
            while let Some(e) = expected.filter(|e| *e < date) {
                values.extend(std::iter::repeat([0.0; 3]).take(SLOTS_PER_DAY));
                gap.extend(std::iter::repeat(true).take(SLOTS_PER_DAY));
                expected = e.succ_opt();
            }
            for r in 0..SLOTS_PER_DAY {
                values.push([env.p_max()[r], env.c_max_rows()[r], env.c_min_rows()[r]]);
                gap.push(false);
            }
            expected = date.succ_opt();
        }
        Ok(Self { values, gap })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(week, day, slot)` of a position, counted from the series start.
    pub fn position(index: usize) -> (usize, usize, usize) {
        (
            index / SLOTS_PER_WEEK,
            (index % SLOTS_PER_WEEK) / SLOTS_PER_DAY,
            index % SLOTS_PER_DAY,
        )
    }
}

fn check_lead(k: usize) -> Result<()> {
    if (1..=SLOTS_PER_DAY).contains(&k) {
        Ok(())
    } else {
        Err(ForecastError::Lead {
            got: k,
            max: SLOTS_PER_DAY,
        })
    }
}

/// Positions read by the feature row of sample `t`, in layout order.
pub fn feature_sources(t: usize, k: usize) -> Vec<usize> {
    let mut src = Vec::with_capacity(1 + QUARTER_HOUR_LAGS + DAILY_LAGS + WEEKLY_LAGS);
    src.push(t);
    src.extend((1..=QUARTER_HOUR_LAGS).map(|l| t - l));
    src.extend((1..=DAILY_LAGS).map(|d| t + k - d * SLOTS_PER_DAY));
    src.extend((1..=WEEKLY_LAGS).map(|w| t + k - w * SLOTS_PER_WEEK));
    src
}

/// First sample position for lead `k`.
pub fn first_origin(k: usize) -> usize {
    LOOKBACK - k
}

/// One training or test sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastFrame {
    /// Forecast origin.
    pub t: usize,
    pub lead: usize,
    /// [`FEATURES`] values in the documented layout.
    pub features: Vec<f64>,
    /// `96 × 3`, step-major: entry `3·j + v` is variable `v` at `t+k+j`.
    pub target: Vec<f64>,
    /// The same 96 slots one week earlier, step-major.
    pub last_week: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub lead: usize,
    pub frames: Vec<ForecastFrame>,
    /// Origins dropped because their lookback or target touched a gap.
    pub skipped: usize,
}

/// Features and last-week window at origin `t`; `None` if a gap is read.
pub fn frame_inputs(series: &EnvelopeSeries, t: usize, k: usize) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    check_lead(k)?;
    if t < first_origin(k) || t >= series.len() {
        return Err(ForecastError::Input(format!(
            "origin {t} needs history back to {} and must lie inside the series",
            first_origin(k)
        )));
    }
    let src = feature_sources(t, k);
    let week0 = t + k - SLOTS_PER_WEEK;
    let last_week_span = week0..week0 + SLOTS_PER_DAY;
    if src.iter().copied().chain(last_week_span.clone()).any(|i| series.gap[i]) {
        return Ok(None);
    }
    let mut features = Vec::with_capacity(FEATURES);
    features.extend_from_slice(&series.values[t]);
    let mut offset = 1;
    for len in [QUARTER_HOUR_LAGS, DAILY_LAGS, WEEKLY_LAGS] {
        let block = &src[offset..offset + len];
        for v in 0..VARIABLES {
            features.extend(block.iter().map(|&i| series.values[i][v]));
        }
        offset += len;
    }
    let last_week = last_week_span.flat_map(|i| series.values[i]).collect();
    Ok(Some((features, last_week)))
}

/// Every admissible sample of `series` for lead `k`, in time order.
pub fn build_frames(series: &EnvelopeSeries, k: usize) -> Result<FrameSet> {
    check_lead(k)?;
    if series.len() < MIN_SERIES_LEN {
        return Err(ForecastError::TooShort {
            required: MIN_SERIES_LEN,
            got: series.len(),
        });
    }
    let first = first_origin(k);
    let last = series.len() - SLOTS_PER_DAY - k;
    let built: Vec<Option<ForecastFrame>> = (first..=last)
        .into_par_iter()
        .map(|t| {
            let target_span = t + k..t + k + SLOTS_PER_DAY;
            if target_span.clone().any(|i| series.gap[i]) {
                return Ok(None);
            }
            Ok(frame_inputs(series, t, k)?.map(|(features, last_week)| ForecastFrame {
                t,
                lead: k,
                features,
                target: target_span.flat_map(|i| series.values[i]).collect(),
                last_week,
            }))
        })
        .collect::<Result<_>>()?;
    let skipped = built.iter().filter(|f| f.is_none()).count();
    Ok(FrameSet {
        lead: k,
        frames: built.into_iter().flatten().collect(),
        skipped,
    })
}

/// Turns a `96 × 3` step-major forecast into an envelope. Negative charging
/// limits and maximum-capacity rows are clamped to zero.
pub fn forecast_to_envelope(forecast: &[f64], fleet: FleetParams) -> Result<EnvelopeVector> {
    if forecast.len() != TARGETS {
        return Err(ForecastError::Layout(format!(
            "forecast has {} entries, expected {TARGETS}",
            forecast.len()
        )));
    }
    let col = |v: usize| -> Vec<f64> { (0..SLOTS_PER_DAY).map(|j| forecast[3 * j + v]).collect() };
    let p_max: Vec<f64> = col(0).into_iter().map(|x| x.max(0.0)).collect();
    let c_max = col(1).into_iter().map(|x| x.max(0.0)).collect();
    EnvelopeVector::from_blocks(TimeGrid::default(), fleet, p_max.clone(), p_max, c_max, col(2))
        .map_err(|e| ForecastError::Input(e.to_string()))
}
