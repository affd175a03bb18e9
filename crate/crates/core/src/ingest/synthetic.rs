use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sessions_to_daily_envelopes, ChargingSession, DailyEnvelopeSeries, DayCalendar, IngestError, Result};
use crate::polytope::{FleetParams, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedValue {
    pub value: f64,
    pub weight: f64,
}

/// Uniform on `[lo, hi)` with probability `weight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedRange {
    pub lo: f64,
    pub hi: f64,
    pub weight: f64,
}

const fn wv(value: f64, weight: f64) -> WeightedValue {
    WeightedValue { value, weight }
}

const fn wr(lo: f64, hi: f64, weight: f64) -> WeightedRange {
    WeightedRange { lo, hi, weight }
}

/// Home-charging fleet shaped after the Crowd Charge statistics: mostly
/// 20 kWh batteries, arriving nearly empty in the evening and leaving
/// nearly full the next morning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticFleetConfig {
    pub n_evs: usize,
    pub rng_seed: u64,
    pub start_date: NaiveDate,
    pub capacity_mix: Vec<WeightedValue>,
    pub port_power_mix: Vec<WeightedValue>,
    pub soc_arr_dist: Vec<WeightedRange>,
    pub soc_dep_dist: Vec<WeightedRange>,
    /// Local hour of arrival.
    pub arrival_hours: Vec<WeightedRange>,
    /// Local hour of departure on the following day.
    pub departure_hours: Vec<WeightedRange>,
    /// Probability that an EV plugs in on a given day.
    pub plug_in_probability: f64,
    /// Multiplier on the plug-in probability, Monday first.
    pub weekday_factors: [f64; 7],
    /// Relative growth of the plug-in probability per 365 days.
    pub growth_per_year: f64,
    /// Write the sampled arrival/departure energies into the sessions.
    pub explicit_energies: bool,
    pub utc_offset_minutes: i32,
}

impl Default for SyntheticFleetConfig {
    fn default() -> Self {
        Self {
            n_evs: 700,
            rng_seed: 42,
            start_date: NaiveDate::from_ymd_opt(2017, 3, 1).expect("valid date"),
            capacity_mix: vec![wv(20.0, 0.7), wv(40.0, 0.15), wv(80.0, 0.1), wv(100.0, 0.05)],
            port_power_mix: vec![wv(3.6, 0.4), wv(7.0, 0.6)],
            soc_arr_dist: vec![wr(0.0, 0.2, 0.92), wr(0.2, 0.5, 0.08)],
            soc_dep_dist: vec![wr(0.8, 1.0, 0.92), wr(0.5, 0.8, 0.08)],
            arrival_hours: vec![
                wr(13.0, 15.0, 0.05),
                wr(15.0, 16.5, 0.1),
                wr(16.5, 17.5, 0.35),
                wr(17.5, 19.0, 0.3),
                wr(19.0, 22.0, 0.2),
            ],
            departure_hours: vec![wr(6.0, 7.0, 0.3), wr(7.0, 8.0, 0.45), wr(8.0, 9.5, 0.25)],
            plug_in_probability: 0.75,
            weekday_factors: [1.0, 1.0, 1.0, 1.0, 0.95, 0.75, 0.8],
            growth_per_year: 0.2,
            explicit_energies: true,
            utc_offset_minutes: 0,
        }
    }
}

impl SyntheticFleetConfig {
    /// Same fleet without weekly pattern or trend.
    pub fn stationary(mut self) -> Self {
        self.weekday_factors = [1.0; 7];
        self.growth_per_year = 0.0;
        self
    }

    /// Roll-out phase of a trial: participation climbs from 0.3 to about
    /// 0.85 over twelve weeks, with a mild weekend dip.
    pub fn ramp_up() -> Self {
        Self {
            plug_in_probability: 0.3,
            weekday_factors: [1.0, 1.0, 1.0, 1.0, 0.97, 0.9, 0.92],
            growth_per_year: 8.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(IngestError::Config(m));
        fn normalized(w: impl Iterator<Item = f64>) -> bool {
            let w: Vec<f64> = w.collect();
            !w.is_empty() && w.iter().all(|x| *x >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() < 1e-6
        }
        for (name, mix) in [("capacity_mix", &self.capacity_mix), ("port_power_mix", &self.port_power_mix)] {
            if !normalized(mix.iter().map(|v| v.weight)) {
                return bad(format!("{name} weights must be nonnegative and sum to 1"));
            }
            if mix.iter().any(|v| !(v.value > 0.0)) {
                return bad(format!("{name} values must be positive"));
            }
        }
        for (name, dist, max) in [
            ("soc_arr_dist", &self.soc_arr_dist, 1.0),
            ("soc_dep_dist", &self.soc_dep_dist, 1.0),
            ("arrival_hours", &self.arrival_hours, 24.0),
            ("departure_hours", &self.departure_hours, 24.0),
        ] {
            if !normalized(dist.iter().map(|r| r.weight)) {
                return bad(format!("{name} weights must be nonnegative and sum to 1"));
            }
            if dist.iter().any(|r| !(0.0 <= r.lo && r.lo < r.hi && r.hi <= max)) {
                return bad(format!("{name} ranges must satisfy 0 ≤ lo < hi ≤ {max}"));
            }
        }
        if !(0.0..=1.0).contains(&self.plug_in_probability) {
            return bad("plug_in_probability must lie in [0, 1]".into());
        }
        if self.weekday_factors.iter().any(|f| !(*f >= 0.0 && f.is_finite())) || !self.growth_per_year.is_finite() {
            return bad("weekday_factors and growth_per_year must be finite, factors ≥ 0".into());
        }
        Ok(())
    }
}

fn pick_value(rng: &mut ChaCha8Rng, mix: &[WeightedValue]) -> f64 {
    let idx = WeightedIndex::new(mix.iter().map(|v| v.weight)).expect("validated weights");
    mix[idx.sample(rng)].value
}

fn pick_range(rng: &mut ChaCha8Rng, dist: &[WeightedRange]) -> f64 {
    let idx = WeightedIndex::new(dist.iter().map(|r| r.weight)).expect("validated weights");
    let r = dist[idx.sample(rng)];
    rng.gen_range(r.lo..r.hi)
}

/// Local wall-clock hour on `date` as a UTC instant, rounded to the minute.
fn instant(date: NaiveDate, hour: f64, offset_minutes: i32) -> DateTime<Utc> {
    let minutes = (hour * 60.0).floor() as i64;
    date.and_hms_opt(0, 0, 0).expect("midnight").and_utc() + Duration::minutes(minutes - offset_minutes as i64)
}

/// Draws `days` days of sessions, sorted by plug-in time then EV id.
///
/// Each EV keeps its battery and port for the whole run. An EV that plugs
/// in on day `d` leaves on day `d + 1`; its target energy is capped at what
/// 90 % of port power can deliver in that time.
pub fn generate_synthetic_fleet(cfg: &SyntheticFleetConfig, days: usize) -> Result<Vec<ChargingSession>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let evs: Vec<(String, f64, f64)> = (0..cfg.n_evs)
        .map(|i| {
            let cap = pick_value(&mut rng, &cfg.capacity_mix);
            let port = pick_value(&mut rng, &cfg.port_power_mix);
            (format!("ev{i:04}"), cap, port)
        })
        .collect();

    let mut sessions = Vec::new();
    for day in 0..days {
        let date = cfg.start_date + Duration::days(day as i64);
        let weekday = date.weekday().num_days_from_monday() as usize;
        let prob = (cfg.plug_in_probability
            * cfg.weekday_factors[weekday]
            * (1.0 + cfg.growth_per_year * day as f64 / 365.0))
            .clamp(0.0, 1.0);
        for (id, c_max, p_max) in &evs {
            if !rng.gen_bool(prob) {
                continue;
            }
            let arrive = pick_range(&mut rng, &cfg.arrival_hours);
            let leave = pick_range(&mut rng, &cfg.departure_hours);
            let soc_arr = pick_range(&mut rng, &cfg.soc_arr_dist);
            let soc_dep = pick_range(&mut rng, &cfg.soc_dep_dist).max(soc_arr);
            let plug_in = instant(date, arrive, cfg.utc_offset_minutes);
            let plug_out = instant(date.succ_opt().expect("date in range"), leave, cfg.utc_offset_minutes);
            let hours = (plug_out - plug_in).num_minutes() as f64 / 60.0;
            let c_arr = soc_arr * c_max;
            let c_dep = (soc_dep * c_max).min(c_arr + 0.9 * p_max * hours).min(*c_max);
            sessions.push(ChargingSession {
                ev_id: id.clone(),
                plug_in,
                plug_out,
                c_cons: c_dep - c_arr,
                c_max: *c_max,
                p_max: *p_max,
                p_min: None,
                c_arr: cfg.explicit_energies.then_some(c_arr),
                c_dep: cfg.explicit_energies.then_some(c_dep),
            });
        }
    }
    sessions.sort_by(|a, b| a.plug_in.cmp(&b.plug_in).then_with(|| a.ev_id.cmp(&b.ev_id)));
    Ok(sessions)
}

/// `days` complete days of fleet envelopes on the default grid.
///
/// One extra day is generated in front so the first kept day already has
/// the previous evening's vehicles; the departures-only day after the run
/// is dropped.
pub fn synthetic_envelopes(
    cfg: &SyntheticFleetConfig,
    days: usize,
    fleet: FleetParams,
) -> Result<DailyEnvelopeSeries> {
    if days == 0 {
        return Err(IngestError::Config("days must be positive".into()));
    }
    let sessions = generate_synthetic_fleet(cfg, days + 1)?;
    let calendar = DayCalendar::new(TimeGrid::default(), cfg.utc_offset_minutes)?;
    let mut series = sessions_to_daily_envelopes(&sessions, fleet, &calendar)?;
    let first = cfg.start_date + Duration::days(1);
    series.retain_dates(first, first + Duration::days(days as i64 - 1));
    Ok(series)
}
