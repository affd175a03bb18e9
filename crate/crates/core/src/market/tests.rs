use chrono::{TimeZone, Utc};

use super::*;
use crate::ingest::{sessions_to_daily_envelopes, ChargingSession, DayCalendar};
use crate::polytope::FleetParams;

fn date(d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2017, 3, d).unwrap()
}

/// One parked EV per date with energy to spare; `power[i]` is its port
/// power on date i+1.
fn parked(power: &[f64], from_h: u32, to_h: u32) -> DailyEnvelopeSeries {
    let sessions: Vec<ChargingSession> = power
        .iter()
        .enumerate()
        .map(|(i, &p)| ChargingSession {
            ev_id: format!("ev{i}"),
            plug_in: Utc.with_ymd_and_hms(2017, 3, i as u32 + 1, from_h, 0, 0).unwrap(),
            plug_out: Utc.with_ymd_and_hms(2017, 3, i as u32 + 1, to_h, 0, 0).unwrap(),
            c_cons: 0.0,
            c_max: 100.0,
            p_max: p,
            p_min: None,
            c_arr: Some(50.0),
            c_dep: Some(50.0),
        })
        .collect();
    let cal = DayCalendar::new(TimeGrid::default(), 0).unwrap();
    sessions_to_daily_envelopes(&sessions, FleetParams::default(), &cal).unwrap()
}

fn evening(grid: &TimeGrid) -> StudyWindow {
    StudyWindow::from_hours(grid, 17.5, 20.0).unwrap()
}

fn flat() -> DailyPrices {
    DailyPrices::Uniform(PriceSignal::flat(96, 0.2, 0.05))
}

#[test]
fn hand_quantiles() {
    let v = [6.0, 2.0, 4.0];
    assert_eq!(quantile(&v, 0.5).unwrap(), 4.0);
    assert_eq!(quantile(&v, 0.75).unwrap(), 5.0);
    assert_eq!(quantile(&v, 0.25).unwrap(), 3.0);
    assert_eq!(quantile(&[7.0], 0.75).unwrap(), 7.0);
    assert!(quantile(&[], 0.5).is_err());
    assert!(quantile(&[1.0], 1.5).is_err());
}

#[test]
fn window_labels() {
    let g = TimeGrid::default();
    let w = evening(&g);
    assert_eq!(w.label, "17:30-20:00");
    assert_eq!((w.window.start, w.window.end), (70, 79));
    assert_eq!(StudyWindow::from_hours(&g, 15.0, 17.0).unwrap().label, "15:00-17:00");
}

#[test]
fn threshold_examples() {
    let bid = 100.0;
    assert_eq!(classify(delivered_fraction(95.0, bid)), DeliveryClass::Success);
    assert_eq!(classify(delivered_fraction(60.0, bid)), DeliveryClass::Partial);
    assert_eq!(classify(delivered_fraction(40.0, bid)), DeliveryClass::Failure);
}

#[test]
fn boundaries_are_closed_below() {
    assert_eq!(classify(0.9), DeliveryClass::Success);
    assert_eq!(classify(0.5), DeliveryClass::Partial);
    assert_eq!(classify(0.4999999), DeliveryClass::Failure);
    assert_eq!(delivered_fraction(250.0, 100.0), 1.0);
    assert_eq!(delivered_fraction(0.0, 0.0), 1.0);
    assert_eq!(delivered_fraction(-1.0, 10.0), 0.0);
}

#[test]
fn known_per_date_flex() {
    let series = parked(&[2.0, 6.0, 4.0], 14, 23);
    let g = series.grid;
    let range = DateRange::new(date(1), date(3)).unwrap();
    let study = flexibility_study(&series, &flat(), &[evening(&g)], range, &Tolerances::default()).unwrap();
    let w = &study.windows[0];
    assert!(w.failures.is_empty());
    let got: Vec<f64> = w.values();
    for (g, want) in got.iter().zip([2.0, 6.0, 4.0]) {
        assert!((g - want).abs() < 1e-6, "{got:?}");
    }
    let median = select_bid(&study, "17:30-20:00", Quantile::Median).unwrap();
    let q3 = select_bid(&study, "17:30-20:00", Quantile::Q3).unwrap();
    assert!((median - 4.0).abs() < 1e-6);
    assert!((q3 - 5.0).abs() < 1e-6);
}

#[test]
fn absent_fleet_has_zero_flex() {
    let series = parked(&[7.0, 7.0, 7.0], 1, 6);
    let g = series.grid;
    let range = DateRange::new(date(1), date(3)).unwrap();
    let study = flexibility_study(&series, &flat(), &[evening(&g)], range, &Tolerances::default()).unwrap();
    assert_eq!(study.windows[0].values(), vec![0.0; 3]);
    assert_eq!(select_bid(&study, "17:30-20:00", Quantile::Median).unwrap(), 0.0);
    assert_eq!(select_bid(&study, "17:30-20:00", Quantile::Q3).unwrap(), 0.0);
    let report = evaluate_delivery(0.0, &series, &flat(), &evening(&g), range, &Tolerances::default()).unwrap();
    assert_eq!(report.rates.success, 1.0);
}

#[test]
fn solver_failures_are_listed_not_fatal() {
    let mut series = parked(&[2.0, 2.0], 14, 23);
    // Day 2 cannot reach its departure energy.
    let day = series.days.get_mut(&date(2)).unwrap();
    let mut c_min = day.aggregate.c_min_rows().to_vec();
    let last = c_min.len() - 1;
    c_min[last] = -1000.0;
    day.aggregate = EnvelopeVector::from_blocks(
        series.grid,
        series.fleet,
        day.aggregate.p_max().to_vec(),
        day.aggregate.neg_p_min().to_vec(),
        day.aggregate.c_max_rows().to_vec(),
        c_min,
    )
    .unwrap();
    let g = series.grid;
    let range = DateRange::new(date(1), date(2)).unwrap();
    let study = flexibility_study(&series, &flat(), &[evening(&g)], range, &Tolerances::default()).unwrap();
    let w = &study.windows[0];
    assert_eq!(w.flex.len(), 1);
    assert_eq!(w.failures.len(), 1);
    assert_eq!(w.failures[0].date, date(2));
    assert!((w.summary.unwrap().median - 2.0).abs() < 1e-6);
}

#[test]
fn missing_inputs_are_errors() {
    let series = parked(&[2.0], 14, 23);
    let g = series.grid;
    let range = DateRange::new(date(1), date(2)).unwrap();
    let tol = Tolerances::default();
    assert!(flexibility_study(&series, &flat(), &[evening(&g)], range, &tol).is_err());
    let one = DateRange::new(date(1), date(1)).unwrap();
    let none = DailyPrices::PerDate(BTreeMap::new());
    assert!(matches!(
        flexibility_study(&series, &none, &[evening(&g)], one, &tol),
        Err(MarketError::MissingPrices(_))
    ));
    assert!(DateRange::new(date(2), date(1)).is_err());
    assert!(evaluate_delivery(-1.0, &series, &flat(), &evening(&g), one, &tol).is_err());
    let empty = FlexStudyResult {
        range: one,
        windows: vec![WindowStudy { window: evening(&g), flex: vec![], failures: vec![], summary: None }],
    };
    assert!(select_bid(&empty, "17:30-20:00", Quantile::Median).is_err());
    assert!(select_bid(&empty, "nope", Quantile::Median).is_err());
}

#[test]
fn reports_have_one_row_per_date() {
    let series = parked(&[2.0, 6.0, 4.0], 14, 23);
    let g = series.grid;
    let range = DateRange::new(date(1), date(3)).unwrap();
    let tol = Tolerances::default();
    let study = flexibility_study(&series, &flat(), &[evening(&g)], range, &tol).unwrap();
    let mut buf = Vec::new();
    write_study_csv(&study, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("date,window,flex_kw,error\n2017-03-01,17:30-20:00,"));

    let report = evaluate_delivery(5.0, &series, &flat(), &evening(&g), range, &tol).unwrap();
    let classes: Vec<DeliveryClass> = report.rows.iter().map(|r| r.class).collect();
    assert_eq!(classes, [DeliveryClass::Failure, DeliveryClass::Success, DeliveryClass::Partial]);
    let mut buf = Vec::new();
    write_delivery_csv(&report, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    let mut buf = Vec::new();
    write_delivery_json(&report, &mut buf).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    assert_eq!(v["success"], 1);
    assert_eq!(v["evaluated_dates"], 3);
    let mut buf = Vec::new();
    write_study_json(&study, &mut buf).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    assert_eq!(v["windows"][0]["solved_dates"], 3);
}
