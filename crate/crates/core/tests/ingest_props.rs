use chrono::{Duration, TimeZone, Utc};
use fleetflex::ingest::{
    generate_synthetic_fleet, sessions_to_daily_envelopes, split_multiday, ChargingSession, DayCalendar,
    SyntheticFleetConfig,
};
use fleetflex::polytope::{FleetParams, TimeGrid};
use proptest::prelude::*;

fn session(start_min: i64, minutes: i64, c_arr: f64, c_dep: f64) -> ChargingSession {
    let t0 = Utc.with_ymd_and_hms(2018, 1, 1, 0, 0, 0).unwrap();
    ChargingSession {
        ev_id: "x".into(),
        plug_in: t0 + Duration::minutes(start_min),
        plug_out: t0 + Duration::minutes(start_min + minutes),
        c_cons: 0.0,
        c_max: 100.0,
        p_max: 7.0,
        p_min: None,
        c_arr: Some(c_arr),
        c_dep: Some(c_dep),
    }
}

proptest! {
    #[test]
    fn split_days_chain_energies_and_stay_on_grid(
        start in 0i64..2880,
        minutes in 15i64..6000,
        c_arr in 0.0f64..50.0,
        extra in 0.0f64..50.0,
        offset in -720i32..=720,
    ) {
        let cal = DayCalendar::new(TimeGrid::default(), offset).unwrap();
        let s = session(start, minutes, c_arr, c_arr + extra);
        let days = split_multiday(&s, &cal).unwrap();
        prop_assert_eq!(days[0].1.c_arr, c_arr);
        prop_assert_eq!(days.last().unwrap().1.c_dep, c_arr + extra);
        for w in days.windows(2) {
            prop_assert_eq!(w[1].1.c_arr, w[0].1.c_dep);
            prop_assert_eq!(w[1].0, w[0].0.succ_opt().unwrap());
        }
        for (_, ev) in &days {
            prop_assert!(ev.t_arr < ev.t_dep && ev.t_dep <= 96);
        }
        // Slot counts add up to the floored/ceiled span.
        let n: usize = days.iter().map(|(_, e)| e.t_dep - e.t_arr).sum();
        prop_assert_eq!(n as i64, cal.ceil_slot(&s.plug_out) - cal.floor_slot(&s.plug_in));
    }
}

#[test]
fn daily_envelopes_distribute_over_session_partitions() {
    let cfg = SyntheticFleetConfig {
        n_evs: 120,
        ..Default::default()
    };
    let sessions = generate_synthetic_fleet(&cfg, 10).unwrap();
    let cal = DayCalendar::new(TimeGrid::default(), 0).unwrap();
    let fleet = FleetParams::default();
    let (xs, ys) = sessions.split_at(sessions.len() / 3);
    let whole = sessions_to_daily_envelopes(&sessions, fleet, &cal).unwrap();
    let a = sessions_to_daily_envelopes(xs, fleet, &cal).unwrap();
    let b = sessions_to_daily_envelopes(ys, fleet, &cal).unwrap();
    for (date, day) in &whole.days {
        let mut sum = vec![0.0; 6 * 96];
        for part in [&a, &b] {
            if let Some(d) = part.get(*date) {
                for (s, v) in sum.iter_mut().zip(d.aggregate.to_b()) {
                    *s += v;
                }
            }
        }
        for (w, s) in day.aggregate.to_b().iter().zip(&sum) {
            assert!((w - s).abs() <= 1e-9 * (1.0 + w.abs()), "{date}");
        }
    }
}
