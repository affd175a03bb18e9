use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use fleetflex::forecasting::{
    build_frames, chronological_split, evaluate as rmse, fit, forecast_envelope, frame_inputs, EnvelopeSeries,
    ModelKind, RidgeHyperparams, RmseReport, SLOTS_PER_DAY,
};
use fleetflex::ingest::{
    generate_synthetic_fleet, parse_sessions, sessions_to_daily_envelopes, synthetic_envelopes, write_sessions,
    CleaningReport, DailyEnvelopeSeries, DayCalendar,
};
use fleetflex::lp::Tolerances;
use fleetflex::market::{
    flexibility_study, score_bid, select_bid, write_delivery_csv, write_delivery_json, write_study_csv,
    write_study_json, DailyPrices, DateRange, DeliveryReport, Quantile, StudyWindow,
};
use fleetflex::polytope::io::{load_csv, save_csv};
use fleetflex::polytope::{build_A, check_feasible, EnvelopeVector};
use fleetflex::scheduling::{
    baseline_schedule, doe_schedule, read_doe, read_prices, write_schedule, PriceSignal, Schedule,
};
use serde::Serialize;

use crate::{CliError, QuantileArg, RunConfig, ScheduleMode};

type Result<T> = std::result::Result<T, CliError>;

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::Input(format!("cannot create {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn ingest_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("ingest")
}

fn load_series(cfg: &RunConfig) -> Result<DailyEnvelopeSeries> {
    let dir = ingest_dir(cfg);
    if !dir.join("manifest.json").exists() {
        return Err(CliError::Input(format!("no envelopes in {}; run `ingest` first", dir.display())));
    }
    Ok(DailyEnvelopeSeries::load(&dir)?)
}

fn all_dates(series: &DailyEnvelopeSeries) -> Result<DateRange> {
    match (series.dates().next(), series.dates().last()) {
        (Some(first), Some(last)) => Ok(DateRange { first, last }),
        _ => Err(CliError::Input("the ingested series has no dates".into())),
    }
}

fn prices(cfg: &RunConfig) -> Result<PriceSignal> {
    match &cfg.prices_csv {
        Some(path) => {
            let f = File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let p = read_prices(f)?;
            if p.lambda_imp.len() != cfg.grid.slots() {
                return Err(CliError::Input(format!(
                    "{}: {} price rows for a {}-slot grid",
                    path.display(),
                    p.lambda_imp.len(),
                    cfg.grid.slots()
                )));
            }
            Ok(p)
        }
        None => Ok(PriceSignal::time_of_use(&cfg.grid)),
    }
}

fn windows(cfg: &RunConfig) -> Result<Vec<StudyWindow>> {
    cfg.windows
        .iter()
        .map(|w| StudyWindow::from_hours(&cfg.grid, w.from_hour, w.to_hour).map_err(CliError::from))
        .collect()
}

fn file_label(label: &str) -> String {
    label.chars().filter(|c| c.is_ascii_alphanumeric() || *c == '-').collect()
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let syn = cfg.synthetic_config();
    // One warm-up day in front, as `ingest --synthetic` does.
    let sessions = generate_synthetic_fleet(&syn, cfg.synthetic_days + 1)?;
    let dir = cfg.out_dir.join("synth");
    create_dir(&dir)?;
    let mut w = create(&dir.join("sessions.csv"))?;
    write_sessions(&sessions, &mut w)?;
    w.flush()?;
    write_json(&dir.join("config.json"), &syn)?;
    println!("{} sessions over {} days -> {}", sessions.len(), cfg.synthetic_days + 1, dir.display());
    Ok(())
}

/// Split days whose departure energy is out of reach at full power; the
/// envelope builder clamps those (each clamp is logged at warn level).
fn clamped_targets(series: &DailyEnvelopeSeries) -> usize {
    series
        .days
        .values()
        .flat_map(|d| &d.sessions)
        .filter(|ev| ev.normalized(&series.fleet, &series.grid).1.is_some())
        .count()
}

#[derive(Serialize)]
struct IngestReport<'a> {
    source: String,
    cleaning: &'a CleaningReport,
    dates: usize,
    clamped_targets: usize,
    skipped_sessions: &'a [fleetflex::ingest::SkippedSession],
}

pub fn ingest(cfg: &RunConfig, synthetic: bool) -> Result<()> {
    let calendar = DayCalendar::new(cfg.grid, cfg.utc_offset_minutes)?;
    let (mut series, cleaning, source) = if synthetic {
        let series = synthetic_envelopes(&cfg.synthetic_config(), cfg.synthetic_days, cfg.fleet)?;
        let n: usize = series.days.values().map(|d| d.len()).sum();
        let cleaning = CleaningReport { input_rows: n, emitted: n, ..Default::default() };
        (series, cleaning, "synthetic".to_string())
    } else {
        let path = match &cfg.sessions_csv {
            Some(p) => p.clone(),
            None => cfg.out_dir.join("synth").join("sessions.csv"),
        };
        if !path.exists() {
            return Err(CliError::Input(format!("sessions file {} not found", path.display())));
        }
        let (sessions, cleaning) = parse_sessions(&path)?;
        let series = sessions_to_daily_envelopes(&sessions, cfg.fleet, &calendar)?;
        // Relative to the output directory when inside it, so reruns in
        // another directory produce the same report.
        let source = path.strip_prefix(&cfg.out_dir).unwrap_or(&path).display().to_string();
        (series, cleaning, source)
    };
    if let Some(r) = cfg.ingest_range {
        series.retain_dates(r.first, r.last);
    }
    let dir = ingest_dir(cfg);
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    series.export(&dir)?;
    let clamped = clamped_targets(&series);
    write_json(
        &dir.join("cleaning_report.json"),
        &IngestReport {
            source,
            cleaning: &cleaning,
            dates: series.len(),
            clamped_targets: clamped,
            skipped_sessions: &series.skipped,
        },
    )?;
    println!(
        "{} dates, {} sessions kept, {} dropped, {} row errors, {} unreachable day targets clamped -> {}",
        series.len(),
        cleaning.emitted,
        cleaning.dropped(),
        cleaning.row_errors.len(),
        clamped,
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct LeadReport {
    lead: usize,
    train_samples: usize,
    test_samples: usize,
    skipped_samples: usize,
    lambda_ridge: f64,
    seasonal_naive: RmseReport,
    linear_ridge: RmseReport,
    /// `1 − ridge/naive` on the average RMSE.
    improvement: f64,
    forecast_dates: Vec<NaiveDate>,
}

pub fn forecast(cfg: &RunConfig, lead: Option<usize>) -> Result<()> {
    let daily = load_series(cfg)?;
    let series = EnvelopeSeries::from_daily(&daily)?;
    let leads = lead.map_or_else(|| cfg.leads.clone(), |k| vec![k]);
    let hyper = RidgeHyperparams {
        lambda: cfg.lambda_ridge,
        candidates: cfg.lambda_candidates.clone(),
        ..Default::default()
    };
    println!("{:>4}  {:<14} {:>12} {:>12} {:>12} {:>12}", "lead", "model", "p_max_agg", "c_max_agg", "c_min_agg", "average");
    for k in leads {
        let set = build_frames(&series, k)?;
        let (train, test) = chronological_split(&set.frames, cfg.train_fraction)?;
        let naive = fit(ModelKind::SeasonalNaive, train, &hyper)?;
        let ridge = fit(ModelKind::LinearRidge, train, &hyper)?;
        let naive_rmse = rmse(&naive, test)?;
        let ridge_rmse = rmse(&ridge, test)?;
        for (name, r) in [("SeasonalNaive", &naive_rmse), ("LinearRidge", &ridge_rmse)] {
            println!(
                "{k:>4}  {name:<14} {:>12.3} {:>12.3} {:>12.3} {:>12.3}",
                r.rmse[0], r.rmse[1], r.rmse[2], r.average
            );
        }

        let dir = cfg.out_dir.join("forecast").join(format!("k{k}"));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        let env_dir = dir.join("envelopes");
        create_dir(&env_dir)?;
        fs::write(dir.join("model.json"), ridge.to_json())?;
        // Day-ahead envelopes for every date whose midnight falls in the
        // test period.
        let test_start = test.first().map_or(usize::MAX, |f| f.t);
        let mut forecast_dates = Vec::new();
        for (d, date) in daily.dates().enumerate() {
            let Some(origin) = (d * SLOTS_PER_DAY).checked_sub(k) else { continue };
            if origin < test_start || frame_inputs(&series, origin, k)?.is_none() {
                continue;
            }
            let env = forecast_envelope(&ridge, &series, origin, cfg.fleet)?;
            save_csv(&env, &env_dir.join(format!("{date}.csv")))?;
            forecast_dates.push(date);
        }
        write_json(
            &dir.join("rmse.json"),
            &LeadReport {
                lead: k,
                train_samples: train.len(),
                test_samples: test.len(),
                skipped_samples: set.skipped,
                lambda_ridge: ridge.ridge.as_ref().map_or(cfg.lambda_ridge, |r| r.lambda),
                improvement: 1.0 - ridge_rmse.average / naive_rmse.average,
                seasonal_naive: naive_rmse,
                linear_ridge: ridge_rmse,
                forecast_dates,
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ScheduleRun {
    envelope: &'static str,
    file: String,
    cost: f64,
    import_kwh: f64,
    export_kwh: f64,
    /// Largest violation of the actual envelope, kW or kWh.
    max_violation_on_actual: f64,
}

#[derive(Serialize)]
struct ScheduleSummary {
    date: NaiveDate,
    mode: &'static str,
    runs: Vec<ScheduleRun>,
}

pub fn schedule(cfg: &RunConfig, mode: ScheduleMode, date: Option<NaiveDate>, forecast_lead: Option<usize>) -> Result<()> {
    let series = load_series(cfg)?;
    let date = match date.or(cfg.schedule_date) {
        Some(d) => d,
        None => all_dates(&series)?.last,
    };
    let actual = &series
        .get(date)
        .ok_or_else(|| CliError::Input(format!("no envelope for {date}")))?
        .aggregate;
    let a = build_A(&series.fleet, &series.grid).map_err(|e| CliError::Input(e.to_string()))?;
    let prices = prices(cfg)?;
    let tol = Tolerances::default();
    let doe = match mode {
        ScheduleMode::Baseline => None,
        ScheduleMode::Doe => {
            let path = cfg
                .doe_csv
                .as_ref()
                .ok_or_else(|| CliError::Input("doe mode needs `doe_csv` in the config".into()))?;
            let f = File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            Some(read_doe(f)?)
        }
    };
    let mode_name = match mode {
        ScheduleMode::Baseline => "baseline",
        ScheduleMode::Doe => "doe",
    };

    let mut envelopes: Vec<(&'static str, EnvelopeVector)> = vec![("actual", actual.clone())];
    if let Some(k) = forecast_lead {
        let path = cfg.out_dir.join("forecast").join(format!("k{k}")).join("envelopes").join(format!("{date}.csv"));
        if !path.exists() {
            return Err(CliError::Input(format!("no forecast envelope {}; run `forecast` first", path.display())));
        }
        envelopes.push(("forecast", load_csv(&path, series.fleet, series.grid.slot_hours())?));
    }

    let dir = cfg.out_dir.join("schedule");
    create_dir(&dir)?;
    let dt = series.grid.slot_hours();
    let mut runs = Vec::new();
    for (name, env) in &envelopes {
        let s: Schedule = match &doe {
            None => baseline_schedule(env, &a, &prices, &tol)?,
            Some(doe) => doe_schedule(env, &a, &prices, doe, &tol)?,
        };
        let file = format!("{date}_{mode_name}_{name}.csv");
        let mut w = create(&dir.join(&file))?;
        write_schedule(&s, &s.energy_shift(&a), &mut w)?;
        w.flush()?;
        let report = check_feasible(&a, actual, &s.stacked(), tol.feas).map_err(|e| CliError::Input(e.to_string()))?;
        let net = s.net();
        runs.push(ScheduleRun {
            envelope: name,
            file,
            cost: s.cost(&prices, dt),
            import_kwh: net.iter().filter(|p| **p > 0.0).sum::<f64>() * dt,
            export_kwh: -net.iter().filter(|p| **p < 0.0).sum::<f64>() * dt,
            max_violation_on_actual: report.max_violation.max(0.0),
        });
    }
    for r in &runs {
        println!("{date} {mode_name} on {} envelope: cost {:.4}", r.envelope, r.cost);
    }
    write_json(&dir.join(format!("{date}_{mode_name}.json")), &ScheduleSummary { date, mode: mode_name, runs })
}

#[derive(Serialize)]
struct TableRow {
    window: String,
    quantile: Quantile,
    bid_kw: f64,
    evaluated_dates: usize,
    success: f64,
    partial: f64,
    failure: f64,
}

fn write_delivery(dir: &Path, stem: &str, report: &DeliveryReport) -> Result<()> {
    let mut w = create(&dir.join(format!("{stem}.csv")))?;
    write_delivery_csv(report, &mut w)?;
    w.flush()?;
    let mut w = create(&dir.join(format!("{stem}.json")))?;
    write_delivery_json(report, &mut w)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn flex(cfg: &RunConfig, quantile: Option<QuantileArg>) -> Result<()> {
    let series = load_series(cfg)?;
    let prices = DailyPrices::Uniform(prices(cfg)?);
    let windows = windows(cfg)?;
    let tol = Tolerances::default();
    let selected = match quantile {
        Some(QuantileArg::Median) => Quantile::Median,
        Some(QuantileArg::Q3) => Quantile::Q3,
        None => cfg.quantile,
    };
    let study_range = match cfg.study_range {
        Some(r) => r,
        None => all_dates(&series)?,
    };
    let study = flexibility_study(&series, &prices, &windows, study_range, &tol)?;

    let dir = cfg.out_dir.join("flex");
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    create_dir(&dir)?;
    let mut w = create(&dir.join("study.csv"))?;
    write_study_csv(&study, &mut w)?;
    w.flush()?;
    let mut w = create(&dir.join("study.json"))?;
    write_study_json(&study, &mut w)?;
    w.write_all(b"\n")?;
    w.flush()?;

    let mut bids = Vec::new();
    for ws in &study.windows {
        if let Some(s) = ws.summary {
            println!(
                "{}: {} dates, Q1 {:.3} median {:.3} Q3 {:.3} kW, {} failed",
                ws.window.label,
                ws.flex.len(),
                s.q1,
                s.median,
                s.q3,
                ws.failures.len()
            );
            bids.push((ws.window.label.clone(), select_bid(&study, &ws.window.label, selected)?));
        } else {
            println!("{}: no solved dates", ws.window.label);
        }
    }
    write_json(&dir.join("bids.json"), &serde_json::json!({ "quantile": selected, "bids_kw": bids }))?;

    let Some(eval_range) = cfg.evaluation_range else { return Ok(()) };
    let eval = flexibility_study(&series, &prices, &windows, eval_range, &tol)?;
    let mut table = Vec::new();
    for (ws, ev) in study.windows.iter().zip(&eval.windows) {
        if ws.summary.is_none() || ev.flex.is_empty() {
            continue;
        }
        for q in [Quantile::Median, Quantile::Q3] {
            let bid = select_bid(&study, &ws.window.label, q)?;
            let report = score_bid(&ev.window, bid, &ev.flex, ev.failures.clone())?;
            if q == selected {
                write_delivery(&dir, &format!("delivery_{}", file_label(&ws.window.label)), &report)?;
            }
            println!(
                "{} {:?} bid {:.3} kW: success {:.1}% partial {:.1}% failure {:.1}%",
                ws.window.label,
                q,
                bid,
                100.0 * report.rates.success,
                100.0 * report.rates.partial,
                100.0 * report.rates.failure
            );
            table.push(TableRow {
                window: ws.window.label.clone(),
                quantile: q,
                bid_kw: bid,
                evaluated_dates: report.rows.len(),
                success: report.rates.success,
                partial: report.rates.partial,
                failure: report.rates.failure,
            });
        }
    }
    write_json(&dir.join("table.json"), &table)
}

pub fn evaluate(cfg: &RunConfig, bid: f64, window: Option<&str>) -> Result<()> {
    if !(bid >= 0.0 && bid.is_finite()) {
        return Err(CliError::Input(format!("--bid must be a finite value ≥ 0, got {bid}")));
    }
    let series = load_series(cfg)?;
    let prices = DailyPrices::Uniform(prices(cfg)?);
    let mut windows = windows(cfg)?;
    if let Some(label) = window {
        windows.retain(|w| w.label == label);
        if windows.is_empty() {
            return Err(CliError::Input(format!("no configured window is labelled {label}")));
        }
    }
    let range = match cfg.evaluation_range {
        Some(r) => r,
        None => all_dates(&series)?,
    };
    let eval = flexibility_study(&series, &prices, &windows, range, &Tolerances::default())?;
    let dir = cfg.out_dir.join("evaluate");
    create_dir(&dir)?;
    for ev in &eval.windows {
        let report = score_bid(&ev.window, bid, &ev.flex, ev.failures.clone())?;
        write_delivery(&dir, &format!("delivery_{}", file_label(&ev.window.label)), &report)?;
        println!(
            "{} bid {bid} kW over {} dates: success {:.1}% partial {:.1}% failure {:.1}%",
            ev.window.label,
            report.rows.len(),
            100.0 * report.rates.success,
            100.0 * report.rates.partial,
            100.0 * report.rates.failure
        );
    }
    Ok(())
}
