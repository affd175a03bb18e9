//! CSV rows per date and JSON summaries.

use std::io::Write;

use serde::Serialize;

use super::{ClassRates, DateFailure, DateRange, DeliveryClass, DeliveryReport, FlexStudyResult, Result, Summary};

pub fn write_study_csv<W: Write>(result: &FlexStudyResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "window", "flex_kw", "error"])?;
    for study in &result.windows {
        let mut rows: Vec<(String, String, String)> = study
            .flex
            .iter()
            .map(|(d, v)| (d.to_string(), v.to_string(), String::new()))
            .chain(study.failures.iter().map(|f| (f.date.to_string(), String::new(), f.message.clone())))
            .collect();
        rows.sort();
        for (date, flex, err) in rows {
            w.write_record([date.as_str(), study.window.label.as_str(), &flex, &err])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct StudySummary<'a> {
    range: DateRange,
    windows: Vec<WindowSummary<'a>>,
}

#[derive(Serialize)]
struct WindowSummary<'a> {
    label: &'a str,
    start_slot: usize,
    end_slot: usize,
    solved_dates: usize,
    summary: Option<Summary>,
    failures: &'a [DateFailure],
}

pub fn write_study_json<W: Write>(result: &FlexStudyResult, out: W) -> Result<()> {
    let doc = StudySummary {
        range: result.range,
        windows: result
            .windows
            .iter()
            .map(|s| WindowSummary {
                label: &s.window.label,
                start_slot: s.window.window.start,
                end_slot: s.window.window.end,
                solved_dates: s.flex.len(),
                summary: s.summary,
                failures: &s.failures,
            })
            .collect(),
    };
    serde_json::to_writer_pretty(out, &doc)?;
    Ok(())
}

pub fn write_delivery_csv<W: Write>(report: &DeliveryReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "window", "bid_kw", "available_kw", "fraction", "class"])?;
    for r in &report.rows {
        w.write_record([
            r.date.to_string(),
            report.window.label.clone(),
            report.bid.to_string(),
            r.available.to_string(),
            r.fraction.to_string(),
            format!("{:?}", r.class),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct DeliverySummary<'a> {
    window: &'a str,
    bid_kw: f64,
    evaluated_dates: usize,
    success: usize,
    partial: usize,
    failure: usize,
    rates: ClassRates,
    failed_solves: &'a [DateFailure],
}

pub fn write_delivery_json<W: Write>(report: &DeliveryReport, out: W) -> Result<()> {
    let count = |c: DeliveryClass| report.rows.iter().filter(|r| r.class == c).count();
    let doc = DeliverySummary {
        window: &report.window.label,
        bid_kw: report.bid,
        evaluated_dates: report.rows.len(),
        success: count(DeliveryClass::Success),
        partial: count(DeliveryClass::Partial),
        failure: count(DeliveryClass::Failure),
        rates: report.rates,
        failed_solves: &report.failures,
    };
    serde_json::to_writer_pretty(out, &doc)?;
    Ok(())
}
