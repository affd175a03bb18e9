//! Slot-indexed CSV files: prices (`slot,lambda_imp,lambda_exp`), operating
//! envelopes (`slot,p_doe_imp_kw,p_doe_exp_kw`, `inf`/`-inf` allowed) and
//! schedules (`slot,p_ch_kw,p_dis_kw,net_kw,soc_kwh`).

use std::io::{Read, Write};

use thiserror::Error;

use super::{DoeSignal, PriceSignal, Schedule};

#[derive(Debug, Error)]
pub enum ScheduleIoError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Format(String),
}

fn read_columns<R: Read>(input: R, names: [&str; 2]) -> Result<(Vec<f64>, Vec<f64>), ScheduleIoError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| ScheduleIoError::Format(format!("missing column `{name}`")))
    };
    let (slot, c0, c1) = (col("slot")?, col(names[0])?, col(names[1])?);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| {
            let raw = rec.get(c).unwrap_or("").trim();
            raw.parse::<f64>()
                .map_err(|_| ScheduleIoError::Format(format!("row {}: cannot parse `{raw}`", i + 1)))
        };
        if num(slot)? != i as f64 {
            return Err(ScheduleIoError::Format(format!("row {}: slots must count up from 0", i + 1)));
        }
        a.push(num(c0)?);
        b.push(num(c1)?);
    }
    Ok((a, b))
}

fn write_columns<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<(), ScheduleIoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for (slot, row) in rows.enumerate() {
        let mut rec = vec![slot.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_prices<R: Read>(input: R) -> Result<PriceSignal, ScheduleIoError> {
    let (lambda_imp, lambda_exp) = read_columns(input, ["lambda_imp", "lambda_exp"])?;
    if lambda_imp.iter().chain(&lambda_exp).any(|v| !v.is_finite()) {
        return Err(ScheduleIoError::Format("prices must be finite".into()));
    }
    Ok(PriceSignal { lambda_imp, lambda_exp })
}

pub fn write_prices<W: Write>(prices: &PriceSignal, out: W) -> Result<(), ScheduleIoError> {
    let rows = prices.lambda_imp.iter().zip(&prices.lambda_exp).map(|(i, e)| vec![*i, *e]);
    write_columns(out, &["slot", "lambda_imp", "lambda_exp"], rows)
}

pub fn read_doe<R: Read>(input: R) -> Result<DoeSignal, ScheduleIoError> {
    let (p_doe_imp, p_doe_exp) = read_columns(input, ["p_doe_imp_kw", "p_doe_exp_kw"])?;
    if p_doe_imp.iter().zip(&p_doe_exp).any(|(i, e)| i.is_nan() || e.is_nan() || *i < 0.0 || *e > 0.0) {
        return Err(ScheduleIoError::Format("DOE needs p_doe_exp ≤ 0 ≤ p_doe_imp".into()));
    }
    Ok(DoeSignal { p_doe_imp, p_doe_exp })
}

pub fn write_doe<W: Write>(doe: &DoeSignal, out: W) -> Result<(), ScheduleIoError> {
    let rows = doe.p_doe_imp.iter().zip(&doe.p_doe_exp).map(|(i, e)| vec![*i, *e]);
    write_columns(out, &["slot", "p_doe_imp_kw", "p_doe_exp_kw"], rows)
}

/// `energy` is the per-slot stored energy column, e.g.
/// [`Schedule::energy_shift`].
pub fn write_schedule<W: Write>(schedule: &Schedule, energy: &[f64], out: W) -> Result<(), ScheduleIoError> {
    if energy.len() != schedule.slots() {
        return Err(ScheduleIoError::Format("energy column length differs from schedule".into()));
    }
    let net = schedule.net();
    let rows = (0..schedule.slots()).map(|t| vec![schedule.p_ch[t], schedule.p_dis[t], net[t], energy[t]]);
    write_columns(out, &["slot", "p_ch_kw", "p_dis_kw", "net_kw", "soc_kwh"], rows)
}
