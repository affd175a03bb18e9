//! Envelope interchange formats.
//!
//! CSV: header `slot,p_max,neg_p_min,c_max_row,c_min_row`, one row per slot.
//! The CSV carries no metadata, so readers supply the fleet parameters and
//! slot length. JSON: an [`EnvelopeDocument`] with the grid and fleet.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EnvelopeVector, FleetParams, PolytopeError, TimeGrid};

pub const ENVELOPE_CSV_HEADER: [&str; 5] = ["slot", "p_max", "neg_p_min", "c_max_row", "c_min_row"];
pub const ENVELOPE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EnvelopeIoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad envelope file: {0}")]
    Format(String),
    #[error(transparent)]
    Envelope(#[from] PolytopeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeDocument {
    pub version: u32,
    pub grid: TimeGrid,
    pub fleet: FleetParams,
    pub p_max: Vec<f64>,
    pub neg_p_min: Vec<f64>,
    pub c_max_row: Vec<f64>,
    pub c_min_row: Vec<f64>,
}

impl From<&EnvelopeVector> for EnvelopeDocument {
    fn from(e: &EnvelopeVector) -> Self {
        Self {
            version: ENVELOPE_FORMAT_VERSION,
            grid: *e.grid(),
            fleet: *e.fleet(),
            p_max: e.p_max().to_vec(),
            neg_p_min: e.neg_p_min().to_vec(),
            c_max_row: e.c_max_rows().to_vec(),
            c_min_row: e.c_min_rows().to_vec(),
        }
    }
}

impl TryFrom<EnvelopeDocument> for EnvelopeVector {
    type Error = EnvelopeIoError;

    fn try_from(d: EnvelopeDocument) -> Result<Self, Self::Error> {
        if d.version != ENVELOPE_FORMAT_VERSION {
            return Err(EnvelopeIoError::Format(format!(
                "unsupported envelope version {}",
                d.version
            )));
        }
        d.fleet.validate()?;
        TimeGrid::new(d.grid.slots(), d.grid.slot_hours())?;
        Ok(EnvelopeVector::from_blocks(
            d.grid,
            d.fleet,
            d.p_max,
            d.neg_p_min,
            d.c_max_row,
            d.c_min_row,
        )?)
    }
}

pub fn write_csv<W: Write>(env: &EnvelopeVector, out: W) -> Result<(), EnvelopeIoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ENVELOPE_CSV_HEADER)?;
    for t in 0..env.slots() {
        w.write_record([
            t.to_string(),
            env.p_max()[t].to_string(),
            env.neg_p_min()[t].to_string(),
            env.c_max_rows()[t].to_string(),
            env.c_min_rows()[t].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(
    input: R,
    fleet: FleetParams,
    slot_hours: f64,
) -> Result<EnvelopeVector, EnvelopeIoError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let idx = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| EnvelopeIoError::Format(format!("missing column `{name}`")))
    };
    let cols = [
        idx("slot")?,
        idx("p_max")?,
        idx("neg_p_min")?,
        idx("c_max_row")?,
        idx("c_min_row")?,
    ];
    let mut blocks: [Vec<f64>; 4] = Default::default();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| -> Result<f64, EnvelopeIoError> {
            let raw = rec.get(c).unwrap_or("").trim();
            raw.parse::<f64>().map_err(|_| {
                EnvelopeIoError::Format(format!("row {}: cannot parse `{raw}`", line + 1))
            })
        };
        let slot = field(cols[0])?;
        if slot != line as f64 {
            return Err(EnvelopeIoError::Format(format!(
                "row {}: expected slot {line}, found {slot}",
                line + 1
            )));
        }
        for (k, block) in blocks.iter_mut().enumerate() {
            block.push(field(cols[k + 1])?);
        }
    }
    let grid = TimeGrid::new(blocks[0].len(), slot_hours)?;
    let [p_max, neg_p_min, c_max, c_min] = blocks;
    Ok(EnvelopeVector::from_blocks(
        grid, fleet, p_max, neg_p_min, c_max, c_min,
    )?)
}

pub fn write_json<W: Write>(env: &EnvelopeVector, out: W) -> Result<(), EnvelopeIoError> {
    serde_json::to_writer_pretty(out, &EnvelopeDocument::from(env))?;
    Ok(())
}

pub fn read_json<R: Read>(input: R) -> Result<EnvelopeVector, EnvelopeIoError> {
    let doc: EnvelopeDocument = serde_json::from_reader(input)?;
    doc.try_into()
}

pub fn save_csv(env: &EnvelopeVector, path: &Path) -> Result<(), EnvelopeIoError> {
    write_csv(env, std::fs::File::create(path)?)
}

pub fn load_csv(path: &Path, fleet: FleetParams, slot_hours: f64) -> Result<EnvelopeVector, EnvelopeIoError> {
    read_csv(std::fs::File::open(path)?, fleet, slot_hours)
}
