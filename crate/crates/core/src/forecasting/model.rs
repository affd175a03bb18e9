use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    forecast_to_envelope, frame_inputs, EnvelopeSeries, ForecastError, ForecastFrame, Result, RidgeRegression,
    FEATURES, SLOTS_PER_DAY, TARGETS, VARIABLES, VARIABLE_NAMES, VARIABLE_UNITS,
};
use crate::polytope::{EnvelopeVector, FleetParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Repeats the same 96 slots from one week earlier.
    SeasonalNaive,
    LinearRidge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RidgeHyperparams {
    /// Penalty used when `candidates` is empty.
    pub lambda: f64,
    /// Penalties tried on a time-ordered validation tail of the training
    /// frames; the best one is refit on all of them.
    pub candidates: Vec<f64>,
    pub validation_fraction: f64,
}

impl Default for RidgeHyperparams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            candidates: Vec::new(),
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastModel {
    pub version: u32,
    pub kind: ModelKind,
    pub lead: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<RidgeRegression>,
}

impl ForecastModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| ForecastError::Layout(e.to_string()))?;
        if m.version != MODEL_FORMAT_VERSION {
            return Err(ForecastError::Layout(format!("unsupported model version {}", m.version)));
        }
        super::check_lead(m.lead)?;
        match (&m.kind, &m.ridge) {
            (ModelKind::SeasonalNaive, None) => {}
            (ModelKind::LinearRidge, Some(r))
                if r.n_features() == FEATURES
                    && r.n_targets() == TARGETS
                    && r.feature_scale.len() == FEATURES
                    && r.weights.len() == FEATURES * TARGETS => {}
            _ => return Err(ForecastError::Layout("model parameters do not match its kind".into())),
        }
        Ok(m)
    }
}

fn matrices(frames: &[ForecastFrame]) -> (DMatrix<f64>, DMatrix<f64>) {
    let x = DMatrix::from_fn(frames.len(), FEATURES, |r, c| frames[r].features[c]);
    let y = DMatrix::from_fn(frames.len(), TARGETS, |r, c| frames[r].target[c]);
    (x, y)
}

fn check_frames(frames: &[ForecastFrame], lead: usize) -> Result<()> {
    for f in frames {
        if f.lead != lead || f.features.len() != FEATURES || f.target.len() != TARGETS || f.last_week.len() != TARGETS {
            return Err(ForecastError::Layout(format!(
                "frame at {} does not match lead {lead} and the feature layout",
                f.t
            )));
        }
    }
    Ok(())
}

pub fn fit(kind: ModelKind, frames: &[ForecastFrame], hyper: &RidgeHyperparams) -> Result<ForecastModel> {
    let lead = frames
        .first()
        .ok_or_else(|| ForecastError::Input("no training frames".into()))?
        .lead;
    check_frames(frames, lead)?;
    let ridge = match kind {
        ModelKind::SeasonalNaive => None,
        ModelKind::LinearRidge => {
            let lambda = if hyper.candidates.is_empty() {
                hyper.lambda
            } else {
                select_lambda(frames, hyper)?
            };
            let (x, y) = matrices(frames);
            Some(RidgeRegression::fit(&x, &y, lambda)?)
        }
    };
    Ok(ForecastModel {
        version: MODEL_FORMAT_VERSION,
        kind,
        lead,
        ridge,
    })
}

fn select_lambda(frames: &[ForecastFrame], hyper: &RidgeHyperparams) -> Result<f64> {
    let (train, valid) = chronological_split(frames, 1.0 - hyper.validation_fraction)?;
    let (x, y) = matrices(train);
    let (xv, yv) = matrices(valid);
    let mut best = (f64::INFINITY, hyper.lambda);
    for &lambda in &hyper.candidates {
        let model = match RidgeRegression::fit(&x, &y, lambda) {
            Ok(m) => m,
            Err(ForecastError::RankDeficient) => continue,
            Err(e) => return Err(e),
        };
        let mse = model.mse(&xv, &yv)?;
        log::debug!("ridge λ = {lambda}: validation MSE {mse:.6}");
        if mse < best.0 {
            best = (mse, lambda);
        }
    }
    Ok(best.1)
}

/// `96 × 3` step-major forecast for one frame, with negative `P_max` and
/// `C_max` values clamped to zero.
pub fn predict(model: &ForecastModel, frame: &ForecastFrame) -> Result<Vec<f64>> {
    check_frames(std::slice::from_ref(frame), model.lead)?;
    predict_inputs(model, &frame.features, &frame.last_week)
}

fn predict_inputs(model: &ForecastModel, features: &[f64], last_week: &[f64]) -> Result<Vec<f64>> {
    let mut out = match (&model.kind, &model.ridge) {
        (ModelKind::SeasonalNaive, _) => last_week.to_vec(),
        (ModelKind::LinearRidge, Some(r)) => r.predict_one(features)?,
        (ModelKind::LinearRidge, None) => return Err(ForecastError::Layout("ridge model without parameters".into())),
    };
    for step in out.chunks_mut(VARIABLES) {
        step[0] = step[0].max(0.0);
        step[1] = step[1].max(0.0);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub variables: Vec<String>,
    pub units: Vec<String>,
    /// Pooled over every test sample and all 96 steps.
    pub rmse: [f64; 3],
    pub average: f64,
    pub samples: usize,
}

pub fn evaluate(model: &ForecastModel, frames: &[ForecastFrame]) -> Result<RmseReport> {
    if frames.is_empty() {
        return Err(ForecastError::Input("no test frames".into()));
    }
    let mut sq = [0.0; 3];
    for f in frames {
        let pred = predict(model, f)?;
        for (i, (p, y)) in pred.iter().zip(&f.target).enumerate() {
            sq[i % VARIABLES] += (p - y) * (p - y);
        }
    }
    let count = (frames.len() * SLOTS_PER_DAY) as f64;
    let rmse = sq.map(|s| (s / count).sqrt());
    Ok(RmseReport {
        variables: VARIABLE_NAMES.iter().map(|s| s.to_string()).collect(),
        units: VARIABLE_UNITS.iter().map(|s| s.to_string()).collect(),
        rmse,
        average: rmse.iter().sum::<f64>() / 3.0,
        samples: frames.len(),
    })
}

/// First `⌊n·train_fraction⌋` frames for training, the rest for testing.
pub fn chronological_split(frames: &[ForecastFrame], train_fraction: f64) -> Result<(&[ForecastFrame], &[ForecastFrame])> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(ForecastError::Input(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let cut = (frames.len() as f64 * train_fraction + 1e-9).floor() as usize;
    if cut == 0 || cut == frames.len() {
        return Err(ForecastError::Input(format!(
            "{} frames cannot be split {train_fraction} / {}",
            frames.len(),
            1.0 - train_fraction
        )));
    }
    Ok(frames.split_at(cut))
}

/// Envelope forecast for the 96 slots starting at `origin + lead`.
pub fn forecast_envelope(
    model: &ForecastModel,
    series: &EnvelopeSeries,
    origin: usize,
    fleet: FleetParams,
) -> Result<EnvelopeVector> {
    let (features, last_week) = frame_inputs(series, origin, model.lead)?
        .ok_or_else(|| ForecastError::Input(format!("history of origin {origin} contains gaps")))?;
    forecast_to_envelope(&predict_inputs(model, &features, &last_week)?, fleet)
}
