use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use fleetflex::ingest::SyntheticFleetConfig;
use fleetflex::market::{DateRange, Quantile};
use fleetflex::polytope::{FleetParams, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A flexibility window in hours of the day, end exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowHours {
    pub from_hour: f64,
    pub to_hour: f64,
}

/// Everything a run needs. Missing keys take their defaults; unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Sessions for `ingest`; falls back to `<out>/synth/sessions.csv`.
    pub sessions_csv: Option<PathBuf>,
    /// Per-slot import/export prices; the built-in time-of-use tariff
    /// otherwise.
    pub prices_csv: Option<PathBuf>,
    pub doe_csv: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub grid: TimeGrid,
    pub fleet: FleetParams,
    pub utc_offset_minutes: i32,
    pub synthetic: SyntheticFleetConfig,
    pub synthetic_days: usize,
    /// Keep only these dates after ingest.
    pub ingest_range: Option<DateRange>,
    pub leads: Vec<usize>,
    pub train_fraction: f64,
    pub lambda_ridge: f64,
    /// Validation picks among these when non-empty.
    pub lambda_candidates: Vec<f64>,
    pub windows: Vec<WindowHours>,
    pub study_range: Option<DateRange>,
    pub evaluation_range: Option<DateRange>,
    pub quantile: Quantile,
    /// Date for `schedule`; the last ingested date otherwise.
    pub schedule_date: Option<NaiveDate>,
    /// Seed of the synthetic fleet; overrides `synthetic.rng_seed`.
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sessions_csv: None,
            prices_csv: None,
            doe_csv: None,
            out_dir: PathBuf::from("out"),
            grid: TimeGrid::default(),
            fleet: FleetParams::default(),
            utc_offset_minutes: 0,
            synthetic: SyntheticFleetConfig::default(),
            synthetic_days: 84,
            ingest_range: None,
            leads: vec![1, 4, 48],
            train_fraction: 0.9,
            lambda_ridge: 1.0,
            lambda_candidates: Vec::new(),
            windows: vec![
                WindowHours { from_hour: 17.5, to_hour: 20.0 },
                WindowHours { from_hour: 15.0, to_hour: 17.0 },
            ],
            study_range: None,
            evaluation_range: None,
            quantile: Quantile::Median,
            schedule_date: None,
            seed: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Checks values serde cannot, before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Input(m));
        TimeGrid::new(self.grid.slots(), self.grid.slot_hours()).map_err(|e| CliError::Input(format!("grid: {e}")))?;
        self.fleet.validate().map_err(|e| CliError::Input(format!("fleet: {e}")))?;
        self.synthetic.validate().map_err(|e| CliError::Input(format!("synthetic: {e}")))?;
        if self.synthetic_days == 0 {
            return bad("synthetic_days must be positive".into());
        }
        if self.leads.is_empty() || self.leads.iter().any(|k| *k == 0) {
            return bad("leads must be a non-empty list of positive integers".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if !(self.lambda_ridge >= 0.0) || self.lambda_candidates.iter().any(|l| !(*l >= 0.0)) {
            return bad("ridge penalties must be ≥ 0".into());
        }
        if self.windows.is_empty() {
            return bad("at least one window is needed".into());
        }
        for r in [self.ingest_range, self.study_range, self.evaluation_range].into_iter().flatten() {
            if r.last < r.first {
                return bad(format!("date range {}..{} is empty", r.first, r.last));
            }
        }
        Ok(())
    }

    /// Synthetic fleet settings with the effective seed applied.
    pub fn synthetic_config(&self) -> SyntheticFleetConfig {
        let mut cfg = self.synthetic.clone();
        if let Some(seed) = self.seed {
            cfg.rng_seed = seed;
        }
        cfg.utc_offset_minutes = self.utc_offset_minutes;
        cfg
    }
}
