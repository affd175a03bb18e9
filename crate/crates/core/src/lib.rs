//! Fleet flexibility toolkit for bidirectional EV charging.
//!
//! Per-EV operational polytopes `{p | A p ≤ b}` are built from charging
//! sessions, summed into a fleet envelope, and fed to linear programs for
//! cost-optimal scheduling, sustained upward flexibility, operating-envelope
//! constrained scheduling and disaggregation back to individual vehicles.
//! The [`forecasting`] module predicts day-ahead envelopes and [`market`]
//! scores flexibility bids against historical availability.

pub mod forecasting;
pub mod ingest;
pub mod lp;
pub mod market;
pub mod polytope;
pub mod scheduling;
