//! Cost-optimal fleet schedules, sustained upward flexibility, operating
//! envelope limits and disaggregation to individual vehicles.
//!
//! All problems are linear programs over `p = [p_ch; p_dis]`. The power
//! rows of `A` are single-variable bounds, so they enter the solver as
//! variable bounds; the energy rows stay general rows. Costs are
//! `Σ_t (λ_imp·p_ch + λ_exp·p_dis)·δt`, so discharging (`p_dis ≤ 0`) earns
//! the export price.

mod io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{self, LinearProgram, LpError, LpSolution, LpStatus, Tolerances};
use crate::polytope::{check_feasible, ConstraintMatrix, EnvelopeVector, PolytopeError, TimeGrid};

pub use io::{
    read_doe, read_prices, write_doe, write_prices, write_schedule, ScheduleIoError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("envelope is infeasible: row {worst_row} needs {violation:.6} more")]
    Infeasible { worst_row: usize, violation: f64 },
    #[error("operating envelope makes the schedule infeasible; binding slots {slots:?}")]
    DoeInfeasible { slots: Vec<usize> },
    #[error("polytope of EV {index} is empty (row {worst_row} short by {violation:.6})")]
    EmptyIndividual { index: usize, worst_row: usize, violation: f64 },
    #[error("{0}")]
    Input(String),
    #[error("solver returned an unbounded problem")]
    Unbounded,
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

pub type Result<T> = std::result::Result<T, ScheduleError>;

/// Import and export prices per kWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSignal {
    pub lambda_imp: Vec<f64>,
    pub lambda_exp: Vec<f64>,
}

impl PriceSignal {
    pub fn flat(slots: usize, imp: f64, exp: f64) -> Self {
        Self {
            lambda_imp: vec![imp; slots],
            lambda_exp: vec![exp; slots],
        }
    }

    /// Three-rate import tariff (night / day / 16–20 h peak) with a flat
    /// export price below every import rate.
    pub fn time_of_use(grid: &TimeGrid) -> Self {
        let lambda_imp = (0..grid.slots())
            .map(|r| {
                let hour = r as f64 * grid.slot_hours();
                if hour < 7.0 {
                    0.12
                } else if (16.0..20.0).contains(&hour) {
                    0.35
                } else {
                    0.22
                }
            })
            .collect();
        Self {
            lambda_imp,
            lambda_exp: vec![0.05; grid.slots()],
        }
    }

    fn check(&self, slots: usize) -> Result<()> {
        if self.lambda_imp.len() != slots || self.lambda_exp.len() != slots {
            return Err(ScheduleError::Input(format!(
                "price vectors have {} / {} entries, grid has {slots} slots",
                self.lambda_imp.len(),
                self.lambda_exp.len()
            )));
        }
        if self.lambda_imp.iter().chain(&self.lambda_exp).any(|v| !v.is_finite()) {
            return Err(ScheduleError::Input("non-finite price".into()));
        }
        Ok(())
    }
}

/// Import ceiling (≥ 0) and export floor (≤ 0) per slot, kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoeSignal {
    pub p_doe_imp: Vec<f64>,
    pub p_doe_exp: Vec<f64>,
}

impl DoeSignal {
    pub fn unlimited(slots: usize) -> Self {
        Self {
            p_doe_imp: vec![f64::INFINITY; slots],
            p_doe_exp: vec![f64::NEG_INFINITY; slots],
        }
    }

    fn check(&self, slots: usize) -> Result<()> {
        if self.p_doe_imp.len() != slots || self.p_doe_exp.len() != slots {
            return Err(ScheduleError::Input(format!(
                "DOE vectors have {} / {} entries, grid has {slots} slots",
                self.p_doe_imp.len(),
                self.p_doe_exp.len()
            )));
        }
        if self.p_doe_imp.iter().zip(&self.p_doe_exp).any(|(i, e)| !(*e <= 0.0 && 0.0 <= *i)) {
            return Err(ScheduleError::Input("DOE needs p_doe_exp ≤ 0 ≤ p_doe_imp".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub p_ch: Vec<f64>,
    pub p_dis: Vec<f64>,
}

impl Schedule {
    pub fn zeros(slots: usize) -> Self {
        Self {
            p_ch: vec![0.0; slots],
            p_dis: vec![0.0; slots],
        }
    }

    pub fn from_stacked(p: &[f64]) -> Self {
        let t = p.len() / 2;
        Self {
            p_ch: p[..t].to_vec(),
            p_dis: p[t..2 * t].to_vec(),
        }
    }

    pub fn slots(&self) -> usize {
        self.p_ch.len()
    }

    /// `[p_ch; p_dis]`.
    pub fn stacked(&self) -> Vec<f64> {
        self.p_ch.iter().chain(&self.p_dis).copied().collect()
    }

    pub fn net(&self) -> Vec<f64> {
        self.p_ch.iter().zip(&self.p_dis).map(|(c, d)| c + d).collect()
    }

    pub fn cost(&self, prices: &PriceSignal, slot_hours: f64) -> f64 {
        (0..self.slots())
            .map(|t| (prices.lambda_imp[t] * self.p_ch[t] + prices.lambda_exp[t] * self.p_dis[t]) * slot_hours)
            .sum()
    }

    /// Stored energy relative to the zero-power trajectory after each slot,
    /// `Γ (η_in p_ch + η_out p_dis) δt`.
    pub fn energy_shift(&self, a: &ConstraintMatrix) -> Vec<f64> {
        let t = self.slots();
        let stacked = self.stacked();
        (0..t)
            .map(|r| a.row(4 * t + r).iter().zip(&stacked).map(|(x, y)| x * y).sum())
            .collect()
    }
}

/// Inclusive slot range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlexWindow {
    pub start: usize,
    pub end: usize,
}

impl FlexWindow {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    /// Slots overlapping `[from_hour, to_hour)`; 17.5–20 h on a 15-minute
    /// grid is slots 70 through 79.
    pub fn from_hours(grid: &TimeGrid, from_hour: f64, to_hour: f64) -> Result<Self> {
        let dt = grid.slot_hours();
        let start = (from_hour / dt + 1e-9).floor();
        let end = (to_hour / dt - 1e-9).ceil() - 1.0;
        if !(from_hour >= 0.0 && to_hour > from_hour && end < grid.slots() as f64) {
            return Err(ScheduleError::Input(format!(
                "window {from_hour} h – {to_hour} h outside the {} h horizon",
                grid.horizon_hours()
            )));
        }
        Ok(Self::new(start as usize, end as usize))
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn slots(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexResult {
    /// Sustained reduction of net power below the baseline, kW.
    pub flex: f64,
    pub schedule: Schedule,
    pub window: FlexWindow,
}

fn check_inputs(b: &EnvelopeVector, a: &ConstraintMatrix) -> Result<usize> {
    if a.grid() != b.grid() || a.fleet() != b.fleet() {
        return Err(ScheduleError::Input(
            "constraint matrix and envelope describe different grids or fleets".into(),
        ));
    }
    Ok(b.slots())
}

/// Adds one polytope's variables (at column `offset`) to `lp`: power rows as
/// bounds, energy rows as general rows.
fn add_polytope(lp: &mut LinearProgram, offset: usize, a: &ConstraintMatrix, b: &EnvelopeVector) -> Result<()> {
    let t = b.slots();
    for r in 0..t {
        lp.set_bounds(offset + r, 0.0, b.p_max()[r])?;
        lp.set_bounds(offset + t + r, 0.0 - b.neg_p_min()[r], 0.0)?;
    }
    let rhs = b.to_b();
    for row in 4 * t..6 * t {
        let terms: Vec<(usize, f64)> = a
            .row(row)
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (offset + j, *v))
            .collect();
        lp.add_sparse_row(&terms, rhs[row])?;
    }
    Ok(())
}

fn solve_checked(lp: &LinearProgram, tol: &Tolerances) -> Result<LpSolution> {
    let sol = lp::solve(lp, tol)?;
    if sol.status == LpStatus::Unbounded {
        return Err(ScheduleError::Unbounded);
    }
    Ok(sol)
}

/// Smallest total violation of the energy rows; `Err` if already feasible.
fn locate_infeasibility(a: &ConstraintMatrix, b: &EnvelopeVector, tol: &Tolerances) -> Result<(usize, f64)> {
    let t = b.slots();
    let n = 2 * t;
    let mut lp = LinearProgram::new([vec![0.0; n], vec![1.0; 2 * t]].concat());
    for r in 0..t {
        lp.set_bounds(r, 0.0, b.p_max()[r])?;
        lp.set_bounds(t + r, 0.0 - b.neg_p_min()[r], 0.0)?;
    }
    let rhs = b.to_b();
    for k in 0..2 * t {
        let row = 4 * t + k;
        let mut terms: Vec<(usize, f64)> = a
            .row(row)
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect();
        terms.push((n + k, -1.0));
        lp.add_sparse_row(&terms, rhs[row])?;
        lp.set_bounds(n + k, 0.0, f64::INFINITY)?;
    }
    let sol = solve_checked(&lp, tol)?;
    let (k, v) = sol.x[n..]
        .iter()
        .enumerate()
        .fold((0, 0.0), |best, (k, v)| if *v > best.1 { (k, *v) } else { best });
    Ok((4 * t + k, v))
}

fn verified(a: &ConstraintMatrix, b: &EnvelopeVector, p: &[f64], tol: &Tolerances) -> Result<Schedule> {
    let report = check_feasible(a, b, p, tol.feas)?;
    if !report.feasible {
        return Err(LpError::NumericalBreakdown {
            violation: report.max_violation,
            tol: tol.feas,
        }
        .into());
    }
    Ok(Schedule::from_stacked(p))
}

fn cost_vector(prices: &PriceSignal, dt: f64) -> Vec<f64> {
    prices
        .lambda_imp
        .iter()
        .chain(&prices.lambda_exp)
        .map(|l| l * dt)
        .collect()
}

/// Cheapest schedule inside the envelope.
pub fn baseline_schedule(
    b_agg: &EnvelopeVector,
    a: &ConstraintMatrix,
    prices: &PriceSignal,
    tol: &Tolerances,
) -> Result<Schedule> {
    let t = check_inputs(b_agg, a)?;
    prices.check(t)?;
    let mut lp = LinearProgram::new(cost_vector(prices, b_agg.grid().slot_hours()));
    add_polytope(&mut lp, 0, a, b_agg)?;
    let sol = solve_checked(&lp, tol)?;
    if sol.status == LpStatus::Infeasible {
        let (worst_row, violation) = locate_infeasibility(a, b_agg, tol)?;
        return Err(ScheduleError::Infeasible { worst_row, violation });
    }
    verified(a, b_agg, &sol.x, tol)
}

/// Largest `flex` such that some envelope-feasible schedule keeps its net
/// power at least `flex` below the baseline's in every window slot.
///
/// Substituting the baseline gives `flex = 0`, so a feasible baseline never
/// yields a negative value; a solver result below zero is reported as zero
/// together with the baseline itself.
pub fn max_upward_flex(
    b_agg: &EnvelopeVector,
    a: &ConstraintMatrix,
    baseline: &Schedule,
    window: FlexWindow,
    tol: &Tolerances,
) -> Result<FlexResult> {
    let t = check_inputs(b_agg, a)?;
    if baseline.slots() != t || baseline.p_dis.len() != t {
        return Err(ScheduleError::Input(format!("baseline has {} slots, grid has {t}", baseline.slots())));
    }
    if window.start > window.end || window.end >= t {
        return Err(ScheduleError::Input(format!(
            "window [{}, {}] outside 0..{t}",
            window.start, window.end
        )));
    }
    let n = 2 * t;
    let mut c = vec![0.0; n + 1];
    c[n] = -1.0;
    let mut lp = LinearProgram::new(c);
    add_polytope(&mut lp, 0, a, b_agg)?;
    let net = baseline.net();
    for s in window.slots() {
        lp.add_sparse_row(&[(s, 1.0), (t + s, 1.0), (n, 1.0)], net[s])?;
    }
    let sol = solve_checked(&lp, tol)?;
    if sol.status == LpStatus::Infeasible {
        let (worst_row, violation) = locate_infeasibility(a, b_agg, tol)?;
        return Err(ScheduleError::Infeasible { worst_row, violation });
    }
    let flex = sol.x[n];
    if flex <= 0.0 {
        return Ok(FlexResult {
            flex: 0.0,
            schedule: baseline.clone(),
            window,
        });
    }
    Ok(FlexResult {
        flex,
        schedule: verified(a, b_agg, &sol.x[..n], tol)?,
        window,
    })
}

/// [`baseline_schedule`] with charging capped at `p_doe_imp` and
/// discharging floored at `p_doe_exp`.
pub fn doe_schedule(
    b_agg: &EnvelopeVector,
    a: &ConstraintMatrix,
    prices: &PriceSignal,
    doe: &DoeSignal,
    tol: &Tolerances,
) -> Result<Schedule> {
    let t = check_inputs(b_agg, a)?;
    prices.check(t)?;
    doe.check(t)?;
    let mut lp = LinearProgram::new(cost_vector(prices, b_agg.grid().slot_hours()));
    add_polytope(&mut lp, 0, a, b_agg)?;
    for r in 0..t {
        lp.set_bounds(r, 0.0, b_agg.p_max()[r].min(doe.p_doe_imp[r]))?;
        lp.set_bounds(t + r, (0.0 - b_agg.neg_p_min()[r]).max(doe.p_doe_exp[r]), 0.0)?;
    }
    let sol = solve_checked(&lp, tol)?;
    if sol.status == LpStatus::Infeasible {
        return Err(doe_diagnosis(b_agg, a, doe, tol)?);
    }
    verified(a, b_agg, &sol.x, tol)
}

/// Relaxes the DOE limits with penalized slack to find the slots whose
/// limits must move; falls back to the envelope diagnosis when the
/// envelope alone is infeasible.
fn doe_diagnosis(b: &EnvelopeVector, a: &ConstraintMatrix, doe: &DoeSignal, tol: &Tolerances) -> Result<ScheduleError> {
    let t = b.slots();
    let n = 2 * t;
    let mut lp = LinearProgram::new([vec![0.0; n], vec![1.0; n]].concat());
    add_polytope(&mut lp, 0, a, b)?;
    for r in 0..t {
        lp.set_bounds(n + r, 0.0, f64::INFINITY)?;
        lp.set_bounds(n + t + r, 0.0, f64::INFINITY)?;
        if doe.p_doe_imp[r] < b.p_max()[r] {
            lp.add_sparse_row(&[(r, 1.0), (n + r, -1.0)], doe.p_doe_imp[r])?;
        }
        if doe.p_doe_exp[r] > 0.0 - b.neg_p_min()[r] {
            lp.add_sparse_row(&[(t + r, -1.0), (n + t + r, -1.0)], 0.0 - doe.p_doe_exp[r])?;
        }
    }
    let sol = solve_checked(&lp, tol)?;
    if sol.status == LpStatus::Infeasible {
        let (worst_row, violation) = locate_infeasibility(a, b, tol)?;
        return Ok(ScheduleError::Infeasible { worst_row, violation });
    }
    let slots: Vec<usize> = (0..t)
        .filter(|&r| sol.x[n + r] > tol.feas || sol.x[n + t + r] > tol.feas)
        .collect();
    Ok(ScheduleError::DoeInfeasible { slots })
}

/// Norm of the aggregate mismatch minimized by [`disaggregate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    #[default]
    L1,
    LInf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disaggregation {
    pub schedules: Vec<Schedule>,
    /// `‖p_agg − Σ p_i‖` in the chosen norm over all `2T` components.
    pub residual: f64,
    pub norm: Norm,
}

fn mismatch(p_agg: &Schedule, schedules: &[Schedule], norm: Norm) -> f64 {
    let target = p_agg.stacked();
    let mut sum = vec![0.0; target.len()];
    for s in schedules {
        for (acc, v) in sum.iter_mut().zip(s.stacked()) {
            *acc += v;
        }
    }
    let gaps = target.iter().zip(&sum).map(|(a, b)| (a - b).abs());
    match norm {
        Norm::L1 => gaps.sum(),
        Norm::LInf => gaps.fold(0.0, f64::max),
    }
}

/// Splits an aggregate schedule into per-EV schedules, each feasible for
/// its own envelope, minimizing the mismatch with `p_agg`.
pub fn disaggregate(
    p_agg: &Schedule,
    a: &ConstraintMatrix,
    individuals: &[EnvelopeVector],
    norm: Norm,
    tol: &Tolerances,
) -> Result<Disaggregation> {
    let t = p_agg.slots();
    if individuals.is_empty() {
        return Err(ScheduleError::Input("no individual envelopes".into()));
    }
    for (index, b) in individuals.iter().enumerate() {
        if check_inputs(b, a)? != t {
            return Err(ScheduleError::Input(format!("EV {index} uses a different grid")));
        }
        let mut probe = LinearProgram::new(vec![0.0; 2 * t]);
        add_polytope(&mut probe, 0, a, b)?;
        if solve_checked(&probe, tol)?.status == LpStatus::Infeasible {
            let (worst_row, violation) = locate_infeasibility(a, b, tol)?;
            return Err(ScheduleError::EmptyIndividual { index, worst_row, violation });
        }
    }

    let n_ev = individuals.len();
    let n_p = 2 * t * n_ev;
    let n_gap = match norm {
        Norm::L1 => 2 * t,
        Norm::LInf => 1,
    };
    let mut c = vec![0.0; n_p + n_gap];
    c[n_p..].iter_mut().for_each(|v| *v = 1.0);
    let mut lp = LinearProgram::new(c);
    for (i, b) in individuals.iter().enumerate() {
        add_polytope(&mut lp, 2 * t * i, a, b)?;
    }
    for g in 0..n_gap {
        lp.set_bounds(n_p + g, 0.0, f64::INFINITY)?;
    }
    let target = p_agg.stacked();
    for k in 0..2 * t {
        let gap = n_p + if norm == Norm::L1 { k } else { 0 };
        let mut plus: Vec<(usize, f64)> = (0..n_ev).map(|i| (2 * t * i + k, 1.0)).collect();
        plus.push((gap, -1.0));
        lp.add_sparse_row(&plus, target[k])?;
        let minus: Vec<(usize, f64)> = plus
            .iter()
            .map(|&(j, v)| if j == gap { (j, v) } else { (j, -v) })
            .collect();
        lp.add_sparse_row(&minus, -target[k])?;
    }
    let sol = solve_checked(&lp, tol)?;
    if sol.status != LpStatus::Optimal {
        return Err(LpError::NumericalBreakdown {
            violation: sol.max_primal_violation,
            tol: tol.feas,
        }
        .into());
    }
    let schedules = individuals
        .iter()
        .enumerate()
        .map(|(i, b)| verified(a, b, &sol.x[2 * t * i..2 * t * (i + 1)], tol))
        .collect::<Result<Vec<_>>>()?;
    let residual = mismatch(p_agg, &schedules, norm);
    Ok(Disaggregation {
        schedules,
        residual,
        norm,
    })
}
