use std::sync::Once;

use serde::{Deserialize, Serialize};

use super::{EvSessionParams, FleetParams, PolytopeError, Result, TimeGrid};

static DECAYED_DEPARTURE_WARNING: Once = Once::new();

/// Right-hand side `b` of `A p ≤ b`, stored by block.
///
/// The two zero blocks (rows `T..3T`) are implicit. All blocks are kept in
/// "≤" orientation, so `neg_p_min` holds `-P_min ≥ 0` and the capacity
/// blocks hold the values that appear in `b` itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeVector {
    grid: TimeGrid,
    fleet: FleetParams,
    p_max: Vec<f64>,
    neg_p_min: Vec<f64>,
    c_max: Vec<f64>,
    c_min: Vec<f64>,
}

impl EnvelopeVector {
    /// The envelope of an empty fleet.
    pub fn zeros(grid: TimeGrid, fleet: FleetParams) -> Self {
        let t = grid.slots();
        Self {
            grid,
            fleet,
            p_max: vec![0.0; t],
            neg_p_min: vec![0.0; t],
            c_max: vec![0.0; t],
            c_min: vec![0.0; t],
        }
    }

    pub fn from_blocks(
        grid: TimeGrid,
        fleet: FleetParams,
        p_max: Vec<f64>,
        neg_p_min: Vec<f64>,
        c_max: Vec<f64>,
        c_min: Vec<f64>,
    ) -> Result<Self> {
        let t = grid.slots();
        for block in [&p_max, &neg_p_min, &c_max, &c_min] {
            if block.len() != t {
                return Err(PolytopeError::Dimension {
                    expected: t,
                    got: block.len(),
                });
            }
            if block.iter().any(|v| !v.is_finite()) {
                return Err(PolytopeError::Parameter("non-finite envelope entry".into()));
            }
        }
        if let Some(v) = p_max.iter().chain(&neg_p_min).find(|v| **v < 0.0) {
            return Err(PolytopeError::Parameter(format!(
                "power bounds must be nonnegative in b, got {v}"
            )));
        }
        Ok(Self {
            grid,
            fleet,
            p_max,
            neg_p_min,
            c_max,
            c_min,
        })
    }

    /// Rebuilds the block form from a full `6T` vector.
    pub fn from_b(grid: TimeGrid, fleet: FleetParams, b: &[f64]) -> Result<Self> {
        let t = grid.slots();
        if b.len() != 6 * t {
            return Err(PolytopeError::Dimension {
                expected: 6 * t,
                got: b.len(),
            });
        }
        if b[t..3 * t].iter().any(|v| *v != 0.0) {
            return Err(PolytopeError::Parameter(
                "sign-constraint blocks of b must be zero".into(),
            ));
        }
        Self::from_blocks(
            grid,
            fleet,
            b[..t].to_vec(),
            b[3 * t..4 * t].to_vec(),
            b[4 * t..5 * t].to_vec(),
            b[5 * t..].to_vec(),
        )
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn fleet(&self) -> &FleetParams {
        &self.fleet
    }

    pub fn slots(&self) -> usize {
        self.grid.slots()
    }

    pub fn p_max(&self) -> &[f64] {
        &self.p_max
    }

    pub fn neg_p_min(&self) -> &[f64] {
        &self.neg_p_min
    }

    /// `P_min` itself (nonpositive).
    pub fn p_min(&self) -> Vec<f64> {
        self.neg_p_min.iter().map(|v| 0.0 - v).collect()
    }

    pub fn c_max_rows(&self) -> &[f64] {
        &self.c_max
    }

    pub fn c_min_rows(&self) -> &[f64] {
        &self.c_min
    }

    /// The full `6T` vector `b`.
    pub fn to_b(&self) -> Vec<f64> {
        let t = self.slots();
        let mut b = Vec::with_capacity(6 * t);
        b.extend_from_slice(&self.p_max);
        b.extend(std::iter::repeat(0.0).take(2 * t));
        b.extend_from_slice(&self.neg_p_min);
        b.extend_from_slice(&self.c_max);
        b.extend_from_slice(&self.c_min);
        b
    }

    pub fn len(&self) -> usize {
        6 * self.slots()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// True when every block is zero (no vehicle present).
    pub fn is_zero(&self) -> bool {
        self.p_max
            .iter()
            .chain(&self.neg_p_min)
            .chain(&self.c_max)
            .chain(&self.c_min)
            .all(|v| *v == 0.0)
    }

    fn add_assign(&mut self, other: &Self) {
        for (dst, src) in [
            (&mut self.p_max, &other.p_max),
            (&mut self.neg_p_min, &other.neg_p_min),
            (&mut self.c_max, &other.c_max),
            (&mut self.c_min, &other.c_min),
        ] {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }
}

/// `b` for a stationary battery starting at `c0`.
pub fn build_b_battery(
    c0: f64,
    c_max: f64,
    c_min: f64,
    p_max: &[f64],
    p_min: &[f64],
    fleet: &FleetParams,
    grid: &TimeGrid,
) -> Result<EnvelopeVector> {
    fleet.validate()?;
    if !(c_min <= c0 && c0 <= c_max) {
        return Err(PolytopeError::Parameter(format!(
            "initial energy {c0} outside [{c_min}, {c_max}]"
        )));
    }
    let t = grid.slots();
    let mut c_max_rows = Vec::with_capacity(t);
    let mut c_min_rows = Vec::with_capacity(t);
    let mut decayed = c0;
    for _ in 0..t {
        decayed *= fleet.alpha;
        c_max_rows.push(c_max - decayed);
        c_min_rows.push(decayed - c_min);
    }
    if p_min.len() != t {
        return Err(PolytopeError::Dimension {
            expected: t,
            got: p_min.len(),
        });
    }
    EnvelopeVector::from_blocks(
        *grid,
        *fleet,
        p_max.to_vec(),
        p_min.iter().map(|v| 0.0 - v).collect(),
        c_max_rows,
        c_min_rows,
    )
}

/// `b_ev` for one vehicle session.
///
/// Power rows are zero outside `t_arr..t_dep`. Capacity row `t` (the energy
/// after `t` slots, `t = 1..=T`) is zero up to arrival, tracks the decayed
/// arrival energy until departure and then holds the departure requirement.
/// With `alpha < 1` the post-departure minimum-energy rows decay by
/// `alpha^(t - t_dep)` so that zero power after departure stays feasible.
///
/// An unreachable `c_dep` is clamped (see [`EvSessionParams::normalized`])
/// and logged as a warning.
pub fn build_b_ev(ev: &EvSessionParams, fleet: &FleetParams, grid: &TimeGrid) -> Result<EnvelopeVector> {
    fleet.validate()?;
    ev.validate(grid)?;
    let (ev, clamped) = ev.normalized(fleet, grid);
    if let Some(requested) = clamped {
        log::warn!(
            "departure energy {requested:.4} kWh unreachable in slots {}..{}; clamped to {:.4} kWh",
            ev.t_arr,
            ev.t_dep,
            ev.c_dep
        );
    }
    if fleet.alpha < 1.0 {
        DECAYED_DEPARTURE_WARNING.call_once(|| {
            log::warn!(
                "alpha < 1: post-departure minimum-energy rows decay with alpha^(t - t_dep)"
            );
        });
    }

    let t_total = grid.slots();
    let alpha = fleet.alpha;
    let mut env = EnvelopeVector::zeros(*grid, *fleet);
    let at_departure = alpha.powi((ev.t_dep - ev.t_arr) as i32) * ev.c_arr;
    for r in 0..t_total {
        if (ev.t_arr..ev.t_dep).contains(&r) {
            env.p_max[r] = ev.p_max;
            env.neg_p_min[r] = 0.0 - ev.p_min;
        }
        let t = r + 1;
        if t <= ev.t_arr {
            continue;
        }
        if t < ev.t_dep {
            let decayed = alpha.powi((t - ev.t_arr) as i32) * ev.c_arr;
            env.c_max[r] = ev.c_max - decayed;
            env.c_min[r] = decayed - ev.c_min;
        } else {
            env.c_max[r] = ev.c_max - at_departure;
            env.c_min[r] = alpha.powi((t - ev.t_dep) as i32) * (at_departure - ev.c_dep);
        }
    }
    Ok(env)
}

/// Elementwise sum of envelopes, accumulated strictly left to right.
pub fn aggregate(envelopes: &[EnvelopeVector]) -> Result<EnvelopeVector> {
    let (first, rest) = envelopes
        .split_first()
        .ok_or_else(|| PolytopeError::Aggregation("no envelopes to aggregate".into()))?;
    let mut acc = first.clone();
    for (i, e) in rest.iter().enumerate() {
        if e.grid != acc.grid {
            return Err(PolytopeError::Aggregation(format!(
                "envelope {} uses a different time grid",
                i + 1
            )));
        }
        if e.fleet != acc.fleet {
            return Err(PolytopeError::Aggregation(format!(
                "envelope {} uses different fleet parameters",
                i + 1
            )));
        }
        acc.add_assign(e);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(t: usize) -> TimeGrid {
        TimeGrid::new(t, 1.0).unwrap()
    }

    #[test]
    fn full_battery_has_no_headroom() {
        let grid = unit_grid(3);
        let b = build_b_battery(
            20.0,
            20.0,
            0.0,
            &[5.0; 3],
            &[-5.0; 3],
            &FleetParams::default(),
            &grid,
        )
        .unwrap();
        assert!(b.c_max_rows().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn battery_rows_without_decay() {
        let grid = unit_grid(2);
        let b = build_b_battery(10.0, 20.0, 0.0, &[1.0; 2], &[-1.0; 2], &FleetParams::default(), &grid)
            .unwrap();
        assert_eq!(b.c_max_rows(), &[10.0, 10.0]);
        assert_eq!(b.c_min_rows(), &[10.0, 10.0]);
        assert_eq!(b.neg_p_min(), &[1.0, 1.0]);
    }

    #[test]
    fn battery_rows_with_half_retention() {
        let grid = unit_grid(2);
        let fleet = FleetParams::new(0.5, 1.0, 1.0).unwrap();
        let b = build_b_battery(10.0, 20.0, 0.0, &[1.0; 2], &[-1.0; 2], &fleet, &grid).unwrap();
        assert_eq!(b.c_max_rows(), &[15.0, 17.5]);
        assert_eq!(b.c_min_rows(), &[5.0, 2.5]);
    }

    #[test]
    fn battery_rejects_capacity_ordering() {
        let grid = unit_grid(2);
        let r = build_b_battery(30.0, 20.0, 0.0, &[1.0; 2], &[-1.0; 2], &FleetParams::default(), &grid);
        assert!(r.is_err());
    }

    #[test]
    fn ev_envelope_hand_values() {
        let grid = unit_grid(4);
        let ev = EvSessionParams {
            t_arr: 0,
            t_dep: 2,
            p_max: 10.0,
            p_min: -10.0,
            c_max: 20.0,
            c_min: 0.0,
            c_arr: 4.0,
            c_dep: 9.0,
        };
        let b = build_b_ev(&ev, &FleetParams::default(), &grid).unwrap();
        assert_eq!(b.c_max_rows(), &[16.0, 16.0, 16.0, 16.0]);
        assert_eq!(b.c_min_rows(), &[4.0, -5.0, -5.0, -5.0]);
        assert_eq!(b.p_max(), &[10.0, 10.0, 0.0, 0.0]);
        assert_eq!(b.neg_p_min(), &[10.0, 10.0, 0.0, 0.0]);
    }

    #[test]
    fn ev_power_rows_follow_availability() {
        let grid = unit_grid(4);
        let ev = EvSessionParams {
            t_arr: 2,
            t_dep: 4,
            p_max: 7.0,
            p_min: -7.0,
            c_max: 40.0,
            c_min: 0.0,
            c_arr: 8.0,
            c_dep: 10.0,
        };
        let b = build_b_ev(&ev, &FleetParams::default(), &grid).unwrap();
        assert_eq!(b.p_max(), &[0.0, 0.0, 7.0, 7.0]);
        // Rows up to and including arrival are zero.
        assert_eq!(&b.c_max_rows()[..2], &[0.0, 0.0]);
        assert_eq!(&b.c_min_rows()[..2], &[0.0, 0.0]);
    }

    #[test]
    fn ev_without_availability_is_rejected() {
        let grid = unit_grid(4);
        let ev = EvSessionParams {
            t_arr: 3,
            t_dep: 3,
            p_max: 7.0,
            p_min: -7.0,
            c_max: 40.0,
            c_min: 0.0,
            c_arr: 8.0,
            c_dep: 8.0,
        };
        assert!(matches!(
            build_b_ev(&ev, &FleetParams::default(), &grid),
            Err(PolytopeError::Parameter(_))
        ));
    }

    #[test]
    fn decayed_departure_rows() {
        let grid = unit_grid(4);
        let fleet = FleetParams::new(0.5, 1.0, 1.0).unwrap();
        let ev = EvSessionParams {
            t_arr: 0,
            t_dep: 2,
            p_max: 10.0,
            p_min: -10.0,
            c_max: 20.0,
            c_min: 0.0,
            c_arr: 8.0,
            c_dep: 6.0,
        };
        let b = build_b_ev(&ev, &fleet, &grid).unwrap();
        // t=1: 0.5·8; t=2: 0.25·8 − 6 = −4; afterwards halves each slot.
        assert_eq!(b.c_min_rows(), &[4.0, -4.0, -2.0, -1.0]);
        assert_eq!(b.c_max_rows(), &[16.0, 18.0, 18.0, 18.0]);
    }

    #[test]
    fn b_vector_layout_round_trips() {
        let grid = unit_grid(3);
        let ev = EvSessionParams {
            t_arr: 1,
            t_dep: 3,
            p_max: 3.0,
            p_min: -2.0,
            c_max: 10.0,
            c_min: 1.0,
            c_arr: 2.0,
            c_dep: 5.0,
        };
        let env = build_b_ev(&ev, &FleetParams::default(), &grid).unwrap();
        let b = env.to_b();
        assert_eq!(b.len(), 18);
        assert!(b[3..9].iter().all(|v| *v == 0.0));
        assert_eq!(EnvelopeVector::from_b(grid, FleetParams::default(), &b).unwrap(), env);
    }

    #[test]
    fn aggregate_checks_metadata() {
        let g1 = unit_grid(2);
        let g2 = TimeGrid::new(2, 0.5).unwrap();
        let f = FleetParams::default();
        let a = EnvelopeVector::zeros(g1, f);
        let b = EnvelopeVector::zeros(g2, f);
        assert!(aggregate(&[a.clone(), b]).is_err());
        let c = EnvelopeVector::zeros(g1, FleetParams::new(0.9, 1.0, 1.0).unwrap());
        assert!(aggregate(&[a.clone(), c]).is_err());
        assert!(aggregate(&[]).is_err());
        assert_eq!(aggregate(&[a.clone()]).unwrap(), a);
    }
}
