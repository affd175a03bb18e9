//! Random instance generators shared by the integration tests.

#![allow(dead_code)]

use fleetflex::polytope::{aggregate, build_A, build_b_ev, ConstraintMatrix, EnvelopeVector, EvSessionParams, FleetParams, TimeGrid};
use fleetflex::scheduling::{DoeSignal, PriceSignal};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A session with `c_arr ≤ c_dep`, reachable at full port power.
pub fn charging_ev(rng: &mut ChaCha8Rng, slots: usize, dt: f64) -> EvSessionParams {
    let t_arr = rng.gen_range(0..slots - 1);
    let t_dep = rng.gen_range(t_arr + 1..=slots);
    let c_max = [20.0, 40.0, 80.0, 100.0][rng.gen_range(0..4)];
    let p_max = [3.6, 7.0, 11.0][rng.gen_range(0..3)];
    let c_arr = rng.gen_range(0.0..0.5) * c_max;
    let reach = (c_arr + p_max * dt * (t_dep - t_arr) as f64).min(c_max);
    let c_dep = rng.gen_range(c_arr..=reach);
    EvSessionParams {
        t_arr,
        t_dep,
        p_max,
        p_min: -p_max,
        c_max,
        c_min: 0.0,
        c_arr,
        c_dep,
    }
}

pub struct Instance {
    pub grid: TimeGrid,
    pub a: ConstraintMatrix,
    pub evs: Vec<EvSessionParams>,
    pub each: Vec<EnvelopeVector>,
    pub agg: EnvelopeVector,
    pub prices: PriceSignal,
}

pub fn instance(rng: &mut ChaCha8Rng, n_ev: usize, slots: usize, dt: f64) -> Instance {
    let grid = TimeGrid::new(slots, dt).unwrap();
    let fleet = FleetParams::default();
    let evs: Vec<_> = (0..n_ev).map(|_| charging_ev(rng, slots, dt)).collect();
    let each: Vec<_> = evs.iter().map(|e| build_b_ev(e, &fleet, &grid).unwrap()).collect();
    let prices = random_prices(rng, slots);
    Instance {
        grid,
        a: build_A(&fleet, &grid).unwrap(),
        agg: aggregate(&each).unwrap(),
        evs,
        each,
        prices,
    }
}

/// Import prices in [0.1, 0.4), export strictly below the cheapest import.
pub fn random_prices(rng: &mut ChaCha8Rng, slots: usize) -> PriceSignal {
    let lambda_imp: Vec<f64> = (0..slots).map(|_| rng.gen_range(0.1..0.4)).collect();
    let floor = lambda_imp.iter().cloned().fold(f64::INFINITY, f64::min);
    let lambda_exp = (0..slots).map(|_| rng.gen_range(0.0..floor * 0.9)).collect();
    PriceSignal { lambda_imp, lambda_exp }
}

pub fn random_doe(rng: &mut ChaCha8Rng, agg: &EnvelopeVector) -> DoeSignal {
    DoeSignal {
        p_doe_imp: agg.p_max().iter().map(|p| p * rng.gen_range(0.3..1.2)).collect(),
        p_doe_exp: agg.neg_p_min().iter().map(|p| -p * rng.gen_range(0.0..1.2)).collect(),
    }
}

/// EV 0 leaves before EV 1 arrives; the aggregate lets EV 0's spare
/// energy cover EV 1's requirement, which no split can realize.
pub fn staggered_pair(rng: &mut ChaCha8Rng, slots: usize) -> Vec<EvSessionParams> {
    let m = rng.gen_range(1..slots);
    let p = rng.gen_range(2.0..8.0);
    let need = rng.gen_range(0.5..1.0) * p * (slots - m) as f64;
    let spare = need + rng.gen_range(0.0..5.0);
    vec![
        EvSessionParams { t_arr: 0, t_dep: m, p_max: p, p_min: -p, c_max: spare + 10.0, c_min: 0.0, c_arr: spare, c_dep: 0.0 },
        EvSessionParams { t_arr: m, t_dep: slots, p_max: p, p_min: -p, c_max: need + 10.0, c_min: 0.0, c_arr: 0.0, c_dep: need },
    ]
}
