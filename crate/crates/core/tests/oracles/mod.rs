//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the solver or the envelope builders.

#![allow(dead_code)]

use fleetflex::lp::LinearProgram;
use fleetflex::polytope::EvSessionParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Brute {
    Infeasible,
    Optimal(f64),
}

/// Minimizes a bounded-box LP by enumerating every basic solution.
///
/// Requires finite bounds on every variable, which makes the feasible set a
/// polytope whose optimum (if any) is attained at a vertex.
pub fn brute_force_lp(lp: &LinearProgram) -> Brute {
    let n = lp.num_vars();
    let mut cons: Vec<(Vec<f64>, f64)> = (0..lp.num_rows())
        .map(|i| (lp.row(i).to_vec(), lp.rhs()[i]))
        .collect();
    for j in 0..n {
        assert!(lp.lower()[j].is_finite() && lp.upper()[j].is_finite());
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cons.push((e.clone(), lp.upper()[j]));
        e[j] = -1.0;
        cons.push((e, -lp.lower()[j]));
    }
    let mut best: Option<f64> = None;
    for subset in combinations(cons.len(), n) {
        let a: Vec<Vec<f64>> = subset.iter().map(|&k| cons[k].0.clone()).collect();
        let b: Vec<f64> = subset.iter().map(|&k| cons[k].1).collect();
        let Some(x) = gauss_solve(a, b) else { continue };
        let feasible = cons
            .iter()
            .all(|(row, rhs)| dot(row, &x) <= rhs + 1e-9 * (1.0 + rhs.abs()));
        if feasible {
            let obj = dot(lp.objective(), &x);
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    }
    match best {
        Some(v) => Brute::Optimal(v),
        None => Brute::Infeasible,
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(p, c);
        b.swap(p, c);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Energy bounds an EV session must respect, checked on a simulated
/// trajectory (`soc[r]` = energy after slot `r`): `[c_min, c_max]` strictly
/// between arrival and departure, `[c_dep, c_max]` from departure on.
pub fn soc_respects_session(ev: &EvSessionParams, soc: &[f64], tol: f64) -> bool {
    soc.iter().enumerate().all(|(r, &s)| {
        let t = r + 1;
        if t <= ev.t_arr {
            true
        } else if t < ev.t_dep {
            s >= ev.c_min - tol && s <= ev.c_max + tol
        } else {
            s >= ev.c_dep - tol && s <= ev.c_max + tol
        }
    })
}

/// Every vector in `levels^len` (odometer order).
pub fn grid_points(levels: &[f64], len: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
    let total = levels.len().pow(len as u32);
    (0..total).map(move |mut code| {
        (0..len)
            .map(|_| {
                let v = levels[code % levels.len()];
                code /= levels.len();
                v
            })
            .collect()
    })
}

/// Linear-interpolation quantile computed from sorted order statistics.
pub fn quantile_by_hand(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub mod curated {
    use fleetflex::lp::{LinearProgram, LpStatus};

    fn lp(c: &[f64], rows: &[(&[f64], f64)], bounds: &[(f64, f64)]) -> LinearProgram {
        let mut p = LinearProgram::new(c.to_vec());
        for (r, h) in rows {
            p.add_row(r, *h).unwrap();
        }
        for (j, (lo, hi)) in bounds.iter().enumerate() {
            p.set_bounds(j, *lo, *hi).unwrap();
        }
        p
    }

    const INF: f64 = f64::INFINITY;
    const FREE: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);
    const NONNEG: (f64, f64) = (0.0, f64::INFINITY);

    /// Twenty small problems with a known infeasible/unbounded answer.
    pub fn cases() -> Vec<(&'static str, LinearProgram, LpStatus)> {
        use LpStatus::*;
        vec![
            ("x<=0 and x>=1", lp(&[0.0], &[(&[1.0], 0.0), (&[-1.0], -1.0)], &[FREE]), Infeasible),
            ("box below row", lp(&[1.0], &[(&[-1.0], -5.0)], &[(0.0, 4.0)]), Infeasible),
            ("sum exceeds box", lp(&[0.0, 0.0], &[(&[-1.0, -1.0], -3.0)], &[(0.0, 1.0), (0.0, 1.0)]), Infeasible),
            ("parallel rows", lp(&[1.0, 1.0], &[(&[1.0, 1.0], 1.0), (&[-1.0, -1.0], -2.0)], &[FREE, FREE]), Infeasible),
            ("zero row negative rhs", lp(&[1.0], &[(&[0.0], -1.0)], &[(0.0, 1.0)]), Infeasible),
            ("triangle empty", lp(&[0.0, 0.0], &[(&[1.0, 1.0], 1.0), (&[-1.0, 0.0], -0.75), (&[0.0, -1.0], -0.75)], &[NONNEG, NONNEG]), Infeasible),
            ("three var chain", lp(&[1.0, 0.0, 0.0], &[(&[1.0, -1.0, 0.0], -1.0), (&[0.0, 1.0, -1.0], -1.0), (&[-1.0, 0.0, 1.0], -1.0)], &[FREE, FREE, FREE]), Infeasible),
            ("fixed var conflict", lp(&[0.0, 0.0], &[(&[1.0, 1.0], 1.0)], &[(1.0, 1.0), (0.5, 0.5)]), Infeasible),
            ("energy overdraw", lp(&[1.0, 1.0], &[(&[1.0, 1.0], 2.0), (&[-1.0, -1.0], -2.5)], &[(0.0, 1.0), (0.0, 1.0)]), Infeasible),
            ("negative cone", lp(&[0.0, 0.0], &[(&[1.0, 0.0], -1.0), (&[0.0, 1.0], -1.0), (&[-1.0, -1.0], 1.0)], &[FREE, FREE]), Infeasible),
            ("min -x free", lp(&[-1.0], &[], &[FREE]), Unbounded),
            ("min -x nonneg", lp(&[-1.0], &[], &[NONNEG]), Unbounded),
            ("min x below", lp(&[1.0], &[(&[1.0], 5.0)], &[FREE]), Unbounded),
            ("ray along diagonal", lp(&[-1.0, -1.0], &[(&[1.0, -1.0], 1.0), (&[-1.0, 1.0], 1.0)], &[NONNEG, NONNEG]), Unbounded),
            ("one var boxed other free", lp(&[0.0, -1.0], &[(&[1.0, 0.0], 1.0)], &[(0.0, 1.0), (0.0, INF)]), Unbounded),
            ("difference free", lp(&[1.0, -1.0], &[(&[1.0, -1.0], 3.0)], &[NONNEG, NONNEG]), Unbounded),
            ("three var ray", lp(&[0.0, 0.0, -1.0], &[(&[1.0, 1.0, -1.0], 0.0)], &[NONNEG, NONNEG, NONNEG]), Unbounded),
            ("upper-bounded min", lp(&[2.0], &[], &[(f64::NEG_INFINITY, 3.0)]), Unbounded),
            ("cone with slack", lp(&[-1.0, 0.0], &[(&[1.0, -2.0], 0.0), (&[0.0, 1.0], INF)], &[NONNEG, NONNEG]), Unbounded),
            ("degenerate ray", lp(&[-1.0, -2.0], &[(&[-1.0, 1.0], 0.0), (&[1.0, -1.0], 0.0)], &[NONNEG, NONNEG]), Unbounded),
        ]
    }
}

/// Direct recursion `soc ← α·soc + (η_in·p_ch + η_out·p_dis)·δt` from
/// `c_arr`; entry `r` is the energy after slot `r`.
pub fn soc_by_hand(
    ev: &EvSessionParams,
    alpha: f64,
    eta_in: f64,
    eta_out: f64,
    dt: f64,
    p_ch: &[f64],
    p_dis: &[f64],
) -> Vec<f64> {
    let mut soc = ev.c_arr;
    let mut out = Vec::new();
    for r in 0..p_ch.len() {
        if r >= ev.t_arr {
            let inside = r < ev.t_dep;
            let p = if inside { eta_in * p_ch[r] + eta_out * p_dis[r] } else { 0.0 };
            soc = alpha * soc + p * dt;
        }
        out.push(soc);
    }
    out
}

/// Power limits and energy bounds of one session, checked without `A` or `b`.
pub fn session_feasible_by_hand(
    ev: &EvSessionParams,
    eta_in: f64,
    eta_out: f64,
    dt: f64,
    p_ch: &[f64],
    p_dis: &[f64],
    tol: f64,
) -> bool {
    let power_ok = (0..p_ch.len()).all(|r| {
        let (hi, lo) = if (ev.t_arr..ev.t_dep).contains(&r) {
            (ev.p_max, ev.p_min)
        } else {
            (0.0, 0.0)
        };
        p_ch[r] >= -tol && p_ch[r] <= hi + tol && p_dis[r] <= tol && p_dis[r] >= lo - tol
    });
    power_ok && soc_respects_session(ev, &soc_by_hand(ev, 1.0, eta_in, eta_out, dt, p_ch, p_dis), tol)
}

/// Splits a net power into the charge/discharge pair.
pub fn split_net(net: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        net.iter().map(|p| p.max(0.0)).collect(),
        net.iter().map(|p| p.min(0.0)).collect(),
    )
}
