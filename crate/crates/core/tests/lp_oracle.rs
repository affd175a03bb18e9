mod oracles;

use fleetflex::lp::{solve, LinearProgram, LpStatus, Tolerances};
use oracles::{brute_force_lp, curated, Brute};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_boxed_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.gen_range(1..=3);
    let m = rng.gen_range(0..=6);
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let mut lp = LinearProgram::new(c);
    for _ in 0..m {
        let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        lp.add_row(&row, rng.gen_range(-4.0..6.0)).unwrap();
    }
    for j in 0..n {
        let lo = rng.gen_range(-5.0..2.0);
        let hi = lo + rng.gen_range(0.0..6.0);
        lp.set_bounds(j, lo, hi).unwrap();
    }
    lp
}

fn dual_objective(lp: &LinearProgram, u: &[f64], d: &[f64]) -> f64 {
    let mut v: f64 = -u.iter().zip(lp.rhs()).map(|(a, b)| a * b).sum::<f64>();
    for (j, &dj) in d.iter().enumerate() {
        if dj.abs() > 1e-12 {
            v += if dj > 0.0 { dj * lp.lower()[j] } else { dj * lp.upper()[j] };
        }
    }
    v
}

#[test]
fn random_boxed_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tol = Tolerances::default();
    let (mut optimal, mut infeasible) = (0, 0);
    for case in 0..500 {
        let lp = random_boxed_lp(&mut rng);
        let sol = solve(&lp, &tol).unwrap_or_else(|e| panic!("case {case}: {e}\n{lp}"));
        match brute_force_lp(&lp) {
            Brute::Optimal(v) => {
                optimal += 1;
                assert_eq!(sol.status, LpStatus::Optimal, "case {case}\n{lp}");
                assert!((sol.objective_value - v).abs() <= 1e-6, "case {case}: {} vs {v}\n{lp}", sol.objective_value);
                assert!(sol.max_primal_violation <= tol.feas);
            }
            Brute::Infeasible => {
                infeasible += 1;
                assert_eq!(sol.status, LpStatus::Infeasible, "case {case}\n{lp}");
            }
        }
    }
    assert!(optimal > 100 && infeasible > 10, "{optimal} optimal, {infeasible} infeasible");
}

#[test]
fn optimal_solutions_close_the_duality_gap() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tol = Tolerances::default();
    let mut checked = 0;
    for _ in 0..300 {
        let lp = random_boxed_lp(&mut rng);
        let sol = solve(&lp, &tol).unwrap();
        if !sol.is_optimal() {
            continue;
        }
        checked += 1;
        // Dual feasibility: reduced costs match c + Gᵀu.
        for j in 0..lp.num_vars() {
            let mut d = lp.objective()[j];
            for i in 0..lp.num_rows() {
                d += lp.row(i)[j] * sol.row_duals[i];
            }
            assert!((d - sol.reduced_costs[j]).abs() < 1e-8);
        }
        let dual = dual_objective(&lp, &sol.row_duals, &sol.reduced_costs);
        assert!((sol.objective_value - dual).abs() <= tol.opt, "{} vs {dual}", sol.objective_value);
    }
    assert!(checked > 100);
}

#[test]
fn curated_certificates() {
    let tol = Tolerances::default();
    let cases = curated::cases();
    assert_eq!(cases.len(), 20);
    for (name, lp, expected) in cases {
        let sol = solve(&lp, &tol).unwrap();
        assert_eq!(sol.status, expected, "{name}");
    }
}

#[test]
fn identical_input_gives_identical_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let lp = random_boxed_lp(&mut rng);
        let a = solve(&lp, &Tolerances::default()).unwrap();
        let b = solve(&lp.clone(), &Tolerances::default()).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.x), bits(&b.x));
        assert_eq!(a.objective_value.to_bits(), b.objective_value.to_bits());
    }
}

#[test]
fn larger_dense_problem_is_solved_feasibly() {
    // Transportation-style LP: 8 supplies × 8 demands.
    let (s, d) = (8, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cost: Vec<f64> = (0..s * d).map(|_| rng.gen_range(1.0..10.0)).collect();
    let mut lp = LinearProgram::new(cost);
    for i in 0..s {
        let terms: Vec<(usize, f64)> = (0..d).map(|j| (i * d + j, 1.0)).collect();
        lp.add_sparse_row(&terms, 10.0).unwrap();
    }
    for j in 0..d {
        let terms: Vec<(usize, f64)> = (0..s).map(|i| (i * d + j, -1.0)).collect();
        lp.add_sparse_row(&terms, -9.0).unwrap();
    }
    for k in 0..s * d {
        lp.set_bounds(k, 0.0, f64::INFINITY).unwrap();
    }
    let sol = solve(&lp, &Tolerances::default()).unwrap();
    assert!(sol.is_optimal());
    assert!(sol.max_primal_violation <= 1e-6);
    let dual = dual_objective(&lp, &sol.row_duals, &sol.reduced_costs);
    assert!((dual - sol.objective_value).abs() < 1e-6, "{dual} vs {}", sol.objective_value);
}
