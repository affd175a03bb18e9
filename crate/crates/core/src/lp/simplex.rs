//! Bounded-variable revised simplex on a dense explicit basis inverse.
//!
//! Rows are turned into equalities with one slack per row (`G x + s = h`,
//! `s ≥ 0`). Rows whose slack would start negative get an artificial
//! column `-e_i` and a phase-one objective that drives the artificials to
//! zero. Pricing is Dantzig's largest reduced cost; after a run of
//! degenerate pivots the solver switches to Bland's lowest-index rule until
//! the objective moves again. All ties go to the lowest index.

use super::{LinearProgram, LpError, LpSolution, LpStatus, Tolerances};

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_BEFORE_BLAND: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic free variable, held at zero.
    Free,
}

#[derive(Debug, Clone, Copy)]
enum Column {
    Structural(usize),
    Slack(usize),
    Artificial(usize),
}

struct Simplex<'a> {
    m: usize,
    n: usize,
    /// Kept rows of the problem, column-major (`n × m`).
    g_cols: Vec<f64>,
    h: Vec<f64>,
    /// Artificial column `k` is `-e_{art_rows[k]}`.
    art_rows: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    /// Row-major `m × m` inverse of the basis matrix.
    binv: Vec<f64>,
    tol: &'a Tolerances,
    iterations: usize,
    max_iterations: usize,
    since_refactor: usize,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

/// Solves `lp` to the given tolerances.
///
/// `Err` means the solver could not certify an answer (singular basis,
/// iteration limit, or a final point that fails its own feasibility check);
/// infeasible and unbounded problems are reported through
/// [`LpSolution::status`].
pub fn solve(lp: &LinearProgram, tol: &Tolerances) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.num_vars();

    // Only identically-zero rows are removed.
    let mut kept = Vec::new();
    for i in 0..lp.num_rows() {
        if lp.row(i).iter().all(|&a| a == 0.0) {
            if lp.rhs()[i] < -tol.feas {
                return Ok(non_optimal(lp, LpStatus::Infeasible, 0));
            }
        } else {
            kept.push(i);
        }
    }
    if lp.rhs().iter().any(|&v| v == f64::NEG_INFINITY) {
        return Ok(non_optimal(lp, LpStatus::Infeasible, 0));
    }

    let mut spx = Simplex::new(lp, &kept, tol);
    if !spx.art_rows.is_empty() {
        let phase_one: Vec<f64> = (0..spx.num_cols())
            .map(|j| if j >= n + spx.m { 1.0 } else { 0.0 })
            .collect();
        spx.cost = phase_one;
        match spx.run()? {
            PhaseOutcome::Optimal => {}
            PhaseOutcome::Unbounded => {
                // Phase one is bounded below by zero.
                return Err(LpError::NumericalBreakdown {
                    violation: f64::INFINITY,
                    tol: tol.feas,
                });
            }
        }
        spx.refactor()?;
        let infeasibility = (n + spx.m..spx.num_cols())
            .map(|j| spx.x[j])
            .fold(0.0_f64, f64::max);
        if infeasibility > tol.feas {
            return Ok(non_optimal(lp, LpStatus::Infeasible, spx.iterations));
        }
        for j in n + spx.m..spx.num_cols() {
            spx.upper[j] = 0.0;
            if !matches!(spx.state[j], VarState::Basic(_)) {
                spx.x[j] = 0.0;
                spx.state[j] = VarState::AtLower;
            }
        }
    }

    spx.cost = (0..spx.num_cols())
        .map(|j| if j < n { lp.objective()[j] } else { 0.0 })
        .collect();
    let outcome = spx.run()?;
    if let PhaseOutcome::Unbounded = outcome {
        return Ok(non_optimal(lp, LpStatus::Unbounded, spx.iterations));
    }
    spx.refactor()?;

    let mut x: Vec<f64> = spx.x[..n].to_vec();
    // Nonbasic values sit exactly on their bounds; snap basic ones that
    // drifted past a bound by rounding noise.
    for (j, v) in x.iter_mut().enumerate() {
        *v = v.max(lp.lower()[j]).min(lp.upper()[j]);
    }
    let violation = lp.max_violation(&x);
    if violation > tol.feas {
        return Err(LpError::NumericalBreakdown {
            violation,
            tol: tol.feas,
        });
    }

    let y = spx.btran();
    let mut row_duals = vec![0.0; lp.num_rows()];
    for (k, &i) in kept.iter().enumerate() {
        row_duals[i] = (-y[k]).max(0.0);
    }
    let reduced_costs = (0..n).map(|j| spx.reduced_cost(j, &y)).collect();

    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: lp.objective_at(&x),
        max_primal_violation: violation,
        x,
        row_duals,
        reduced_costs,
        iterations: spx.iterations,
    })
}

fn non_optimal(lp: &LinearProgram, status: LpStatus, iterations: usize) -> LpSolution {
    let n = lp.num_vars();
    LpSolution {
        status,
        x: vec![f64::NAN; n],
        objective_value: match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        },
        max_primal_violation: f64::INFINITY,
        row_duals: vec![0.0; lp.num_rows()],
        reduced_costs: vec![0.0; n],
        iterations,
    }
}

/// Starting value for a nonbasic structural: the finite bound nearest zero.
fn initial_value(lo: f64, hi: f64) -> (f64, VarState) {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            if hi.abs() < lo.abs() {
                (hi, VarState::AtUpper)
            } else {
                (lo, VarState::AtLower)
            }
        }
        (true, false) => (lo, VarState::AtLower),
        (false, true) => (hi, VarState::AtUpper),
        (false, false) => (0.0, VarState::Free),
    }
}

impl<'a> Simplex<'a> {
    fn new(lp: &LinearProgram, kept: &[usize], tol: &'a Tolerances) -> Self {
        let n = lp.num_vars();
        let m = kept.len();
        let mut g_cols = vec![0.0; n * m];
        for (k, &i) in kept.iter().enumerate() {
            for (j, &a) in lp.row(i).iter().enumerate() {
                g_cols[j * m + k] = a;
            }
        }
        let h: Vec<f64> = kept.iter().map(|&i| lp.rhs()[i]).collect();

        let mut lower = lp.lower().to_vec();
        let mut upper = lp.upper().to_vec();
        let mut x = Vec::with_capacity(n + m);
        let mut state = Vec::with_capacity(n + m);
        for j in 0..n {
            let (v, s) = initial_value(lower[j], upper[j]);
            x.push(v);
            state.push(s);
        }

        // Row activity at the starting point decides slack vs artificial.
        let mut residual = h.clone();
        for j in 0..n {
            if x[j] != 0.0 {
                for (k, r) in residual.iter_mut().enumerate() {
                    *r -= g_cols[j * m + k] * x[j];
                }
            }
        }

        let mut basis = vec![0; m];
        let mut binv = vec![0.0; m * m];
        let mut art_rows = Vec::new();
        for k in 0..m {
            lower.push(0.0);
            upper.push(f64::INFINITY);
            if residual[k] >= 0.0 {
                x.push(residual[k]);
                state.push(VarState::Basic(k));
                basis[k] = n + k;
                binv[k * m + k] = 1.0;
            } else {
                x.push(0.0);
                state.push(VarState::AtLower);
                art_rows.push(k);
                binv[k * m + k] = -1.0;
            }
        }
        for (a, &k) in art_rows.iter().enumerate() {
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x.push(-residual[k]);
            state.push(VarState::Basic(k));
            basis[k] = n + m + a;
        }

        let num_cols = n + m + art_rows.len();
        Self {
            m,
            n,
            g_cols,
            h,
            art_rows,
            lower,
            upper,
            cost: vec![0.0; num_cols],
            x,
            state,
            basis,
            binv,
            tol,
            iterations: 0,
            max_iterations: 50 * (n + m) + 10_000,
            since_refactor: 0,
        }
    }

    fn num_cols(&self) -> usize {
        self.n + self.m + self.art_rows.len()
    }

    fn column(&self, j: usize) -> Column {
        if j < self.n {
            Column::Structural(j)
        } else if j < self.n + self.m {
            Column::Slack(j - self.n)
        } else {
            Column::Artificial(self.art_rows[j - self.n - self.m])
        }
    }

    /// `y = c_Bᵀ B⁻¹`.
    fn btran(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for r in 0..m {
            let c = self.cost[self.basis[r]];
            if c != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yi, b) in y.iter_mut().zip(row) {
                    *yi += c * b;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        match self.column(j) {
            Column::Structural(s) => {
                let col = &self.g_cols[s * self.m..(s + 1) * self.m];
                self.cost[j] - col.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
            }
            Column::Slack(i) => self.cost[j] - y[i],
            Column::Artificial(i) => self.cost[j] + y[i],
        }
    }

    /// `B⁻¹ a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        match self.column(j) {
            Column::Structural(s) => {
                let col = &self.g_cols[s * m..(s + 1) * m];
                for (i, &a) in col.iter().enumerate() {
                    if a != 0.0 {
                        for (r, al) in alpha.iter_mut().enumerate() {
                            *al += self.binv[r * m + i] * a;
                        }
                    }
                }
            }
            Column::Slack(i) => {
                for (r, al) in alpha.iter_mut().enumerate() {
                    *al = self.binv[r * m + i];
                }
            }
            Column::Artificial(i) => {
                for (r, al) in alpha.iter_mut().enumerate() {
                    *al = -self.binv[r * m + i];
                }
            }
        }
        alpha
    }

    fn add_column_to(&self, j: usize, scale: f64, out: &mut [f64]) {
        match self.column(j) {
            Column::Structural(s) => {
                let col = &self.g_cols[s * self.m..(s + 1) * self.m];
                for (o, a) in out.iter_mut().zip(col) {
                    *o += scale * a;
                }
            }
            Column::Slack(i) => out[i] += scale,
            Column::Artificial(i) => out[i] -= scale,
        }
    }

    /// Rebuilds `B⁻¹` from scratch and recomputes the basic values.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        let mut b = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for r in 0..m {
            col.iter_mut().for_each(|v| *v = 0.0);
            self.add_column_to(self.basis[r], 1.0, &mut col);
            for i in 0..m {
                b[i * m + r] = col[i];
            }
        }
        self.binv = invert(b, m).ok_or(LpError::SingularBasis {
            iterations: self.iterations,
        })?;

        let mut rhs = self.h.clone();
        for j in 0..self.num_cols() {
            if !matches!(self.state[j], VarState::Basic(_)) && self.x[j] != 0.0 {
                self.add_column_to(j, -self.x[j], &mut rhs);
            }
        }
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            self.x[self.basis[r]] = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
        }
        Ok(())
    }

    fn run(&mut self) -> Result<PhaseOutcome, LpError> {
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let bland = degenerate_run >= DEGENERATE_BEFORE_BLAND;
            let y = self.btran();

            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.num_cols() {
                let s = self.state[j];
                if matches!(s, VarState::Basic(_)) || self.lower[j] == self.upper[j] {
                    continue;
                }
                let d = self.reduced_cost(j, &y);
                let eligible = match s {
                    VarState::AtLower => d < -self.tol.opt,
                    VarState::AtUpper => d > self.tol.opt,
                    VarState::Free => d.abs() > self.tol.opt,
                    VarState::Basic(_) => false,
                };
                if !eligible {
                    continue;
                }
                match entering {
                    None => entering = Some((j, d)),
                    Some((_, best)) if !bland && d.abs() > best.abs() => entering = Some((j, d)),
                    _ => {}
                }
                if bland {
                    break;
                }
            }
            let Some((enter, d)) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };

            let dir = if d < 0.0 { 1.0 } else { -1.0 };
            let alpha = self.ftran(enter);

            let mut theta = self.upper[enter] - self.lower[enter];
            let mut leave: Option<usize> = None;
            for (r, &a) in alpha.iter().enumerate() {
                let rate = dir * a;
                if rate.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[r];
                let step = if rate > 0.0 {
                    if self.lower[b] == f64::NEG_INFINITY {
                        continue;
                    }
                    (self.x[b] - self.lower[b]) / rate
                } else {
                    if self.upper[b] == f64::INFINITY {
                        continue;
                    }
                    (self.upper[b] - self.x[b]) / -rate
                }
                .max(0.0);
                let tie_tol = 1e-12 * (1.0 + theta.abs().min(1e12));
                let better = if step < theta - tie_tol {
                    true
                } else if (step - theta).abs() <= tie_tol {
                    match leave {
                        Some(cur) if bland => b < self.basis[cur],
                        Some(cur) => a.abs() > alpha[cur].abs(),
                        // Prefer a pivot to a bound flip of equal length.
                        None => true,
                    }
                } else {
                    false
                };
                if better {
                    theta = step;
                    leave = Some(r);
                }
            }
            if theta == f64::INFINITY {
                return Ok(PhaseOutcome::Unbounded);
            }

            self.iterations += 1;
            if theta <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            let step = dir * theta;
            self.x[enter] += step;
            for (r, &a) in alpha.iter().enumerate() {
                let b = self.basis[r];
                self.x[b] -= step * a;
            }

            match leave {
                None => {
                    let (v, s) = if dir > 0.0 {
                        (self.upper[enter], VarState::AtUpper)
                    } else {
                        (self.lower[enter], VarState::AtLower)
                    };
                    self.x[enter] = v;
                    self.state[enter] = s;
                }
                Some(r) => {
                    let out = self.basis[r];
                    if dir * alpha[r] > 0.0 {
                        self.x[out] = self.lower[out];
                        self.state[out] = VarState::AtLower;
                    } else {
                        self.x[out] = self.upper[out];
                        self.state[out] = VarState::AtUpper;
                    }
                    self.basis[r] = enter;
                    self.state[enter] = VarState::Basic(r);
                    self.pivot(r, &alpha);
                    self.since_refactor += 1;
                }
            }
        }
    }

    /// Product-form update of `B⁻¹` after column `alpha` replaces row `r`.
    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let p = alpha[r];
        for v in &mut self.binv[r * m..(r + 1) * m] {
            *v /= p;
        }
        let (head, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, tail) = rest.split_at_mut(m);
        for (k, row) in head.chunks_exact_mut(m).enumerate() {
            let f = alpha[k];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * pv;
                }
            }
        }
        for (k, row) in tail.chunks_exact_mut(m).enumerate() {
            let f = alpha[r + 1 + k];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * pv;
                }
            }
        }
    }
}

/// Gauss-Jordan inverse with partial pivoting; `None` if singular.
fn invert(mut a: Vec<f64>, m: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        inv[i * m + i] = 1.0;
    }
    for c in 0..m {
        let (p, best) = (c..m)
            .map(|r| (r, a[r * m + c].abs()))
            .fold((c, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best < 1e-12 {
            return None;
        }
        if p != c {
            for k in 0..m {
                a.swap(p * m + k, c * m + k);
                inv.swap(p * m + k, c * m + k);
            }
        }
        let d = a[c * m + c];
        for k in 0..m {
            a[c * m + k] /= d;
            inv[c * m + k] /= d;
        }
        for r in 0..m {
            if r == c {
                continue;
            }
            let f = a[r * m + c];
            if f != 0.0 {
                for k in 0..m {
                    a[r * m + k] -= f * a[c * m + k];
                    inv[r * m + k] -= f * inv[c * m + k];
                }
            }
        }
    }
    Some(inv)
}
