//! Dense linear programming.
//!
//! Every optimization in the crate is posed as
//!
//! ```text
//! minimize    c·x
//! subject to  G x ≤ h
//!             lo ≤ x ≤ hi        (entries of lo/hi may be infinite)
//! ```
//!
//! and solved by the bounded-variable revised simplex in [`simplex`].

mod dump;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use simplex::solve;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("row {row} has {got} coefficients, expected {expected}")]
    RowLength { row: usize, got: usize, expected: usize },
    #[error("variable {index} out of range ({n} variables)")]
    VariableIndex { index: usize, n: usize },
    #[error("variable {index} has lower bound {lo} above upper bound {hi}")]
    InvertedBounds { index: usize, lo: f64, hi: f64 },
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("basis matrix became singular after {iterations} iterations")]
    SingularBasis { iterations: usize },
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("solution violates constraints by {violation:e} (tolerance {tol:e})")]
    NumericalBreakdown { violation: f64, tol: f64 },
}

/// Feasibility and optimality tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub feas: f64,
    pub opt: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feas: 1e-6,
            opt: 1e-6,
        }
    }
}

/// A minimization problem with inequality rows and variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    /// Row-major `rhs.len() × objective.len()`.
    rows: Vec<f64>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LinearProgram {
    /// Creates a problem over `objective.len()` variables, all free and
    /// without rows.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            rows: Vec::new(),
            rhs: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.num_vars();
        &self.rows[i * n..(i + 1) * n]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Appends the row `coeffs·x ≤ rhs` and returns its index.
    pub fn add_row(&mut self, coeffs: &[f64], rhs: f64) -> Result<usize, LpError> {
        if coeffs.len() != self.num_vars() {
            return Err(LpError::RowLength {
                row: self.num_rows(),
                got: coeffs.len(),
                expected: self.num_vars(),
            });
        }
        self.rows.extend_from_slice(coeffs);
        self.rhs.push(rhs);
        Ok(self.rhs.len() - 1)
    }

    /// Appends a row given as `(variable, coefficient)` pairs.
    pub fn add_sparse_row(&mut self, terms: &[(usize, f64)], rhs: f64) -> Result<usize, LpError> {
        let n = self.num_vars();
        let mut dense = vec![0.0; n];
        for &(j, a) in terms {
            if j >= n {
                return Err(LpError::VariableIndex { index: j, n });
            }
            dense[j] += a;
        }
        self.add_row(&dense, rhs)
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) -> Result<(), LpError> {
        let n = self.num_vars();
        if j >= n {
            return Err(LpError::VariableIndex { index: j, n });
        }
        self.lower[j] = lo;
        self.upper[j] = hi;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), LpError> {
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        if self.rows.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("constraint matrix"));
        }
        if self.rhs.iter().any(|v| v.is_nan()) {
            return Err(LpError::NonFinite("right-hand side"));
        }
        for (j, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(LpError::NonFinite("bounds"));
            }
            if lo > hi {
                return Err(LpError::InvertedBounds { index: j, lo, hi });
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.num_rows() {
            let lhs: f64 = self.row(i).iter().zip(x).map(|(a, v)| a * v).sum();
            worst = worst.max(lhs - self.rhs[i]);
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point. Meaningful only when `status` is `Optimal`.
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub max_primal_violation: f64,
    /// Nonnegative multiplier per row of `G x ≤ h` (zero for dropped rows).
    pub row_duals: Vec<f64>,
    /// `c_j + (Gᵀu)_j` for each variable.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
