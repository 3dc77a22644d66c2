//! Standard-form linear programs `min c^T x, A x = b, x >= 0` and a revised
//! simplex solver returning vertex solutions with duals.

mod generation;
mod lu;
mod rank;
mod refine;
mod simplex;

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::{Scalar, Tolerances};

pub use generation::{solve_with_generation, ColumnSource, GeneratedColumn};
pub use rank::matrix_rank;
pub use refine::{maximize_dual_slack, optimal_face_refine, strictly_complementary};

/// Sparse column: `(row, value)` pairs sorted by row.
pub type SparseColumn<T> = Vec<(usize, T)>;

/// An equality-form LP stored column-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem<T> {
    rows: usize,
    cost: Vec<T>,
    columns: Vec<SparseColumn<T>>,
    rhs: Vec<T>,
}

impl<T: Scalar> LpProblem<T> {
    /// An LP with `rows` equality rows, zero right-hand side and no columns.
    pub fn new(rows: usize) -> Self {
        Self { rows, cost: Vec::new(), columns: Vec::new(), rhs: vec![T::zero(); rows] }
    }

    /// Builds a problem from `(row, col, value)` triplets; repeated entries are summed.
    pub fn from_triplets(
        rows: usize,
        cost: Vec<T>,
        triplets: impl IntoIterator<Item = (usize, usize, T)>,
        rhs: Vec<T>,
    ) -> Result<Self> {
        if rhs.len() != rows {
            return Err(Error::Validation(format!("{} right-hand sides for {rows} rows", rhs.len())));
        }
        let mut columns: Vec<SparseColumn<T>> = vec![Vec::new(); cost.len()];
        for (r, c, v) in triplets {
            if r >= rows || c >= cost.len() {
                return Err(Error::Validation(format!("triplet ({r}, {c}) out of range")));
            }
            columns[c].push((r, v));
        }
        let mut p = Self { rows, cost: Vec::new(), columns: Vec::new(), rhs };
        for (c, col) in cost.into_iter().zip(columns) {
            p.add_column(c, col)?;
        }
        Ok(p)
    }

    /// Appends a column and returns its index.
    pub fn add_column(&mut self, cost: T, mut entries: SparseColumn<T>) -> Result<usize> {
        if !cost.to_f64().is_finite() {
            return Err(Error::Validation("non-finite cost".into()));
        }
        entries.sort_by_key(|e| e.0);
        let mut merged: SparseColumn<T> = Vec::with_capacity(entries.len());
        for (r, v) in entries {
            if r >= self.rows {
                return Err(Error::Validation(format!("row {r} out of range")));
            }
            if !v.to_f64().is_finite() {
                return Err(Error::Validation("non-finite coefficient".into()));
            }
            match merged.last_mut() {
                Some(last) if last.0 == r => last.1 = last.1.clone() + v,
                _ => merged.push((r, v)),
            }
        }
        merged.retain(|e| !e.1.is_zero());
        self.cost.push(cost);
        self.columns.push(merged);
        Ok(self.columns.len() - 1)
    }

    pub fn set_rhs(&mut self, row: usize, value: T) {
        self.rhs[row] = value;
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn cost(&self) -> &[T] {
        &self.cost
    }

    pub fn rhs(&self) -> &[T] {
        &self.rhs
    }

    pub fn column(&self, j: usize) -> &[(usize, T)] {
        &self.columns[j]
    }

    /// Row-major `(row, col, value)` triplets.
    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let mut out: Vec<(usize, usize, T)> = self
            .columns
            .iter()
            .enumerate()
            .flat_map(|(j, col)| col.iter().map(move |(r, v)| (*r, j, v.clone())))
            .collect();
        out.sort_by_key(|t| (t.0, t.1));
        out
    }

    /// `a_j^T y`.
    pub fn column_dot(&self, j: usize, y: &[T]) -> T {
        self.columns[j]
            .iter()
            .fold(T::zero(), |acc, (r, v)| acc + v.clone() * y[*r].clone())
    }

    /// `A x - b`.
    pub fn residual(&self, x: &[T]) -> Vec<T> {
        let mut r: Vec<T> = self.rhs.iter().map(|b| -b.clone()).collect();
        for (j, col) in self.columns.iter().enumerate() {
            if x[j].is_zero() {
                continue;
            }
            for (i, v) in col {
                r[*i] = r[*i].clone() + v.clone() * x[j].clone();
            }
        }
        r
    }

    pub fn objective(&self, x: &[T]) -> T {
        self.cost
            .iter()
            .zip(x)
            .fold(T::zero(), |acc, (c, v)| acc + c.clone() * v.clone())
    }

    /// `b^T y`.
    pub fn dual_objective(&self, y: &[T]) -> T {
        self.rhs
            .iter()
            .zip(y)
            .fold(T::zero(), |acc, (b, v)| acc + b.clone() * v.clone())
    }

    /// `c - A^T y`.
    pub fn reduced_costs(&self, y: &[T]) -> Vec<T> {
        (0..self.num_cols())
            .map(|j| self.cost[j].clone() - self.column_dot(j, y))
            .collect()
    }

    /// Plain-text sparse dump: a header line, then `c`, `b` and `a` records.
    pub fn write_triplets(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "lp rows {} cols {} nnz {}", self.rows, self.num_cols(), self.nnz())?;
        for (j, c) in self.cost.iter().enumerate() {
            writeln!(w, "c {j} {}", c.to_exact_string())?;
        }
        for (i, b) in self.rhs.iter().enumerate() {
            writeln!(w, "b {i} {}", b.to_exact_string())?;
        }
        for (i, j, v) in self.triplets() {
            writeln!(w, "a {i} {j} {}", v.to_exact_string())?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Outcome of a solve. Vectors are empty unless the status is `Optimal`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution<T> {
    pub status: Status,
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub reduced_costs: Vec<T>,
    /// Structural columns in the final basis, ascending. Empty for refined pairs.
    pub basis: Vec<usize>,
    pub objective: T,
}

impl<T: Scalar> LpSolution<T> {
    pub(crate) fn with_status(status: Status) -> Self {
        Self {
            status,
            x: Vec::new(),
            y: Vec::new(),
            reduced_costs: Vec::new(),
            basis: Vec::new(),
            objective: T::zero(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    /// Number of strictly positive primal entries.
    pub fn support_size(&self, tol: &T) -> usize {
        self.x.iter().filter(|v| *v > tol).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PivotRule {
    /// Most negative reduced cost, switching to Bland's rule on long degenerate runs.
    Dantzig,
    /// Lowest-index entering and leaving variables throughout.
    Bland,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub pivot_rule: PivotRule,
    /// Basis refactorization period in pivots.
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before falling back to Bland's rule.
    pub degenerate_limit: usize,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            pivot_rule: PivotRule::Dantzig,
            refactor_interval: 100,
            degenerate_limit: 50,
            max_iterations: 2_000_000,
        }
    }
}

/// Solves `p`, returning an optimal basic solution, or the infeasible/unbounded status.
///
/// Exact scalars always use Bland's rule.
pub fn solve<T: Scalar>(p: &LpProblem<T>, opts: &SolveOptions) -> Result<LpSolution<T>> {
    let mut engine = simplex::Engine::new(p, opts);
    engine.run()?;
    Ok(engine.solution(p))
}

/// Checks primal feasibility, dual feasibility and complementary slackness of `s`.
pub fn check_optimality<T: Scalar>(p: &LpProblem<T>, s: &LpSolution<T>, tol: &Tolerances<T>) -> bool {
    if !s.is_optimal() {
        return false;
    }
    let neg_feas = -tol.feas.clone();
    let neg_opt = -tol.opt.clone();
    let primal = p.residual(&s.x).iter().all(|r| r.abs() <= tol.feas) && s.x.iter().all(|v| *v >= neg_feas);
    let rc = p.reduced_costs(&s.y);
    let dual = rc.iter().all(|d| *d >= neg_opt);
    let comp = s
        .x
        .iter()
        .zip(&rc)
        .all(|(x, d)| (x.clone() * d.clone()).abs() <= tol.comp);
    primal && dual && comp
}
