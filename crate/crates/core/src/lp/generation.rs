//! Delayed column generation on top of the simplex engine.

use super::simplex::Engine;
use super::{LpProblem, LpSolution, SolveOptions, SparseColumn, Status};
use crate::error::Result;
use crate::scalar::Scalar;

/// A priced column offered to the restricted master.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedColumn<T> {
    pub cost: T,
    pub entries: SparseColumn<T>,
}

/// Supplies columns with negative reduced cost for given row duals.
pub trait ColumnSource<T: Scalar> {
    /// Columns whose reduced cost `cost - a^T y` is below `-tol`. An empty
    /// result certifies that no such column exists.
    fn price(&mut self, duals: &[T], tol: &T) -> Result<Vec<GeneratedColumn<T>>>;
}

/// Solves `problem` to optimality over the union of its columns and every
/// column `source` can produce. Returns the final restricted problem (the
/// input with the generated columns appended) and its optimal solution.
pub fn solve_with_generation<T: Scalar>(
    mut problem: LpProblem<T>,
    source: &mut dyn ColumnSource<T>,
    opts: &SolveOptions,
) -> Result<(LpProblem<T>, LpSolution<T>)> {
    let tol = T::tolerances().opt;
    let mut engine = Engine::new(&problem, opts);
    loop {
        let status = engine.run()?;
        if status != Status::Optimal {
            return Ok((problem, LpSolution::with_status(status)));
        }
        let duals = engine.dual_values();
        let columns = source.price(&duals, &tol)?;
        if columns.is_empty() {
            break;
        }
        for col in columns {
            let j = problem.add_column(col.cost, col.entries)?;
            engine.add_column(problem.cost()[j].clone(), problem.column(j).to_vec());
        }
        debug_assert_eq!(engine.num_cols(), problem.num_cols());
    }
    let solution = engine.solution(&problem);
    Ok((problem, solution))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Offers the columns of a hidden LP one at a time, cheapest reduced cost first.
    struct Hidden {
        cols: Vec<GeneratedColumn<f64>>,
        calls: usize,
    }

    impl ColumnSource<f64> for Hidden {
        fn price(&mut self, y: &[f64], tol: &f64) -> Result<Vec<GeneratedColumn<f64>>> {
            self.calls += 1;
            let rc = |c: &GeneratedColumn<f64>| c.cost - c.entries.iter().map(|(r, v)| v * y[*r]).sum::<f64>();
            Ok(self
                .cols
                .iter()
                .filter(|c| rc(c) < -tol)
                .min_by(|a, b| rc(a).partial_cmp(&rc(b)).unwrap())
                .cloned()
                .into_iter()
                .collect())
        }
    }

    #[test]
    fn matches_full_solve() {
        // 3x3 assignment with costs |i - j|^2 shifted; master starts from the anti-diagonal.
        let cost = |i: usize, j: usize| ((i as f64) - (j as f64)).powi(2) + 0.1 * (i * j) as f64;
        let col = |i: usize, j: usize| GeneratedColumn { cost: cost(i, j), entries: vec![(i, 1.0), (3 + j, 1.0)] };
        let mut full = LpProblem::new(6);
        let mut master = LpProblem::new(6);
        for r in 0..6 {
            full.set_rhs(r, 1.0 / 3.0);
            master.set_rhs(r, 1.0 / 3.0);
        }
        let mut hidden = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                let c = col(i, j);
                full.add_column(c.cost, c.entries.clone()).unwrap();
                if i + j == 2 {
                    master.add_column(c.cost, c.entries.clone()).unwrap();
                }
                hidden.push(c);
            }
        }
        let opts = SolveOptions::default();
        let direct = super::super::solve(&full, &opts).unwrap();
        let mut src = Hidden { cols: hidden, calls: 0 };
        let (grown, sol) = solve_with_generation(master, &mut src, &opts).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.objective - direct.objective).abs() < 1e-12);
        assert!(grown.num_cols() > 3);
        assert!(src.calls >= 2);
        for c in &src.cols {
            let rc = c.cost - c.entries.iter().map(|(r, v)| v * sol.y[*r]).sum::<f64>();
            assert!(rc > -1e-9);
        }
    }
}
