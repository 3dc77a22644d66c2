//! Moving an optimal primal-dual pair into the relative interior of the
//! optimal faces, so that every column is strictly complementary.

use super::generation::{solve_with_generation, ColumnSource};
use super::{solve, LpProblem, LpSolution, SolveOptions, SparseColumn, Status};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// True when every column has `x_j > tol` or reduced cost `> tol`.
pub fn strictly_complementary<T: Scalar>(s: &LpSolution<T>, tol: &T) -> bool {
    s.is_optimal() && s.x.iter().zip(&s.reduced_costs).all(|(x, d)| x > tol || d > tol)
}

/// An optimal dual of `p` that maximizes the slack `target_cost - target^T y`
/// of a given column, capped at `cap`.
///
/// `optimum` is the optimal value of `p`. When `source` is given, the columns
/// of `p` are completed by generation exactly as in [`solve_with_generation`].
/// Requires some optimal dual whose slack at the target does not exceed `cap`.
pub fn maximize_dual_slack<T: Scalar>(
    p: &LpProblem<T>,
    source: Option<&mut dyn ColumnSource<T>>,
    optimum: &T,
    target_cost: &T,
    target: &[(usize, T)],
    cap: &T,
    opts: &SolveOptions,
) -> Result<Vec<T>> {
    let mut aux = p.clone();
    for i in 0..aux.num_rows() {
        aux.set_rhs(i, T::zero());
    }
    for (r, v) in target {
        aux.set_rhs(*r, -v.clone());
    }
    let neg_b: SparseColumn<T> = p
        .rhs()
        .iter()
        .enumerate()
        .filter(|(_, b)| !b.is_zero())
        .map(|(i, b)| (i, -b.clone()))
        .collect();
    aux.add_column(-optimum.clone(), neg_b)?;
    let neg_a: SparseColumn<T> = target.iter().map(|(r, v)| (*r, -v.clone())).collect();
    aux.add_column(cap.clone() - target_cost.clone(), neg_a)?;
    let sol = match source {
        Some(src) => solve_with_generation(aux, src, opts)?.1,
        None => solve(&aux, opts)?,
    };
    match sol.status {
        Status::Optimal => Ok(sol.y),
        Status::Unbounded => Err(Error::Numerical("dual slack problem unbounded".into())),
        Status::Infeasible => Err(Error::Numerical("dual slack problem infeasible".into())),
    }
}

/// Largest value of `x_target` over optimal solutions of `p`, given an optimal
/// dual `y` and capped at one.
fn maximize_primal_entry<T: Scalar>(
    p: &LpProblem<T>,
    y: &[T],
    target: usize,
    opts: &SolveOptions,
) -> Result<Option<Vec<T>>> {
    let tol = T::tolerances();
    let rc = p.reduced_costs(y);
    let tight: Vec<usize> = (0..p.num_cols()).filter(|&j| rc[j] <= tol.opt).collect();
    let m = p.num_rows();
    let mut aux = LpProblem::new(m + 1);
    for (i, b) in p.rhs().iter().enumerate() {
        aux.set_rhs(i, b.clone());
    }
    aux.set_rhs(m, T::one());
    for &j in &tight {
        let mut col = p.column(j).to_vec();
        let cost = if j == target {
            col.push((m, T::one()));
            -T::one()
        } else {
            T::zero()
        };
        aux.add_column(cost, col)?;
    }
    aux.add_column(T::zero(), vec![(m, T::one())])?;
    let sol = solve(&aux, opts)?;
    if !sol.is_optimal() || sol.objective >= -tol.strict {
        return Ok(None);
    }
    let mut x = vec![T::zero(); p.num_cols()];
    for (k, &j) in tight.iter().enumerate() {
        x[j] = sol.x[k].clone();
    }
    Ok(Some(x))
}

fn average<T: Scalar>(vectors: &[Vec<T>]) -> Vec<T> {
    let n = T::from_usize(vectors.len());
    let mut out = vec![T::zero(); vectors[0].len()];
    for v in vectors {
        for (o, x) in out.iter_mut().zip(v) {
            *o = o.clone() + x.clone();
        }
    }
    out.into_iter().map(|v| v / n.clone()).collect()
}

/// Returns a strictly complementary optimal pair for `p`, starting from the
/// optimal solution `s`. The returned `basis` is empty.
pub fn optimal_face_refine<T: Scalar>(
    p: &LpProblem<T>,
    s: &LpSolution<T>,
    opts: &SolveOptions,
) -> Result<LpSolution<T>> {
    if !s.is_optimal() {
        return Err(Error::Status("refinement needs an optimal solution"));
    }
    let tol = T::tolerances();
    let n = p.num_cols();
    let mut xs = vec![s.x.clone()];
    let mut ys = vec![s.y.clone()];
    let mut covered: Vec<bool> = (0..n).map(|j| s.x[j] > tol.strict || s.reduced_costs[j] > tol.strict).collect();

    for j in 0..n {
        if covered[j] {
            continue;
        }
        if let Some(x) = maximize_primal_entry(p, &s.y, j, opts)? {
            for (k, v) in x.iter().enumerate() {
                if *v > tol.strict {
                    covered[k] = true;
                }
            }
            xs.push(x);
        }
    }
    let cap = T::one();
    for j in 0..n {
        if covered[j] {
            continue;
        }
        let y = maximize_dual_slack(p, None, &s.objective, &p.cost()[j], p.column(j), &cap, opts)?;
        let rc = p.reduced_costs(&y);
        for (k, d) in rc.iter().enumerate() {
            if *d > tol.strict {
                covered[k] = true;
            }
        }
        ys.push(y);
    }

    let x = average(&xs);
    let y = average(&ys);
    let reduced_costs = p.reduced_costs(&y);
    let objective = p.objective(&x);
    Ok(LpSolution { status: Status::Optimal, x, y, reduced_costs, basis: Vec::new(), objective })
}
