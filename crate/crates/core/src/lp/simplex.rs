//! Two-phase revised simplex over a dense LU basis factorization with
//! product-form (eta) updates between refactorizations.

use super::lu::{LuError, LuFactors};
use super::{LpProblem, LpSolution, PivotRule, SolveOptions, SparseColumn, Status};
use crate::error::{Error, Result};
use crate::scalar::{Scalar, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Var {
    Col(usize),
    Art(usize),
}

struct Eta<T> {
    row: usize,
    pivot: T,
    /// Off-pivot nonzeros of the entering column in the old basis.
    entries: Vec<(usize, T)>,
}

enum Outcome {
    Optimal,
    Unbounded,
}

pub(crate) struct Engine<T: Scalar> {
    m: usize,
    /// Columns with rows of negative rhs already negated.
    cols: Vec<SparseColumn<T>>,
    cost: Vec<T>,
    rhs: Vec<T>,
    flipped: Vec<bool>,
    basis: Vec<Var>,
    col_pos: Vec<Option<usize>>,
    art_pos: Vec<Option<usize>>,
    xb: Vec<T>,
    lu: LuFactors<T>,
    etas: Vec<Eta<T>>,
    tol: Tolerances<T>,
    opts: SolveOptions,
    iterations: usize,
    phase_two: bool,
    status: Option<Status>,
}

impl<T: Scalar> Engine<T> {
    pub(crate) fn new(p: &LpProblem<T>, opts: &SolveOptions) -> Self {
        let m = p.num_rows();
        let flipped: Vec<bool> = p.rhs().iter().map(|b| *b < T::zero()).collect();
        let rhs = p
            .rhs()
            .iter()
            .zip(&flipped)
            .map(|(b, &f)| if f { -b.clone() } else { b.clone() })
            .collect();
        let mut opts = opts.clone();
        if T::EXACT {
            opts.pivot_rule = PivotRule::Bland;
        }
        let mut e = Self {
            m,
            cols: Vec::with_capacity(p.num_cols()),
            cost: Vec::with_capacity(p.num_cols()),
            rhs,
            flipped,
            basis: (0..m).map(Var::Art).collect(),
            col_pos: Vec::with_capacity(p.num_cols()),
            art_pos: (0..m).map(Some).collect(),
            xb: Vec::new(),
            lu: LuFactors::identity(m),
            etas: Vec::new(),
            tol: T::tolerances(),
            opts,
            iterations: 0,
            phase_two: false,
            status: None,
        };
        e.xb = e.rhs.clone();
        for j in 0..p.num_cols() {
            e.push_column(p.cost()[j].clone(), p.column(j).to_vec());
        }
        e
    }

    fn push_column(&mut self, cost: T, col: SparseColumn<T>) -> usize {
        let col = col
            .into_iter()
            .map(|(r, v)| if self.flipped[r] { (r, -v) } else { (r, v) })
            .collect();
        self.cols.push(col);
        self.cost.push(cost);
        self.col_pos.push(None);
        self.cols.len() - 1
    }

    /// Appends a nonbasic column; the current basis stays valid.
    pub(crate) fn add_column(&mut self, cost: T, col: SparseColumn<T>) -> usize {
        self.push_column(cost, col)
    }

    pub(crate) fn num_cols(&self) -> usize {
        self.cols.len()
    }

    /// Current simplex multipliers in the caller's row orientation.
    pub(crate) fn dual_values(&self) -> Vec<T> {
        self.duals()
            .into_iter()
            .zip(&self.flipped)
            .map(|(v, &f)| if f { -v } else { v })
            .collect()
    }

    /// Runs both phases (or resumes phase two after columns were added).
    pub(crate) fn run(&mut self) -> Result<Status> {
        if !self.phase_two {
            match self.iterate()? {
                Outcome::Optimal => {}
                Outcome::Unbounded => {
                    return Err(Error::Numerical("phase one reported unboundedness".into()))
                }
            }
            let infeasibility = self
                .basis
                .iter()
                .zip(&self.xb)
                .filter(|(v, _)| matches!(v, Var::Art(_)))
                .fold(T::zero(), |acc, (_, x)| acc + x.clone());
            if infeasibility > self.tol.feas {
                self.status = Some(Status::Infeasible);
                return Ok(Status::Infeasible);
            }
            self.drive_out_artificials()?;
            self.phase_two = true;
        }
        if self.status == Some(Status::Infeasible) {
            return Ok(Status::Infeasible);
        }
        let status = match self.iterate()? {
            Outcome::Optimal => Status::Optimal,
            Outcome::Unbounded => Status::Unbounded,
        };
        self.status = Some(status);
        Ok(status)
    }

    fn var_cost(&self, v: Var) -> T {
        match (v, self.phase_two) {
            (Var::Art(_), false) => T::one(),
            (Var::Art(_), true) => T::zero(),
            (Var::Col(_), false) => T::zero(),
            (Var::Col(j), true) => self.cost[j].clone(),
        }
    }

    /// Bland ordering key: artificials first, then structural columns.
    fn order(&self, v: Var) -> usize {
        match v {
            Var::Art(r) => r,
            Var::Col(j) => self.m + j,
        }
    }

    fn ftran(&self, col: &[(usize, T)]) -> Vec<T> {
        let mut v = vec![T::zero(); self.m];
        for (r, a) in col {
            v[*r] = a.clone();
        }
        self.lu.solve(&mut v);
        for eta in &self.etas {
            if v[eta.row].is_zero() {
                continue;
            }
            let xr = v[eta.row].clone() / eta.pivot.clone();
            for (i, a) in &eta.entries {
                v[*i] = v[*i].clone() - a.clone() * xr.clone();
            }
            v[eta.row] = xr;
        }
        v
    }

    fn btran(&self, mut c: Vec<T>) -> Vec<T> {
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.row].clone();
            for (i, a) in &eta.entries {
                if !c[*i].is_zero() {
                    s = s - a.clone() * c[*i].clone();
                }
            }
            c[eta.row] = s / eta.pivot.clone();
        }
        self.lu.solve_transpose(&mut c);
        c
    }

    fn duals(&self) -> Vec<T> {
        let cb: Vec<T> = self.basis.iter().map(|&v| self.var_cost(v)).collect();
        self.btran(cb)
    }

    fn dot(col: &[(usize, T)], y: &[T]) -> T {
        col.iter().fold(T::zero(), |acc, (r, a)| acc + a.clone() * y[*r].clone())
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut dense = vec![T::zero(); m * m];
        for (p, v) in self.basis.iter().enumerate() {
            match *v {
                Var::Art(r) => dense[r * m + p] = T::one(),
                Var::Col(j) => {
                    for (r, a) in &self.cols[j] {
                        dense[r * m + p] = a.clone();
                    }
                }
            }
        }
        self.lu = LuFactors::factorize(dense, m).map_err(|e| match e {
            LuError::Singular => Error::Numerical("basis matrix became singular".into()),
            LuError::IllConditioned(c) => {
                Error::Numerical(format!("basis condition estimate {c:.3e} exceeds 1e14"))
            }
        })?;
        self.etas.clear();
        let mut xb = self.rhs.clone();
        self.lu.solve(&mut xb);
        if !T::EXACT {
            let zero = T::zero();
            let neg_feas = -self.tol.feas.clone();
            for x in xb.iter_mut() {
                if *x < zero && *x >= neg_feas {
                    *x = T::zero();
                }
            }
        }
        self.xb = xb;
        Ok(())
    }

    /// Chooses the entering column, if any has a negative reduced cost.
    fn price(&self, y: &[T], bland: bool) -> Option<usize> {
        let neg_opt = -self.tol.opt.clone();
        let mut best: Option<(usize, T)> = None;
        for j in 0..self.cols.len() {
            if self.col_pos[j].is_some() {
                continue;
            }
            let c = if self.phase_two { self.cost[j].clone() } else { T::zero() };
            let d = c - Self::dot(&self.cols[j], y);
            if d < neg_opt {
                if bland {
                    return Some(j);
                }
                if best.as_ref().is_none_or(|b| d < b.1) {
                    best = Some((j, d));
                }
            }
        }
        best.map(|b| b.0)
    }

    /// Chooses the leaving basis position for entering direction `alpha`.
    fn ratio_test(&self, alpha: &[T], bland: bool) -> Option<usize> {
        let zero = T::zero();
        let piv = &self.tol.pivot;
        // Artificials left in phase two must stay at zero, so any movement blocks.
        if self.phase_two {
            let blocked = (0..self.m)
                .filter(|&p| matches!(self.basis[p], Var::Art(_)) && alpha[p].abs() > *piv)
                .min_by_key(|&p| self.order(self.basis[p]));
            if blocked.is_some() {
                return blocked;
            }
        }
        let candidates = (0..self.m).filter(|&p| alpha[p] > *piv);
        if bland || T::EXACT {
            let mut best: Option<(usize, T)> = None;
            for p in candidates {
                let x = Scalar::max_of(&self.xb[p], &zero);
                let ratio = x / alpha[p].clone();
                let better = match &best {
                    None => true,
                    Some((q, r)) => {
                        ratio < *r || (ratio == *r && self.order(self.basis[p]) < self.order(self.basis[*q]))
                    }
                };
                if better {
                    best = Some((p, ratio));
                }
            }
            best.map(|b| b.0)
        } else {
            // Two-pass test: bound the step with relaxed bounds, then take the largest pivot.
            let candidates: Vec<usize> = candidates.collect();
            let bound = candidates
                .iter()
                .map(|&p| (self.xb[p].to_f64().max(0.0) + self.tol.feas.to_f64()) / alpha[p].to_f64())
                .fold(f64::INFINITY, f64::min);
            candidates
                .into_iter()
                .filter(|&p| self.xb[p].to_f64().max(0.0) / alpha[p].to_f64() <= bound)
                .max_by(|&a, &b| {
                    alpha[a]
                        .to_f64()
                        .partial_cmp(&alpha[b].to_f64())
                        .unwrap()
                        .then(self.order(self.basis[b]).cmp(&self.order(self.basis[a])))
                })
        }
    }

    fn pivot(&mut self, p: usize, entering: usize, alpha: Vec<T>) -> Result<bool> {
        let zero = T::zero();
        let theta = Scalar::max_of(&self.xb[p], &zero) / alpha[p].clone();
        let degenerate = theta <= self.tol.feas;
        if !theta.is_zero() {
            for i in 0..self.m {
                if i != p && !alpha[i].is_zero() {
                    self.xb[i] = self.xb[i].clone() - theta.clone() * alpha[i].clone();
                }
            }
        }
        if !T::EXACT {
            let neg_feas = -self.tol.feas.clone();
            for x in self.xb.iter_mut() {
                if *x < zero && *x >= neg_feas {
                    *x = T::zero();
                }
            }
        }
        self.xb[p] = theta;
        match self.basis[p] {
            Var::Art(r) => self.art_pos[r] = None,
            Var::Col(j) => self.col_pos[j] = None,
        }
        self.basis[p] = Var::Col(entering);
        self.col_pos[entering] = Some(p);
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|(i, a)| *i != p && !a.is_zero())
            .map(|(i, a)| (i, a.clone()))
            .collect();
        self.etas.push(Eta { row: p, pivot: alpha[p].clone(), entries });
        if self.etas.len() >= self.opts.refactor_interval {
            self.refactor()?;
        }
        Ok(degenerate)
    }

    fn iterate(&mut self) -> Result<Outcome> {
        let mut degenerate_run = 0usize;
        loop {
            self.iterations += 1;
            if self.iterations > self.opts.max_iterations {
                return Err(Error::Numerical(format!(
                    "iteration limit of {} reached",
                    self.opts.max_iterations
                )));
            }
            let bland = self.opts.pivot_rule == PivotRule::Bland
                || degenerate_run >= self.opts.degenerate_limit;
            let y = self.duals();
            let Some(q) = self.price(&y, bland) else {
                return Ok(Outcome::Optimal);
            };
            let alpha = self.ftran(&self.cols[q]);
            let Some(p) = self.ratio_test(&alpha, bland) else {
                return Ok(Outcome::Unbounded);
            };
            if self.pivot(p, q, alpha)? {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
        }
    }

    /// Replaces zero-valued basic artificials by structural columns where possible.
    fn drive_out_artificials(&mut self) -> Result<()> {
        for p in 0..self.m {
            if !matches!(self.basis[p], Var::Art(_)) {
                continue;
            }
            let mut e = vec![T::zero(); self.m];
            e[p] = T::one();
            let rho = self.btran(e);
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.cols.len() {
                if self.col_pos[j].is_some() {
                    continue;
                }
                let a = Self::dot(&self.cols[j], &rho);
                if a.abs() > self.tol.pivot {
                    let mag = a.abs().to_f64();
                    if T::EXACT {
                        best = Some((j, mag));
                        break;
                    }
                    if best.is_none_or(|b| mag > b.1) {
                        best = Some((j, mag));
                    }
                }
            }
            if let Some((j, _)) = best {
                let alpha = self.ftran(&self.cols[j]);
                self.xb[p] = T::zero();
                self.pivot(p, j, alpha)?;
            }
            // Otherwise the row is redundant; its artificial stays basic at zero.
        }
        Ok(())
    }

    pub(crate) fn solution(&self, p: &LpProblem<T>) -> LpSolution<T> {
        let status = self.status.unwrap_or(Status::Infeasible);
        if status != Status::Optimal {
            return LpSolution::with_status(status);
        }
        let n = self.cols.len();
        let mut x = vec![T::zero(); n];
        let zero = T::zero();
        for (pos, v) in self.basis.iter().enumerate() {
            if let Var::Col(j) = *v {
                x[j] = if self.xb[pos] < zero { T::zero() } else { self.xb[pos].clone() };
            }
        }
        let y = self.dual_values();
        let mut basis: Vec<usize> = self
            .basis
            .iter()
            .filter_map(|v| match v {
                Var::Col(j) => Some(*j),
                Var::Art(_) => None,
            })
            .collect();
        basis.sort_unstable();
        let reduced_costs = if p.num_cols() == n {
            p.reduced_costs(&y)
        } else {
            (0..n)
                .map(|j| {
                    let col: Vec<(usize, T)> = self.cols[j]
                        .iter()
                        .map(|(r, a)| if self.flipped[*r] { (*r, -a.clone()) } else { (*r, a.clone()) })
                        .collect();
                    self.cost[j].clone() - Self::dot(&col, &y)
                })
                .collect()
        };
        let objective = self
            .cost
            .iter()
            .zip(&x)
            .fold(T::zero(), |acc, (c, v)| acc + c.clone() * v.clone());
        LpSolution { status, x, y, reduced_costs, basis, objective }
    }
}
