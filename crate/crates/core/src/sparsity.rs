//! Location-fixed transportation schemes and sparse barycenters.

use crate::barycenter::{BarycenterResult, NStarTransport};
use crate::centroid::CentroidSet;
use crate::error::{Error, Result};
use crate::lp::{self, matrix_rank, LpProblem, SolveOptions, Status};
use crate::measure::{squared_distance, MeasureSet};
use crate::scalar::Scalar;

/// Weighted tuples (centroid j; k_1, ..., k_N).
#[derive(Clone, Debug, PartialEq)]
pub struct TransportScheme<T> {
    pub tuples: Vec<(usize, Vec<usize>)>,
    pub weights: Vec<T>,
    pub costs: Vec<T>,
}

impl<T: Scalar> TransportScheme<T> {
    pub fn new(ms: &MeasureSet<T>, s: &CentroidSet<T>, tuples: Vec<(usize, Vec<usize>)>, weights: Vec<T>) -> Self {
        let costs = tuples.iter().map(|(j, t)| tuple_cost(ms, s, *j, t)).collect();
        Self { tuples, weights, costs }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// `sum_h w_h c_h`.
    pub fn cost(&self) -> T {
        self.weights
            .iter()
            .zip(&self.costs)
            .fold(T::zero(), |acc, (w, c)| acc + w.clone() * c.clone())
    }

    /// Tuples with positive weight.
    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|w| **w > T::zero()).count()
    }
}

/// `sum_i |x_j - x_{i k_i}|^2`.
pub fn tuple_cost<T: Scalar>(ms: &MeasureSet<T>, s: &CentroidSet<T>, j: usize, tuple: &[usize]) -> T {
    ms.measures()
        .iter()
        .zip(tuple)
        .fold(T::zero(), |acc, (m, &k)| acc + squared_distance(s.point(j), &m.points()[k]))
}

/// Decomposes a feasible transport into a scheme by repeatedly peeling off
/// the smallest positive entry.
///
/// With mu = min y_ijk at (i0, j0, k0), lowest index on ties, the tuple takes
/// k0 for measure i0 and the lowest k with y_ijk0 > 0 for every other
/// measure; mu is then subtracted along the tuple.
pub fn scheme_from_transport<T: Scalar>(
    t: &NStarTransport<T>,
    ms: &MeasureSet<T>,
    s: &CentroidSet<T>,
) -> Result<TransportScheme<T>> {
    let tol = T::tolerances();
    t.check_marginals(ms, &Scalar::max_of(&tol.feas, &T::zero()))?;
    let n = ms.len();
    // Remaining mass per measure as sorted (j, k, mass) lists.
    let mut left: Vec<Vec<(usize, usize, T)>> = (0..n)
        .map(|i| t.plan(i).iter().map(|(_, j, k, m)| (*j, *k, m.clone())).collect())
        .collect();
    let mut tuples = Vec::new();
    let mut weights = Vec::new();
    loop {
        let mut best: Option<(usize, usize, T)> = None;
        for (i, plan) in left.iter().enumerate() {
            for (pos, (_, _, m)) in plan.iter().enumerate() {
                if *m > tol.support && best.as_ref().is_none_or(|b| *m < b.2) {
                    best = Some((i, pos, m.clone()));
                }
            }
        }
        let Some((i0, pos0, mu)) = best else { break };
        let (j0, k0, _) = left[i0][pos0].clone();
        let mut tuple = vec![0usize; n];
        let mut positions = vec![None; n];
        let mut complete = true;
        for i in 0..n {
            let pos = if i == i0 {
                Some(pos0)
            } else {
                left[i].iter().position(|(j, _, m)| *j == j0 && *m > tol.support)
            };
            match pos {
                Some(p) => {
                    tuple[i] = left[i][p].1;
                    positions[i] = Some(p);
                }
                None => complete = false,
            }
        }
        debug_assert_eq!(tuple[i0], k0);
        if !complete {
            // Only reachable through float dust: the centroid's remaining mass is negligible.
            for plan in left.iter_mut() {
                for e in plan.iter_mut().filter(|e| e.0 == j0) {
                    e.2 = T::zero();
                }
            }
            continue;
        }
        for i in 0..n {
            let p = positions[i].unwrap();
            let rest = left[i][p].2.clone() - mu.clone();
            left[i][p].2 = if i == i0 || rest <= tol.support { T::zero() } else { rest };
        }
        tuples.push((j0, tuple));
        weights.push(mu);
    }
    Ok(TransportScheme::new(ms, s, tuples, weights))
}

/// Aggregates a scheme into an N-star transport: y_ijk sums the weights of
/// tuples at centroid j that use atom k of measure i.
pub fn transport_from_scheme<T: Scalar>(sch: &TransportScheme<T>, num_centroids: usize) -> NStarTransport<T> {
    let entries = sch.tuples.iter().zip(&sch.weights).flat_map(|((j, t), w)| {
        t.iter().enumerate().map(move |(i, &k)| (i, *j, k, w.clone()))
    });
    NStarTransport::from_entries(num_centroids, entries)
}

/// The scheme LP over fixed tuples: min sum_h c_h w_h subject to the marginal
/// constraints sum_{h : k_hi = k} w_h = d_ik.
pub fn scheme_lp<T: Scalar>(ms: &MeasureSet<T>, sch: &TransportScheme<T>) -> Result<LpProblem<T>> {
    let moff = ms.offsets();
    let mut p = LpProblem::new(moff[ms.len()]);
    for (i, m) in ms.measures().iter().enumerate() {
        for (k, d) in m.masses().iter().enumerate() {
            p.set_rhs(moff[i] + k, d.clone());
        }
    }
    for ((_, t), c) in sch.tuples.iter().zip(&sch.costs) {
        p.add_column(c.clone(), t.iter().enumerate().map(|(i, &k)| (moff[i] + k, T::one())).collect())?;
    }
    Ok(p)
}

/// Rank of the scheme LP constraint matrix, as dense columns.
pub fn scheme_rank<T: Scalar>(ms: &MeasureSet<T>, tuples: &[Vec<usize>]) -> usize {
    let moff = ms.offsets();
    let cols: Vec<Vec<T>> = tuples
        .iter()
        .map(|t| {
            let mut v = vec![T::zero(); moff[ms.len()]];
            for (i, &k) in t.iter().enumerate() {
                v[moff[i] + k] = T::one();
            }
            v
        })
        .collect();
    matrix_rank(&cols)
}

/// Re-solves the scheme LP over the tuples of an optimal result and rebuilds
/// the result from a basic optimal weight vector. The dual is kept.
pub fn sparsify<T: Scalar>(
    result: &BarycenterResult<T>,
    ms: &MeasureSet<T>,
    s: &CentroidSet<T>,
    opts: &SolveOptions,
) -> Result<BarycenterResult<T>> {
    let scheme = scheme_from_transport(&result.transport, ms, s)?;
    let p = scheme_lp(ms, &scheme)?;
    let sol = lp::solve(&p, opts)?;
    if sol.status != Status::Optimal {
        return Err(Error::Numerical(format!("scheme LP ended {:?}", sol.status)));
    }
    let basic = TransportScheme { weights: sol.x, ..scheme };
    let transport = transport_from_scheme(&basic, s.len());
    BarycenterResult::from_parts(ms, s.clone(), transport, result.dual.clone())
}
