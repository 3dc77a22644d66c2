//! The linked-transportation LP for discrete barycenters and its solution.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centroid::{build_centroids, CentroidSet, DEFAULT_TUPLE_CAP};
use crate::error::{Error, Result};
use crate::lp::{self, solve_with_generation, ColumnSource, GeneratedColumn, LpProblem, SolveOptions, Status};
use crate::measure::{squared_distance, squared_norm, DiscreteMeasure, MeasureDoc, MeasureSet};
use crate::scalar::{rel_close, Scalar};

/// Default cap on the number of LP variables sum_i |S| S_i + |S|.
pub const DEFAULT_VARIABLE_CAP: usize = 5_000_000;

/// Default cap on the tensor size prod S_i of the multi-marginal formulation.
pub const DEFAULT_MULTIMARGINAL_CAP: u64 = 1_000_000;

/// `Strategy::Auto` solves the full LP directly up to this many rows.
pub const DIRECT_ROW_LIMIT: usize = 300;

/// Squared distances c_ijk = |x_j - x_ik|^2, one dense |S| x S_i block per measure.
#[derive(Clone, Debug)]
pub struct CostTensor<T> {
    centroids: usize,
    sizes: Vec<usize>,
    blocks: Vec<Vec<T>>,
}

impl<T: Scalar> CostTensor<T> {
    pub fn new(ms: &MeasureSet<T>, s: &CentroidSet<T>) -> Self {
        let blocks = ms
            .measures()
            .iter()
            .map(|m| {
                s.points()
                    .par_iter()
                    .flat_map_iter(|x| m.points().iter().map(move |p| squared_distance(x, p)))
                    .collect()
            })
            .collect();
        Self { centroids: s.len(), sizes: ms.support_sizes(), blocks }
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> &T {
        &self.blocks[i][j * self.sizes[i] + k]
    }

    /// The costs c_ij. from centroid j to every atom of measure i.
    pub fn row(&self, i: usize, j: usize) -> &[T] {
        let s = self.sizes[i];
        &self.blocks[i][j * s..(j + 1) * s]
    }

    pub fn num_measures(&self) -> usize {
        self.sizes.len()
    }

    pub fn num_centroids(&self) -> usize {
        self.centroids
    }
}

/// N transport plans sharing the central marginal z.
#[derive(Clone, Debug, PartialEq)]
pub struct NStarTransport<T> {
    /// `(i, j, k, y_ijk)` with positive mass, sorted by `(i, j, k)`.
    entries: Vec<(usize, usize, usize, T)>,
    z: Vec<T>,
}

impl<T: Scalar> NStarTransport<T> {
    /// Builds a transport from entries, summing repeats and dropping zeros.
    /// The central masses are read off the first measure's plan.
    pub fn from_entries(
        num_centroids: usize,
        entries: impl IntoIterator<Item = (usize, usize, usize, T)>,
    ) -> Self {
        let mut raw: Vec<(usize, usize, usize, T)> = entries.into_iter().collect();
        raw.sort_by_key(|e| (e.0, e.1, e.2));
        let mut merged: Vec<(usize, usize, usize, T)> = Vec::with_capacity(raw.len());
        for e in raw {
            match merged.last_mut() {
                Some(last) if (last.0, last.1, last.2) == (e.0, e.1, e.2) => last.3 = last.3.clone() + e.3,
                _ => merged.push(e),
            }
        }
        merged.retain(|e| e.3 > T::zero());
        let mut z = vec![T::zero(); num_centroids];
        for (i, j, _, m) in &merged {
            if *i == 0 {
                z[*j] = z[*j].clone() + m.clone();
            }
        }
        Self { entries: merged, z }
    }

    pub fn entries(&self) -> &[(usize, usize, usize, T)] {
        &self.entries
    }

    /// Entries of the plan for measure `i`.
    pub fn plan(&self, i: usize) -> &[(usize, usize, usize, T)] {
        let lo = self.entries.partition_point(|e| e.0 < i);
        let hi = self.entries.partition_point(|e| e.0 <= i);
        &self.entries[lo..hi]
    }

    /// Central masses z_j.
    pub fn z(&self) -> &[T] {
        &self.z
    }

    /// Checks both marginal families, returning the largest violation on failure.
    pub fn check_marginals(&self, ms: &MeasureSet<T>, tol: &T) -> Result<()> {
        let n = ms.len();
        let mut central = vec![vec![T::zero(); self.z.len()]; n];
        let mut outer: Vec<Vec<T>> = ms.measures().iter().map(|m| vec![T::zero(); m.len()]).collect();
        for (i, j, k, m) in &self.entries {
            if *i >= n || *j >= self.z.len() || *k >= outer[*i].len() {
                return Err(Error::InfeasibleTransport(format!("entry ({i}, {j}, {k}) out of range")));
            }
            central[*i][*j] = central[*i][*j].clone() + m.clone();
            outer[*i][*k] = outer[*i][*k].clone() + m.clone();
        }
        for i in 0..n {
            for (j, v) in central[i].iter().enumerate() {
                let gap = (v.clone() - self.z[j].clone()).abs();
                if gap > *tol {
                    return Err(Error::InfeasibleTransport(format!(
                        "plan {i} ships {} into centroid {j} holding {}",
                        v.to_f64(),
                        self.z[j].to_f64()
                    )));
                }
            }
            for (k, d) in ms.measures()[i].masses().iter().enumerate() {
                let gap = (outer[i][k].clone() - d.clone()).abs();
                if gap > *tol {
                    return Err(Error::InfeasibleTransport(format!(
                        "plan {i} moves {} out of atom {k} of mass {}",
                        outer[i][k].to_f64(),
                        d.to_f64()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `sum_ijk c_ijk y_ijk`.
pub fn transport_cost<T: Scalar>(t: &NStarTransport<T>, ct: &CostTensor<T>) -> T {
    per_measure_costs(t, ct).into_iter().fold(T::zero(), |a, b| a + b)
}

fn per_measure_costs<T: Scalar>(t: &NStarTransport<T>, ct: &CostTensor<T>) -> Vec<T> {
    let mut out = vec![T::zero(); ct.num_measures()];
    for (i, j, k, m) in t.entries() {
        out[*i] = out[*i].clone() + ct.get(*i, *j, *k).clone() * m.clone();
    }
    out
}

/// Dual variables tau_ik (marginal rows) and theta_ij (linking rows).
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution<T> {
    pub tau: Vec<Vec<T>>,
    pub theta: Vec<Vec<T>>,
}

impl<T: Scalar> DualSolution<T> {
    /// Completes `tau` with the largest feasible theta_ij = min_k (c_ijk - tau_ik).
    pub fn from_tau(tau: Vec<Vec<T>>, ct: &CostTensor<T>) -> Self {
        let theta = (0..ct.num_measures())
            .map(|i| {
                (0..ct.num_centroids())
                    .into_par_iter()
                    .map(|j| row_minimum(ct.row(i, j), &tau[i]).1)
                    .collect()
            })
            .collect();
        Self { tau, theta }
    }

    /// `sum_ik d_ik tau_ik`.
    pub fn objective(&self, ms: &MeasureSet<T>) -> T {
        ms.measures()
            .iter()
            .zip(&self.tau)
            .flat_map(|(m, t)| m.masses().iter().zip(t))
            .fold(T::zero(), |acc, (d, t)| acc + d.clone() * t.clone())
    }

    /// Largest violation of theta_ij + tau_ik <= c_ijk and of sum_i theta_ij >= 0.
    pub fn max_violation(&self, ct: &CostTensor<T>) -> f64 {
        let n = ct.num_measures();
        (0..ct.num_centroids())
            .into_par_iter()
            .map(|j| {
                let mut worst = 0.0f64;
                let mut sum = T::zero();
                for i in 0..n {
                    let th = &self.theta[i][j];
                    sum = sum + th.clone();
                    for (k, c) in ct.row(i, j).iter().enumerate() {
                        let v = (th.clone() + self.tau[i][k].clone() - c.clone()).to_f64();
                        worst = worst.max(v);
                    }
                }
                worst.max(-sum.to_f64())
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// `(argmin_k, min_k)` of `c_k - tau_k`, lowest `k` on ties.
pub(crate) fn row_minimum<T: Scalar>(costs: &[T], tau: &[T]) -> (usize, T) {
    let mut best = 0;
    let mut value = costs[0].clone() - tau[0].clone();
    for k in 1..costs.len() {
        let v = costs[k].clone() - tau[k].clone();
        if v < value {
            best = k;
            value = v;
        }
    }
    (best, value)
}

/// An optimal barycenter with its transports and duals.
#[derive(Clone, Debug)]
pub struct BarycenterResult<T: Scalar> {
    pub centroids: CentroidSet<T>,
    pub barycenter: DiscreteMeasure<T>,
    /// Centroid indices of the barycenter atoms, in the same order.
    pub support: Vec<usize>,
    pub transport: NStarTransport<T>,
    pub total_cost: T,
    pub per_measure_cost: Vec<T>,
    pub dual: DualSolution<T>,
}

impl<T: Scalar> BarycenterResult<T> {
    /// Assembles a result from a feasible transport and marginal duals.
    pub fn assemble(
        ms: &MeasureSet<T>,
        centroids: CentroidSet<T>,
        ct: &CostTensor<T>,
        transport: NStarTransport<T>,
        tau: Vec<Vec<T>>,
    ) -> Result<Self> {
        let dual = DualSolution::from_tau(tau, ct);
        Self::from_parts(ms, centroids, transport, dual)
    }

    /// Assembles a result around a given transport and dual.
    pub fn from_parts(
        ms: &MeasureSet<T>,
        centroids: CentroidSet<T>,
        transport: NStarTransport<T>,
        dual: DualSolution<T>,
    ) -> Result<Self> {
        let support_tol = T::tolerances().support;
        let support: Vec<usize> = (0..centroids.len()).filter(|&j| transport.z()[j] > support_tol).collect();
        let barycenter = DiscreteMeasure::new(
            ms.dim(),
            support.iter().map(|&j| centroids.point(j).to_vec()).collect(),
            support.iter().map(|&j| transport.z()[j].clone()).collect(),
        )?;
        let mut per_measure_cost = vec![T::zero(); ms.len()];
        for (i, j, k, m) in transport.entries() {
            let c = squared_distance(centroids.point(*j), &ms.measures()[*i].points()[*k]);
            per_measure_cost[*i] = per_measure_cost[*i].clone() + c * m.clone();
        }
        let total_cost = per_measure_cost.iter().fold(T::zero(), |a, b| a + b.clone());
        Ok(Self { centroids, barycenter, support, transport, total_cost, per_measure_cost, dual })
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    pub fn to_doc(&self) -> ResultDoc {
        let exact = |v: &T| T::EXACT.then(|| v.to_exact_string());
        let n = self.per_measure_cost.len();
        ResultDoc {
            barycenter: self.barycenter.to_doc(),
            total_cost: self.total_cost.to_f64(),
            total_cost_exact: exact(&self.total_cost),
            per_measure_cost: self.per_measure_cost.iter().map(Scalar::to_f64).collect(),
            transports: (0..n)
                .map(|i| TransportDoc {
                    i,
                    entries: self
                        .transport
                        .plan(i)
                        .iter()
                        .map(|(_, j, k, m)| EntryDoc { j: *j, k: *k, mass: m.to_f64(), mass_exact: exact(m) })
                        .collect(),
                })
                .collect(),
            dual: DualDoc {
                tau: to_f64_rows(&self.dual.tau),
                theta: to_f64_rows(&self.dual.theta),
                tau_exact: T::EXACT.then(|| to_exact_rows(&self.dual.tau)),
                theta_exact: T::EXACT.then(|| to_exact_rows(&self.dual.theta)),
            },
            centroids: self
                .centroids
                .points()
                .iter()
                .map(|p| p.iter().map(Scalar::to_f64).collect())
                .collect(),
        }
    }

    /// Rebuilds a result saved by [`BarycenterResult::to_doc`] for the measures it was solved on.
    pub fn from_doc(doc: &ResultDoc, ms: &MeasureSet<T>) -> Result<Self> {
        let centroids = build_centroids(ms, DEFAULT_TUPLE_CAP)?;
        if centroids.len() != doc.centroids.len() {
            return Err(Error::Validation(format!(
                "result lists {} centroids but the measures generate {}",
                doc.centroids.len(),
                centroids.len()
            )));
        }
        let n = ms.len();
        let value = |f: f64, e: &Option<String>| -> Result<T> {
            match e {
                Some(s) if T::EXACT => T::parse_exact(s).ok_or_else(|| Error::Parse(format!("bad number {s:?}"))),
                _ => Ok(T::from_f64(f)),
            }
        };
        let mut entries = Vec::new();
        for t in &doc.transports {
            if t.i >= n {
                return Err(Error::Validation(format!("transport for measure {} of {n}", t.i)));
            }
            for e in &t.entries {
                entries.push((t.i, e.j, e.k, value(e.mass, &e.mass_exact)?));
            }
        }
        let transport = NStarTransport::from_entries(centroids.len(), entries);
        transport.check_marginals(ms, &T::from_f64(1e-7))?;
        let rows = |f: &Vec<Vec<f64>>, e: &Option<Vec<Vec<String>>>| -> Result<Vec<Vec<T>>> {
            f.iter()
                .enumerate()
                .map(|(i, r)| {
                    r.iter()
                        .enumerate()
                        .map(|(k, &v)| value(v, &e.as_ref().map(|e| e[i][k].clone())))
                        .collect()
                })
                .collect()
        };
        let tau = rows(&doc.dual.tau, &doc.dual.tau_exact)?;
        let theta = rows(&doc.dual.theta, &doc.dual.theta_exact)?;
        if tau.len() != n
            || tau.iter().zip(ms.measures()).any(|(t, m)| t.len() != m.len())
            || theta.len() != n
            || theta.iter().any(|t| t.len() != centroids.len())
        {
            return Err(Error::Validation("dual dimensions do not match the measures".into()));
        }
        let support_tol = T::tolerances().support;
        let support: Vec<usize> = (0..centroids.len()).filter(|&j| transport.z()[j] > support_tol).collect();
        let barycenter = DiscreteMeasure::new(
            ms.dim(),
            support.iter().map(|&j| centroids.point(j).to_vec()).collect(),
            support.iter().map(|&j| transport.z()[j].clone()).collect(),
        )?;
        let per_measure_cost = doc.per_measure_cost.iter().map(|&v| T::from_f64(v)).collect();
        let total_cost = value(doc.total_cost, &doc.total_cost_exact)?;
        Ok(Self {
            centroids,
            barycenter,
            support,
            transport,
            total_cost,
            per_measure_cost,
            dual: DualSolution { tau, theta },
        })
    }
}

fn to_f64_rows<T: Scalar>(rows: &[Vec<T>]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.iter().map(Scalar::to_f64).collect()).collect()
}

fn to_exact_rows<T: Scalar>(rows: &[Vec<T>]) -> Vec<Vec<String>> {
    rows.iter().map(|r| r.iter().map(Scalar::to_exact_string).collect()).collect()
}

/// JSON form of a [`BarycenterResult`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultDoc {
    pub barycenter: MeasureDoc,
    pub total_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_cost_exact: Option<String>,
    pub per_measure_cost: Vec<f64>,
    pub transports: Vec<TransportDoc>,
    pub dual: DualDoc,
    /// The canonical centroid order that `j` indices refer to.
    pub centroids: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransportDoc {
    pub i: usize,
    pub entries: Vec<EntryDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntryDoc {
    pub j: usize,
    pub k: usize,
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_exact: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualDoc {
    pub tau: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_exact: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_exact: Option<Vec<Vec<String>>>,
}

/// Number of variables and rows of the full linked LP.
pub fn primal_dimensions(support_sizes: &[usize], num_centroids: usize) -> (usize, usize) {
    let total: usize = support_sizes.iter().sum();
    (num_centroids * total + num_centroids, support_sizes.len() * num_centroids + total)
}

/// The full linked LP.
///
/// Variable y_ijk sits at `off_i + j S_i + k` with `off_i = |S| sum_{i' < i} S_i'`,
/// and z_j follows all of them. Row `i |S| + j` is the linking row
/// `sum_k y_ijk - z_j = 0`; row `N |S| + sum_{i' < i} S_i' + k` is the marginal
/// row `sum_j y_ijk = d_ik`.
pub fn build_primal<T: Scalar>(
    ms: &MeasureSet<T>,
    s: &CentroidSet<T>,
    ct: &CostTensor<T>,
    variable_cap: usize,
) -> Result<LpProblem<T>> {
    let sizes = ms.support_sizes();
    let (vars, rows) = primal_dimensions(&sizes, s.len());
    if vars > variable_cap {
        return Err(Error::Size(format!("{vars} LP variables exceed the cap of {variable_cap}")));
    }
    let n = ms.len();
    let sn = s.len();
    let moff = ms.offsets();
    let mut p = LpProblem::new(rows);
    for (i, m) in ms.measures().iter().enumerate() {
        for (k, d) in m.masses().iter().enumerate() {
            p.set_rhs(n * sn + moff[i] + k, d.clone());
        }
    }
    for i in 0..n {
        for j in 0..sn {
            for k in 0..sizes[i] {
                p.add_column(
                    ct.get(i, j, k).clone(),
                    vec![(i * sn + j, T::one()), (n * sn + moff[i] + k, T::one())],
                )?;
            }
        }
    }
    for j in 0..sn {
        p.add_column(T::zero(), (0..n).map(|i| (i * sn + j, -T::one())).collect())?;
    }
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Direct below [`DIRECT_ROW_LIMIT`] rows, column generation above.
    Auto,
    /// Simplex on the full linked LP.
    Direct,
    /// Simplex on tuple columns (j; k_1..k_N), priced over all of S.
    ColumnGeneration,
}

#[derive(Clone, Debug)]
pub struct BarycenterOptions {
    pub strategy: Strategy,
    pub tuple_cap: u64,
    pub variable_cap: usize,
    pub lp: SolveOptions,
    /// Pick one optimal solution by a fixed rule that depends only on the
    /// atom indices, so equivalent inputs report the same barycenter.
    pub canonical: bool,
}

impl Default for BarycenterOptions {
    fn default() -> Self {
        Self {
            strategy: Strategy::Auto,
            tuple_cap: DEFAULT_TUPLE_CAP,
            variable_cap: DEFAULT_VARIABLE_CAP,
            lp: SolveOptions::default(),
            canonical: true,
        }
    }
}

/// Solves for an optimal barycenter supported on the centroid set.
pub fn solve_barycenter<T: Scalar>(ms: &MeasureSet<T>, opts: &BarycenterOptions) -> Result<BarycenterResult<T>> {
    let s = build_centroids(ms, opts.tuple_cap)?;
    let ct = CostTensor::new(ms, &s);
    if ms.len() == 1 {
        let m = &ms.measures()[0];
        let entries = m.points().iter().zip(m.masses()).enumerate().map(|(k, (p, d))| {
            let j = s.index_of(p).expect("every atom is its own centroid");
            (0, j, k, d.clone())
        });
        let transport = NStarTransport::from_entries(s.len(), entries);
        let tau = vec![vec![T::zero(); m.len()]];
        return BarycenterResult::assemble(ms, s, &ct, transport, tau);
    }
    let (vars, rows) = primal_dimensions(&ms.support_sizes(), s.len());
    if vars > opts.variable_cap {
        return Err(Error::Size(format!("{vars} LP variables exceed the cap of {}", opts.variable_cap)));
    }
    let direct = match opts.strategy {
        Strategy::Auto => rows <= DIRECT_ROW_LIMIT,
        Strategy::Direct => true,
        Strategy::ColumnGeneration => false,
    };
    let result = if direct { solve_direct(ms, s, ct, opts)? } else { solve_by_generation(ms, s, ct, opts)? };
    if opts.canonical {
        canonical_selection(result, ms, &opts.lp)
    } else {
        Ok(result)
    }
}

/// Most tuples enumerated on the optimal face before canonical selection is skipped.
const FACE_TUPLE_CAP: usize = 200_000;

fn tuple_weight(tuple: &[u32]) -> u64 {
    // splitmix64 over the atom indices
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &k in tuple {
        h ^= k as u64 + 1;
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

/// Re-solves over the optimal face with pseudo-random tuple weights.
///
/// The face is spanned by the tuples with zero reduced cost under the optimal
/// dual, so every feasible point of the re-solve is optimal. The weights are
/// a hash of the atom indices, which makes the chosen vertex independent of
/// rounding noise in the costs. Returns `result` unchanged when the face is
/// too large or the re-solve does not reproduce the optimum.
fn canonical_selection<T: Scalar>(
    result: BarycenterResult<T>,
    ms: &MeasureSet<T>,
    opts: &SolveOptions,
) -> Result<BarycenterResult<T>> {
    let s = &result.centroids;
    let ct = CostTensor::new(ms, s);
    let n = ms.len();
    let tol = if T::EXACT {
        T::zero()
    } else {
        let scale = (0..n)
            .flat_map(|i| (0..s.len()).map(move |j| (i, j)))
            .map(|(i, j)| ct.row(i, j).iter().map(Scalar::to_f64).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        T::from_f64(1e-10 * (1.0 + scale))
    };
    let dual = &result.dual;
    let per_j: Vec<Vec<Vec<u32>>> = (0..s.len())
        .into_par_iter()
        .map(|j| {
            let sum = (0..n).fold(T::zero(), |a, i| a + dual.theta[i][j].clone());
            if sum > tol {
                return Vec::new();
            }
            let mut tuples = vec![Vec::with_capacity(n)];
            for i in 0..n {
                let bound = dual.theta[i][j].clone() + tol.clone();
                let ks: Vec<u32> = (0..ms.measures()[i].len())
                    .filter(|&k| ct.get(i, j, k).clone() - dual.tau[i][k].clone() <= bound)
                    .map(|k| k as u32)
                    .collect();
                tuples = tuples
                    .into_iter()
                    .flat_map(|t| {
                        ks.iter().map(move |&k| {
                            let mut t = t.clone();
                            t.push(k);
                            t
                        })
                    })
                    .take(FACE_TUPLE_CAP + 1)
                    .collect();
            }
            tuples
        })
        .collect();
    if per_j.iter().map(Vec::len).sum::<usize>() > FACE_TUPLE_CAP {
        return Ok(result);
    }
    let moff = ms.offsets();
    let mut p = LpProblem::new(moff[n]);
    for (i, m) in ms.measures().iter().enumerate() {
        for (k, d) in m.masses().iter().enumerate() {
            p.set_rhs(moff[i] + k, d.clone());
        }
    }
    let mut cols = Vec::new();
    for (j, tuples) in per_j.into_iter().enumerate() {
        for t in tuples {
            let w = T::from_ratio((tuple_weight(&t) >> 44) as i64 + (1 << 20), 1 << 20);
            p.add_column(w, t.iter().enumerate().map(|(i, &k)| (moff[i] + k as usize, T::one())).collect())?;
            cols.push((j, t));
        }
    }
    let sol = lp::solve(&p, opts)?;
    if sol.status != Status::Optimal {
        return Ok(result);
    }
    let entries = cols.iter().zip(&sol.x).filter(|(_, x)| **x > T::zero()).flat_map(|((j, t), x)| {
        t.iter().enumerate().map(move |(i, &k)| (i, *j, k as usize, x.clone()))
    });
    let transport = NStarTransport::from_entries(s.len(), entries.collect::<Vec<_>>());
    let Ok(chosen) = BarycenterResult::from_parts(ms, s.clone(), transport, result.dual.clone()) else {
        return Ok(result);
    };
    let same = if T::EXACT {
        chosen.total_cost == result.total_cost
    } else {
        rel_close(chosen.total_cost.to_f64(), result.total_cost.to_f64(), 1e-9)
    };
    Ok(if same { chosen } else { result })
}

fn solve_direct<T: Scalar>(
    ms: &MeasureSet<T>,
    s: CentroidSet<T>,
    ct: CostTensor<T>,
    opts: &BarycenterOptions,
) -> Result<BarycenterResult<T>> {
    let p = build_primal(ms, &s, &ct, opts.variable_cap)?;
    let sol = lp::solve(&p, &opts.lp)?;
    require_optimal(sol.status)?;
    let sizes = ms.support_sizes();
    let n = ms.len();
    let sn = s.len();
    let mut entries = Vec::new();
    let mut col = 0;
    for i in 0..n {
        for j in 0..sn {
            for k in 0..sizes[i] {
                if sol.x[col] > T::zero() {
                    entries.push((i, j, k, sol.x[col].clone()));
                }
                col += 1;
            }
        }
    }
    let transport = NStarTransport::from_entries(sn, entries);
    let moff = ms.offsets();
    let tau = (0..n)
        .map(|i| (0..sizes[i]).map(|k| sol.y[n * sn + moff[i] + k].clone()).collect())
        .collect();
    BarycenterResult::assemble(ms, s, &ct, transport, tau)
}

fn require_optimal(status: Status) -> Result<()> {
    match status {
        Status::Optimal => Ok(()),
        Status::Infeasible => Err(Error::Status("infeasible")),
        Status::Unbounded => Err(Error::Status("unbounded")),
    }
}

/// Prices tuple columns (j; k_1, ..., k_N) against marginal-row duals.
///
/// For each centroid j the cheapest tuple picks k_i = argmin_k (c_ijk - tau_ik)
/// independently per measure. A tuple is always offered at its own average,
/// which is at least as cheap as any other location.
pub(crate) struct SchemePricer<'a, T: Scalar> {
    ms: &'a MeasureSet<T>,
    s: &'a CentroidSet<T>,
    ct: &'a CostTensor<T>,
    moff: Vec<usize>,
    seen: HashSet<(usize, Vec<u32>)>,
    /// Tuples of every column handed out, in order.
    pub(crate) columns: Vec<(usize, Vec<u32>)>,
    max_new: usize,
}

impl<'a, T: Scalar> SchemePricer<'a, T> {
    pub(crate) fn new(ms: &'a MeasureSet<T>, s: &'a CentroidSet<T>, ct: &'a CostTensor<T>) -> Self {
        let moff = ms.offsets();
        let max_new = 2 * moff[ms.len()] + 16;
        Self { ms, s, ct, moff, seen: HashSet::new(), columns: Vec::new(), max_new }
    }

    pub(crate) fn column(&self, j: usize, tuple: &[u32]) -> GeneratedColumn<T> {
        let cost = tuple
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, &k)| acc + self.ct.get(i, j, k as usize).clone());
        let entries = tuple.iter().enumerate().map(|(i, &k)| (self.moff[i] + k as usize, T::one())).collect();
        GeneratedColumn { cost, entries }
    }

    /// Registers a column as present in the master; returns false if it already was.
    pub(crate) fn register(&mut self, j: usize, tuple: Vec<u32>) -> bool {
        if self.seen.insert((j, tuple.clone())) {
            self.columns.push((j, tuple));
            true
        } else {
            false
        }
    }

    /// The master LP over the given tuple columns.
    pub(crate) fn master(&mut self, tuples: Vec<(usize, Vec<u32>)>) -> Result<LpProblem<T>> {
        let mut p = LpProblem::new(self.moff[self.ms.len()]);
        for (i, m) in self.ms.measures().iter().enumerate() {
            for (k, d) in m.masses().iter().enumerate() {
                p.set_rhs(self.moff[i] + k, d.clone());
            }
        }
        for (j, t) in tuples {
            if self.register(j, t.clone()) {
                let c = self.column(j, &t);
                p.add_column(c.cost, c.entries)?;
            }
        }
        Ok(p)
    }

    fn tau(&self, duals: &[T]) -> Vec<Vec<T>> {
        (0..self.ms.len())
            .map(|i| duals[self.moff[i]..self.moff[i + 1]].to_vec())
            .collect()
    }

    fn reduced_cost(&self, tau: &[Vec<T>], j: usize, tuple: &[u32]) -> T {
        tuple.iter().enumerate().fold(T::zero(), |acc, (i, &k)| {
            acc + self.ct.get(i, j, k as usize).clone() - tau[i][k as usize].clone()
        })
    }
}

impl<T: Scalar> ColumnSource<T> for SchemePricer<'_, T> {
    fn price(&mut self, duals: &[T], tol: &T) -> Result<Vec<GeneratedColumn<T>>> {
        let tau = self.tau(duals);
        let n = self.ms.len();
        let neg_tol = -tol.clone();
        let mut found: Vec<(T, usize, Vec<u32>)> = (0..self.s.len())
            .into_par_iter()
            .filter_map(|j| {
                let mut rc = T::zero();
                let mut tuple = Vec::with_capacity(n);
                for i in 0..n {
                    let (k, v) = row_minimum(self.ct.row(i, j), &tau[i]);
                    rc = rc + v;
                    tuple.push(k as u32);
                }
                if rc >= neg_tol {
                    return None;
                }
                let idx: Vec<usize> = tuple.iter().map(|&k| k as usize).collect();
                if let Some(jj) = self.s.index_of_tuple(self.ms, &idx) {
                    let rc2 = self.reduced_cost(&tau, jj, &tuple);
                    if rc2 <= rc {
                        return Some((rc2, jj, tuple));
                    }
                }
                Some((rc, j, tuple))
            })
            .collect();
        found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut out = Vec::new();
        for (_, j, tuple) in found {
            if out.len() >= self.max_new {
                break;
            }
            if self.register(j, tuple.clone()) {
                out.push(self.column(j, &tuple));
            }
        }
        Ok(out)
    }
}

/// Multi-marginal northwest-corner rule: a feasible set of at most
/// sum S_i - N + 1 tuples.
pub(crate) fn northwest_corner<T: Scalar>(ms: &MeasureSet<T>) -> Vec<Vec<u32>> {
    let n = ms.len();
    let mut left: Vec<T> = ms.measures().iter().map(|m| m.masses()[0].clone()).collect();
    let mut pos = vec![0usize; n];
    let mut out = Vec::new();
    loop {
        out.push(pos.iter().map(|&k| k as u32).collect());
        let w = left.iter().skip(1).fold(left[0].clone(), |a, b| if *b < a { b.clone() } else { a });
        let mut advanced = false;
        for i in 0..n {
            left[i] = left[i].clone() - w.clone();
            if left[i] <= T::zero() {
                pos[i] += 1;
                advanced = true;
                if pos[i] >= ms.measures()[i].len() {
                    return out;
                }
                left[i] = ms.measures()[i].masses()[pos[i]].clone();
            }
        }
        debug_assert!(advanced);
    }
}

fn solve_by_generation<T: Scalar>(
    ms: &MeasureSet<T>,
    s: CentroidSet<T>,
    ct: CostTensor<T>,
    opts: &BarycenterOptions,
) -> Result<BarycenterResult<T>> {
    let (transport, tau) = {
        let mut pricer = SchemePricer::new(ms, &s, &ct);
        let initial: Vec<(usize, Vec<u32>)> = northwest_corner(ms)
            .into_iter()
            .map(|t| {
                let idx: Vec<usize> = t.iter().map(|&k| k as usize).collect();
                let j = s.index_of_tuple(ms, &idx).expect("tuple averages are centroids");
                (j, t)
            })
            .collect();
        let master = pricer.master(initial)?;
        let (_, sol) = solve_with_generation(master, &mut pricer, &opts.lp)?;
        require_optimal(sol.status)?;
        let tau = pricer.tau(&sol.y);
        let mut entries = Vec::new();
        for (h, (j, tuple)) in pricer.columns.iter().enumerate() {
            if sol.x[h] > T::zero() {
                for (i, &k) in tuple.iter().enumerate() {
                    entries.push((i, *j, k as usize, sol.x[h].clone()));
                }
            }
        }
        (NStarTransport::from_entries(s.len(), entries), tau)
    };
    BarycenterResult::assemble(ms, s, &ct, transport, tau)
}

/// Optimal coupling of the multi-marginal formulation as `(tuple, mass)` pairs.
pub type Coupling<T> = Vec<(Vec<usize>, T)>;

/// Solves the multi-marginal problem: maximize E|mean of the coupled atoms|^2
/// over couplings of the measures. The barycenter is the law of the average.
pub fn solve_multimarginal<T: Scalar>(
    ms: &MeasureSet<T>,
    tensor_cap: u64,
    lp_opts: &SolveOptions,
) -> Result<(Coupling<T>, BarycenterResult<T>)> {
    let sizes = ms.support_sizes();
    let cells = sizes.iter().fold(1u64, |a, &s| a.saturating_mul(s as u64));
    if cells > tensor_cap {
        return Err(Error::Size(format!("{cells} coupling cells exceed the cap of {tensor_cap}")));
    }
    let s = build_centroids(ms, tensor_cap)?;
    let ct = CostTensor::new(ms, &s);
    let n = ms.len();
    let moff = ms.offsets();
    let mut p = LpProblem::new(moff[n]);
    for (i, m) in ms.measures().iter().enumerate() {
        for (k, d) in m.masses().iter().enumerate() {
            p.set_rhs(moff[i] + k, d.clone());
        }
    }
    let tuples = all_tuples(&sizes);
    for t in &tuples {
        let avg = crate::centroid::tuple_average(ms, t);
        p.add_column(-squared_norm(&avg), t.iter().enumerate().map(|(i, &k)| (moff[i] + k, T::one())).collect())?;
    }
    let sol = lp::solve(&p, lp_opts)?;
    require_optimal(sol.status)?;
    let mut coupling = Vec::new();
    let mut entries = Vec::new();
    for (t, x) in tuples.into_iter().zip(&sol.x) {
        if *x > T::zero() {
            let j = s.index_of_tuple(ms, &t).expect("tuple averages are centroids");
            for (i, &k) in t.iter().enumerate() {
                entries.push((i, j, k, x.clone()));
            }
            coupling.push((t, x.clone()));
        }
    }
    // tau_ik = |x_ik|^2 + N v_ik turns the multi-marginal duals into linked-LP duals.
    let nn = T::from_usize(n);
    let tau = ms
        .measures()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            m.points()
                .iter()
                .enumerate()
                .map(|(k, x)| squared_norm(x) + nn.clone() * sol.y[moff[i] + k].clone())
                .collect()
        })
        .collect();
    let transport = NStarTransport::from_entries(s.len(), entries);
    let result = BarycenterResult::assemble(ms, s, &ct, transport, tau)?;
    Ok((coupling, result))
}

/// All index tuples of the product of `0..sizes[i]`, in lexicographic order.
pub(crate) fn all_tuples(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &s in sizes {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..s).map(move |k| {
                    let mut t = t.clone();
                    t.push(k);
                    t
                })
            })
            .collect();
    }
    out
}
