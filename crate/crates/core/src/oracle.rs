//! Brute-force ground truth on tiny rational instances.
//!
//! [`enumerate_optimum`] visits every vertex of the coupling polytope and keeps
//! the one maximizing E|mean of the coupled atoms|^2; [`enumerate_lattice`]
//! walks all couplings with entries on a fixed grid. [`compare`] checks both
//! LP formulations against the vertex enumeration.

use num::{BigInt, Integer, One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::barycenter::{all_tuples, solve_barycenter, solve_multimarginal, BarycenterOptions, Coupling};
use crate::centroid::tuple_average;
use crate::error::{Error, Result};
use crate::lp::SolveOptions;
use crate::measure::{squared_norm, DiscreteMeasure, MeasureSet};
use crate::scalar::Rational;

pub const MAX_DENOMINATOR: u32 = 8;
pub const MAX_CELLS: usize = 64;
pub const DEFAULT_NODE_BUDGET: u64 = 100_000_000;

/// Largest basis size for which independence mod a 61-bit prime is exact
/// for 0/1 matrices.
const MAX_BASIS: usize = 35;
const PRIME: u64 = (1 << 61) - 1;

/// Measures whose masses are integers over a common denominator q.
#[derive(Clone, Debug)]
pub struct RationalInstance {
    measures: MeasureSet<Rational>,
    denominator: u32,
}

/// Parameters of [`RationalInstance::random`].
#[derive(Clone, Debug)]
pub struct RandomSpec {
    pub max_n: usize,
    pub max_support: usize,
    pub denominator: u32,
    pub max_dim: usize,
    /// Coordinates are integers in `-coord_bound..=coord_bound`.
    pub coord_bound: i64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self { max_n: 3, max_support: 3, denominator: 4, max_dim: 2, coord_bound: 3 }
    }
}

impl RationalInstance {
    pub fn new(measures: MeasureSet<Rational>, denominator: u32) -> Result<Self> {
        if !(1..=MAX_DENOMINATOR).contains(&denominator) {
            return Err(Error::Validation(format!("denominator {denominator} is outside 1..={MAX_DENOMINATOR}")));
        }
        let q = Rational::from_integer(denominator.into());
        for m in measures.measures() {
            if let Some(d) = m.masses().iter().find(|d| !((*d).clone() * q.clone()).is_integer()) {
                return Err(Error::Validation(format!("mass {d} is not a multiple of 1/{denominator}")));
            }
        }
        let cells = measures.support_sizes().iter().fold(1usize, |a, &s| a.saturating_mul(s));
        if cells > MAX_CELLS {
            return Err(Error::Size(format!("{cells} coupling cells exceed {MAX_CELLS}")));
        }
        Ok(Self { measures, denominator })
    }

    pub fn measures(&self) -> &MeasureSet<Rational> {
        &self.measures
    }

    pub fn denominator(&self) -> u32 {
        self.denominator
    }

    /// A random instance with N in `2..=max_n` (or 1), distinct integer atoms,
    /// and masses that are positive multiples of `1/denominator`.
    pub fn random<R: Rng>(rng: &mut R, spec: &RandomSpec) -> Result<Self> {
        let q = spec.denominator;
        if !(1..=MAX_DENOMINATOR).contains(&q) || spec.max_n == 0 || spec.max_support == 0 || spec.max_dim == 0 {
            return Err(Error::Validation("random instance parameters must be positive".into()));
        }
        let dim = rng.gen_range(1..=spec.max_dim);
        let max_s = spec.max_support.min(q as usize);
        let n = rng.gen_range(spec.max_n.min(2)..=spec.max_n);
        let sizes = loop {
            let sizes: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=max_s)).collect();
            if sizes.iter().product::<usize>() <= MAX_CELLS {
                break sizes;
            }
        };
        let side = (2 * spec.coord_bound + 1) as u64;
        let measures = sizes
            .iter()
            .map(|&s| {
                let s = s.min(side.saturating_pow(dim as u32) as usize);
                let mut points: Vec<Vec<Rational>> = Vec::with_capacity(s);
                while points.len() < s {
                    let p: Vec<Rational> = (0..dim)
                        .map(|_| Rational::from_integer(rng.gen_range(-spec.coord_bound..=spec.coord_bound).into()))
                        .collect();
                    if !points.contains(&p) {
                        points.push(p);
                    }
                }
                let masses = random_composition(rng, q, s)
                    .into_iter()
                    .map(|c| Rational::new((c as i64).into(), (q as i64).into()))
                    .collect();
                DiscreteMeasure::new(dim, points, masses)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(MeasureSet::new(measures)?, q)
    }
}

/// `parts` positive integers summing to `total`, uniformly over compositions.
fn random_composition<R: Rng>(rng: &mut R, total: u32, parts: usize) -> Vec<u32> {
    let mut cuts = rand::seq::index::sample(rng, total as usize - 1, parts - 1).into_vec();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut last = 0;
    for c in cuts {
        out.push(c as u32 + 1 - last);
        last = c as u32 + 1;
    }
    out.push(total - last);
    out
}

/// Best coupling found by an enumeration.
#[derive(Clone, Debug)]
pub struct OracleOptimum {
    pub coupling: Coupling<Rational>,
    /// The maximal E|mean of the coupled atoms|^2.
    pub mean_square: Rational,
    /// The barycenter cost sum_i W_2^2 induced by the coupling.
    pub cost: Rational,
    /// Feasible points visited (vertices or lattice couplings).
    pub visited: u64,
    pub nodes: u64,
}

/// sum_i sum_k d_ik |x_ik|^2.
fn second_moments(ms: &MeasureSet<Rational>) -> Rational {
    ms.measures()
        .iter()
        .flat_map(|m| m.points().iter().zip(m.masses()))
        .fold(Rational::zero(), |a, (p, d)| a + d.clone() * squared_norm(p))
}

/// The barycenter cost of a coupling: sum_t x_t sum_i |x_{i t_i} - mean_t|^2.
pub fn induced_cost(ms: &MeasureSet<Rational>, coupling: &Coupling<Rational>) -> Rational {
    coupling.iter().fold(Rational::zero(), |acc, (t, x)| {
        let avg = tuple_average(ms, t);
        let c = t
            .iter()
            .enumerate()
            .fold(Rational::zero(), |a, (i, &k)| a + crate::measure::squared_distance(&avg, &ms.measures()[i].points()[k]));
        acc + x.clone() * c
    })
}

fn optimum_from(ms: &MeasureSet<Rational>, coupling: Coupling<Rational>, visited: u64, nodes: u64) -> OracleOptimum {
    let mean_square = coupling
        .iter()
        .fold(Rational::zero(), |a, (t, x)| a + x.clone() * squared_norm(&tuple_average(ms, t)));
    let cost = second_moments(ms) - Rational::from_integer(ms.len().into()) * mean_square.clone();
    OracleOptimum { coupling, mean_square, cost, visited, nodes }
}

fn mul_mod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % PRIME as u128) as u64
}

fn inv_mod(a: u64) -> u64 {
    let (mut base, mut exp, mut acc) = (a, PRIME - 2, 1u64);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base);
        }
        base = mul_mod(base, base);
        exp >>= 1;
    }
    acc
}

/// Row-echelon basis mod PRIME with normalized pivots.
#[derive(Clone, Default)]
struct Echelon {
    rows: Vec<(usize, Vec<u64>)>,
}

impl Echelon {
    /// Reduces `v`; returns the reduced vector if it is independent.
    fn reduce(&self, mut v: Vec<u64>) -> Option<(usize, Vec<u64>)> {
        for (p, row) in &self.rows {
            let f = v[*p];
            if f != 0 {
                for (a, b) in v.iter_mut().zip(row) {
                    *a = (*a + PRIME - mul_mod(f, *b)) % PRIME;
                }
            }
        }
        let p = v.iter().position(|&a| a != 0)?;
        let inv = inv_mod(v[p]);
        for a in v.iter_mut() {
            *a = mul_mod(*a, inv);
        }
        Some((p, v))
    }
}

/// Solves `B x = rhs` for a 0/1 matrix given by columns of row indices;
/// returns `(numerators, det)` with `x = numerators / det`, or `None` if singular.
fn solve_integer(cols: &[&[usize]], rhs: &[i64]) -> Option<(Vec<BigInt>, BigInt)> {
    let r = rhs.len();
    let mut m = vec![vec![0i128; r + 1]; r];
    for (c, rows) in cols.iter().enumerate() {
        for &row in rows.iter() {
            m[row][c] = 1;
        }
    }
    for (row, b) in rhs.iter().enumerate() {
        m[row][r] = *b as i128;
    }
    if let Some(out) = bareiss_jordan(&mut m) {
        return out.filter(|(nums, det)| residual_free(cols, rhs, nums, det));
    }
    // i128 overflowed; redo in big integers.
    let mut m: Vec<Vec<BigInt>> = vec![vec![BigInt::zero(); r + 1]; r];
    for (c, rows) in cols.iter().enumerate() {
        for &row in rows.iter() {
            m[row][c] = BigInt::one();
        }
    }
    for (row, b) in rhs.iter().enumerate() {
        m[row][r] = BigInt::from(*b);
    }
    bareiss_jordan_big(m).filter(|(nums, det)| residual_free(cols, rhs, nums, det))
}

/// Whether `B nums = det * rhs` holds exactly.
fn residual_free(cols: &[&[usize]], rhs: &[i64], nums: &[BigInt], det: &BigInt) -> bool {
    let mut acc = vec![BigInt::zero(); rhs.len()];
    for (rows, x) in cols.iter().zip(nums) {
        for &row in rows.iter() {
            acc[row] += x;
        }
    }
    !det.is_zero() && acc.iter().zip(rhs).all(|(a, b)| *a == det * BigInt::from(*b))
}

/// Fraction-free Gauss-Jordan: ends with det on the diagonal and det * x in
/// the last column. `None` on overflow.
#[allow(clippy::needless_range_loop)]
fn bareiss_jordan(m: &mut [Vec<i128>]) -> Option<Option<(Vec<BigInt>, BigInt)>> {
    let r = m.len();
    let mut prev: i128 = 1;
    for k in 0..r {
        let Some(p) = (k..r).find(|&i| m[i][k] != 0) else { return Some(None) };
        m.swap(k, p);
        for i in 0..r {
            if i == k {
                continue;
            }
            for j in 0..=r {
                if j == k {
                    continue;
                }
                let v = m[k][k].checked_mul(m[i][j])?.checked_sub(m[i][k].checked_mul(m[k][j])?)?;
                m[i][j] = v / prev;
            }
            m[i][k] = 0;
        }
        prev = m[k][k];
    }
    Some(Some((m.iter().map(|row| BigInt::from(row[r])).collect(), BigInt::from(prev))))
}

#[allow(clippy::needless_range_loop)]
fn bareiss_jordan_big(mut m: Vec<Vec<BigInt>>) -> Option<(Vec<BigInt>, BigInt)> {
    let r = m.len();
    let mut prev = BigInt::one();
    for k in 0..r {
        let p = (k..r).find(|&i| !m[i][k].is_zero())?;
        m.swap(k, p);
        for i in 0..r {
            if i == k {
                continue;
            }
            for j in 0..=r {
                if j != k {
                    m[i][j] = (&m[k][k] * &m[i][j] - &m[i][k] * &m[k][j]) / &prev;
                }
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    Some((m.iter().map(|row| row[r].clone()).collect(), prev))
}

struct VertexSearch<'a> {
    cols: Vec<Vec<usize>>,
    /// Last cell index touching each row.
    last: Vec<usize>,
    rhs: Vec<i64>,
    weights: &'a [Rational],
    r: usize,
    budget: u64,
    nodes: u64,
    visited: u64,
    chosen: Vec<usize>,
    cover: Vec<u32>,
    best: Option<(Rational, Vec<(usize, Rational)>)>,
    q: i64,
}

impl VertexSearch<'_> {
    fn dfs(&mut self, next: usize, ech: &Echelon) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::BudgetExceeded(self.budget));
        }
        if self.chosen.len() == self.r {
            self.leaf();
            return Ok(());
        }
        let need = self.r - self.chosen.len();
        for c in next..self.cols.len() {
            if self.cols.len() - c < need {
                break;
            }
            // Every row skipped past for good must already be covered.
            if (0..self.r).any(|row| self.cover[row] == 0 && self.last[row] < c) {
                break;
            }
            let mut v = vec![0u64; self.r];
            for &row in &self.cols[c] {
                v[row] = 1;
            }
            let Some(reduced) = ech.reduce(v) else { continue };
            let mut child = ech.clone();
            child.rows.push(reduced);
            self.chosen.push(c);
            for &row in &self.cols[c] {
                self.cover[row] += 1;
            }
            let res = self.dfs(c + 1, &child);
            for &row in &self.cols[c] {
                self.cover[row] -= 1;
            }
            self.chosen.pop();
            res?;
        }
        Ok(())
    }

    fn leaf(&mut self) {
        let cols: Vec<&[usize]> = self.chosen.iter().map(|&c| self.cols[c].as_slice()).collect();
        let Some((nums, det)) = solve_integer(&cols, &self.rhs) else { return };
        let positive = det.is_positive();
        if nums.iter().any(|x| !x.is_zero() && x.is_positive() != positive) {
            return;
        }
        self.visited += 1;
        let scale = det * BigInt::from(self.q);
        let x: Vec<(usize, Rational)> = self
            .chosen
            .iter()
            .zip(nums)
            .filter(|(_, v)| !v.is_zero())
            .map(|(&c, v)| (c, Rational::new(v, scale.clone())))
            .collect();
        let value = x.iter().fold(Rational::zero(), |a, (c, v)| a + v.clone() * self.weights[*c].clone());
        if self.best.as_ref().is_none_or(|(b, _)| value > *b) {
            self.best = Some((value, x));
        }
    }
}

fn cell_weights(ms: &MeasureSet<Rational>, cells: &[Vec<usize>]) -> Vec<Rational> {
    cells.iter().map(|t| squared_norm(&tuple_average(ms, t))).collect()
}

/// The exact optimum over all couplings, by enumerating every basic feasible
/// solution of the coupling polytope.
///
/// Row (i, S_i - 1) is dropped for every i >= 1, leaving sum S_i - N + 1
/// independent marginal rows. Cells are chosen depth-first in lexicographic
/// order; a branch is cut when a column is dependent on those already chosen
/// or when some row can no longer be covered.
pub fn enumerate_optimum(inst: &RationalInstance, budget: u64) -> Result<OracleOptimum> {
    let ms = &inst.measures;
    let sizes = ms.support_sizes();
    let cells = all_tuples(&sizes);
    if ms.len() == 1 {
        let coupling = cells.into_iter().zip(ms.measures()[0].masses().iter().cloned()).collect();
        return Ok(optimum_from(ms, coupling, 1, 1));
    }
    let q = inst.denominator as i64;
    let mut row_of = Vec::new();
    let mut rhs = Vec::new();
    for (i, m) in ms.measures().iter().enumerate() {
        let kept = if i == 0 { m.len() } else { m.len() - 1 };
        let base = rhs.len();
        row_of.push((0..m.len()).map(|k| (k < kept).then_some(base + k)).collect::<Vec<_>>());
        for d in &m.masses()[..kept] {
            rhs.push((d.clone() * Rational::from_integer(q.into())).to_integer().to_i64().unwrap());
        }
    }
    let r = rhs.len();
    if r > MAX_BASIS {
        return Err(Error::Size(format!("basis size {r} exceeds {MAX_BASIS}")));
    }
    let cols: Vec<Vec<usize>> = cells
        .iter()
        .map(|t| t.iter().enumerate().filter_map(|(i, &k)| row_of[i][k]).collect())
        .collect();
    let mut last = vec![0; r];
    for (c, rows) in cols.iter().enumerate() {
        for &row in rows {
            last[row] = c;
        }
    }
    let weights = cell_weights(ms, &cells);
    let mut search = VertexSearch {
        cols,
        last,
        rhs,
        weights: &weights,
        r,
        budget,
        nodes: 0,
        visited: 0,
        chosen: Vec::new(),
        cover: vec![0; r],
        best: None,
        q,
    };
    search.dfs(0, &Echelon::default())?;
    let (_, x) = search.best.ok_or_else(|| Error::Numerical("coupling polytope has no vertex".into()))?;
    let coupling = x.into_iter().map(|(c, v)| (cells[c].clone(), v)).collect();
    Ok(optimum_from(ms, coupling, search.visited, search.nodes))
}

struct LatticeSearch<'a> {
    cells: &'a [Vec<usize>],
    /// Remaining units per measure and atom.
    left: Vec<Vec<i64>>,
    /// Per measure and atom, the last cell using it.
    last: Vec<Vec<usize>>,
    weights: &'a [BigInt],
    budget: u64,
    nodes: u64,
    visited: u64,
    current: Vec<i64>,
    best: Option<(BigInt, Vec<i64>)>,
}

impl LatticeSearch<'_> {
    fn dfs(&mut self, c: usize) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::BudgetExceeded(self.budget));
        }
        if c == self.cells.len() {
            self.visited += 1;
            let value = self
                .current
                .iter()
                .zip(self.weights)
                .fold(BigInt::zero(), |a, (v, w)| a + BigInt::from(*v) * w);
            if self.best.as_ref().is_none_or(|(b, _)| value > *b) {
                self.best = Some((value, self.current.clone()));
            }
            return Ok(());
        }
        let t = &self.cells[c];
        let max = t.iter().enumerate().map(|(i, &k)| self.left[i][k]).min().unwrap();
        for v in (0..=max).rev() {
            for (i, &k) in t.iter().enumerate() {
                self.left[i][k] -= v;
            }
            let closed = t.iter().enumerate().all(|(i, &k)| self.last[i][k] != c || self.left[i][k] == 0);
            self.current[c] = v;
            let res = if closed { self.dfs(c + 1) } else { Ok(()) };
            for (i, &k) in t.iter().enumerate() {
                self.left[i][k] += v;
            }
            res?;
        }
        self.current[c] = 0;
        Ok(())
    }
}

/// The optimum over couplings whose entries are multiples of `1 / resolution`,
/// by depth-first enumeration of all such couplings in lexicographic cell
/// order with marginal pruning.
pub fn enumerate_lattice(inst: &RationalInstance, resolution: u32, budget: u64) -> Result<OracleOptimum> {
    let ms = &inst.measures;
    let res = Rational::from_integer(resolution.into());
    let mut left = Vec::new();
    for m in ms.measures() {
        let units: Option<Vec<i64>> = m
            .masses()
            .iter()
            .map(|d| {
                let u = d.clone() * res.clone();
                u.is_integer().then(|| u.to_integer().to_i64()).flatten()
            })
            .collect();
        left.push(units.ok_or_else(|| Error::Validation(format!("masses are not multiples of 1/{resolution}")))?);
    }
    let cells = all_tuples(&ms.support_sizes());
    let mut last: Vec<Vec<usize>> = left.iter().map(|l| vec![0; l.len()]).collect();
    for (c, t) in cells.iter().enumerate() {
        for (i, &k) in t.iter().enumerate() {
            last[i][k] = c;
        }
    }
    let weights = cell_weights(ms, &cells);
    let common = weights.iter().fold(BigInt::one(), |a, w| a.lcm(w.denom()));
    let scaled: Vec<BigInt> = weights.iter().map(|w| w.numer() * (&common / w.denom())).collect();
    let mut search = LatticeSearch {
        cells: &cells,
        left,
        last,
        weights: &scaled,
        budget,
        nodes: 0,
        visited: 0,
        current: vec![0; cells.len()],
        best: None,
    };
    search.dfs(0)?;
    let (_, x) = search.best.ok_or_else(|| Error::Numerical("no lattice coupling".into()))?;
    let coupling = cells
        .iter()
        .zip(x)
        .filter(|(_, v)| *v > 0)
        .map(|(t, v)| (t.clone(), Rational::new(v.into(), resolution.into())))
        .collect();
    Ok(optimum_from(ms, coupling, search.visited, search.nodes))
}

/// Costs from the three solution paths on one instance.
#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub support_sizes: Vec<usize>,
    pub dim: usize,
    pub linked_lp: Option<String>,
    pub multimarginal: Option<String>,
    pub oracle: Option<String>,
    pub pass: bool,
    pub error: Option<String>,
}

/// Solves the instance through the linked LP, the multi-marginal LP and vertex
/// enumeration, all exactly, and checks that the three costs coincide.
pub fn compare(inst: &RationalInstance, budget: u64) -> Comparison {
    let ms = &inst.measures;
    let run = || -> Result<[Rational; 3]> {
        let lp = solve_barycenter(ms, &BarycenterOptions::default())?.total_cost;
        let mm = solve_multimarginal(ms, MAX_CELLS as u64, &SolveOptions::default())?.1.total_cost;
        let oracle = enumerate_optimum(inst, budget)?.cost;
        Ok([lp, mm, oracle])
    };
    let mut out = Comparison {
        support_sizes: ms.support_sizes(),
        dim: ms.dim(),
        linked_lp: None,
        multimarginal: None,
        oracle: None,
        pass: false,
        error: None,
    };
    match run() {
        Ok([lp, mm, oracle]) => {
            out.pass = lp == mm && mm == oracle;
            out.linked_lp = Some(crate::scalar::Scalar::to_exact_string(&lp));
            out.multimarginal = Some(crate::scalar::Scalar::to_exact_string(&mm));
            out.oracle = Some(crate::scalar::Scalar::to_exact_string(&oracle));
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// Summary of a batch of random comparisons.
#[derive(Clone, Debug, Serialize)]
pub struct OracleSummary {
    pub seed: u64,
    pub count: usize,
    pub passed: usize,
    pub failed: usize,
    pub instances: Vec<Comparison>,
}

/// Generates `count` instances from `seed` and compares them in parallel.
pub fn run_oracle(seed: u64, count: usize, spec: &RandomSpec, budget: u64) -> Result<OracleSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..count)
        .map(|_| RationalInstance::random(&mut rng, spec))
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<Comparison> = instances.par_iter().map(|inst| compare(inst, budget)).collect();
    let passed = reports.iter().filter(|r| r.pass).count();
    Ok(OracleSummary { seed, count, passed, failed: count - passed, instances: reports })
}
