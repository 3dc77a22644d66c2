//! Candidate barycenter support: all averages of one support point per measure,
//! plus the uniform-grid specialization.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::measure::{MeasureSet, POINT_DEDUP_TOL};
use crate::scalar::Scalar;

/// Default cap on the raw tuple count prod S_i.
pub const DEFAULT_TUPLE_CAP: u64 = 100_000_000;

/// Distinct centroids in canonical (lexicographic) order.
#[derive(Clone, Debug)]
pub struct CentroidSet<T: Scalar> {
    dim: usize,
    points: Vec<Vec<T>>,
    provenance: Vec<Vec<u32>>,
    resolution: f64,
    index: HashMap<Vec<T::Key>, usize>,
}

impl<T: Scalar> CentroidSet<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn point(&self, j: usize) -> &[T] {
        &self.points[j]
    }

    /// One generating index tuple (k_1, ..., k_N) per centroid.
    pub fn provenance(&self) -> &[Vec<u32>] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the centroid coinciding with `p`, if any.
    pub fn index_of(&self, p: &[T]) -> Option<usize> {
        let key: Vec<T::Key> = p.iter().map(|c| c.key(self.resolution)).collect();
        if let Some(&j) = self.index.get(&key) {
            return Some(j);
        }
        if T::EXACT {
            return None;
        }
        // A recomputed float average can land in a neighbouring quantization cell.
        let tol = self.resolution;
        let d = self.dim;
        let mut probe = key.clone();
        for code in 0..3usize.pow(d as u32) {
            let mut c = code;
            for s in 0..d {
                let off = (c % 3) as i64 - 1;
                c /= 3;
                probe[s] = T::shift_key(&key[s], off);
            }
            if let Some(&j) = self.index.get(&probe) {
                if self.points[j]
                    .iter()
                    .zip(p)
                    .all(|(a, b)| (a.to_f64() - b.to_f64()).abs() <= 2.0 * tol)
                {
                    return Some(j);
                }
            }
        }
        None
    }

    /// Index of the average of the given support points.
    pub fn index_of_tuple(&self, ms: &MeasureSet<T>, tuple: &[usize]) -> Option<usize> {
        self.index_of(&tuple_average(ms, tuple))
    }
}

/// (x_{1k_1} + ... + x_{Nk_N}) / N.
pub fn tuple_average<T: Scalar>(ms: &MeasureSet<T>, tuple: &[usize]) -> Vec<T> {
    let n = T::from_usize(ms.len());
    let mut sum = vec![T::zero(); ms.dim()];
    for (m, &k) in ms.measures().iter().zip(tuple) {
        for (s, c) in sum.iter_mut().zip(&m.points()[k]) {
            *s = s.clone() + c.clone();
        }
    }
    sum.into_iter().map(|s| s / n.clone()).collect()
}

fn coordinate_scale<T: Scalar>(ms: &MeasureSet<T>) -> f64 {
    1.0 + ms
        .measures()
        .iter()
        .flat_map(|m| m.points().iter().flatten())
        .map(|c| c.to_f64().abs())
        .fold(0.0, f64::max)
}

/// Builds the centroid set S.
///
/// Partial sums are deduplicated stage by stage, so the work is bounded by the
/// number of distinct partial sums rather than by prod S_i.
pub fn build_centroids<T: Scalar>(ms: &MeasureSet<T>, tuple_cap: u64) -> Result<CentroidSet<T>> {
    let raw = ms
        .support_sizes()
        .iter()
        .fold(1u64, |acc, &s| acc.saturating_mul(s as u64));
    if raw > tuple_cap {
        return Err(Error::Size(format!(
            "{raw} support tuples exceed the cap of {tuple_cap}"
        )));
    }
    let dim = ms.dim();
    let n = ms.len();
    let resolution = POINT_DEDUP_TOL * coordinate_scale(ms);
    let sum_resolution = resolution * n as f64;

    let mut sums: Vec<(Vec<T>, Vec<u32>)> = vec![(vec![T::zero(); dim], Vec::new())];
    for m in ms.measures() {
        let mut seen: HashMap<Vec<T::Key>, ()> = HashMap::with_capacity(sums.len() * m.len());
        let mut next = Vec::with_capacity(sums.len() * m.len());
        for (sum, tuple) in &sums {
            for (k, p) in m.points().iter().enumerate() {
                let s: Vec<T> = sum.iter().zip(p).map(|(a, b)| a.clone() + b.clone()).collect();
                let key: Vec<T::Key> = s.iter().map(|c| c.key(sum_resolution)).collect();
                if seen.insert(key, ()).is_none() {
                    let mut t = tuple.clone();
                    t.push(k as u32);
                    next.push((s, t));
                }
            }
        }
        sums = next;
    }

    let nn = T::from_usize(n);
    let mut entries: Vec<(Vec<T>, Vec<u32>)> = sums
        .into_iter()
        .map(|(s, t)| (s.into_iter().map(|c| c / nn.clone()).collect(), t))
        .collect();
    entries.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.partial_cmp(y).unwrap())
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut index = HashMap::with_capacity(entries.len());
    let mut points = Vec::with_capacity(entries.len());
    let mut provenance = Vec::with_capacity(entries.len());
    for (j, (p, t)) in entries.into_iter().enumerate() {
        index.insert(p.iter().map(|c| c.key(resolution)).collect(), j);
        points.push(p);
        provenance.push(t);
    }
    Ok(CentroidSet { dim, points, provenance, resolution, index })
}

/// Axis-aligned uniform grid `origin + sum_s l_s/(L_s - 1) * axes[s]`, `0 <= l_s < L_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub origin: Vec<f64>,
    pub axes: Vec<Vec<f64>>,
    pub extents: Vec<usize>,
}

/// Relative tolerance used when inferring grid spacings.
const GRID_STEP_TOL: f64 = 1e-6;
/// Relative residual allowed for a point to count as on the grid.
const GRID_RESIDUAL_TOL: f64 = 1e-9;
const MAX_GRID_EXTENT: usize = 10_000;

impl GridSpec {
    pub fn new(origin: Vec<f64>, axes: Vec<Vec<f64>>, extents: Vec<usize>) -> Result<Self> {
        let d = origin.len();
        if axes.len() != d || extents.len() != d || axes.iter().any(|a| a.len() != d) {
            return Err(Error::Validation("grid dimensions disagree".into()));
        }
        if extents.iter().any(|&l| l < 2) {
            return Err(Error::Validation("grid extents must be at least 2".into()));
        }
        let gram: Vec<Vec<f64>> = axes
            .iter()
            .map(|a| axes.iter().map(|b| dot(a, b)).collect())
            .collect();
        let scale: f64 = axes.iter().map(|a| dot(a, a)).product();
        if scale == 0.0 || determinant(gram) / scale <= 1e-12 {
            return Err(Error::Validation("grid axes are not linearly independent".into()));
        }
        Ok(Self { origin, axes, extents })
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn node_count(&self) -> usize {
        self.extents.iter().product()
    }

    /// Integer grid coordinates of `p`, if it lies on the grid.
    pub fn locate(&self, p: &[f64]) -> Option<Vec<usize>> {
        let d = self.dim();
        // Solve sum_s t_s axes[s] = p - origin for t, then l_s = t_s (L_s - 1).
        let mut a: Vec<Vec<f64>> = (0..d).map(|r| (0..d).map(|s| self.axes[s][r]).collect()).collect();
        let rhs: Vec<f64> = p.iter().zip(&self.origin).map(|(x, o)| x - o).collect();
        let t = solve_dense(&mut a, rhs)?;
        let mut ls = Vec::with_capacity(d);
        for (s, ts) in t.iter().enumerate() {
            let l = (ts * (self.extents[s] - 1) as f64).round();
            if l < 0.0 || l > (self.extents[s] - 1) as f64 {
                return None;
            }
            ls.push(l as usize);
        }
        let scale = 1.0 + p.iter().chain(&self.origin).map(|c| c.abs()).fold(0.0, f64::max);
        let back = self.node(&ls);
        back.iter()
            .zip(p)
            .all(|(a, b)| (a - b).abs() <= GRID_RESIDUAL_TOL * scale)
            .then_some(ls)
    }

    pub fn node(&self, ls: &[usize]) -> Vec<f64> {
        let mut v = self.origin.clone();
        for (s, &l) in ls.iter().enumerate() {
            let f = l as f64 / (self.extents[s] - 1) as f64;
            for (vi, ai) in v.iter_mut().zip(&self.axes[s]) {
                *vi += f * ai;
            }
        }
        v
    }
}

/// Finds the coarsest axis-aligned uniform grid holding every support point.
pub fn detect_grid<T: Scalar>(ms: &MeasureSet<T>) -> Option<GridSpec> {
    let d = ms.dim();
    let scale = coordinate_scale(ms);
    let mut origin = vec![0.0; d];
    let mut axes = vec![vec![0.0; d]; d];
    let mut extents = vec![0; d];
    for s in 0..d {
        let mut vals: Vec<f64> = ms
            .measures()
            .iter()
            .flat_map(|m| m.points().iter().map(move |p| p[s].to_f64()))
            .collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lo = vals[0];
        let hi = *vals.last().unwrap();
        let span = hi - lo;
        origin[s] = lo;
        if span <= GRID_RESIDUAL_TOL * scale {
            axes[s][s] = 1.0;
            extents[s] = 2;
            continue;
        }
        let tol = GRID_STEP_TOL * span;
        let mut step = span;
        for v in &vals {
            let diff = v - lo;
            if diff > tol {
                step = float_gcd(step.max(diff), step.min(diff), tol);
            }
        }
        let cells = (span / step).round();
        if !(1.0..=MAX_GRID_EXTENT as f64).contains(&cells) {
            return None;
        }
        let h = span / cells;
        let on_grid = vals.iter().all(|v| {
            let l = ((v - lo) / h).round();
            (v - lo - l * h).abs() <= GRID_RESIDUAL_TOL * scale
        });
        if !on_grid {
            return None;
        }
        axes[s][s] = span;
        extents[s] = cells as usize + 1;
    }
    GridSpec::new(origin, axes, extents).ok()
}

fn float_gcd(mut a: f64, mut b: f64, tol: f64) -> f64 {
    while b > tol {
        let mut r = a % b;
        if b - r <= tol {
            r = 0.0;
        }
        a = b;
        b = r;
    }
    a
}

/// The grid holding all N-fold averages of nodes of `g`.
pub fn refined_grid(g: &GridSpec, n: usize) -> GridSpec {
    GridSpec {
        origin: g.origin.clone(),
        axes: g.axes.clone(),
        extents: g.extents.iter().map(|&l| n * (l - 1) + 1).collect(),
    }
}

/// Density bound on the refined grid and the absolute support bound N(prod L - 1) + 1.
pub fn grid_density_bound(g: &GridSpec, n: usize) -> (f64, usize) {
    let d = g.dim() as i32;
    let density = g
        .extents
        .iter()
        .map(|&l| l as f64 / (l - 1) as f64)
        .product::<f64>()
        / (n as f64).powi(d - 1);
    let support = n * (g.node_count() - 1) + 1;
    (density, support)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().partial_cmp(&m[b][c].abs()).unwrap()).unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

fn solve_dense(a: &mut [Vec<f64>], mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().partial_cmp(&a[y][c].abs()).unwrap())?;
        if a[p][c] == 0.0 {
            return None;
        }
        a.swap(p, c);
        b.swap(p, c);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}
