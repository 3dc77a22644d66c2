//! Dense LU factorization with partial pivoting for simplex bases.
//!
//! Basis matrices here are small and very sparse, so elimination skips zero
//! multipliers and works only over the nonzeros of each pivot row.

use crate::scalar::Scalar;

#[derive(Debug)]
pub(crate) enum LuError {
    Singular,
    IllConditioned(f64),
}

/// `P A = L U` with unit-diagonal `L` stored below the diagonal of `lu`.
#[derive(Clone, Debug)]
pub(crate) struct LuFactors<T> {
    n: usize,
    lu: Vec<T>,
    /// `perm[i]` is the original row sitting at position `i`.
    perm: Vec<usize>,
}

/// Condition estimate (ratio of extreme pivots) above which a basis is rejected.
pub(crate) const MAX_CONDITION: f64 = 1e14;

impl<T: Scalar> LuFactors<T> {
    pub(crate) fn identity(n: usize) -> Self {
        let mut lu = vec![T::zero(); n * n];
        for i in 0..n {
            lu[i * n + i] = T::one();
        }
        Self { n, lu, perm: (0..n).collect() }
    }

    /// Factorizes the row-major `n x n` matrix `a`.
    pub(crate) fn factorize(mut a: Vec<T>, n: usize) -> Result<Self, LuError> {
        debug_assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        let max_entry = a.iter().map(|v| v.abs().to_f64()).fold(0.0, f64::max);
        let singular_tol = 1e-13 * max_entry.max(1.0);
        let mut pivot_row_nz: Vec<usize> = Vec::with_capacity(n);

        for k in 0..n {
            let p = if T::EXACT {
                (k..n).find(|&r| !a[r * n + k].is_zero())
            } else {
                let mut best: Option<(usize, f64)> = None;
                for r in k..n {
                    let v = a[r * n + k].to_f64().abs();
                    if v > best.map_or(0.0, |b| b.1) {
                        best = Some((r, v));
                    }
                }
                best.filter(|b| b.1 > singular_tol).map(|b| b.0)
            };
            let p = p.ok_or(LuError::Singular)?;
            if p != k {
                for c in 0..n {
                    a.swap(p * n + c, k * n + c);
                }
                perm.swap(p, k);
            }
            let pivot = a[k * n + k].clone();
            pivot_row_nz.clear();
            pivot_row_nz.extend((k + 1..n).filter(|&c| !a[k * n + c].is_zero()));
            for r in k + 1..n {
                if a[r * n + k].is_zero() {
                    continue;
                }
                let l = a[r * n + k].clone() / pivot.clone();
                for &c in &pivot_row_nz {
                    let v = a[r * n + c].clone() - l.clone() * a[k * n + c].clone();
                    a[r * n + c] = v;
                }
                a[r * n + k] = l;
            }
        }

        let f = Self { n, lu: a, perm };
        if !T::EXACT {
            let cond = f.condition_estimate();
            if cond > MAX_CONDITION {
                return Err(LuError::IllConditioned(cond));
            }
        }
        Ok(f)
    }

    /// Ratio of the largest to the smallest pivot magnitude.
    pub(crate) fn condition_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 1.0;
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let v = self.lu[i * n + i].to_f64().abs();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi / lo
    }

    /// Solves `A x = b` in place.
    pub(crate) fn solve(&self, b: &mut Vec<T>) {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&r| b[r].clone()).collect();
        for i in 0..n {
            if x[i].is_zero() {
                continue;
            }
            let xi = x[i].clone();
            for r in i + 1..n {
                let l = &self.lu[r * n + i];
                if !l.is_zero() {
                    x[r] = x[r].clone() - l.clone() * xi.clone();
                }
            }
        }
        for i in (0..n).rev() {
            if x[i].is_zero() {
                continue;
            }
            let xi = x[i].clone() / self.lu[i * n + i].clone();
            for r in 0..i {
                let u = &self.lu[r * n + i];
                if !u.is_zero() {
                    x[r] = x[r].clone() - u.clone() * xi.clone();
                }
            }
            x[i] = xi;
        }
        *b = x;
    }

    /// Solves `A^T x = c` in place.
    pub(crate) fn solve_transpose(&self, c: &mut Vec<T>) {
        let n = self.n;
        let mut w = std::mem::take(c);
        // U^T w' = c (forward).
        for i in 0..n {
            let mut v = w[i].clone();
            for r in 0..i {
                let u = &self.lu[r * n + i];
                if !u.is_zero() && !w[r].is_zero() {
                    v = v - u.clone() * w[r].clone();
                }
            }
            w[i] = v / self.lu[i * n + i].clone();
        }
        // L^T v = w' (backward, unit diagonal).
        for i in (0..n).rev() {
            let mut v = w[i].clone();
            for r in i + 1..n {
                let l = &self.lu[r * n + i];
                if !l.is_zero() && !w[r].is_zero() {
                    v = v - l.clone() * w[r].clone();
                }
            }
            w[i] = v;
        }
        let mut x = vec![T::zero(); n];
        for (i, &r) in self.perm.iter().enumerate() {
            x[r] = w[i].clone();
        }
        *c = x;
    }
}
