use crate::scalar::Scalar;

/// Rank of the matrix whose rows (or, equivalently, columns) are `vectors`.
///
/// Float inputs treat pivots below `1e-9` times the largest entry as zero.
pub fn matrix_rank<T: Scalar>(vectors: &[Vec<T>]) -> usize {
    let mut rows: Vec<Vec<T>> = vectors.to_vec();
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    for r in rows.iter_mut() {
        r.resize(width, T::zero());
    }
    let scale = rows
        .iter()
        .flatten()
        .map(|v| v.abs().to_f64())
        .fold(0.0, f64::max);
    let eps = if T::EXACT { 0.0 } else { 1e-9 * scale.max(1e-300) };
    let mut rank = 0;
    for c in 0..width {
        if rank == rows.len() {
            break;
        }
        let pivot = (rank..rows.len())
            .filter(|&r| rows[r][c].abs().to_f64() > eps && !rows[r][c].is_zero())
            .max_by(|&a, &b| rows[a][c].abs().to_f64().total_cmp(&rows[b][c].abs().to_f64()));
        let Some(p) = pivot else { continue };
        rows.swap(rank, p);
        let pv = rows[rank][c].clone();
        for r in rank + 1..rows.len() {
            if rows[r][c].is_zero() {
                continue;
            }
            let f = rows[r][c].clone() / pv.clone();
            for k in c..width {
                let v = rows[r][k].clone() - f.clone() * rows[rank][k].clone();
                rows[r][k] = v;
            }
        }
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    #[test]
    fn ranks() {
        assert_eq!(matrix_rank::<f64>(&[]), 0);
        assert_eq!(matrix_rank(&[vec![1.0, 2.0], vec![2.0, 4.0]]), 1);
        assert_eq!(matrix_rank(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 2.0]]), 2);
        let r = |n| Rational::from_ratio(n, 1);
        assert_eq!(matrix_rank(&[vec![r(1), r(0)], vec![r(0), r(3)]]), 2);
    }
}
