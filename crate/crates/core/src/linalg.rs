//! Small dense linear algebra on row-major slices.

use crate::scalar::Real;

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
/// `a` is `n x n` row-major and is destroyed. Returns `None` when a pivot
/// falls below `tol` times the largest entry.
pub fn solve_in_place<T: Real>(a: &mut [T], b: &mut [T], n: usize, tol: T) -> Option<()> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let scale = a.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let floor = tol * scale.max(T::min_positive_value());
    for col in 0..n {
        let (piv, pval) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .fold((col, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pval <= floor {
            return None;
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == T::zero() {
                continue;
            }
            for j in col..n {
                a[r * n + j] = a[r * n + j] - f * a[col * n + j];
            }
            b[r] = b[r] - f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for j in col + 1..n {
            s = s - a[col * n + j] * b[j];
        }
        b[col] = s / a[col * n + col];
    }
    Some(())
}

/// Inverse of an `n x n` row-major matrix by Gauss-Jordan elimination.
pub fn invert<T: Real>(a: &[T], n: usize, tol: T) -> Option<Vec<T>> {
    let mut m = a.to_vec();
    let mut inv = vec![T::zero(); n * n];
    for i in 0..n {
        inv[i * n + i] = T::one();
    }
    let scale = m.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()));
    let floor = tol * scale.max(T::min_positive_value());
    for col in 0..n {
        let (piv, pval) = (col..n)
            .map(|r| (r, m[r * n + col].abs()))
            .fold((col, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pval <= floor {
            return None;
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
                inv.swap(col * n + j, piv * n + j);
            }
        }
        let d = T::one() / m[col * n + col];
        for j in 0..n {
            m[col * n + j] = m[col * n + j] * d;
            inv[col * n + j] = inv[col * n + j] * d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f == T::zero() {
                continue;
            }
            for j in 0..n {
                m[r * n + j] = m[r * n + j] - f * m[col * n + j];
                inv[r * n + j] = inv[r * n + j] - f * inv[col * n + j];
            }
        }
    }
    Some(inv)
}

/// Least-squares solution of `a x ≈ b` (`a` is `rows x cols`, row-major) by
/// Householder QR. Returns `None` when `a` is numerically rank deficient.
pub fn lstsq<T: Real>(a: &[T], b: &[T], rows: usize, cols: usize) -> Option<Vec<T>> {
    if rows < cols {
        return None;
    }
    let mut r = a.to_vec();
    let mut y = b.to_vec();
    let mut diag = vec![T::zero(); cols];
    let col_norm_max = (0..cols)
        .map(|j| (0..rows).map(|i| r[i * cols + j].powi(2)).sum::<T>().sqrt())
        .fold(T::zero(), T::max);
    let rank_tol = T::lit(1e-12).max(T::epsilon() * T::lit(100.0)) * col_norm_max;
    for j in 0..cols {
        let norm = (j..rows).map(|i| r[i * cols + j].powi(2)).sum::<T>().sqrt();
        if norm <= rank_tol {
            return None;
        }
        let alpha = if r[j * cols + j] > T::zero() { -norm } else { norm };
        // v = x - alpha e1, stored in column j below the diagonal.
        r[j * cols + j] = r[j * cols + j] - alpha;
        let vnorm2 = (j..rows).map(|i| r[i * cols + j].powi(2)).sum::<T>();
        if vnorm2 > T::zero() {
            for k in j + 1..cols {
                let dot = (j..rows)
                    .map(|i| r[i * cols + j] * r[i * cols + k])
                    .sum::<T>();
                let f = T::two() * dot / vnorm2;
                for i in j..rows {
                    r[i * cols + k] = r[i * cols + k] - f * r[i * cols + j];
                }
            }
            let dot = (j..rows).map(|i| r[i * cols + j] * y[i]).sum::<T>();
            let f = T::two() * dot / vnorm2;
            for i in j..rows {
                y[i] = y[i] - f * r[i * cols + j];
            }
        }
        diag[j] = alpha;
    }
    let mut x = vec![T::zero(); cols];
    for j in (0..cols).rev() {
        let mut s = y[j];
        for k in j + 1..cols {
            s = s - r[j * cols + k] * x[k];
        }
        x[j] = s / diag[j];
    }
    Some(x)
}
