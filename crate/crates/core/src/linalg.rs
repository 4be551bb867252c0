//! Dense solvers for the tiny systems in this crate (8x8 homographies,
//! at most 10x10 normal equations). Matrices are row-major slices.

use crate::scalar::Real;

/// Solves `A X = B` by Gaussian elimination with partial pivoting.
///
/// `a` is `n x n`, `b` is `n x m`. Returns `None` when a pivot vanishes.
pub fn solve_gaussian<T: Real>(mut a: Vec<T>, mut b: Vec<T>, n: usize, m: usize) -> Option<Vec<T>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n * m);
    let scale = a.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if scale == T::zero() {
        return None;
    }
    let tiny = scale * T::epsilon() * T::lit(n as f64);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().partial_cmp(&a[j * n + col].abs()).unwrap())
            .unwrap();
        if !(a[pivot * n + col].abs() > tiny) {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            for k in 0..m {
                b.swap(col * m + k, pivot * m + k);
            }
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[row * n + k] -= f * v;
            }
            for k in 0..m {
                let v = b[col * m + k];
                b[row * m + k] -= f * v;
            }
        }
    }
    for col in (0..n).rev() {
        let d = a[col * n + col];
        for k in 0..m {
            let mut acc = b[col * m + k];
            for j in col + 1..n {
                acc -= a[col * n + j] * b[j * m + k];
            }
            b[col * m + k] = acc / d;
        }
    }
    Some(b)
}

/// Lower Cholesky factor of a symmetric positive definite `n x n` matrix.
pub fn cholesky<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L Lᵀ X = B` given the Cholesky factor `l` (`n x n`) and `b` (`n x m`).
pub fn cholesky_solve<T: Real>(l: &[T], b: &[T], n: usize, m: usize) -> Vec<T> {
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..m {
            let mut s = y[i * m + k];
            for j in 0..i {
                s -= l[i * n + j] * y[j * m + k];
            }
            y[i * m + k] = s / l[i * n + i];
        }
    }
    for i in (0..n).rev() {
        for k in 0..m {
            let mut s = y[i * m + k];
            for j in i + 1..n {
                s -= l[j * n + i] * y[j * m + k];
            }
            y[i * m + k] = s / l[i * n + i];
        }
    }
    y
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Real>(a: &[T], n: usize) -> Vec<T> {
    let mut a = a.to_vec();
    for _sweep in 0..64 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        let diag: T = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum();
        if off <= diag * T::epsilon() * T::epsilon() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    eig
}

/// 2-norm condition number of a symmetric positive semi-definite matrix.
/// Infinite when the smallest eigenvalue is not positive.
pub fn spd_condition<T: Real>(a: &[T], n: usize) -> T {
    let eig = symmetric_eigenvalues(a, n);
    let (lo, hi) = (eig[0], eig[n - 1]);
    if lo > T::zero() {
        hi / lo
    } else {
        T::infinity()
    }
}
