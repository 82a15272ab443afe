//! Dense helpers for the small (N−1)- and N-dimensional matrices that appear
//! in the sliding-motion covariance dynamics. Matrices are row-major nested
//! vectors; sizes here are a handful of rows, so clarity beats BLAS.

/// Lower-triangular Cholesky factor of a symmetric matrix, or `None` when a
/// pivot is non-positive or non-finite (matrix not strictly positive
/// definite).
pub(crate) fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solve L y = b for lower-triangular L.
pub(crate) fn forward_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    y
}

pub(crate) fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
        .collect()
}

pub(crate) fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let rows = a.len();
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    let mut c = vec![vec![0.0; cols]; rows];
    for i in 0..rows {
        for k in 0..inner {
            let aik = a[i][k];
            for j in 0..cols {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub(crate) fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut t = vec![vec![0.0; rows]; cols];
    for i in 0..rows {
        for j in 0..cols {
            t[j][i] = a[i][j];
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_of_known_spd() {
        // [[4,2],[2,3]] = L L^T with L = [[2,0],[1,sqrt(2)]]
        let a = vec![vec![4.0, 2.0], vec![2.0, 3.0]];
        let l = cholesky(&a).unwrap();
        assert!((l[0][0] - 2.0).abs() < 1e-14);
        assert!((l[1][0] - 1.0).abs() < 1e-14);
        assert!((l[1][1] - 2.0f64.sqrt()).abs() < 1e-14);
        assert_eq!(l[0][1], 0.0);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(cholesky(&a).is_none());
    }

    #[test]
    fn solve_round_trip() {
        let a = vec![vec![4.0, 2.0], vec![2.0, 3.0]];
        let l = cholesky(&a).unwrap();
        let y = forward_solve(&l, &[2.0, 5.0]);
        // L y = b recovered
        let back = matvec(&l, &y);
        assert!((back[0] - 2.0).abs() < 1e-14 && (back[1] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn matmul_identity() {
        let a = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(matmul(&a, &id), a);
        assert_eq!(matmul(&id, &a), a);
        let t = transpose(&a);
        assert_eq!(t[0][1], 3.0);
        assert_eq!(t[1][0], 2.0);
    }
}
