//! Dense helpers around nalgebra.

use nalgebra::DMatrix;

use crate::scalar::Scalar;

/// Moore-Penrose pseudoinverse via SVD; singular values at or below
/// `T::PINV_RTOL * sigma_max` are dropped.
pub fn pinv<T: Scalar>(a: &DMatrix<T>) -> DMatrix<T> {
    if a.is_empty() {
        return DMatrix::zeros(a.ncols(), a.nrows());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(T::zero(), |m, &s| if s > m { s } else { m });
    let cutoff = smax * T::lit(T::PINV_RTOL);
    let u = svd.u.as_ref().expect("svd computed with u");
    let vt = svd.v_t.as_ref().expect("svd computed with v_t");
    let mut out = DMatrix::zeros(a.ncols(), a.nrows());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            out += (vt.row(i).transpose() * u.column(i).transpose()) / s;
        }
    }
    out
}

/// Numerical rank with the same relative cutoff as [`pinv`].
pub fn rank<T: Scalar>(a: &DMatrix<T>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(T::zero(), |m, &s| if s > m { s } else { m });
    let cutoff = smax * T::lit(T::PINV_RTOL);
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Squared Frobenius norm.
pub fn frobenius_sq<T: Scalar>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, &v| acc + v * v)
}

/// Maximum column sum of absolute values.
pub fn l1_norm<T: Scalar>(m: &DMatrix<T>) -> T {
    (0..m.ncols())
        .map(|j| m.column(j).iter().fold(T::zero(), |acc, &v| acc + v.abs()))
        .fold(T::zero(), |a, b| if b > a { b } else { a })
}

/// 0/1 matrix with a row per index set over `ncols` columns.
pub fn indicator_matrix<T: Scalar>(rows: &[Vec<usize>], ncols: usize) -> DMatrix<T> {
    let mut m = DMatrix::zeros(rows.len(), ncols);
    for (i, r) in rows.iter().enumerate() {
        for &c in r {
            m[(i, c)] = T::one();
        }
    }
    m
}

/// Exact answers `W x` for workload rows given as index sets.
pub fn evaluate(rows: &[Vec<usize>], x: &[u64]) -> Vec<u64> {
    rows.iter().map(|r| r.iter().map(|&c| x[c]).sum()).collect()
}
