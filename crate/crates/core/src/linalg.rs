//! Small dense symmetric linear algebra used by the kernels and the
//! trace-exponential checks.

use nalgebra::{DMatrix, SymmetricEigen};

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
///
/// Orders 1 and 2 use closed forms; larger orders go through a full
/// symmetric eigendecomposition. Only the lower triangle is read for the
/// closed forms.
pub fn sym_extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    debug_assert!(m.is_square());
    match m.nrows() {
        0 => (0.0, 0.0),
        1 => (m[(0, 0)], m[(0, 0)]),
        2 => eig2(m[(0, 0)], m[(1, 0)], m[(1, 1)]),
        _ => {
            let eig = SymmetricEigen::new(m.clone());
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &v in eig.eigenvalues.iter() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            (lo, hi)
        }
    }
}

/// Eigenvalues of `[[a, b], [b, c]]`, ascending.
#[inline]
pub fn eig2(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mid = 0.5 * (a + c);
    let rad = (0.5 * (a - c)).hypot(b);
    (mid - rad, mid + rad)
}

/// Matrix exponential `exp(h * X)` of a symmetric matrix via its
/// eigendecomposition `V diag(exp(h lambda)) V^T`.
pub fn sym_expm(x: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(x.clone());
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (h * l).exp()));
    v * d * v.transpose()
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    // Tr(AB) = sum_ij A_ij B_ji
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

/// Principal submatrix of `g` on the sorted index set `idx`.
pub fn principal_submatrix(g: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| g[(idx[r], idx[c])])
}

/// Columns `idx` of `a` as a new matrix.
pub fn select_columns(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eig2_matches_general_path() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]);
        let (lo, hi) = eig2(1.0, 1.0, 2.0);
        let eig = SymmetricEigen::new(m);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((lo - ev[0]).abs() < 1e-14);
        assert!((hi - ev[1]).abs() < 1e-14);
    }

    #[test]
    fn expm_of_diagonal() {
        let x = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0, 0.5]));
        let e = sym_expm(&x, 2.0);
        assert!((e[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((e[(1, 1)] - 2f64.exp()).abs() < 1e-12);
        assert!((e[(2, 2)] - 1f64.exp()).abs() < 1e-12);
        assert!(e[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn trace_product_matches_dense() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 2, &[5.0, 6.0, 7.0, 8.0]);
        assert_eq!(trace_product(&a, &b), (&a * &b).trace());
    }
}
