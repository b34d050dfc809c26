//! Small dense helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

/// Singular values below `RANK_RTOL * sigma_max` count as zero.
pub const RANK_RTOL: f64 = 1e-9;

pub fn rank(m: &DMatrix<f64>) -> usize {
    rank_with_tol(m, RANK_RTOL)
}

pub fn rank_with_tol(m: &DMatrix<f64>, rtol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    // SVD of the smaller Gram side would square the condition number; the
    // thin SVD of the wide or tall matrix is cheap for the sizes used here.
    let sv = if m.nrows() >= m.ncols() {
        m.clone().svd(false, false).singular_values
    } else {
        m.transpose().svd(false, false).singular_values
    };
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * smax).count()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Column-stacking vectorization.
pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    // nalgebra storage is column-major, which is exactly vec().
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`] for an `nrows x ncols` matrix.
pub fn unvec(v: &DVector<f64>, nrows: usize, ncols: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), nrows * ncols, "unvec: length mismatch");
    DMatrix::from_column_slice(nrows, ncols, v.as_slice())
}

pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&DMatrix::identity(3, 3)), 3);
        assert_eq!(rank(&DMatrix::from_row_slice(1, 2, &[1.0, 0.0])), 1);
        assert_eq!(
            rank(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0])),
            1
        );
        assert_eq!(rank(&DMatrix::zeros(2, 3)), 0);
    }

    #[test]
    fn kron_small() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[3.0, 4.0]);
        let k = kron(&a, &b);
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[3.0, 6.0, 4.0, 8.0]));
    }

    #[test]
    fn vec_roundtrip_and_order() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let v = vec_of(&m);
        assert_eq!(v.as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(unvec(&v, 2, 2), m);
    }
}
