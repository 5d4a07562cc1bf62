use super::lu::{det, det_sub, Lu};
use super::matrix::Matrix;
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// `[M]_A - [M]_{A,A^c} [M]_{A^c}^{-1} [M]_{A^c,A}`.
pub fn schur_complement<T: Scalar>(m: &Matrix<T>, a: &[usize]) -> Result<Matrix<T>> {
    let ac = complement(m.rows(), a);
    if ac.is_empty() {
        return Ok(m.principal(a));
    }
    let d = Lu::new(&m.principal(&ac));
    if d.is_singular() {
        return Err(Error::SingularBlock);
    }
    let blk_a = m.principal(a);
    let b = m.submatrix(a, &ac);
    let c = m.submatrix(&ac, a);
    // D^{-1} C column by column.
    let mut dinv_c = Matrix::zeros(ac.len(), a.len());
    let mut col = vec![T::zero(); ac.len()];
    for j in 0..a.len() {
        for i in 0..ac.len() {
            col[i] = c[(i, j)].clone();
        }
        let x = d.solve(&col).map_err(|_| Error::SingularBlock)?;
        for i in 0..ac.len() {
            dinv_c[(i, j)] = x[i].clone();
        }
    }
    Ok(blk_a.sub(&b.mul(&dinv_c)))
}

/// The two sides of `det(M) = det([M]_{A^c}) det(S_M)`.
pub fn schur_det_identity<T: Scalar>(m: &Matrix<T>, a: &[usize]) -> Result<(T, T)> {
    let s = schur_complement(m, a)?;
    let ac = complement(m.rows(), a);
    Ok((det(m), det_sub(m, &ac) * det(&s)))
}

/// The two sides of `det_A(M^{-1}) = det_{A^c}(M) / det(M)`.
pub fn inverse_minor_identity<T: Scalar>(m: &Matrix<T>, a: &[usize]) -> Result<(T, T)> {
    let lu = Lu::new(m);
    if lu.is_singular() {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    let inv = lu.inverse()?;
    let ac = complement(m.rows(), a);
    Ok((det_sub(&inv, a), det_sub(m, &ac) / lu.det()))
}

/// Sorted complement of `a` in `0..n`.
pub fn complement(n: usize, a: &[usize]) -> Vec<usize> {
    let mut mask = vec![false; n];
    for &i in a {
        mask[i] = true;
    }
    (0..n).filter(|&i| !mask[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_diagonal_complement_is_block() {
        let m = Matrix::from_rows(vec![vec![2.0, 1.0, 0.0], vec![1.0, 3.0, 0.0], vec![0.0, 0.0, 5.0]]);
        let s = schur_complement(&m, &[0, 1]).unwrap();
        assert!(s.max_abs_diff(&m.principal(&[0, 1])) < 1e-15);
    }

    #[test]
    fn determinant_factorises() {
        let m = Matrix::from_rows(vec![vec![4.0, 1.0, 2.0], vec![0.5, 3.0, 1.0], vec![1.0, -1.0, 5.0]]);
        let (l, r) = schur_det_identity(&m, &[0]).unwrap();
        assert!((l - r).abs() < 1e-12 * l.abs());
        let (l, r) = inverse_minor_identity(&m, &[1, 2]).unwrap();
        assert!((l - r).abs() < 1e-12);
    }

    #[test]
    fn singular_block_is_reported() {
        let m = Matrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 0.0]]);
        assert!(matches!(schur_complement(&m, &[0]), Err(Error::SingularBlock)));
    }
}
