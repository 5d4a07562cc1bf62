use super::matrix::Matrix;
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// LU factorisation `P A = L U` with partial (max-magnitude) pivoting.
///
/// `lu` stores the unit-lower factor below the diagonal and `U` on and above
/// it. A zero pivot marks the matrix as singular; the factorisation is still
/// returned so `det` can report 0.
#[derive(Clone, Debug)]
pub struct Lu<T: Scalar> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    sign_negative: bool,
    singular: bool,
}

impl<T: Scalar> Lu<T> {
    pub fn new(a: &Matrix<T>) -> Self {
        assert!(a.is_square(), "LU needs a square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign_negative = false;
        let mut singular = false;
        let floor = T::pivot_floor(&a.max_abs(), n);

        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs_val();
            for i in k + 1..n {
                let v = lu[(i, k)].abs_val();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= floor {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)].clone();
                    lu[(k, j)] = lu[(p, j)].clone();
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign_negative = !sign_negative;
            }
            let pivot = lu[(k, k)].clone();
            for i in k + 1..n {
                if lu[(i, k)].is_zero() {
                    continue;
                }
                let f = lu[(i, k)].clone() / pivot.clone();
                for j in k + 1..n {
                    let v = lu[(i, j)].clone() - f.clone() * lu[(k, j)].clone();
                    lu[(i, j)] = v;
                }
                lu[(i, k)] = f;
            }
        }
        Self {
            lu,
            perm,
            sign_negative,
            singular,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn det(&self) -> T {
        if self.singular {
            return T::zero();
        }
        let n = self.lu.rows();
        let mut d = T::one();
        for i in 0..n {
            d = d * self.lu[(i, i)].clone();
        }
        if self.sign_negative {
            -d
        } else {
            d
        }
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if self.singular {
            return Err(Error::Singular {
                condition: f64::INFINITY,
            });
        }
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p].clone()).collect();
        for i in 0..n {
            for j in 0..i {
                let v = x[i].clone() - self.lu[(i, j)].clone() * x[j].clone();
                x[i] = v;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let v = x[i].clone() - self.lu[(i, j)].clone() * x[j].clone();
                x[i] = v;
            }
            x[i] = x[i].clone() / self.lu[(i, i)].clone();
        }
        Ok(x)
    }

    /// Solve `x A = b` (row-vector system).
    pub fn solve_left(&self, b: &[T]) -> Result<Vec<T>> {
        if self.singular {
            return Err(Error::Singular {
                condition: f64::INFINITY,
            });
        }
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        // x P^T L U = b  =>  U^T L^T (P x^T) = b^T.
        let mut z = b.to_vec();
        for i in 0..n {
            for j in 0..i {
                let v = z[i].clone() - self.lu[(j, i)].clone() * z[j].clone();
                z[i] = v;
            }
            z[i] = z[i].clone() / self.lu[(i, i)].clone();
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let v = z[i].clone() - self.lu[(j, i)].clone() * z[j].clone();
                z[i] = v;
            }
        }
        let mut x = vec![T::zero(); n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k].clone();
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Matrix<T>> {
        let n = self.lu.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e[j] = T::one();
            let col = self.solve(&e)?;
            for i in 0..n {
                inv[(i, j)] = col[i].clone();
            }
            e[j] = T::zero();
        }
        Ok(inv)
    }
}

pub fn det<T: Scalar>(a: &Matrix<T>) -> T {
    if a.rows() == 0 {
        return T::one();
    }
    Lu::new(a).det()
}

/// `det_A(M)`, the principal minor on `idx`; the empty minor is 1.
pub fn det_sub<T: Scalar>(a: &Matrix<T>, idx: &[usize]) -> T {
    if idx.is_empty() {
        return T::one();
    }
    det(&a.principal(idx))
}

pub fn solve<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    Lu::new(a).solve(b)
}

/// Inverse of a float matrix; on failure reports a 1-norm condition estimate.
pub fn inverse(a: &Matrix<f64>) -> Result<Matrix<f64>> {
    let lu = Lu::new(a);
    if lu.is_singular() {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    let inv = lu.inverse()?;
    let cond = norm1(a) * norm1(&inv);
    if !cond.is_finite() || cond > 1e15 {
        return Err(Error::Singular { condition: cond });
    }
    Ok(inv)
}

pub fn inverse_exact<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    Lu::new(a).inverse()
}

pub fn norm1(a: &Matrix<f64>) -> f64 {
    (0..a.cols())
        .map(|j| (0..a.rows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn two_cycle(a: f64, b: f64) -> Matrix {
        Matrix::from_rows(vec![vec![-a, a], vec![b, -b]])
    }

    #[test]
    fn generator_is_singular() {
        assert_eq!(det(&two_cycle(2.0, 3.0)), 0.0);
    }

    #[test]
    fn empty_minor_is_one() {
        assert_eq!(det_sub(&two_cycle(2.0, 3.0), &[]), 1.0);
    }

    #[test]
    fn one_by_one_minor() {
        let q = 0.7;
        let m = two_cycle(2.0, 3.0).neg().add_diagonal(&q);
        assert!((det_sub(&m, &[0]) - (q + 2.0)).abs() < 1e-15);
    }

    #[test]
    fn solve_both_sides() {
        let a = Matrix::from_rows(vec![vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 2.0, 5.0]]);
        let lu = Lu::new(&a);
        let x = lu.solve(&[1.0, 2.0, 3.0]).unwrap();
        let ax = a.mul_vec(&x);
        for (u, v) in ax.iter().zip([1.0, 2.0, 3.0]) {
            assert!((u - v).abs() < 1e-12);
        }
        let y = lu.solve_left(&[1.0, 2.0, 3.0]).unwrap();
        let ya = a.left_mul_vec(&y);
        for (u, v) in ya.iter().zip([1.0, 2.0, 3.0]) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_determinant() {
        let a = Matrix::from_rows(vec![vec![2.0, -1.0], vec![-1.0, 2.0]]).to_exact();
        assert_eq!(det(&a), BigRational::from_integer(3.into()));
    }

    #[test]
    fn singular_inverse_reports() {
        assert!(matches!(inverse(&two_cycle(1.0, 1.0)), Err(Error::Singular { .. })));
    }
}
