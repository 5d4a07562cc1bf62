use super::matrix::Matrix;
use super::scalar::Scalar;

/// Polynomial with coefficients in ascending degree order.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<T = f64> {
    pub coeffs: Vec<T>,
}

impl<T: Scalar> Poly<T> {
    pub fn new(mut coeffs: Vec<T>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(T::zero());
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self::new(vec![])
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    /// `x - r`.
    pub fn linear_root(r: T) -> Self {
        Self::new(vec![-r, T::one()])
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> T {
        self.coeffs.get(k).cloned().unwrap_or_else(T::zero)
    }

    /// Coefficients from the leading term down.
    pub fn descending(&self) -> Vec<T> {
        self.coeffs.iter().rev().cloned().collect()
    }

    pub fn eval(&self, x: &T) -> T {
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc * x.clone() + c.clone())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) - other.coeff(k)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![T::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Self::new(out)
    }

    pub fn scale(&self, s: &T) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.clone() * s.clone()).collect())
    }

    /// Multiply by `x^k`.
    pub fn shift(&self, k: usize) -> Self {
        let mut c = vec![T::zero(); k];
        c.extend(self.coeffs.iter().cloned());
        Self::new(c)
    }

    pub fn to_f64(&self) -> Poly<f64> {
        Poly::new(self.coeffs.iter().map(Scalar::to_f64).collect())
    }
}

impl Poly<f64> {
    /// Largest coefficient discrepancy relative to the larger coefficient
    /// magnitude of the two polynomials.
    pub fn max_rel_diff(&self, other: &Self) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        let scale = self
            .coeffs
            .iter()
            .chain(&other.coeffs)
            .fold(0.0f64, |m, c| m.max(c.abs()))
            .max(f64::MIN_POSITIVE);
        (0..n)
            .map(|k| (self.coeff(k) - other.coeff(k)).abs() / scale)
            .fold(0.0, f64::max)
    }
}

/// Matrix-valued polynomial `Σ_k C_k q^k`, ascending degree order.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPoly<T = f64> {
    pub coeffs: Vec<Matrix<T>>,
}

impl<T: Scalar> MatrixPoly<T> {
    pub fn dim(&self) -> usize {
        self.coeffs.first().map_or(0, Matrix::rows)
    }

    pub fn eval(&self, q: &T) -> Matrix<T> {
        let n = self.dim();
        self.coeffs
            .iter()
            .rev()
            .fold(Matrix::zeros(n, n), |acc, c| acc.scale(q).add(c))
    }

    /// The scalar polynomial in entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> Poly<T> {
        Poly::new(self.coeffs.iter().map(|c| c[(i, j)].clone()).collect())
    }
}

/// Characteristic polynomial and adjugate of `qI - A` from one pass of the
/// Faddeev–LeVerrier recurrence.
#[derive(Clone, Debug)]
pub struct FaddeevLeverrier<T = f64> {
    /// `det(qI - A)`; the leading coefficient is exactly 1.
    pub char_poly: Poly<T>,
    /// `adj(qI - A)` as a matrix polynomial of degree `n - 1`.
    pub adjugate: MatrixPoly<T>,
}

pub fn faddeev_leverrier<T: Scalar>(a: &Matrix<T>) -> FaddeevLeverrier<T> {
    assert!(a.is_square());
    let n = a.rows();
    // c[k] is the coefficient of q^k.
    let mut c = vec![T::zero(); n + 1];
    c[n] = T::one();
    let mut ms: Vec<Matrix<T>> = Vec::with_capacity(n);
    let mut m = Matrix::<T>::zeros(n, n);
    for k in 1..=n {
        m = a.mul(&m).add_diagonal(&c[n - k + 1]);
        let am = a.mul(&m);
        c[n - k] = -(am.trace() / T::from_usize(k));
        ms.push(m.clone());
    }
    // adj(qI - A) = Σ_{k=1}^{n} M_k q^{n-k}
    let adjugate = if n == 0 {
        MatrixPoly { coeffs: vec![] }
    } else {
        MatrixPoly {
            coeffs: ms.into_iter().rev().collect(),
        }
    };
    FaddeevLeverrier {
        char_poly: Poly { coeffs: c },
        adjugate,
    }
}

/// `det(qI - A)` coefficients, ascending.
pub fn char_poly<T: Scalar>(a: &Matrix<T>) -> Poly<T> {
    faddeev_leverrier(a).char_poly
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::lu::det;

    #[test]
    fn two_cycle_char_poly() {
        let (a, b) = (2.0, 3.0);
        let l = Matrix::from_rows(vec![vec![-a, a], vec![b, -b]]);
        let p = char_poly(&l);
        assert_eq!(p.coeffs, vec![0.0, a + b, 1.0]);
    }

    #[test]
    fn identity_char_poly() {
        let p = char_poly(&Matrix::<f64>::identity(3));
        assert_eq!(p.descending(), vec![1.0, -3.0, 3.0, -1.0]);
    }

    #[test]
    fn adjugate_inverts() {
        let a = Matrix::from_rows(vec![vec![-3.0, 1.0, 2.0], vec![1.0, -1.0, 0.0], vec![2.0, 2.0, -4.0]]);
        let fl = faddeev_leverrier(&a);
        let q = 0.37;
        let adj = fl.adjugate.eval(&q);
        let qi_a = a.neg().add_diagonal(&q);
        let prod = qi_a.mul(&adj);
        let d = det(&qi_a);
        assert!((fl.char_poly.eval(&q) - d).abs() < 1e-12);
        assert!(prod.max_abs_diff(&Matrix::<f64>::identity(3).scale(&d)) < 1e-12);
    }

    #[test]
    fn poly_arithmetic() {
        let p = Poly::linear_root(1.0).mul(&Poly::linear_root(2.0));
        assert_eq!(p.coeffs, vec![2.0, -3.0, 1.0]);
        assert_eq!(p.eval(&3.0), 2.0);
        assert_eq!(p.sub(&p), Poly::zero());
    }
}
