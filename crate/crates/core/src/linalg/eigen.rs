use nalgebra::{Complex, DMatrix, Schur, SymmetricEigen};

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Eigenvalues sorted by non-decreasing real part (ties broken by imaginary part).
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex<f64>>,
    pub all_real: bool,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Real parts; errors when the spectrum is not real.
    pub fn real(&self) -> Result<Vec<f64>> {
        if !self.all_real {
            return Err(Error::ComplexSpectrum);
        }
        Ok(self.eigenvalues.iter().map(|z| z.re).collect())
    }

    pub fn from_real(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Self {
            eigenvalues: values.into_iter().map(|v| Complex::new(v, 0.0)).collect(),
            all_real: true,
        }
    }
}

const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues of `m`.
///
/// With `mu` given, `m` is assumed similar to a symmetric matrix through
/// `diag(sqrt(mu))` (true for `-L` of a chain reversible w.r.t. `mu`) and a
/// symmetric solver is used. Otherwise a real Schur decomposition is computed.
pub fn eigenvalues(m: &Matrix<f64>, mu: Option<&[f64]>) -> Result<Spectrum> {
    let n = m.rows();
    if n == 0 {
        return Ok(Spectrum {
            eigenvalues: vec![],
            all_real: true,
        });
    }
    if let Some(mu) = mu {
        assert_eq!(mu.len(), n);
        let s: Vec<f64> = mu.iter().map(|v| v.sqrt()).collect();
        let sym = DMatrix::from_fn(n, n, |i, j| {
            let a = m[(i, j)] * s[i] / s[j];
            let b = m[(j, i)] * s[j] / s[i];
            0.5 * (a + b)
        });
        let eig = SymmetricEigen::new(sym);
        return Ok(Spectrum::from_real(eig.eigenvalues.iter().copied().collect()));
    }
    let dm = DMatrix::from_row_slice(n, n, m.as_slice());
    let schur =
        Schur::try_new(dm, f64::EPSILON, SCHUR_MAX_ITER).ok_or(Error::EigenNoConvergence { hash: m.digest() })?;
    let mut ev: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let max_re = ev.iter().fold(0.0f64, |acc, z| acc.max(z.re.abs()));
    let max_im = ev.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()));
    let all_real = max_im <= 1e-8 * max_re.max(f64::MIN_POSITIVE);
    if all_real {
        for z in &mut ev {
            z.im = 0.0;
        }
    }
    Ok(Spectrum {
        eigenvalues: ev,
        all_real,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cycle_spectrum() {
        let (a, b) = (2.0, 5.0);
        let neg_l = Matrix::from_rows(vec![vec![a, -a], vec![-b, b]]);
        let s = eigenvalues(&neg_l, None).unwrap();
        assert!(s.all_real);
        let r = s.real().unwrap();
        assert!(r[0].abs() < 1e-12);
        assert!((r[1] - (a + b)).abs() < 1e-12);
        let mu = [b / (a + b), a / (a + b)];
        let r2 = eigenvalues(&neg_l, Some(&mu)).unwrap().real().unwrap();
        assert!((r2[1] - (a + b)).abs() < 1e-12);
    }

    #[test]
    fn directed_three_cycle_is_complex() {
        let neg_l = Matrix::from_rows(vec![vec![1.0, -1.0, 0.0], vec![0.0, 1.0, -1.0], vec![-1.0, 0.0, 1.0]]);
        let s = eigenvalues(&neg_l, None).unwrap();
        assert!(!s.all_real);
        assert!(s.eigenvalues[0].norm() < 1e-12);
        let h = 3f64.sqrt() / 2.0;
        assert!((s.eigenvalues[1] - Complex::new(1.5, -h)).norm() < 1e-12);
        assert!((s.eigenvalues[2] - Complex::new(1.5, h)).norm() < 1e-12);
        assert!(matches!(s.real(), Err(Error::ComplexSpectrum)));
    }
}
