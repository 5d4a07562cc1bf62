use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Scalar;
use crate::oracle::{Check, Report};
use crate::rng::RngStream;

/// Divided differences of `f` at distinct points, by the recursive
/// definition. `table[k][i] = f[x_i, …, x_{i+k}]`.
#[derive(Clone, Debug, Serialize)]
pub struct DividedDiffTable {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub table: Vec<Vec<f64>>,
}

fn check_distinct<T: Scalar>(points: &[T]) -> Result<()> {
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i] == points[j] {
                return Err(Error::DuplicatePoint(points[i].to_f64()));
            }
        }
    }
    Ok(())
}

/// Build the table for `values[i] = f(points[i])`.
pub fn divided_difference(values: &[f64], points: &[f64]) -> Result<DividedDiffTable> {
    if values.len() != points.len() || points.is_empty() {
        return Err(Error::InvalidArgument(
            "need one value per point, at least one point".into(),
        ));
    }
    check_distinct(points)?;
    let k = points.len();
    let mut table = vec![values.to_vec()];
    for order in 1..k {
        let prev = &table[order - 1];
        let row: Vec<f64> = (0..k - order)
            .map(|i| (prev[i + 1] - prev[i]) / (points[i + order] - points[i]))
            .collect();
        table.push(row);
    }
    Ok(DividedDiffTable {
        points: points.to_vec(),
        values: values.to_vec(),
        table,
    })
}

/// `Σ_i f(x_i) / Π_{j≠i} (x_i - x_j)` in any scalar type.
pub fn direct_divided_difference<T: Scalar>(values: &[T], points: &[T]) -> Result<T> {
    check_distinct(points)?;
    let mut s = T::zero();
    for i in 0..points.len() {
        let mut den = T::one();
        for j in 0..points.len() {
            if j != i {
                den = den * (points[i].clone() - points[j].clone());
            }
        }
        s = s + values[i].clone() / den;
    }
    Ok(s)
}

impl DividedDiffTable {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `f[x_i, …, x_j]` for `i ≤ j`.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.table[j - i][i]
    }

    /// `f[x_0, …, x_k]` over all points.
    pub fn top(&self) -> f64 {
        self.value(0, self.len() - 1)
    }

    /// The same quantity from the explicit sum.
    pub fn direct(&self, i: usize, j: usize) -> f64 {
        direct_divided_difference(&self.values[i..=j], &self.points[i..=j]).expect("points are distinct")
    }

    /// Coefficients `f[x_0, …, x_k]` of the Newton form.
    pub fn newton_coeffs(&self) -> Vec<f64> {
        self.table.iter().map(|r| r[0]).collect()
    }

    /// Newton interpolating polynomial evaluated at `x`.
    pub fn newton_eval(&self, x: f64) -> f64 {
        let c = self.newton_coeffs();
        let mut acc = *c.last().expect("non-empty");
        for k in (0..c.len() - 1).rev() {
            acc = acc * (x - self.points[k]) + c[k];
        }
        acc
    }

    /// Recursive vs direct on every sub-range, and interpolation at every
    /// node, at relative tolerance `tol`.
    pub fn consistency(&self, tol: f64) -> Report {
        let mut rep = Report::new("divided_differences");
        let k = self.len();
        // Direct sums cancel heavily; judge them relative to the largest term.
        for i in 0..k {
            for j in i..k {
                let d = self.direct(i, j);
                let scale = (i..=j)
                    .map(|a| {
                        let den: f64 = (i..=j)
                            .filter(|&b| b != a)
                            .map(|b| (self.points[a] - self.points[b]).abs())
                            .product();
                        self.values[a].abs() / den
                    })
                    .fold(0.0, f64::max)
                    .max(f64::MIN_POSITIVE);
                let err = (self.value(i, j) - d).abs() / scale.max(d.abs());
                rep.push(Check::with_error(
                    format!("recursive = direct on [{i}, {j}]"),
                    self.value(i, j),
                    d,
                    err,
                    tol,
                ));
            }
        }
        let vscale = self.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..k {
            let p = self.newton_eval(self.points[i]);
            rep.push(Check::with_error(
                format!("Newton form interpolates x_{i}"),
                p,
                self.values[i],
                (p - self.values[i]).abs() / vscale,
                tol,
            ));
        }
        rep
    }
}

/// `f = Π (x - α_i)` evaluated at `x`.
pub fn monic_from_roots(alphas: &[f64], x: f64) -> f64 {
    alphas.iter().map(|a| x - a).product()
}

#[derive(Clone, Debug, Serialize)]
pub struct NonnegReport {
    pub value: f64,
    /// Largest term of the explicit sum, used as the rounding scale.
    pub scale: f64,
    pub pass: bool,
}

/// `f[β_0, …, β_k] ≥ 0` for `f = Π_{i<n} (x - α_i)` with `α` and `β`
/// strictly decreasing and `β_i ≥ α_i` wherever both exist.
pub fn divdiff_nonneg_check(alphas: &[f64], betas: &[f64], k: usize) -> Result<(NonnegReport, Report)> {
    let strictly_decreasing = |v: &[f64]| v.windows(2).all(|w| w[0] > w[1]);
    if !strictly_decreasing(alphas) {
        return Err(Error::PreconditionViolated("alphas must be strictly decreasing".into()));
    }
    if !strictly_decreasing(betas) {
        return Err(Error::PreconditionViolated("betas must be strictly decreasing".into()));
    }
    if k >= betas.len() {
        return Err(Error::PreconditionViolated(format!("k = {k} needs {} betas", k + 1)));
    }
    if let Some(i) = (0..alphas.len().min(betas.len())).find(|&i| betas[i] < alphas[i]) {
        return Err(Error::PreconditionViolated(format!("beta_{i} < alpha_{i}")));
    }
    let pts = &betas[..=k];
    let vals: Vec<f64> = pts.iter().map(|&b| monic_from_roots(alphas, b)).collect();
    let t = divided_difference(&vals, pts)?;
    let value = t.top();
    let scale = (0..=k)
        .map(|a| {
            let den: f64 = (0..=k).filter(|&b| b != a).map(|b| (pts[a] - pts[b]).abs()).product();
            vals[a].abs() / den
        })
        .fold(0.0, f64::max)
        .max(1.0);
    let pass = value >= -1e-10 * scale;
    let mut rep = Report::new("divdiff_nonneg");
    rep.push(Check::at_most("-f[β_0..β_k] ≤ 0", -value, 0.0, 1e-10 * scale));
    Ok((NonnegReport { value, scale, pass }, rep))
}

/// Agreement of the recursive, direct and Newton definitions.
pub fn definitions_agree(values: &[f64], points: &[f64], tol: f64) -> Result<bool> {
    Ok(divided_difference(values, points)?.consistency(tol).pass())
}

/// A random instance satisfying the hypotheses of [`divdiff_nonneg_check`]:
/// `n ≤ 6` zeros, between `n` and `n + 3` points, any order `k`.
pub fn random_divdiff_instance(rng: &mut RngStream) -> (Vec<f64>, Vec<f64>, usize) {
    let n = 1 + rng.index(6);
    let mut alphas = vec![4.0 * (2.0 * rng.uniform() - 1.0)];
    for _ in 1..n {
        let prev = *alphas.last().expect("non-empty");
        alphas.push(prev - 0.05 - 2.0 * rng.uniform());
    }
    let len = n + rng.index(4);
    let mut betas: Vec<f64> = Vec::with_capacity(len);
    for i in 0..len {
        let b = match (i, betas.last()) {
            (0, _) => alphas[0] + 2.0 * rng.uniform(),
            // Strictly inside [α_i, β_{i-1}), which is non-empty.
            (_, Some(&prev)) if i < n => alphas[i] + (prev - alphas[i]) * 0.999 * rng.uniform(),
            (_, Some(&prev)) => prev - 0.05 - 2.0 * rng.uniform(),
            _ => unreachable!(),
        };
        betas.push(b);
    }
    let k = rng.index(len);
    (alphas, betas, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_examples() {
        let t = divided_difference(&[5.0], &[2.0]).unwrap();
        assert_eq!(t.top(), 5.0);
        let sq = |x: f64| x * x;
        let t = divided_difference(&[sq(0.0), sq(1.0), sq(2.0)], &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(t.value(0, 1), 1.0);
        assert_eq!(t.top(), 1.0);
        assert!(t.consistency(1e-12).pass());
        assert!(matches!(
            divided_difference(&[1.0, 2.0], &[1.0, 1.0]),
            Err(Error::DuplicatePoint(_))
        ));
    }

    #[test]
    fn monic_leading_difference() {
        let alphas = [3.0, 1.5, -0.5, -2.0];
        let betas = [4.0, 2.0, 0.0, -1.0, -3.0];
        let vals: Vec<f64> = betas.iter().map(|&b| monic_from_roots(&alphas, b)).collect();
        let t = divided_difference(&vals, &betas).unwrap();
        assert!((t.value(0, 4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonneg_examples() {
        let alphas = [2.0, 1.0, -1.0];
        // Roots plus one point below: the leading difference is 1.
        let (r, _) = divdiff_nonneg_check(&alphas, &[2.0, 1.0, -1.0, -3.0], 3).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        // Fewer than n + 1 points at the roots: 0.
        let (r, _) = divdiff_nonneg_check(&alphas, &alphas, 2).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.pass);
        assert!(divdiff_nonneg_check(&alphas, &[1.5, 1.0, -1.0], 2).is_err());
    }

    #[test]
    fn random_instances_meet_hypotheses() {
        let mut rng = RngStream::new(4, 0);
        for _ in 0..300 {
            let (a, b, k) = random_divdiff_instance(&mut rng);
            let (r, _) = divdiff_nonneg_check(&a, &b, k).unwrap();
            assert!(r.pass, "{a:?} {b:?} {k} {r:?}");
        }
    }

    #[test]
    fn exact_direct_sum() {
        use num_rational::BigRational;
        let pts: Vec<BigRational> = [0.0, 1.0, 3.0].iter().map(|&x| BigRational::from_f64(x)).collect();
        let vals: Vec<BigRational> = pts.iter().map(|x| x.clone() * x.clone()).collect();
        assert_eq!(
            direct_divided_difference(&vals, &pts).unwrap(),
            BigRational::from_f64(1.0)
        );
    }
}
