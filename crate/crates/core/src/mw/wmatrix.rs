use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::local::{prepare, sequence};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{complement, faddeev_leverrier, generator_block, Matrix, MatrixPoly, Poly, Scalar};
use crate::oracle::{mask_of, Check, ForestTable, Report, ENUMERATION_CAP};
use crate::rng::RngStream;

/// Relative tolerance of the spectral divided-difference identities.
pub const SPECTRAL_TOL: f64 = 1e-7;

/// `W_R(q) = Z_R(q) [q - L]^{-1}_{R^c} = adj(q - [L]_{R^c})`, kept as
/// coefficient matrices in `q`.
#[derive(Clone, Debug)]
pub struct WMatrix<T = f64> {
    pub r: Vec<usize>,
    /// `R^c`, ascending; rows and columns of every coefficient follow it.
    pub transient: Vec<usize>,
    pub poly: MatrixPoly<T>,
    /// `Z_R(q) = det(q - [L]_{R^c})`.
    pub z: Poly<T>,
}

impl<T: Scalar> WMatrix<T> {
    pub fn new(graph: &Graph, r: &[usize]) -> Result<Self> {
        let mut r = r.to_vec();
        r.sort_unstable();
        r.dedup();
        if r.iter().any(|&v| v >= graph.n()) {
            return Err(Error::InvalidArgument("vertex of R out of range".into()));
        }
        let transient = complement(graph.n(), &r);
        let fl = faddeev_leverrier(&generator_block::<T>(graph, &transient));
        Ok(Self {
            r,
            transient,
            poly: fl.adjugate,
            z: fl.char_poly,
        })
    }

    pub fn l(&self) -> usize {
        self.transient.len()
    }

    fn pos(&self, x: usize) -> usize {
        self.transient.binary_search(&x).expect("vertex outside R")
    }

    /// `W_R(·)(x, y)` for `x, y ∉ R`.
    pub fn entry(&self, x: usize, y: usize) -> Poly<T> {
        self.poly.entry(self.pos(x), self.pos(y))
    }

    /// Divided difference `W_R[ξ_0, …, ξ_k]` and, entrywise, the largest
    /// term of the explicit sum.
    pub fn divided_difference(&self, points: &[T]) -> Result<(Matrix<T>, Matrix<T>)> {
        let l = self.l();
        let mut dd = Matrix::zeros(l, l);
        let mut scale = Matrix::zeros(l, l);
        for (i, xi) in points.iter().enumerate() {
            let mut den = T::one();
            for (j, xj) in points.iter().enumerate() {
                if j != i {
                    if xi == xj {
                        return Err(Error::DuplicatePoint(xi.to_f64()));
                    }
                    den = den * (xi.clone() - xj.clone());
                }
            }
            let term = self.poly.eval(xi).scale(&(T::one() / den));
            dd = dd.add(&term);
            for a in 0..l {
                for b in 0..l {
                    let t = term[(a, b)].abs_val();
                    if t > scale[(a, b)] {
                        scale[(a, b)] = t;
                    }
                }
            }
        }
        Ok((dd, scale))
    }
}

pub fn w_matrix(graph: &Graph, r: &[usize]) -> Result<WMatrix> {
    WMatrix::new(graph, r)
}

fn poly_name<T: Scalar>(p: &Poly<T>) -> f64 {
    p.coeffs.last().map_or(0.0, Scalar::to_f64)
}

fn poly_check<T: Scalar>(name: String, lhs: &Poly<T>, rhs: &Poly<T>, exact: bool) -> Check {
    if exact {
        let equal = lhs.sub(rhs).coeffs.iter().all(Zero::is_zero);
        Check::exact(name, poly_name(lhs), poly_name(rhs), equal)
    } else {
        let err = lhs.to_f64().max_rel_diff(&rhs.to_f64());
        Check::with_error(name, poly_name(lhs), poly_name(rhs), err, 1e-9)
    }
}

/// The diagonal and off-diagonal recursions in `R`, coefficient-wise.
fn recursions<T: Scalar>(graph: &Graph, w: &WMatrix<T>, exact: bool, rep: &mut Report) -> Result<()> {
    let tag = if exact { " [exact]" } else { "" };
    for &x in &w.transient {
        let mut r1 = w.r.clone();
        r1.push(x);
        let z1 = WMatrix::<T>::new(graph, &r1)?.z;
        rep.push(poly_check(
            format!("W_R(x,x) = Z_(R+x) at x = {x}{tag}"),
            &w.entry(x, x),
            &z1,
            exact,
        ));
    }
    for &x in &w.transient {
        for &y in &w.transient {
            if x == y {
                continue;
            }
            let mut r2 = w.r.clone();
            r2.extend([x, y]);
            let w2 = WMatrix::<T>::new(graph, &r2)?;
            let mut rhs = w2.z.scale(&T::from_f64(graph.rate(x, y)));
            for &z in &w2.transient {
                let wxz = graph.rate(x, z);
                if wxz == 0.0 {
                    continue;
                }
                for &z2 in &w2.transient {
                    let wzy = graph.rate(z2, y);
                    if wzy == 0.0 {
                        continue;
                    }
                    rhs = rhs.add(&w2.entry(z, z2).scale(&(T::from_f64(wxz) * T::from_f64(wzy))));
                }
            }
            rep.push(poly_check(
                format!("W_R({x},{y}) recursion in R+x+y{tag}"),
                &w.entry(x, y),
                &rhs,
                exact,
            ));
        }
    }
    Ok(())
}

/// `q W_R(q)(x, y) = Σ q^{|ρ|-|R|} w(φ)` over forests with `R ⊆ ρ` whose
/// tree through `x` is rooted at `y`, compared coefficient-wise and exactly.
pub fn forest_sum_check(graph: &Graph, w: &WMatrix<BigRational>) -> Result<Report> {
    let n = graph.n();
    if n > ENUMERATION_CAP {
        return Err(Error::SizeCap {
            n,
            cap: ENUMERATION_CAP,
        });
    }
    let table = ForestTable::enumerate(graph)?;
    let rmask = mask_of(&w.r);
    let l = w.l();
    let mut coeffs = vec![vec![BigRational::zero(); l.max(1)]; l * l];
    for i in 0..table.len() {
        let roots = table.root_mask(i);
        if roots & rmask != rmask {
            continue;
        }
        let deg = table.n_roots(i) - w.r.len();
        if deg == 0 {
            continue;
        }
        let wt = table.weight_exact(graph, i);
        for (a, &x) in w.transient.iter().enumerate() {
            let y = table.root_of(i, x);
            if let Ok(b) = w.transient.binary_search(&y) {
                coeffs[a * l + b][deg - 1] += wt.clone();
            }
        }
    }
    let mut rep = Report::new("w_forest_sum");
    for (a, &x) in w.transient.iter().enumerate() {
        for (b, &y) in w.transient.iter().enumerate() {
            let lhs = w.entry(x, y);
            let rhs = Poly::new(coeffs[a * l + b].clone());
            rep.push(poly_check(format!("W_R({x},{y}) as a forest sum"), &lhs, &rhs, true));
        }
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug)]
pub struct WCheckOptions {
    /// Coefficient comparisons over the rationals rather than in `f64`.
    pub exact: bool,
    /// Also compare with the enumerated forest sum (needs `n ≤ ENUMERATION_CAP`).
    pub forest_sum: bool,
    /// Divided differences at `-λ` against products of shifted generators
    /// and the local equilibria (reversible chains only).
    pub spectral: bool,
}

impl Default for WCheckOptions {
    fn default() -> Self {
        Self {
            exact: true,
            forest_sum: true,
            spectral: true,
        }
    }
}

/// Every identity of `W_R` available for this instance under the defaults.
pub fn w_identities_check(graph: &Graph, r: &[usize]) -> Result<Report> {
    let opts = WCheckOptions {
        forest_sum: graph.n() <= ENUMERATION_CAP,
        spectral: graph.check_reversible().is_some() && graph.block_is_irreducible(&complement(graph.n(), r)),
        ..Default::default()
    };
    w_identities_check_with(graph, r, opts)
}

pub fn w_identities_check_with(graph: &Graph, r: &[usize], opts: WCheckOptions) -> Result<Report> {
    let mut rep = Report::new("w_identities");
    if opts.exact {
        let w = WMatrix::<BigRational>::new(graph, r)?;
        recursions(graph, &w, true, &mut rep)?;
        if opts.forest_sum {
            rep.extend(forest_sum_check(graph, &w)?);
        }
    } else {
        let w = WMatrix::<f64>::new(graph, r)?;
        recursions(graph, &w, false, &mut rep)?;
        if opts.forest_sum {
            rep.extend(forest_sum_check(graph, &WMatrix::new(graph, r)?)?);
        }
    }
    if opts.spectral {
        rep.extend(spectral_check(graph, r)?);
    }
    Ok(rep)
}

fn to_exact(v: &[f64]) -> Vec<BigRational> {
    v.iter().map(|&x| <BigRational as Scalar>::from_f64(x)).collect()
}

fn matrix_err(a: &Matrix, b: &Matrix) -> f64 {
    a.max_abs_diff(b) / a.max_abs().max(b.max_abs()).max(f64::MIN_POSITIVE)
}

/// For each `k < l`: `W_R[-λ_0, …, -λ_k] = Π_{i>k} ([L]_{R^c} + λ_i)`, and
/// row `x` equals `λ_{l-1} ⋯ λ_{k+1} ν^x_k`. On a degenerate spectrum both
/// sides are taken on the jittered chain.
pub fn spectral_check(graph: &Graph, r: &[usize]) -> Result<Report> {
    let (g, _, transient, lambda, jit) = prepare(graph, r)?;
    let l = transient.len();
    let w = WMatrix::<BigRational>::new(&g, r)?;
    let block: Matrix = generator_block(&g, &transient);
    let seqs: Vec<_> = transient
        .iter()
        .map(|&x| sequence(&g, r, x, transient.clone(), lambda.clone(), jit))
        .collect::<Result<_>>()?;
    let neg: Vec<f64> = lambda.iter().map(|v| -v).collect();
    let mut rep = Report::new("w_spectral");
    for k in 0..l {
        let (dd, _) = w.divided_difference(&to_exact(&neg[..=k]))?;
        let dd = dd.to_f64();
        let mut prod = Matrix::identity(l);
        for &lam in &lambda[k + 1..] {
            prod = prod.mul(&block.add_diagonal(&lam));
        }
        let err = matrix_err(&dd, &prod);
        rep.push(Check::with_error(
            format!("W_R[-λ_0..-λ_{k}] = Π_(i>{k}) (L + λ_i)"),
            dd.max_abs(),
            prod.max_abs(),
            err,
            SPECTRAL_TOL,
        ));
        let factor: f64 = lambda[k + 1..].iter().product();
        for (a, seq) in seqs.iter().enumerate() {
            let row = dd.row(a);
            let target: Vec<f64> = seq.nu[k].iter().map(|v| v * factor).collect();
            let scale = row.iter().chain(&target).fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
            let e = row.iter().zip(&target).fold(0.0f64, |m, (p, t)| m.max((p - t).abs())) / scale;
            rep.push(Check::with_error(
                format!(
                    "row {} of W_R[-λ_0..-λ_{k}] = λ_(l-1)⋯λ_({}) ν_{k}",
                    transient[a],
                    k + 1
                ),
                row.iter().sum(),
                target.iter().sum(),
                e,
                SPECTRAL_TOL,
            ));
        }
    }
    Ok(rep)
}

/// Nonnegativity of `W_R[ξ_0, …, ξ_k]` on `grids` random decreasing grids
/// of length `l + extra` with `ξ_i ≥ -λ_i` for `i < l`.
pub fn induction_grid_check(graph: &Graph, r: &[usize], grids: usize, extra: usize, seed: u64) -> Result<Report> {
    let (g, _, _, lambda, _) = prepare(graph, r)?;
    let w = WMatrix::<BigRational>::new(&g, r)?;
    let l = lambda.len();
    let spread = lambda.last().copied().unwrap_or(1.0).max(1.0);
    let mut rng = RngStream::new(seed, 0);
    let mut rep = Report::new("w_induction_grid");
    for grid in 0..grids {
        let mut xi = Vec::with_capacity(l + extra);
        let top = -lambda[0] + rng.uniform() * spread;
        xi.push(top);
        for i in 1..l + extra {
            let prev = xi[i - 1];
            let lo = if i < l { -lambda[i] } else { prev - spread };
            // A point of [lo, prev), kept away from prev.
            let v = lo + (prev - lo) * rng.uniform() * 0.999;
            xi.push(v);
        }
        let exact = to_exact(&xi);
        for k in 0..xi.len() {
            let (dd, scale) = w.divided_difference(&exact[..=k])?;
            let mut worst = 0.0f64;
            for a in 0..l {
                for b in 0..l {
                    let s = scale[(a, b)].to_f64().max(f64::MIN_POSITIVE);
                    let v = &dd[(a, b)];
                    if v.is_negative() {
                        worst = worst.max(-v.to_f64() / s);
                    }
                }
            }
            rep.push(Check::at_most(
                format!("grid {grid}: W_R[ξ_0..ξ_{k}] ≥ 0"),
                worst,
                0.0,
                1e-9,
            ));
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, grid_graph, Topology};

    #[test]
    fn two_cycle_diagonal() {
        let (a, b) = (2.0, 3.0);
        let g = build_graph(2, &[(0, 1, a), (1, 0, b)]).unwrap();
        let w = WMatrix::<f64>::new(&g, &[]).unwrap();
        // Forests containing 0 as a root: {0, 1} roots, or 1 -> 0.
        assert_eq!(w.entry(0, 0).coeffs, vec![b, 1.0]);
        assert_eq!(w.z.coeffs, vec![0.0, a + b, 1.0]);
        assert!(w_identities_check(&g, &[]).unwrap().pass());
    }

    #[test]
    fn identities_on_small_graphs() {
        let g = grid_graph(3, 2, Topology::Rectangle, None).unwrap();
        for r in [vec![], vec![0], vec![1, 4]] {
            let rep = w_identities_check(&g, &r).unwrap();
            assert!(rep.pass(), "{:?}", rep.failures().collect::<Vec<_>>());
        }
        let cyc = build_graph(3, &[(0, 1, 1.0), (1, 2, 2.0), (2, 0, 3.0), (1, 0, 1.0)]).unwrap();
        let rep = w_identities_check(&cyc, &[2]).unwrap();
        assert!(rep.pass());
        assert!(rep.checks.iter().all(|c| !c.name.contains('λ')));
    }

    #[test]
    fn degenerate_spectrum_uses_jitter() {
        let g = grid_graph(3, 3, Topology::Torus, None).unwrap();
        let rep = spectral_check(&g, &[0]).unwrap();
        assert!(rep.pass(), "{:?}", rep.failures().collect::<Vec<_>>());
    }

    #[test]
    fn induction_grids_are_nonnegative() {
        let g = grid_graph(2, 2, Topology::Rectangle, None).unwrap();
        let g = g.map_rates(|x, y, r| r * (1.0 + 0.3 * (x + 2 * y) as f64)).unwrap();
        if g.check_reversible().is_some() {
            assert!(induction_grid_check(&g, &[], 5, 2, 3).unwrap().pass());
        }
        let path = grid_graph(4, 1, Topology::Rectangle, None).unwrap();
        assert!(induction_grid_check(&path, &[3], 10, 2, 1).unwrap().pass());
    }
}
