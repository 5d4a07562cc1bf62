use super::lu::{norm1, Lu};
use super::matrix::Matrix;
use super::scalar::Scalar;
use super::schur::{complement, schur_complement};
use crate::error::{Error, Result};
use crate::graph::{Graph, KillingPlan, DENSE_CAP};

/// `K(x, y) = G(x, y) q(y)` on `X ∖ S`, with `G = ([Q - L]_{X∖S})^{-1}`.
#[derive(Clone, Debug)]
pub struct Kernel<T = f64> {
    /// Vertices of `X ∖ S`, ascending; row/column `i` of `k` is `indices[i]`.
    pub indices: Vec<usize>,
    pub k: Matrix<T>,
    pub green: Matrix<T>,
}

impl<T: Scalar> Kernel<T> {
    /// Position of vertex `x` in `indices`.
    pub fn position(&self, x: usize) -> Option<usize> {
        self.indices.binary_search(&x).ok()
    }

    /// `K(x, y)` for vertices `x, y ∉ S`.
    pub fn get(&self, x: usize, y: usize) -> T {
        let (i, j) = (
            self.position(x).expect("vertex in S"),
            self.position(y).expect("vertex in S"),
        );
        self.k[(i, j)].clone()
    }
}

/// Principal block `[D - L]_idx` where `D = diag(d)`.
pub fn shifted_generator_block<T: Scalar>(graph: &Graph, d: &[T], idx: &[usize]) -> Matrix<T> {
    let n = graph.n();
    let mut pos = vec![usize::MAX; n];
    for (i, &x) in idx.iter().enumerate() {
        pos[x] = i;
    }
    let mut m = Matrix::zeros(idx.len(), idx.len());
    for (i, &x) in idx.iter().enumerate() {
        let mut diag = d[x].clone();
        for (y, r) in graph.neighbours(x) {
            let r = T::from_f64(r);
            diag = diag + r.clone();
            let j = pos[y];
            if j != usize::MAX {
                m[(i, j)] = -r;
            }
        }
        m[(i, i)] = diag;
    }
    m
}

/// `[L]_idx` in the scalar type `T`.
pub fn generator_block<T: Scalar>(graph: &Graph, idx: &[usize]) -> Matrix<T> {
    let zero = vec![T::zero(); graph.n()];
    shifted_generator_block(graph, &zero, idx).neg()
}

fn finite_rates<T: Scalar>(plan: &KillingPlan) -> Vec<T> {
    plan.rates()
        .iter()
        .map(|&q| if q.is_finite() { T::from_f64(q) } else { T::zero() })
        .collect()
}

/// `[Q - L]_{X∖S}`.
pub fn q_minus_l<T: Scalar>(graph: &Graph, plan: &KillingPlan) -> (Vec<usize>, Matrix<T>) {
    let idx = plan.finite_vertices();
    let m = shifted_generator_block(graph, &finite_rates::<T>(plan), &idx);
    (idx, m)
}

pub fn kernel(graph: &Graph, plan: &KillingPlan) -> Result<Kernel> {
    let n = graph.n();
    if n > DENSE_CAP {
        return Err(Error::SizeCap { n, cap: DENSE_CAP });
    }
    let (idx, m) = q_minus_l::<f64>(graph, plan);
    if idx.is_empty() {
        return Err(Error::InvalidKillingPlan("every vertex has infinite rate".into()));
    }
    let lu = Lu::new(&m);
    if lu.is_singular() {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    let green = lu.inverse()?;
    let cond = norm1(&m) * norm1(&green);
    if !green.is_finite() || cond > 1e15 {
        return Err(Error::Singular { condition: cond });
    }
    let k = scale_columns(&green, &idx, plan);
    Ok(Kernel { indices: idx, k, green })
}

pub fn kernel_exact<T: Scalar>(graph: &Graph, plan: &KillingPlan) -> Result<Kernel<T>> {
    let (idx, m) = q_minus_l::<T>(graph, plan);
    let lu = Lu::new(&m);
    if lu.is_singular() {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    let green = lu.inverse()?;
    let k = scale_columns(&green, &idx, plan);
    Ok(Kernel { indices: idx, k, green })
}

fn scale_columns<T: Scalar>(green: &Matrix<T>, idx: &[usize], plan: &KillingPlan) -> Matrix<T> {
    let q: Vec<T> = idx.iter().map(|&x| T::from_f64(plan.q(x))).collect();
    Matrix::from_fn(green.rows(), green.cols(), |i, j| green[(i, j)].clone() * q[j].clone())
}

/// Generator of the chain watched on `a` (Schur complement of `[L]_{A^c}`).
/// Off-diagonal round-off is clamped at 0 and the diagonal recomputed so rows
/// sum to zero.
pub fn trace_generator(graph: &Graph, a: &[usize]) -> Result<Matrix> {
    let l = graph.generator_matrix()?;
    let mut s = schur_complement(&l, a)?;
    let k = a.len();
    for i in 0..k {
        let mut off = 0.0;
        for j in 0..k {
            if i != j {
                if s[(i, j)] < -1e-12 {
                    return Err(Error::PreconditionViolated(format!(
                        "trace generator entry ({i}, {j}) = {} is negative",
                        s[(i, j)]
                    )));
                }
                s[(i, j)] = s[(i, j)].max(0.0);
                off += s[(i, j)];
            }
        }
        s[(i, i)] = -off;
    }
    Ok(s)
}

/// Absorption data for the set `r`: expected hitting times `E_x[T_R]` and
/// hitting distributions `P_x(X(T_R) = y)`, as linear solves with `[-L]_{R^c}`.
#[derive(Clone, Debug)]
pub struct Absorption<T = f64> {
    /// `R^c`, ascending.
    pub transient: Vec<usize>,
    /// `R`, ascending.
    pub absorbing: Vec<usize>,
    /// `E_x[T_R]` for `x ∈ R^c` (indexed like `transient`).
    pub mean_time: Vec<T>,
    /// `P_x(X(T_R) = y)`, rows `transient`, columns `absorbing`.
    pub exit: Matrix<T>,
}

impl<T: Scalar> Absorption<T> {
    pub fn new(graph: &Graph, r: &[usize]) -> Result<Self> {
        let mut absorbing = r.to_vec();
        absorbing.sort_unstable();
        absorbing.dedup();
        if absorbing.is_empty() {
            return Err(Error::InvalidArgument("absorbing set is empty".into()));
        }
        let transient = complement(graph.n(), &absorbing);
        let neg_l = shifted_generator_block::<T>(graph, &vec![T::zero(); graph.n()], &transient);
        let lu = Lu::new(&neg_l);
        if lu.is_singular() && !transient.is_empty() {
            return Err(Error::SingularBlock);
        }
        let ones = vec![T::one(); transient.len()];
        let mean_time = if transient.is_empty() { vec![] } else { lu.solve(&ones)? };
        let mut exit = Matrix::zeros(transient.len(), absorbing.len());
        let mut rhs = vec![T::zero(); transient.len()];
        for (j, &y) in absorbing.iter().enumerate() {
            for (i, &x) in transient.iter().enumerate() {
                rhs[i] = T::from_f64(graph.rate(x, y));
            }
            if transient.is_empty() {
                continue;
            }
            let col = lu.solve(&rhs)?;
            for i in 0..transient.len() {
                exit[(i, j)] = col[i].clone();
            }
        }
        Ok(Self {
            transient,
            absorbing,
            mean_time,
            exit,
        })
    }

    /// `E_x[T_R]`, zero for `x ∈ R`.
    pub fn time_from(&self, x: usize) -> T {
        match self.transient.binary_search(&x) {
            Ok(i) => self.mean_time[i].clone(),
            Err(_) => T::zero(),
        }
    }

    /// `P_x(X(T_R) = y)`.
    pub fn exit_prob(&self, x: usize, y: usize) -> T {
        let j = match self.absorbing.binary_search(&y) {
            Ok(j) => j,
            Err(_) => return T::zero(),
        };
        match self.transient.binary_search(&x) {
            Ok(i) => self.exit[(i, j)].clone(),
            Err(_) => {
                if x == y {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, grid_graph, Topology};
    use crate::linalg::lu::{det, det_sub};

    fn two_cycle(a: f64, b: f64) -> Graph {
        build_graph(2, &[(0, 1, a), (1, 0, b)]).unwrap()
    }

    #[test]
    fn two_cycle_kernel() {
        let (a, b, q) = (2.0, 3.0, 0.5);
        let g = two_cycle(a, b);
        let k = kernel(&g, &KillingPlan::uniform(2, q).unwrap()).unwrap();
        assert!((det(&k.k) - q / (q + a + b)).abs() < 1e-14);
        assert!((k.get(0, 0) - (q + b) / (q + a + b)).abs() < 1e-14);
        assert!((det_sub(&k.k, &[0]) - k.k[(0, 0)]).abs() < 1e-15);
    }

    #[test]
    fn single_vertex_kernel() {
        let g = build_graph(1, &[]).unwrap();
        let k = kernel(&g, &KillingPlan::uniform(1, 0.3).unwrap()).unwrap();
        assert_eq!(k.k[(0, 0)], 1.0);
    }

    #[test]
    fn huge_q_is_identity() {
        let g = grid_graph(3, 3, Topology::Torus, None).unwrap();
        let k = kernel(&g, &KillingPlan::uniform(9, 1e8).unwrap()).unwrap();
        assert!(k.k.max_abs_diff(&Matrix::identity(9)) < 1e-6);
    }

    #[test]
    fn kernel_rows_substochastic() {
        let g = grid_graph(3, 2, Topology::Rectangle, None).unwrap();
        let plan = KillingPlan::set_restricted(6, 0.4, &[5]).unwrap();
        let k = kernel(&g, &plan).unwrap();
        for i in 0..k.k.rows() {
            let s: f64 = k.k.row(i).iter().sum();
            assert!(s <= 1.0 + 1e-10);
            assert!(k.k.row(i).iter().all(|&v| (-1e-10..=1.0 + 1e-10).contains(&v)));
        }
    }

    #[test]
    fn path_trace_generator() {
        let g = grid_graph(3, 1, Topology::Rectangle, None).unwrap();
        let t = trace_generator(&g, &[0, 2]).unwrap();
        let want = Matrix::from_rows(vec![vec![-0.5, 0.5], vec![0.5, -0.5]]);
        assert!(t.max_abs_diff(&want) < 1e-15);
        let full = trace_generator(&g, &[0, 1, 2]).unwrap();
        assert_eq!(full, g.generator_matrix().unwrap());
    }

    #[test]
    fn path_absorption() {
        let g = grid_graph(3, 1, Topology::Rectangle, None).unwrap();
        let a = Absorption::<f64>::new(&g, &[0, 2]).unwrap();
        assert!((a.exit_prob(1, 0) - 0.5).abs() < 1e-15);
        assert!((a.time_from(1) - 0.5).abs() < 1e-15);
        assert_eq!(a.exit_prob(0, 0), 1.0);
    }
}
