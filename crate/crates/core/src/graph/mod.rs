//! Weighted directed graphs, their generators, killing plans and forests.

mod forest;
mod grid;
mod json;
mod killing;

use std::collections::VecDeque;

pub use forest::Forest;
pub use grid::{
    brownian_sheet_metropolis, brownian_sheet_potential, grid_graph, metropolis_grid, Direction, GridGeometry, Topology,
};
pub use json::{ForestJson, GraphJson};
pub use killing::{KillingPlan, PlanKind};

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};

/// Default bound on the dimension of dense matrices built from a graph.
pub const DENSE_CAP: usize = 4096;

/// Above this size reversibility is checked by propagating detailed balance
/// along a BFS tree instead of solving the balance equations densely.
const DENSE_BALANCE_MAX: usize = 256;

/// A weighted directed graph in compressed sparse row form.
///
/// Vertices are `0..n`. Out-neighbours of each vertex are sorted, rates are
/// strictly positive and there are no self-loops.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    rates: Vec<f64>,
    out_rate: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl Graph {
    pub fn n(&self) -> usize {
        self.out_rate.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    /// `w(x) = Σ_y w(x, y)`.
    #[inline]
    pub fn out_rate(&self, x: usize) -> f64 {
        self.out_rate[x]
    }

    pub fn out_rates(&self) -> &[f64] {
        &self.out_rate
    }

    /// `max_x w(x)`.
    pub fn max_out_rate(&self) -> f64 {
        self.out_rate.iter().copied().fold(0.0, f64::max)
    }

    #[inline]
    pub fn targets(&self, x: usize) -> &[u32] {
        &self.targets[self.offsets[x]..self.offsets[x + 1]]
    }

    #[inline]
    pub fn rates(&self, x: usize) -> &[f64] {
        &self.rates[self.offsets[x]..self.offsets[x + 1]]
    }

    pub fn degree(&self, x: usize) -> usize {
        self.offsets[x + 1] - self.offsets[x]
    }

    pub fn neighbours(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.targets(x)
            .iter()
            .zip(self.rates(x))
            .map(|(&y, &r)| (y as usize, r))
    }

    /// `w(x, y)`, zero when there is no edge.
    pub fn rate(&self, x: usize, y: usize) -> f64 {
        let t = self.targets(x);
        match t.binary_search(&(y as u32)) {
            Ok(i) => self.rates(x)[i],
            Err(_) => 0.0,
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |x| self.neighbours(x).map(move |(y, r)| (x, y, r)))
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Dense generator `L` with `L(x,x) = -Σ_{y≠x} L(x,y)`.
    pub fn generator_matrix(&self) -> Result<Matrix> {
        self.generator_matrix_with_cap(DENSE_CAP)
    }

    pub fn generator_matrix_with_cap(&self, cap: usize) -> Result<Matrix> {
        let n = self.n();
        if n > cap {
            return Err(Error::SizeCap { n, cap });
        }
        let mut l = Matrix::zeros(n, n);
        for x in 0..n {
            let mut diag = 0.0;
            for (y, r) in self.neighbours(x) {
                l[(x, y)] = r;
                diag -= r;
            }
            l[(x, x)] = diag;
        }
        Ok(l)
    }

    /// Stationary probability vector, from `μL = 0` with one equation
    /// replaced by the normalisation.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let n = self.n();
        if n == 1 {
            return Ok(vec![1.0]);
        }
        let l = self.generator_matrix()?;
        let mut a = l.transpose();
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = vec![0.0; n];
        b[n - 1] = 1.0;
        let mu = Lu::new(&a).solve(&b)?;
        Ok(mu)
    }

    /// The reversible measure, if detailed balance holds.
    pub fn check_reversible(&self) -> Option<Vec<f64>> {
        let n = self.n();
        // Every edge needs its reverse.
        for (x, y, _) in self.edges() {
            if self.rate(y, x) <= 0.0 {
                return None;
            }
        }
        let mu = if n <= DENSE_BALANCE_MAX {
            self.stationary().ok()?
        } else {
            self.balance_by_propagation()
        };
        if mu.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return None;
        }
        for (x, y, r) in self.edges() {
            let lhs = mu[x] * r;
            let rhs = mu[y] * self.rate(y, x);
            if (lhs - rhs).abs() > 1e-9 * lhs.abs().max(rhs.abs()) {
                return None;
            }
        }
        Some(mu)
    }

    fn balance_by_propagation(&self) -> Vec<f64> {
        let n = self.n();
        let mut logmu = vec![f64::NAN; n];
        logmu[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(x) = queue.pop_front() {
            for (y, r) in self.neighbours(x) {
                if logmu[y].is_nan() {
                    logmu[y] = logmu[x] + r.ln() - self.rate(y, x).ln();
                    queue.push_back(y);
                }
            }
        }
        let m = logmu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut mu: Vec<f64> = logmu.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = mu.iter().sum();
        for v in &mut mu {
            *v /= s;
        }
        mu
    }

    /// The graph on `0..n` with the same edges scaled by `f(x, y, w)`.
    pub fn map_rates(&self, f: impl Fn(usize, usize, f64) -> f64) -> Result<Graph> {
        let mut b = GraphBuilder::new(self.n());
        for (x, y, r) in self.edges() {
            b.add_rate(x, y, f(x, y, r))?;
        }
        b.build()
    }

    /// Vertices reachable from `s` along edges (or reversed edges).
    fn reach(&self, s: usize, reverse: Option<&[Vec<usize>]>) -> Vec<bool> {
        let n = self.n();
        let mut seen = vec![false; n];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            match reverse {
                None => {
                    for &y in self.targets(x) {
                        let y = y as usize;
                        if !seen[y] {
                            seen[y] = true;
                            stack.push(y);
                        }
                    }
                }
                Some(rev) => {
                    for &y in &rev[x] {
                        if !seen[y] {
                            seen[y] = true;
                            stack.push(y);
                        }
                    }
                }
            }
        }
        seen
    }

    fn check_irreducible(&self) -> Result<()> {
        let n = self.n();
        if n <= 1 {
            return Ok(());
        }
        let fwd = self.reach(0, None);
        if let Some(to) = fwd.iter().position(|&s| !s) {
            return Err(Error::NotStronglyConnected { from: 0, to });
        }
        let mut rev = vec![Vec::new(); n];
        for (x, y, _) in self.edges() {
            rev[y].push(x);
        }
        let bwd = self.reach(0, Some(&rev));
        if let Some(from) = bwd.iter().position(|&s| !s) {
            return Err(Error::NotStronglyConnected { from, to: 0 });
        }
        Ok(())
    }

    /// Whether the sub-dynamics on `block` (edges leaving it dropped) has a
    /// vertex reachable from every vertex of the block.
    pub fn block_has_sink(&self, block: &[usize]) -> bool {
        self.block_sinks(block).iter().any(|&b| b)
    }

    /// For each vertex of `block`, whether it is reachable from all others
    /// inside the block.
    pub fn block_sinks(&self, block: &[usize]) -> Vec<bool> {
        let n = self.n();
        let mut pos = vec![usize::MAX; n];
        for (i, &x) in block.iter().enumerate() {
            pos[x] = i;
        }
        let k = block.len();
        let mut rev = vec![Vec::new(); k];
        for (i, &x) in block.iter().enumerate() {
            for &y in self.targets(x) {
                let j = pos[y as usize];
                if j != usize::MAX {
                    rev[j].push(i);
                }
            }
        }
        (0..k)
            .map(|s| {
                let mut seen = vec![false; k];
                seen[s] = true;
                let mut stack = vec![s];
                let mut count = 1;
                while let Some(i) = stack.pop() {
                    for &j in &rev[i] {
                        if !seen[j] {
                            seen[j] = true;
                            count += 1;
                            stack.push(j);
                        }
                    }
                }
                count == k
            })
            .collect()
    }

    /// Whether the graph restricted to `block` is strongly connected.
    pub fn block_is_irreducible(&self, block: &[usize]) -> bool {
        self.block_sinks(block).iter().all(|&b| b)
    }
}

/// Incremental graph construction; repeated `(x, y)` pairs are summed.
#[derive(Clone, Debug)]
pub struct GraphBuilder {
    n: usize,
    adj: Vec<Vec<(u32, f64)>>,
    labels: Option<Vec<String>>,
}

impl GraphBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            adj: vec![Vec::new(); n],
            labels: None,
        }
    }

    pub fn labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(labels);
        self
    }

    fn check_edge(&self, x: usize, y: usize, rate: f64) -> Result<()> {
        for v in [x, y] {
            if v >= self.n {
                return Err(Error::VertexOutOfRange { vertex: v, n: self.n });
            }
        }
        if x == y {
            return Err(Error::SelfLoop(x));
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::NonPositiveRate { x, y, rate });
        }
        Ok(())
    }

    /// Add `rate` to `w(x, y)`.
    pub fn add_rate(&mut self, x: usize, y: usize, rate: f64) -> Result<&mut Self> {
        self.check_edge(x, y, rate)?;
        match self.adj[x].iter_mut().find(|(t, _)| *t as usize == y) {
            Some(e) => e.1 += rate,
            None => self.adj[x].push((y as u32, rate)),
        }
        Ok(self)
    }

    /// Insert `w(x, y) = rate`, rejecting repeats.
    pub fn insert(&mut self, x: usize, y: usize, rate: f64) -> Result<&mut Self> {
        self.check_edge(x, y, rate)?;
        if self.adj[x].iter().any(|(t, _)| *t as usize == y) {
            return Err(Error::DuplicateEdge { x, y });
        }
        self.adj[x].push((y as u32, rate));
        Ok(self)
    }

    pub fn build(self) -> Result<Graph> {
        let mut offsets = Vec::with_capacity(self.n + 1);
        let mut targets = Vec::new();
        let mut rates = Vec::new();
        let mut out_rate = Vec::with_capacity(self.n);
        offsets.push(0);
        for mut row in self.adj {
            row.sort_by_key(|e| e.0);
            let mut s = 0.0;
            for (y, r) in row {
                targets.push(y);
                rates.push(r);
                s += r;
            }
            out_rate.push(s);
            offsets.push(targets.len());
        }
        if let Some(l) = &self.labels {
            if l.len() != self.n {
                return Err(Error::InvalidArgument(format!(
                    "{} labels for {} vertices",
                    l.len(),
                    self.n
                )));
            }
        }
        let g = Graph {
            offsets,
            targets,
            rates,
            out_rate,
            labels: self.labels,
        };
        g.check_irreducible()?;
        Ok(g)
    }
}

/// Validated graph from an explicit edge list; repeated pairs are an error.
pub fn build_graph(n: usize, edges: &[(usize, usize, f64)]) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidArgument("graph needs at least one vertex".into()));
    }
    let mut b = GraphBuilder::new(n);
    for &(x, y, r) in edges {
        b.insert(x, y, r)?;
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cycle() {
        let g = build_graph(2, &[(0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        assert_eq!(g.out_rate(0), 2.0);
        assert_eq!(g.out_rate(1), 3.0);
        let l = g.generator_matrix().unwrap();
        assert_eq!(l, Matrix::from_rows(vec![vec![-2.0, 2.0], vec![3.0, -3.0]]));
        let mu = g.check_reversible().unwrap();
        assert!((mu[0] - 0.6).abs() < 1e-15 && (mu[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn single_vertex_is_irreducible() {
        let g = build_graph(1, &[]).unwrap();
        assert_eq!(g.out_rate(0), 0.0);
    }

    #[test]
    fn unreachable_pair_is_named() {
        let e = build_graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap_err();
        assert!(matches!(e, Error::NotStronglyConnected { from: 1, to: 0 }));
    }

    #[test]
    fn invalid_edges() {
        assert!(matches!(
            build_graph(2, &[(0, 1, 0.0), (1, 0, 1.0)]),
            Err(Error::NonPositiveRate { .. })
        ));
        assert!(matches!(
            build_graph(2, &[(0, 1, 1.0), (0, 1, 1.0), (1, 0, 1.0)]),
            Err(Error::DuplicateEdge { x: 0, y: 1 })
        ));
        assert!(matches!(build_graph(2, &[(0, 0, 1.0)]), Err(Error::SelfLoop(0))));
    }

    #[test]
    fn builder_sums_parallel_rates() {
        let mut b = GraphBuilder::new(2);
        b.add_rate(0, 1, 1.0).unwrap();
        b.add_rate(0, 1, 0.5).unwrap();
        b.add_rate(1, 0, 1.0).unwrap();
        let g = b.build().unwrap();
        assert_eq!(g.rate(0, 1), 1.5);
    }

    #[test]
    fn cycle_reversibility() {
        let sym = build_graph(
            3,
            &[
                (0, 1, 1.0),
                (1, 0, 1.0),
                (1, 2, 1.0),
                (2, 1, 1.0),
                (2, 0, 1.0),
                (0, 2, 1.0),
            ],
        )
        .unwrap();
        let mu = sym.check_reversible().unwrap();
        assert!(mu.iter().all(|m| (m - 1.0 / 3.0).abs() < 1e-12));
        let skew = build_graph(
            3,
            &[
                (0, 1, 2.0),
                (1, 0, 1.0),
                (1, 2, 2.0),
                (2, 1, 1.0),
                (2, 0, 2.0),
                (0, 2, 1.0),
            ],
        )
        .unwrap();
        assert!(skew.check_reversible().is_none());
    }

    #[test]
    fn generator_cap() {
        let g = build_graph(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert!(matches!(
            g.generator_matrix_with_cap(1),
            Err(Error::SizeCap { n: 2, cap: 1 })
        ));
    }
}
