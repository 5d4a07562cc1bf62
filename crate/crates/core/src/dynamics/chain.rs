use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Forest, Graph};
use crate::linalg::{Lu, Matrix, Scalar};
use crate::oracle::{Check, ForestTable, Report};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// A root points into another tree: two trees merge.
    Add,
    /// A root points into its own tree, whose root moves to the target.
    Swap,
    /// An edge is deleted and its tail becomes a root.
    Remove,
}

impl Rule {
    /// Change in the number of roots.
    pub fn root_delta(self) -> isize {
        match self {
            Rule::Add => -1,
            Rule::Swap => 0,
            Rule::Remove => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Transition {
    pub edge: (usize, usize),
    pub rule: Rule,
    pub rate: f64,
    pub target: Forest,
}

/// Every enabled transition out of `forest` for the add/swap/remove chain
/// with removal rate `q`.
pub fn chain_transitions(graph: &Graph, q: f64, forest: &Forest) -> Vec<Transition> {
    let mut out = Vec::new();
    for &r in forest.roots() {
        let tid = forest.tree_id(r);
        for (y, w) in graph.neighbours(r) {
            let mut parent = forest.parents().to_vec();
            let rule = if forest.tree_id(y) == tid {
                parent[y] = None;
                Rule::Swap
            } else {
                Rule::Add
            };
            parent[r] = Some(y);
            out.push(Transition {
                edge: (r, y),
                rule,
                rate: w,
                target: Forest::from_parents(parent).expect("add/swap keeps a forest"),
            });
        }
    }
    if q > 0.0 {
        for (x, y) in forest.edges() {
            let mut parent = forest.parents().to_vec();
            parent[x] = None;
            out.push(Transition {
                edge: (x, y),
                rule: Rule::Remove,
                rate: q,
                target: Forest::from_parents(parent).expect("removal keeps a forest"),
            });
        }
    }
    out
}

/// Exact-jump trajectory `(jump time, state)`, starting with `(0, φ0)`.
#[derive(Clone, Debug)]
pub struct ChainTrajectory {
    pub jumps: Vec<(f64, Forest)>,
    pub horizon: f64,
}

impl ChainTrajectory {
    /// Time spent in each class `f(φ)` (with `classes` classes) up to the horizon.
    pub fn occupation(&self, classes: usize, f: impl Fn(&Forest) -> usize) -> Vec<f64> {
        let mut occ = vec![0.0; classes];
        for (i, (t, phi)) in self.jumps.iter().enumerate() {
            let end = self.jumps.get(i + 1).map_or(self.horizon, |j| j.0);
            occ[f(phi)] += end - t;
        }
        occ
    }
}

/// Gillespie simulation of the chain up to `horizon`.
pub fn simulate_chain(
    graph: &Graph,
    q: f64,
    start: &Forest,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<ChainTrajectory> {
    if start.n() != graph.n() {
        return Err(Error::InvalidForest("forest size differs from graph".into()));
    }
    start.check_edges(graph)?;
    let mut t = 0.0;
    let mut jumps = vec![(0.0, start.clone())];
    loop {
        let current = &jumps.last().expect("non-empty").1;
        let tr = chain_transitions(graph, q, current);
        let total: f64 = tr.iter().map(|x| x.rate).sum();
        if total <= 0.0 {
            break;
        }
        t += rng.exponential(total);
        if t > horizon {
            break;
        }
        let mut u = rng.uniform() * total;
        let mut pick = tr.len() - 1;
        for (i, x) in tr.iter().enumerate() {
            if u < x.rate {
                pick = i;
                break;
            }
            u -= x.rate;
        }
        let next = tr.into_iter().nth(pick).expect("index in range").target;
        jumps.push((t, next));
    }
    Ok(ChainTrajectory { jumps, horizon })
}

/// Full generator of the chain on an enumerated forest space.
fn generator_entries(graph: &Graph, table: &ForestTable, q: f64) -> Vec<Vec<(usize, Transition)>> {
    (0..table.len())
        .map(|i| {
            chain_transitions(graph, q, &table.forest(i))
                .into_iter()
                .map(|t| {
                    let j = table.index_of(t.target.parents()).expect("target enumerated");
                    (j, t)
                })
                .collect()
        })
        .collect()
}

/// Global balance of `w_q(φ) = w(φ) q^{|ρ(φ)|}` under the chain, checked
/// state by state in floating point and as the exact vector identity
/// `w_q G = 0` over the rationals.
pub fn chain_stationarity_exact(graph: &Graph, q: f64) -> Result<Report> {
    let table = ForestTable::enumerate(graph)?;
    let gen = generator_entries(graph, &table, q);
    let m = table.len();
    let wq: Vec<f64> = (0..m)
        .map(|i| table.weight(i) * q.powi(table.n_roots(i) as i32))
        .collect();
    let mut inflow = vec![0.0; m];
    let mut outflow = vec![0.0; m];
    for (i, row) in gen.iter().enumerate() {
        for (j, t) in row {
            inflow[*j] += wq[i] * t.rate;
            outflow[i] += wq[i] * t.rate;
        }
    }
    let mut rep = Report::new("chain_stationarity");
    for j in 0..m {
        rep.push(Check::relative(
            format!("balance at forest {j}"),
            inflow[j],
            outflow[j],
            1e-10,
        ));
    }

    let qx = <BigRational as Scalar>::from_f64(q);
    let wx: Vec<BigRational> = (0..m)
        .map(|i| {
            let mut w = table.weight_exact(graph, i);
            for _ in 0..table.n_roots(i) {
                w *= qx.clone();
            }
            w
        })
        .collect();
    let mut residual = vec![BigRational::zero(); m];
    for (i, row) in gen.iter().enumerate() {
        for (j, t) in row {
            let flow = wx[i].clone() * <BigRational as Scalar>::from_f64(t.rate);
            residual[*j] += flow.clone();
            residual[i] -= flow;
        }
    }
    let bad = residual.iter().filter(|r| !r.is_zero()).count();
    rep.push(Check::exact("w_q G = 0 [exact]", bad as f64, 0.0, bad == 0));
    let total = wx.iter().fold(BigRational::zero(), |a, b| a + b);
    rep.push(Check::exact(
        "w_q is not identically zero",
        0.0,
        0.0,
        total > BigRational::zero() || q == 0.0,
    ));
    Ok(rep)
}

/// At `q = 0` the chain started from a spanning tree stays on spanning
/// trees. Returns the root marginal of its stationary law, computed by a
/// linear solve on the tree-space generator, next to `μ` from `μ L = 0`.
pub fn tree_chain_root_marginal(graph: &Graph) -> Result<(Vec<f64>, Vec<f64>, Report)> {
    let n = graph.n();
    let table = ForestTable::enumerate(graph)?;
    let trees: Vec<usize> = (0..table.len()).filter(|&i| table.n_roots(i) == 1).collect();
    let mut index = vec![usize::MAX; table.len()];
    for (k, &i) in trees.iter().enumerate() {
        index[i] = k;
    }
    let s = trees.len();
    let mut g = Matrix::zeros(s, s);
    for (k, &i) in trees.iter().enumerate() {
        for t in chain_transitions(graph, 0.0, &table.forest(i)) {
            let j = table.index_of(t.target.parents()).expect("target enumerated");
            let l = index[j];
            if l == usize::MAX {
                return Err(Error::PreconditionViolated("tree chain left the tree space".into()));
            }
            g[(k, l)] += t.rate;
            g[(k, k)] -= t.rate;
        }
    }
    // π G = 0 with Σ π = 1.
    let mut a = g.transpose();
    for j in 0..s {
        a[(s - 1, j)] = 1.0;
    }
    let mut b = vec![0.0; s];
    b[s - 1] = 1.0;
    let pi = Lu::new(&a).solve(&b)?;
    let mut marginal = vec![0.0; n];
    for (k, &i) in trees.iter().enumerate() {
        marginal[table.root_mask(i).trailing_zeros() as usize] += pi[k];
    }
    let mu = graph.stationary()?;
    let mut rep = Report::new("tree_chain_root_marginal");
    for x in 0..n {
        rep.push(Check::absolute(
            format!("root marginal at {x} = μ({x})"),
            marginal[x],
            mu[x],
            1e-9,
        ));
    }
    Ok((marginal, mu, rep))
}

/// Empirical root jump rates of a `q = 0` trajectory started from a tree:
/// `(counts[x][y], time spent with root x)`.
pub fn root_jump_counts(traj: &ChainTrajectory, n: usize) -> (Vec<Vec<u64>>, Vec<f64>) {
    let mut counts = vec![vec![0u64; n]; n];
    let mut time = vec![0.0; n];
    for (i, (t, phi)) in traj.jumps.iter().enumerate() {
        let r = phi.roots()[0];
        let end = traj.jumps.get(i + 1).map_or(traj.horizon, |j| j.0);
        time[r] += end - t;
        if let Some((_, next)) = traj.jumps.get(i + 1) {
            let r2 = next.roots()[0];
            if r2 != r {
                counts[r][r2] += 1;
            }
        }
    }
    (counts, time)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    fn two_cycle(a: f64, b: f64) -> Graph {
        build_graph(2, &[(0, 1, a), (1, 0, b)]).unwrap()
    }

    #[test]
    fn two_cycle_transitions() {
        let g = two_cycle(2.0, 3.0);
        let empty = Forest::all_roots(2);
        let t = chain_transitions(&g, 0.5, &empty);
        assert_eq!(t.len(), 2);
        assert!(t.iter().all(|x| x.rule == Rule::Add));
        let edge = Forest::from_parents(vec![Some(1), None]).unwrap();
        let t = chain_transitions(&g, 0.5, &edge);
        let swap = t.iter().find(|x| x.rule == Rule::Swap).unwrap();
        assert_eq!(swap.edge, (1, 0));
        assert_eq!(swap.target.parents(), &[None, Some(0)]);
        let remove = t.iter().find(|x| x.rule == Rule::Remove).unwrap();
        assert_eq!(remove.rate, 0.5);
        assert_eq!(t.iter().filter(|x| x.rule == Rule::Remove).count(), edge.edge_count());
    }

    #[test]
    fn stationarity_small() {
        assert!(chain_stationarity_exact(&two_cycle(2.0, 3.0), 0.5).unwrap().pass());
        let mut e = Vec::new();
        for x in 0..3 {
            for y in 0..3 {
                if x != y {
                    e.push((x, y, (1 + x + 2 * y) as f64));
                }
            }
        }
        let k3 = build_graph(3, &e).unwrap();
        let r = chain_stationarity_exact(&k3, 1.5).unwrap();
        assert_eq!(r.checks.len(), 16 + 2);
        assert!(r.pass());
        let (_, _, rep) = tree_chain_root_marginal(&k3).unwrap();
        assert!(rep.pass());
    }

    #[test]
    fn zero_horizon() {
        let g = two_cycle(1.0, 1.0);
        let f = Forest::all_roots(2);
        let t = simulate_chain(&g, 1.0, &f, 0.0, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(t.jumps.len(), 1);
    }

    #[test]
    fn occupation_of_all_roots() {
        let (a, b, q) = (2.0, 3.0, 0.5);
        let g = two_cycle(a, b);
        let t = simulate_chain(&g, q, &Forest::all_roots(2), 20_000.0, &mut RngStream::new(6, 0)).unwrap();
        let occ = t.occupation(2, |f| (f.n_roots() == 2) as usize);
        let frac = occ[1] / t.horizon;
        assert!((frac - q / (q + a + b)).abs() < 0.01, "{frac}");
    }
}
