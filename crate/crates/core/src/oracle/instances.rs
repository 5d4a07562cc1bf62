//! Random small instances for the identity checks.

use crate::graph::{Graph, GraphBuilder, KillingPlan};
use crate::rng::RngStream;

/// Strongly connected digraph on `n` vertices with integer rates in `1..=4`.
/// Each ordered pair is an edge with probability `density`; draws are
/// repeated until the graph is irreducible.
pub fn random_digraph(n: usize, density: f64, rng: &mut RngStream) -> Graph {
    loop {
        let mut b = GraphBuilder::new(n);
        for x in 0..n {
            for y in 0..n {
                if x != y && rng.uniform() < density {
                    let r = 1 + rng.index(4);
                    b.add_rate(x, y, r as f64).expect("valid edge");
                }
            }
        }
        if let Ok(g) = b.build() {
            return g;
        }
    }
}

/// Reversible chain `w(x, y) = c(x, y) π(y)` with symmetric integer
/// conductances `c` in `1..=4` on a random connected support and integer
/// weights `π` in `1..=3`. The reversible measure is proportional to `π`.
pub fn random_reversible(n: usize, density: f64, rng: &mut RngStream) -> Graph {
    let pi: Vec<f64> = (0..n).map(|_| (1 + rng.index(3)) as f64).collect();
    loop {
        let mut b = GraphBuilder::new(n);
        for x in 0..n {
            for y in x + 1..n {
                if rng.uniform() < density {
                    let c = (1 + rng.index(4)) as f64;
                    b.add_rate(x, y, c * pi[y]).expect("valid edge");
                    b.add_rate(y, x, c * pi[x]).expect("valid edge");
                }
            }
        }
        if let Ok(g) = b.build() {
            return g;
        }
    }
}

/// Rates used for random killing plans; all dyadic so float and exact
/// evaluations see the same numbers.
const Q_VALUES: [f64; 6] = [0.25, 0.5, 1.0, 1.5, 2.0, 3.0];

/// A random killing plan: uniform, set-restricted or general, chosen with
/// equal odds.
pub fn random_plan(n: usize, rng: &mut RngStream) -> KillingPlan {
    let pick = |rng: &mut RngStream| Q_VALUES[rng.index(Q_VALUES.len())];
    match rng.index(3) {
        0 => KillingPlan::uniform(n, pick(rng)).expect("positive rate"),
        1 if n >= 2 => {
            let set = random_proper_subset(n, rng);
            let q = if rng.uniform() < 0.3 { 0.0 } else { pick(rng) };
            KillingPlan::set_restricted(n, q, &set).expect("valid plan")
        }
        _ => loop {
            let q: Vec<f64> = (0..n)
                .map(|_| match rng.index(6) {
                    0 => 0.0,
                    1 if n >= 2 => f64::INFINITY,
                    _ => pick(rng),
                })
                .collect();
            if q.iter().all(|v| v.is_infinite()) {
                continue;
            }
            if let Ok(p) = KillingPlan::new(q) {
                return p;
            }
        },
    }
}

/// Uniformly random nonempty proper subset of `0..n` (`n ≥ 2`), ascending.
pub fn random_proper_subset(n: usize, rng: &mut RngStream) -> Vec<usize> {
    assert!(n >= 2);
    loop {
        let mask = rng.index((1 << n) - 2) + 1;
        let s: Vec<usize> = (0..n).filter(|&x| mask & (1 << x) != 0).collect();
        if !s.is_empty() && s.len() < n {
            return s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_graphs_are_valid() {
        let mut rng = RngStream::new(4, 0);
        for n in 1..=6 {
            let g = random_digraph(n, 0.5, &mut rng);
            assert_eq!(g.n(), n);
            assert!(g.edges().all(|(_, _, r)| r.fract() == 0.0 && (1.0..=4.0).contains(&r)));
            let h = random_reversible(n, 0.6, &mut rng);
            assert!(h.check_reversible().is_some());
            let p = random_plan(n, &mut rng);
            assert_eq!(p.n(), n);
            assert!(p.finite_vertices().len() >= 1);
        }
    }
}
