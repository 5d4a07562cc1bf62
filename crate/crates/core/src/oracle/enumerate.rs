use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::graph::{Forest, Graph, KillingPlan};
use crate::linalg::{Poly, Scalar};

/// Largest graph the enumeration accepts.
pub const ENUMERATION_CAP: usize = 8;

const ROOT: u8 = u8::MAX;

/// Every spanning rooted forest of a small graph with its weight `w(φ)`.
#[derive(Clone, Debug)]
pub struct ForestTable {
    n: usize,
    parents: Vec<u8>,
    weights: Vec<f64>,
    root_masks: Vec<u16>,
    by_root_set: Vec<Vec<u32>>,
}

impl ForestTable {
    pub fn enumerate(graph: &Graph) -> Result<Self> {
        let n = graph.n();
        if n > ENUMERATION_CAP {
            return Err(Error::SizeCap {
                n,
                cap: ENUMERATION_CAP,
            });
        }
        let mut table = Self {
            n,
            parents: Vec::new(),
            weights: Vec::new(),
            root_masks: Vec::new(),
            by_root_set: vec![Vec::new(); 1 << n],
        };
        let mut current = vec![ROOT; n];
        let mut assigned = vec![false; n];
        table.recurse(graph, 0, &mut current, &mut assigned, 1.0, 0);
        for (i, &m) in table.root_masks.iter().enumerate() {
            table.by_root_set[m as usize].push(i as u32);
        }
        Ok(table)
    }

    fn recurse(&mut self, graph: &Graph, x: usize, current: &mut [u8], assigned: &mut [bool], weight: f64, mask: u16) {
        if x == self.n {
            self.parents.extend_from_slice(current);
            self.weights.push(weight);
            self.root_masks.push(mask);
            return;
        }
        assigned[x] = true;
        current[x] = ROOT;
        self.recurse(graph, x + 1, current, assigned, weight, mask | (1 << x));
        for (y, r) in graph.neighbours(x) {
            if closes_cycle(current, assigned, x, y) {
                continue;
            }
            current[x] = y as u8;
            self.recurse(graph, x + 1, current, assigned, weight * r, mask);
        }
        current[x] = ROOT;
        assigned[x] = false;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn parent(&self, i: usize, x: usize) -> Option<usize> {
        let p = self.parents[i * self.n + x];
        (p != ROOT).then_some(p as usize)
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// `w(φ_i)` recomputed in exact arithmetic.
    pub fn weight_exact(&self, graph: &Graph, i: usize) -> BigRational {
        (0..self.n)
            .filter_map(|x| self.parent(i, x).map(|p| (x, p)))
            .fold(BigRational::one(), |acc, (x, p)| {
                acc * <BigRational as Scalar>::from_f64(graph.rate(x, p))
            })
    }

    #[inline]
    pub fn root_mask(&self, i: usize) -> u16 {
        self.root_masks[i]
    }

    #[inline]
    pub fn n_roots(&self, i: usize) -> usize {
        self.root_masks[i].count_ones() as usize
    }

    /// Indices of the forests whose root set is exactly `mask`.
    pub fn with_root_set(&self, mask: u16) -> &[u32] {
        &self.by_root_set[mask as usize]
    }

    /// Root of the tree covering `x` in forest `i`.
    #[inline]
    pub fn root_of(&self, i: usize, mut x: usize) -> usize {
        while let Some(p) = self.parent(i, x) {
            x = p;
        }
        x
    }

    /// Per-vertex bit mask of the tree covering it.
    pub fn tree_masks(&self, i: usize) -> Vec<u16> {
        let roots: Vec<usize> = (0..self.n).map(|x| self.root_of(i, x)).collect();
        let mut by_root = vec![0u16; self.n];
        for (x, &r) in roots.iter().enumerate() {
            by_root[r] |= 1 << x;
        }
        roots.iter().map(|&r| by_root[r]).collect()
    }

    pub fn forest(&self, i: usize) -> Forest {
        Forest::from_parents((0..self.n).map(|x| self.parent(i, x)).collect()).expect("enumerated entries are forests")
    }

    /// Index of a forest given its parent array.
    pub fn index_of(&self, parent: &[Option<usize>]) -> Option<usize> {
        let mask = parent
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_none())
            .fold(0u16, |m, (x, _)| m | (1 << x));
        self.with_root_set(mask)
            .iter()
            .map(|&i| i as usize)
            .find(|&i| (0..self.n).all(|x| self.parent(i, x) == parent[x]))
    }

    /// `w_Q(φ_i) = w(φ_i) Π_{x ∈ ρ ∖ S} q(x)`, zero unless `S ⊆ ρ`.
    pub fn weight_q(&self, i: usize, plan: &KillingPlan) -> f64 {
        let mask = self.root_masks[i];
        let mut w = self.weights[i];
        for x in 0..self.n {
            let is_root = mask & (1 << x) != 0;
            if plan.is_infinite(x) {
                if !is_root {
                    return 0.0;
                }
            } else if is_root {
                w *= plan.q(x);
            }
        }
        w
    }

    pub fn weight_q_exact(&self, graph: &Graph, i: usize, plan: &KillingPlan) -> BigRational {
        let mask = self.root_masks[i];
        let mut w = self.weight_exact(graph, i);
        for x in 0..self.n {
            let is_root = mask & (1 << x) != 0;
            if plan.is_infinite(x) {
                if !is_root {
                    return BigRational::zero();
                }
            } else if is_root {
                w *= <BigRational as Scalar>::from_f64(plan.q(x));
            }
        }
        w
    }

    /// `ν_Q` as a probability vector over the table.
    pub fn probabilities(&self, plan: &KillingPlan) -> Vec<f64> {
        let w: Vec<f64> = (0..self.len()).map(|i| self.weight_q(i, plan)).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|v| v / z).collect()
    }

    /// `Σ_{|ρ(φ)| = k} w(φ)` for `k = 0..=n`: the coefficients of `Z(q)`.
    pub fn root_count_polynomial(&self) -> Poly {
        let mut c = vec![0.0; self.n + 1];
        for i in 0..self.len() {
            c[self.n_roots(i)] += self.weights[i];
        }
        Poly::new(c)
    }

    pub fn root_count_polynomial_exact(&self, graph: &Graph) -> Poly<BigRational> {
        let mut c = vec![BigRational::zero(); self.n + 1];
        for i in 0..self.len() {
            c[self.n_roots(i)] += self.weight_exact(graph, i);
        }
        Poly::new(c)
    }

    /// `Z_R(q) = Σ_{ρ ⊇ R} w(φ) q^{|ρ| - |R|}` as a polynomial.
    pub fn restricted_polynomial(&self, r_mask: u16) -> Poly {
        let base = r_mask.count_ones() as usize;
        let mut c = vec![0.0; self.n + 1 - base];
        for i in 0..self.len() {
            if self.root_masks[i] & r_mask == r_mask {
                c[self.n_roots(i) - base] += self.weights[i];
            }
        }
        Poly::new(c)
    }

    pub fn restricted_polynomial_exact(&self, graph: &Graph, r_mask: u16) -> Poly<BigRational> {
        let base = r_mask.count_ones() as usize;
        let mut c = vec![BigRational::zero(); self.n + 1 - base];
        for i in 0..self.len() {
            if self.root_masks[i] & r_mask == r_mask {
                c[self.n_roots(i) - base] += self.weight_exact(graph, i);
            }
        }
        Poly::new(c)
    }
}

/// Whether setting `parent[x] = y` closes a cycle among assigned vertices.
fn closes_cycle(parent: &[u8], assigned: &[bool], x: usize, y: usize) -> bool {
    let mut v = y;
    loop {
        if v == x {
            return true;
        }
        if !assigned[v] || parent[v] == ROOT {
            return false;
        }
        v = parent[v] as usize;
    }
}

pub fn mask_of(set: &[usize]) -> u16 {
    set.iter().fold(0u16, |m, &x| m | (1 << x))
}

pub fn members(mask: u16, n: usize) -> Vec<usize> {
    (0..n).filter(|&x| mask & (1 << x) != 0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    fn complete(n: usize) -> Graph {
        let mut e = Vec::new();
        for x in 0..n {
            for y in 0..n {
                if x != y {
                    e.push((x, y, 1.0));
                }
            }
        }
        build_graph(n, &e).unwrap()
    }

    #[test]
    fn small_counts() {
        let one = build_graph(1, &[]).unwrap();
        assert_eq!(ForestTable::enumerate(&one).unwrap().len(), 1);
        let two = build_graph(2, &[(0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        let t = ForestTable::enumerate(&two).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.root_count_polynomial().coeffs, vec![0.0, 5.0, 1.0]);
    }

    #[test]
    fn complete_graph_counts() {
        let t = ForestTable::enumerate(&complete(3)).unwrap();
        // Z(q) = q (q + 3)^2 = q^3 + 6 q^2 + 9 q.
        assert_eq!(t.len(), 16);
        assert_eq!(t.root_count_polynomial().coeffs, vec![0.0, 9.0, 6.0, 1.0]);
        for n in 1..=6 {
            let t = ForestTable::enumerate(&complete(n)).unwrap();
            assert_eq!(t.len(), (n + 1).pow(n as u32 - 1));
        }
    }

    #[test]
    fn every_entry_is_a_forest() {
        let t = ForestTable::enumerate(&complete(4)).unwrap();
        for i in 0..t.len() {
            let f = t.forest(i);
            assert_eq!(f.root_mask() as u16, t.root_mask(i));
            assert_eq!(t.index_of(f.parents()), Some(i));
        }
    }

    #[test]
    fn size_cap() {
        let g = complete(9);
        assert!(matches!(ForestTable::enumerate(&g), Err(Error::SizeCap { .. })));
    }
}
