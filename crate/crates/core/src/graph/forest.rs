use super::{Graph, KillingPlan};
use crate::error::{Error, Result};

/// A spanning rooted forest: each non-root vertex points to its parent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Forest {
    parent: Vec<Option<usize>>,
    roots: Vec<usize>,
    tree_id: Vec<usize>,
}

const UNSET: usize = usize::MAX;
const ON_PATH: usize = usize::MAX - 1;

impl Forest {
    /// Validates that following parents from every vertex ends at a root.
    pub fn from_parents(parent: Vec<Option<usize>>) -> Result<Self> {
        let n = parent.len();
        let roots: Vec<usize> = (0..n).filter(|&x| parent[x].is_none()).collect();
        let mut root_index = vec![UNSET; n];
        for (i, &r) in roots.iter().enumerate() {
            root_index[r] = i;
        }
        let mut tree_id = vec![UNSET; n];
        for &r in &roots {
            tree_id[r] = root_index[r];
        }
        let mut path = Vec::new();
        for start in 0..n {
            let mut v = start;
            while tree_id[v] == UNSET {
                tree_id[v] = ON_PATH;
                path.push(v);
                let p = parent[v].expect("roots carry their tree id");
                if p >= n {
                    return Err(Error::InvalidForest(format!("parent {p} of {v} out of range")));
                }
                if p == v {
                    return Err(Error::InvalidForest(format!("vertex {v} is its own parent")));
                }
                v = p;
            }
            if tree_id[v] == ON_PATH {
                return Err(Error::InvalidForest(format!("cycle through vertex {v}")));
            }
            let id = tree_id[v];
            for u in path.drain(..) {
                tree_id[u] = id;
            }
        }
        Ok(Self { parent, roots, tree_id })
    }

    /// Like [`from_parents`](Self::from_parents), and also checks every
    /// parent edge against the graph.
    pub fn from_parents_on(graph: &Graph, parent: Vec<Option<usize>>) -> Result<Self> {
        if parent.len() != graph.n() {
            return Err(Error::InvalidForest(format!(
                "{} entries for a graph with {} vertices",
                parent.len(),
                graph.n()
            )));
        }
        let f = Self::from_parents(parent)?;
        f.check_edges(graph)?;
        Ok(f)
    }

    pub fn check_edges(&self, graph: &Graph) -> Result<()> {
        for (x, p) in self.edges() {
            if graph.rate(x, p) <= 0.0 {
                return Err(Error::InvalidForest(format!("({x}, {p}) is not an edge")));
            }
        }
        Ok(())
    }

    /// The forest with no edges.
    pub fn all_roots(n: usize) -> Self {
        Self {
            parent: vec![None; n],
            roots: (0..n).collect(),
            tree_id: (0..n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.parent.len()
    }

    #[inline]
    pub fn parent(&self, x: usize) -> Option<usize> {
        self.parent[x]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    /// Roots in ascending order.
    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn n_roots(&self) -> usize {
        self.roots.len()
    }

    pub fn n_trees(&self) -> usize {
        self.roots.len()
    }

    #[inline]
    pub fn is_root(&self, x: usize) -> bool {
        self.parent[x].is_none()
    }

    /// Index (into [`roots`](Self::roots)) of the tree covering `x`.
    #[inline]
    pub fn tree_id(&self, x: usize) -> usize {
        self.tree_id[x]
    }

    pub fn tree_ids(&self) -> &[usize] {
        &self.tree_id
    }

    /// Root of the tree covering `x`.
    #[inline]
    pub fn root_of(&self, x: usize) -> usize {
        self.roots[self.tree_id[x]]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parent.iter().enumerate().filter_map(|(x, p)| p.map(|p| (x, p)))
    }

    pub fn edge_count(&self) -> usize {
        self.n() - self.n_roots()
    }

    /// Vertex sets of the trees, indexed by tree id, each ascending.
    pub fn trees(&self) -> Vec<Vec<usize>> {
        let mut t = vec![Vec::new(); self.n_roots()];
        for x in 0..self.n() {
            t[self.tree_id[x]].push(x);
        }
        t
    }

    /// Bit mask of the root set (for `n ≤ 64`).
    pub fn root_mask(&self) -> u64 {
        debug_assert!(self.n() <= 64);
        self.roots.iter().fold(0u64, |m, &r| m | (1 << r))
    }

    /// `w(φ) = Π_{e ∈ φ} w(e)`.
    pub fn weight(&self, graph: &Graph) -> f64 {
        self.edges().map(|(x, p)| graph.rate(x, p)).product()
    }

    /// `w_Q(φ) = w(φ) Π_{x ∈ ρ ∖ S} q(x)`, zero unless `S ⊆ ρ`.
    pub fn weight_q(&self, graph: &Graph, plan: &KillingPlan) -> f64 {
        if plan.infinite_set().iter().any(|&x| !self.is_root(x)) {
            return 0.0;
        }
        let kill: f64 = self
            .roots
            .iter()
            .filter(|&&r| !plan.is_infinite(r))
            .map(|&r| plan.q(r))
            .product();
        self.weight(graph) * kill
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    #[test]
    fn tree_ids_follow_roots() {
        let f = Forest::from_parents(vec![Some(1), None, Some(1), None, Some(3)]).unwrap();
        assert_eq!(f.roots(), &[1, 3]);
        assert_eq!(f.tree_ids(), &[0, 0, 0, 1, 1]);
        assert_eq!(f.root_of(4), 3);
        assert_eq!(f.edge_count(), 3);
        assert_eq!(f.trees(), vec![vec![0, 1, 2], vec![3, 4]]);
    }

    #[test]
    fn cycles_rejected() {
        assert!(Forest::from_parents(vec![Some(1), Some(0)]).is_err());
        assert!(Forest::from_parents(vec![Some(0)]).is_err());
        assert!(Forest::from_parents(vec![Some(1), Some(2), Some(1), None]).is_err());
    }

    #[test]
    fn weights() {
        let g = build_graph(2, &[(0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        let plan = KillingPlan::uniform(2, 0.5).unwrap();
        let f = Forest::from_parents_on(&g, vec![Some(1), None]).unwrap();
        assert_eq!(f.weight(&g), 2.0);
        assert_eq!(f.weight_q(&g, &plan), 1.0);
        let s = KillingPlan::set_restricted(2, 0.5, &[0]).unwrap();
        assert_eq!(f.weight_q(&g, &s), 0.0);
        assert_eq!(Forest::all_roots(2).weight_q(&g, &s), 0.5);
    }
}
