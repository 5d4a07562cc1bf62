use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Forest, Graph};
use crate::rng::unit_f64;

/// `q / (w̄ + q)`: probability that a stack entry points to the cemetery at
/// parameter `q`. Equals 1 at `q = ∞`.
#[inline]
pub fn delta_threshold(q: f64, wbar: f64) -> f64 {
    if q.is_infinite() {
        1.0
    } else {
        q / (wbar + q)
    }
}

/// `P(U > θ(q') | U < θ(q)) = w̄ (q - q') / (q (q' + w̄))` for `q' < q`.
pub fn reactivation_probability(q: f64, q_new: f64, wbar: f64) -> f64 {
    if q.is_infinite() {
        return wbar / (q_new + wbar);
    }
    wbar * (q - q_new) / (q * (q_new + wbar))
}

/// One stack level: a uniform `u` and the skeleton arrow (possibly to the
/// site itself).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    pub u: f64,
    pub arrow: usize,
}

impl Entry {
    #[inline]
    pub fn is_delta(&self, threshold: f64) -> bool {
        self.u < threshold
    }
}

/// How stack entries are kept.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StackStorage {
    /// Entries are cached once drawn.
    #[default]
    Memoized,
    /// Entries are recomputed from the key on every read; O(1) memory.
    Regenerate,
}

/// Site-indexed stacks of skeleton arrows with a consumption pointer per
/// site.
///
/// Entry `(x, depth)` is a pure function of `(key, x, depth)`: ChaCha8 keyed
/// by `key`, stream `x`, word position `4 · depth`. Both storage modes
/// therefore see the same stacks.
#[derive(Clone, Debug)]
pub struct ArrowStacks<'g> {
    graph: &'g Graph,
    wbar: f64,
    base: ChaCha8Rng,
    storage: StackStorage,
    memo: Vec<Vec<Entry>>,
    depth: Vec<u32>,
}

impl<'g> ArrowStacks<'g> {
    pub fn new(graph: &'g Graph, key: u64, storage: StackStorage) -> Self {
        let n = graph.n();
        Self {
            graph,
            wbar: graph.max_out_rate(),
            base: ChaCha8Rng::seed_from_u64(key),
            storage,
            memo: match storage {
                StackStorage::Memoized => vec![Vec::new(); n],
                StackStorage::Regenerate => Vec::new(),
            },
            depth: vec![0; n],
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    /// Skeleton clock `w̄ = max_x w(x)`.
    pub fn wbar(&self) -> f64 {
        self.wbar
    }

    pub fn storage(&self) -> StackStorage {
        self.storage
    }

    fn draw(&self, x: usize, depth: u32) -> Entry {
        let mut r = self.base.clone();
        r.set_stream(x as u64);
        r.set_word_pos(depth as u128 * 4);
        let u = unit_f64(r.next_u64());
        let mut v = unit_f64(r.next_u64()) * self.wbar;
        let mut arrow = x;
        for (y, rate) in self.graph.neighbours(x) {
            if v < rate {
                arrow = y;
                break;
            }
            v -= rate;
        }
        Entry { u, arrow }
    }

    /// Entry at level `depth` of the stack at `x`.
    pub fn entry(&mut self, x: usize, depth: u32) -> Entry {
        match self.storage {
            StackStorage::Regenerate => self.draw(x, depth),
            StackStorage::Memoized => {
                let d = depth as usize;
                while self.memo[x].len() <= d {
                    let e = self.draw(x, self.memo[x].len() as u32);
                    self.memo[x].push(e);
                }
                self.memo[x][d]
            }
        }
    }

    /// Current top level at `x`.
    #[inline]
    pub fn depth(&self, x: usize) -> u32 {
        self.depth[x]
    }

    #[inline]
    pub fn top(&mut self, x: usize) -> Entry {
        self.entry(x, self.depth[x])
    }

    /// Erase the top entry at `x`.
    #[inline]
    pub fn pop(&mut self, x: usize) {
        self.depth[x] += 1;
    }

    /// Rewind every consumption pointer (memoized entries are kept).
    pub fn reset(&mut self) {
        self.depth.fill(0);
    }

    /// Total number of consumed entries.
    pub fn consumed(&self) -> u64 {
        self.depth.iter().map(|&d| d as u64).sum()
    }

    /// Number of cached entries.
    pub fn cached(&self) -> usize {
        self.memo.iter().map(Vec::len).sum()
    }
}

/// Scratch space for loop-erased walks on the stacks.
pub(crate) struct Popper {
    pub(crate) path: Vec<usize>,
    pos: Vec<usize>,
}

const OFF: usize = usize::MAX;

impl Popper {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            path: Vec::new(),
            pos: vec![OFF; n],
        }
    }

    /// Cycle-popping from `start` at threshold `theta` until the path
    /// reaches a cemetery pointer or a vertex with `in_tree` set. The top at
    /// a vertex `v` with `forced[v] == depth(v)` is read as a plain arrow.
    /// Returns the freshly frozen path (in `self.path`); `parent` is filled
    /// along it and `in_tree` set.
    pub(crate) fn run(
        &mut self,
        stacks: &mut ArrowStacks,
        theta: f64,
        forced: &[u32],
        start: usize,
        in_tree: &mut [bool],
        parent: &mut [Option<usize>],
    ) {
        self.path.clear();
        self.path.push(start);
        self.pos[start] = 0;
        let end = loop {
            let v = *self.path.last().expect("non-empty path");
            let e = stacks.top(v);
            if forced[v] != stacks.depth(v) && e.is_delta(theta) {
                break None;
            }
            let y = e.arrow;
            if y == v {
                stacks.pop(v);
                continue;
            }
            if in_tree[y] {
                break Some(y);
            }
            let p = self.pos[y];
            if p != OFF {
                for &w in &self.path[p..] {
                    stacks.pop(w);
                }
                for &w in &self.path[p + 1..] {
                    self.pos[w] = OFF;
                }
                self.path.truncate(p + 1);
                continue;
            }
            self.pos[y] = self.path.len();
            self.path.push(y);
        };
        for i in 0..self.path.len() {
            let w = self.path[i];
            self.pos[w] = OFF;
            in_tree[w] = true;
            parent[w] = self.path.get(i + 1).copied();
        }
        let last = *self.path.last().expect("non-empty path");
        parent[last] = end;
    }
}

/// Wilson's algorithm on the stacks at parameter `q`, from rewound
/// pointers, visiting start vertices in ascending order.
pub fn stack_wilson(stacks: &mut ArrowStacks, q: f64) -> Forest {
    let n = stacks.graph().n();
    stacks.reset();
    let theta = delta_threshold(q, stacks.wbar());
    let forced = vec![u32::MAX; n];
    let mut in_tree = vec![false; n];
    let mut parent = vec![None; n];
    let mut popper = Popper::new(n);
    for x in 0..n {
        if !in_tree[x] {
            popper.run(stacks, theta, &forced, x, &mut in_tree, &mut parent);
        }
    }
    Forest::from_parents(parent).expect("cycle popping yields a forest")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, grid_graph, Topology};

    #[test]
    fn storage_modes_agree() {
        let g = grid_graph(4, 3, Topology::Torus, None).unwrap();
        let mut a = ArrowStacks::new(&g, 9, StackStorage::Memoized);
        let mut b = ArrowStacks::new(&g, 9, StackStorage::Regenerate);
        for x in 0..g.n() {
            for d in [3, 0, 7, 1] {
                assert_eq!(a.entry(x, d), b.entry(x, d));
            }
        }
        assert_eq!(stack_wilson(&mut a, 0.3), stack_wilson(&mut b, 0.3));
    }

    #[test]
    fn arrows_follow_skeleton() {
        let g = build_graph(2, &[(0, 1, 1.0), (1, 0, 4.0)]).unwrap();
        let mut s = ArrowStacks::new(&g, 1, StackStorage::Regenerate);
        let trials = 40_000;
        let selfs = (0..trials).filter(|&d| s.entry(0, d).arrow == 0).count();
        assert!(((selfs as f64 / trials as f64) - 0.75).abs() < 0.01);
        assert!((0..1000).all(|d| s.entry(1, d).arrow == 0));
    }

    #[test]
    fn delta_pointers_are_monotone_in_q() {
        let g = grid_graph(3, 3, Topology::Torus, None).unwrap();
        let mut s = ArrowStacks::new(&g, 2, StackStorage::Memoized);
        let w = s.wbar();
        for x in 0..g.n() {
            for d in 0..200 {
                let e = s.entry(x, d);
                for (q, q2) in [(1.0, 0.5), (0.3, 0.01), (f64::INFINITY, 2.0)] {
                    if e.is_delta(delta_threshold(q2, w)) {
                        assert!(e.is_delta(delta_threshold(q, w)));
                    }
                }
            }
        }
    }

    #[test]
    fn reactivation_matches_conditional_law() {
        let (q, q2, w) = (2.0, 0.5, 4.0);
        let p = reactivation_probability(q, q2, w);
        let (hi, lo) = (delta_threshold(q, w), delta_threshold(q2, w));
        assert!((p - (hi - lo) / hi).abs() < 1e-15);
        assert!((reactivation_probability(f64::INFINITY, q2, w) - (1.0 - lo)).abs() < 1e-15);
    }

    #[test]
    fn infinite_q_gives_all_roots() {
        let g = grid_graph(3, 2, Topology::Rectangle, None).unwrap();
        let mut s = ArrowStacks::new(&g, 5, StackStorage::Memoized);
        assert_eq!(stack_wilson(&mut s, f64::INFINITY).n_roots(), 6);
    }
}
