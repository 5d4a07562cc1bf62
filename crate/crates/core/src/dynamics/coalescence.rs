use std::collections::BinaryHeap;
use std::io::Write;

use rand::RngCore;
use serde::Serialize;

use super::stacks::{delta_threshold, ArrowStacks, Popper, StackStorage};
use crate::error::{Error, Result};
use crate::graph::{Forest, Graph};
use crate::rng::RngStream;

/// `σ = (t w̄ + 1 - u) / (w̄ u)` with `u = U^{1/m}`: the next wake-up time
/// when `m` roots are present at time `t`.
pub fn wake_time_cornice(t: f64, m: usize, wbar: f64, uniform: f64) -> f64 {
    let u = uniform.powf(1.0 / m as f64);
    (t * wbar + 1.0 - u) / (wbar * u)
}

/// Which frozen root wakes next.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WakeRule {
    /// A uniformly chosen root at the time drawn from the max-of-`m`
    /// uniforms law; the stored variates of root entries stay latent.
    #[default]
    Cornice,
    /// The root whose top entry carries the largest stored variate, at the
    /// time that variate stops being a cemetery pointer. The trajectory then
    /// agrees pathwise with Wilson's algorithm on the same stacks.
    StackCoupled,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CoalescenceOptions {
    pub wake: WakeRule,
    pub storage: StackStorage,
    /// Record the vertices whose parent changed at each event.
    pub record_changes: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Root count went down.
    Coalescence,
    /// Root count went up.
    Fragmentation,
    /// Root count unchanged.
    Rearrangement,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoalescenceEvent {
    pub t: f64,
    pub event_kind: EventKind,
    pub root_count: usize,
    /// The root that woke up.
    pub woken: usize,
    pub changed_vertices: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct HeapKey {
    u_bits: u64,
    x: usize,
    depth: u32,
}

/// The coupled process `ξ(t)`, `t = 1/q`, on a fixed realisation of the
/// stacks.
pub struct CoalescenceState<'g> {
    graph: &'g Graph,
    t: f64,
    stacks: ArrowStacks<'g>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<u32>>,
    frozen: Vec<bool>,
    forced: Vec<u32>,
    roots: Vec<usize>,
    root_pos: Vec<usize>,
    heap: BinaryHeap<HeapKey>,
    rng: RngStream,
    opts: CoalescenceOptions,
    popper: Popper,
    pending: Option<(f64, usize)>,
    events: u64,
}

const NOT_ROOT: usize = usize::MAX;

impl<'g> CoalescenceState<'g> {
    /// Time 0: every site holds a frozen particle; the stacks are drawn on
    /// demand from a key taken from `rng`.
    pub fn new(graph: &'g Graph, mut rng: RngStream, opts: CoalescenceOptions) -> Self {
        let n = graph.n();
        let key = rng.next_u64();
        let mut s = Self {
            graph,
            t: 0.0,
            stacks: ArrowStacks::new(graph, key, opts.storage),
            parent: vec![None; n],
            children: vec![Vec::new(); n],
            frozen: vec![true; n],
            forced: vec![u32::MAX; n],
            roots: Vec::with_capacity(n),
            root_pos: vec![NOT_ROOT; n],
            heap: BinaryHeap::new(),
            rng,
            opts,
            popper: Popper::new(n),
            pending: None,
            events: 0,
        };
        for x in 0..n {
            s.add_root(x);
        }
        s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn q(&self) -> f64 {
        if self.t == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.t
        }
    }

    pub fn n_roots(&self) -> usize {
        self.roots.len()
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    /// Sites currently frozen; every site is frozen between events.
    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }

    pub fn stacks(&self) -> &ArrowStacks<'g> {
        &self.stacks
    }

    pub fn forest(&self) -> Forest {
        Forest::from_parents(self.parent.clone()).expect("state is a forest")
    }

    fn add_root(&mut self, x: usize) {
        self.root_pos[x] = self.roots.len();
        self.roots.push(x);
        if self.opts.wake == WakeRule::StackCoupled {
            let depth = self.stacks.depth(x);
            let u = self.stacks.entry(x, depth).u;
            self.heap.push(HeapKey {
                u_bits: u.to_bits(),
                x,
                depth,
            });
        }
    }

    fn remove_root(&mut self, x: usize) {
        let i = self.root_pos[x];
        self.roots.swap_remove(i);
        if let Some(&moved) = self.roots.get(i) {
            self.root_pos[moved] = i;
        }
        self.root_pos[x] = NOT_ROOT;
    }

    /// Time of the next event and the root that wakes then.
    pub fn next_event(&mut self) -> (f64, usize) {
        if let Some(p) = self.pending {
            return p;
        }
        let wbar = self.stacks.wbar();
        let p = match self.opts.wake {
            WakeRule::Cornice => {
                let m = self.roots.len();
                let x = self.roots[self.rng.index(m)];
                let u = self.rng.uniform_open0();
                (wake_time_cornice(self.t, m, wbar, u).max(self.t), x)
            }
            WakeRule::StackCoupled => loop {
                let k = *self.heap.peek().expect("at least one root");
                if self.root_pos[k.x] == NOT_ROOT || self.stacks.depth(k.x) != k.depth {
                    self.heap.pop();
                    continue;
                }
                let u = f64::from_bits(k.u_bits);
                let sigma = if u <= 0.0 {
                    f64::INFINITY
                } else {
                    (1.0 - u) / (wbar * u)
                };
                break (sigma.max(self.t), k.x);
            },
        };
        self.pending = Some(p);
        p
    }

    /// Advance to the next event: wake a root, release its tree and rerun
    /// cycle popping at the new parameter until every site is frozen again.
    pub fn step(&mut self) -> Result<CoalescenceEvent> {
        let (sigma, x) = self.next_event();
        self.pending = None;
        if !sigma.is_finite() {
            return Err(Error::PreconditionViolated("no further events".into()));
        }
        if self.opts.wake == WakeRule::StackCoupled {
            self.heap.pop();
        }
        let before = self.roots.len();
        self.t = sigma;
        let theta = delta_threshold(1.0 / sigma, self.stacks.wbar());

        // Release the woken tree.
        let mut tree = vec![x];
        let mut i = 0;
        while i < tree.len() {
            let v = tree[i];
            tree.extend(self.children[v].iter().map(|&c| c as usize));
            i += 1;
        }
        tree[1..].sort_unstable();
        let old: Vec<Option<usize>> = if self.opts.record_changes {
            tree.iter().map(|&v| self.parent[v]).collect()
        } else {
            Vec::new()
        };
        for &v in &tree {
            self.frozen[v] = false;
            self.children[v].clear();
            self.parent[v] = None;
        }
        self.remove_root(x);
        self.forced[x] = self.stacks.depth(x);

        self.popper.run(
            &mut self.stacks,
            theta,
            &self.forced,
            x,
            &mut self.frozen,
            &mut self.parent,
        );
        self.link_path();
        for k in 1..tree.len() {
            let v = tree[k];
            if !self.frozen[v] {
                self.popper.run(
                    &mut self.stacks,
                    theta,
                    &self.forced,
                    v,
                    &mut self.frozen,
                    &mut self.parent,
                );
                self.link_path();
            }
        }

        let after = self.roots.len();
        if after + 1 < before {
            return Err(Error::DecrementViolation {
                from: before,
                to: after,
            });
        }
        let changed = if self.opts.record_changes {
            let mut c: Vec<usize> = tree
                .iter()
                .zip(&old)
                .filter(|(&v, &p)| self.parent[v] != p)
                .map(|(&v, _)| v)
                .collect();
            c.sort_unstable();
            c
        } else {
            Vec::new()
        };
        self.events += 1;
        Ok(CoalescenceEvent {
            t: sigma,
            event_kind: match after.cmp(&before) {
                std::cmp::Ordering::Less => EventKind::Coalescence,
                std::cmp::Ordering::Greater => EventKind::Fragmentation,
                std::cmp::Ordering::Equal => EventKind::Rearrangement,
            },
            root_count: after,
            woken: x,
            changed_vertices: changed,
        })
    }

    fn link_path(&mut self) {
        for i in 0..self.popper.path.len() {
            let w = self.popper.path[i];
            match self.parent[w] {
                Some(p) => self.children[p].push(w as u32),
                None => self.add_root(w),
            }
        }
    }

    /// Apply every event up to and including time `t_end`.
    pub fn advance_to(&mut self, t_end: f64, mut on_event: impl FnMut(&CoalescenceEvent)) -> Result<()> {
        while self.next_event().0 <= t_end {
            let e = self.step()?;
            on_event(&e);
        }
        Ok(())
    }
}

/// Everything recorded along one trajectory.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub events: Vec<CoalescenceEvent>,
    /// `(t, forest)` for each requested snapshot time.
    pub snapshots: Vec<(f64, Forest)>,
    /// `(t, number of trees)` starting at `(0, n)`, one point per event.
    pub tree_counts: Vec<(f64, usize)>,
}

/// Run from time 0 to `t_end`, taking snapshots at the sorted `times`.
pub fn run_trajectory(
    graph: &Graph,
    rng: RngStream,
    opts: CoalescenceOptions,
    t_end: f64,
    times: &[f64],
    keep_events: bool,
) -> Result<Trajectory> {
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("snapshot times must be sorted".into()));
    }
    let mut state = CoalescenceState::new(graph, rng, opts);
    let mut out = Trajectory {
        tree_counts: vec![(0.0, graph.n())],
        ..Default::default()
    };
    let record = |e: &CoalescenceEvent, out: &mut Trajectory| {
        out.tree_counts.push((e.t, e.root_count));
        if keep_events {
            out.events.push(e.clone());
        }
    };
    for &s in times.iter().filter(|&&s| s <= t_end) {
        let mut buf = Vec::new();
        state.advance_to(s, |e| buf.push(e.clone()))?;
        for e in &buf {
            record(e, &mut out);
        }
        out.snapshots.push((s, state.forest()));
    }
    let mut buf = Vec::new();
    state.advance_to(t_end, |e| buf.push(e.clone()))?;
    for e in &buf {
        record(e, &mut out);
    }
    Ok(out)
}

/// First entrance times `T_m` into `m` trees, `m = n, n-1, …, 1`
/// (index `m - 1`). Runs until one tree remains or `t_cap` is reached;
/// unreached levels stay `None`.
pub fn crossing_times(state: &mut CoalescenceState, t_cap: f64) -> Result<Vec<Option<f64>>> {
    let n = state.graph.n();
    let mut out = vec![None; n];
    let mut current = state.n_roots();
    if current >= 1 {
        out[current - 1] = Some(state.t());
    }
    while current > 1 && state.next_event().0 <= t_cap {
        let e = state.step()?;
        if e.root_count + 1 < current {
            return Err(Error::DecrementViolation {
                from: current,
                to: e.root_count,
            });
        }
        current = e.root_count;
        if out[current - 1].is_none() {
            out[current - 1] = Some(e.t);
        }
    }
    Ok(out)
}

/// One JSON object per line.
pub fn write_events_jsonl(events: &[CoalescenceEvent], mut w: impl Write) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// `t,n_trees` CSV of a tree-count series.
pub fn tree_count_csv(series: &[(f64, usize)]) -> String {
    let mut s = String::from("t,n_trees\n");
    for (t, k) in series {
        s.push_str(&format!("{t},{k}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::stacks::stack_wilson;
    use crate::graph::{build_graph, grid_graph, Topology};

    #[test]
    fn initial_state_is_all_roots() {
        let g = grid_graph(3, 3, Topology::Torus, None).unwrap();
        let s = CoalescenceState::new(&g, RngStream::new(1, 0), CoalescenceOptions::default());
        assert_eq!(s.n_roots(), 9);
        assert_eq!(s.forest().edge_count(), 0);
        assert!(s.q().is_infinite());
    }

    #[test]
    fn single_root_wake_time() {
        // m = 1: V = q U / (w̄ + q) exactly.
        let (t, w, u) = (2.0, 4.0, 0.3);
        let sigma = wake_time_cornice(t, 1, w, u);
        let q = 1.0 / t;
        let v = (1.0 / sigma) / (w + 1.0 / sigma);
        assert!((v - q * u / (w + q)).abs() < 1e-15);
    }

    #[test]
    fn stack_coupled_matches_fresh_wilson() {
        let g = grid_graph(5, 4, Topology::Torus, None).unwrap();
        for seed in 0..5 {
            let opts = CoalescenceOptions {
                wake: WakeRule::StackCoupled,
                ..Default::default()
            };
            let rng = RngStream::new(seed, 0);
            let key = rng.clone().next_u64();
            let mut state = CoalescenceState::new(&g, rng, opts);
            let mut fresh = ArrowStacks::new(&g, key, StackStorage::Regenerate);
            for t in [0.05, 0.3, 1.0, 4.0, 20.0, 150.0] {
                state.advance_to(t, |_| {}).unwrap();
                assert_eq!(state.forest(), stack_wilson(&mut fresh, 1.0 / t), "seed {seed} t {t}");
            }
        }
    }

    #[test]
    fn decrements_are_single() {
        let g = grid_graph(6, 6, Topology::Torus, None).unwrap();
        for mode in [WakeRule::Cornice, WakeRule::StackCoupled] {
            let opts = CoalescenceOptions {
                wake: mode,
                record_changes: true,
                ..Default::default()
            };
            let mut s = CoalescenceState::new(&g, RngStream::new(3, 0), opts);
            let t = crossing_times(&mut s, 1e7).unwrap();
            assert_eq!(t[35], Some(0.0));
            assert!(t.iter().all(Option::is_some), "{mode:?}");
            assert!(t.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn two_cycle_events() {
        let g = build_graph(2, &[(0, 1, 1.0), (1, 0, 2.0)]).unwrap();
        let opts = CoalescenceOptions {
            record_changes: true,
            ..Default::default()
        };
        let traj = run_trajectory(&g, RngStream::new(4, 0), opts, 50.0, &[0.0, 1.0, 10.0], true).unwrap();
        assert_eq!(traj.snapshots[0].1.n_roots(), 2);
        for w in traj.tree_counts.windows(2) {
            assert!(w[1].1 + 1 >= w[0].1);
            assert!(w[1].0 >= w[0].0);
        }
        let mut buf = Vec::new();
        write_events_jsonl(&traj.events, &mut buf).unwrap();
        let first = String::from_utf8(buf).unwrap();
        let line: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
        assert!(line.get("event_kind").is_some() && line.get("changed_vertices").is_some());
        assert!(tree_count_csv(&traj.tree_counts).starts_with("t,n_trees\n0,2\n"));
    }
}
