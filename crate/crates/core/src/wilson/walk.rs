use crate::graph::{Graph, KillingPlan};
use crate::rng::RngStream;

/// Outcome of a single move of the killed walk.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Move {
    Killed,
    Jump(usize),
    /// Lazy self-loop of the uniformised skeleton.
    Stay,
}

/// Transition rows of the walk killed at rate `q(x)` and stopped on the
/// absorbing vertices (`q = ∞`, or an explicit absorbing set).
pub(crate) struct Walker<'g> {
    graph: &'g Graph,
    kill: Vec<f64>,
    total: Vec<f64>,
    pub(crate) absorbing: Vec<bool>,
    clock: f64,
    uniformized: bool,
}

impl<'g> Walker<'g> {
    pub(crate) fn new(graph: &'g Graph, plan: &KillingPlan, uniformized: bool) -> Self {
        let n = graph.n();
        assert_eq!(plan.n(), n, "killing plan size differs from graph");
        let absorbing: Vec<bool> = (0..n).map(|x| plan.is_infinite(x)).collect();
        let kill: Vec<f64> = (0..n).map(|x| if absorbing[x] { 0.0 } else { plan.q(x) }).collect();
        let total: Vec<f64> = (0..n).map(|x| graph.out_rate(x) + kill[x]).collect();
        let clock = (0..n).filter(|&x| !absorbing[x]).map(|x| total[x]).fold(0.0, f64::max);
        Self {
            graph,
            kill,
            total,
            absorbing,
            clock,
            uniformized,
        }
    }

    /// Walk stopped on `set` with no killing.
    pub(crate) fn absorbed_on(graph: &'g Graph, set: &[usize], uniformized: bool) -> Self {
        let n = graph.n();
        let mut absorbing = vec![false; n];
        for &b in set {
            absorbing[b] = true;
        }
        let kill = vec![0.0; n];
        let total = graph.out_rates().to_vec();
        let clock = (0..n).filter(|&x| !absorbing[x]).map(|x| total[x]).fold(0.0, f64::max);
        Self {
            graph,
            kill,
            total,
            absorbing,
            clock,
            uniformized,
        }
    }

    /// Draw the next move from `x`.
    #[inline]
    pub(crate) fn step(&self, x: usize, rng: &mut RngStream) -> Move {
        let scale = if self.uniformized { self.clock } else { self.total[x] };
        let mut u = rng.uniform() * scale;
        let k = self.kill[x];
        if u < k {
            return Move::Killed;
        }
        u -= k;
        let rates = self.graph.rates(x);
        let targets = self.graph.targets(x);
        if self.uniformized && u >= self.graph.out_rate(x) {
            return Move::Stay;
        }
        for (i, &r) in rates.iter().enumerate() {
            if u < r {
                return Move::Jump(targets[i] as usize);
            }
            u -= r;
        }
        // Round-off at the top of the row; the last neighbour owns it.
        match targets.last() {
            Some(&y) => Move::Jump(y as usize),
            None => Move::Killed,
        }
    }

    /// Holding time before the move from `x`.
    #[inline]
    pub(crate) fn holding(&self, x: usize, rng: &mut RngStream) -> f64 {
        let rate = if self.uniformized { self.clock } else { self.total[x] };
        rng.exponential(rate)
    }
}

const NONE: usize = usize::MAX;

/// Loop-erased path under construction, with a per-vertex position index so
/// popping a loop costs its length.
pub(crate) struct PathStack {
    pub(crate) path: Vec<usize>,
    pos: Vec<usize>,
}

impl PathStack {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            path: Vec::new(),
            pos: vec![NONE; n],
        }
    }

    pub(crate) fn start(&mut self, x: usize) {
        self.clear();
        self.pos[x] = 0;
        self.path.push(x);
    }

    #[inline]
    pub(crate) fn top(&self) -> usize {
        *self.path.last().expect("non-empty path")
    }

    /// Extend the path to `v`, erasing the loop if `v` is already on it.
    #[inline]
    pub(crate) fn advance(&mut self, v: usize) {
        let p = self.pos[v];
        if p == NONE {
            self.pos[v] = self.path.len();
            self.path.push(v);
        } else {
            for u in self.path.drain(p + 1..) {
                self.pos[u] = NONE;
            }
        }
    }

    pub(crate) fn clear(&mut self) {
        for &u in &self.path {
            self.pos[u] = NONE;
        }
        self.path.clear();
    }
}

/// How a loop-erased walk ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum End {
    Killed,
    Hit(usize),
}

/// Run one loop-erased walk from `start` until it is killed or enters a
/// vertex with `stop[v]`. The erased path is left in `stack.path`.
pub(crate) fn run_lerw(
    walker: &Walker<'_>,
    stop: &[bool],
    start: usize,
    stack: &mut PathStack,
    rng: &mut RngStream,
    track_time: bool,
    steps: &mut u64,
    time: &mut f64,
) -> End {
    stack.start(start);
    loop {
        let u = stack.top();
        if track_time {
            *time += walker.holding(u, rng);
        }
        *steps += 1;
        match walker.step(u, rng) {
            Move::Killed => return End::Killed,
            Move::Stay => {}
            Move::Jump(v) => {
                if stop[v] {
                    return End::Hit(v);
                }
                stack.advance(v);
            }
        }
    }
}
