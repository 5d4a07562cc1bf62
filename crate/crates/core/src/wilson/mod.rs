//! Wilson's algorithm with killing, loop-erased walks and root-count targeting.

mod law;
mod target;
mod walk;

use rayon::prelude::*;
use serde::Serialize;

pub use law::{lerw_law, lerw_law_exact};
pub use target::{
    expected_roots, sample_conditioned, solve_target, target_root_count, TargetOutcome, TARGET_MAX_ITERATIONS,
};

pub(crate) use walk::{run_lerw, End, PathStack, Walker};

use crate::error::{Error, Result};
use crate::graph::{Forest, Graph, KillingPlan};
use crate::rng::RngStream;

/// Sampler switches.
#[derive(Clone, Debug, Default)]
pub struct SamplerOptions {
    /// Accumulate the continuous running time of the walks.
    pub track_time: bool,
    /// Walk on the constant-rate skeleton with lazy self-loops instead of
    /// the embedded jump chain.
    pub uniformized: bool,
    /// Traversal order of start vertices; ascending when absent.
    pub order: Option<Vec<usize>>,
}

/// A loop-erased path `y_0, …, y_l`. When `killed` is set the walk ended in
/// the cemetery from `y_l`; otherwise `y_l` belongs to the absorbing set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct LerwPath {
    pub points: Vec<usize>,
    pub killed: bool,
}

impl LerwPath {
    /// Number of steps `l`, counting the final step to the cemetery.
    pub fn len(&self) -> usize {
        if self.killed {
            self.points.len()
        } else {
            self.points.len() - 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct SampleReport {
    pub forest: Forest,
    /// The killing rate when the plan is uniform.
    pub q_used: Option<f64>,
    pub n_roots: usize,
    pub steps_walked: u64,
    /// Total continuous running time of the walks, when tracked.
    pub wilson_time: Option<f64>,
}

/// Loop-erased walk from `start` killed according to `plan`; vertices with
/// infinite rate absorb.
pub fn lerw(graph: &Graph, plan: &KillingPlan, start: usize, rng: &mut RngStream) -> LerwPath {
    let walker = Walker::new(graph, plan, false);
    lerw_with(&walker, start, rng)
}

/// Loop-erased walk from `start` stopped on entering `set`, using either
/// the jump chain or the uniformised skeleton.
pub fn lerw_to_set(
    graph: &Graph,
    set: &[usize],
    start: usize,
    uniformized: bool,
    rng: &mut RngStream,
) -> Result<LerwPath> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("absorbing set is empty".into()));
    }
    if set.contains(&start) {
        return Err(Error::InvalidArgument(format!(
            "start {start} lies in the absorbing set"
        )));
    }
    let walker = Walker::absorbed_on(graph, set, uniformized);
    Ok(lerw_with(&walker, start, rng))
}

fn lerw_with(walker: &Walker<'_>, start: usize, rng: &mut RngStream) -> LerwPath {
    let mut stack = PathStack::new(walker.absorbing.len());
    let (mut steps, mut time) = (0, 0.0);
    if walker.absorbing[start] {
        return LerwPath {
            points: vec![start],
            killed: false,
        };
    }
    let end = run_lerw(
        walker,
        &walker.absorbing,
        start,
        &mut stack,
        rng,
        false,
        &mut steps,
        &mut time,
    );
    let mut points = std::mem::take(&mut stack.path);
    let killed = match end {
        End::Killed => true,
        End::Hit(v) => {
            points.push(v);
            false
        }
    };
    LerwPath { points, killed }
}

/// One forest from `ν_Q`.
pub fn sample_forest(graph: &Graph, plan: &KillingPlan, rng: &mut RngStream) -> SampleReport {
    sample_forest_with(graph, plan, rng, &SamplerOptions::default())
}

pub fn sample_forest_with(
    graph: &Graph,
    plan: &KillingPlan,
    rng: &mut RngStream,
    opts: &SamplerOptions,
) -> SampleReport {
    let walker = Walker::new(graph, plan, opts.uniformized);
    let n = graph.n();
    let mut in_tree = walker.absorbing.clone();
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut stack = PathStack::new(n);
    let (mut steps, mut time) = (0u64, 0.0);
    let ascending: Vec<usize>;
    let order: &[usize] = match &opts.order {
        Some(o) => o,
        None => {
            ascending = (0..n).collect();
            &ascending
        }
    };
    for &start in order {
        if in_tree[start] {
            continue;
        }
        let end = run_lerw(
            &walker,
            &in_tree,
            start,
            &mut stack,
            rng,
            opts.track_time,
            &mut steps,
            &mut time,
        );
        let path = &stack.path;
        for w in path.windows(2) {
            parent[w[0]] = Some(w[1]);
        }
        let last = *path.last().expect("non-empty path");
        parent[last] = match end {
            End::Killed => None,
            End::Hit(v) => Some(v),
        };
        for &u in path {
            in_tree[u] = true;
        }
        stack.clear();
    }
    let forest = Forest::from_parents(parent).expect("Wilson's algorithm yields a forest");
    SampleReport {
        n_roots: forest.n_roots(),
        forest,
        q_used: plan.uniform_q(),
        steps_walked: steps,
        wilson_time: opts.track_time.then_some(time),
    }
}

/// `count` independent samples; sample `i` uses stream `i` of `seed`.
/// Results come back in stream order.
pub fn sample_batch(
    graph: &Graph,
    plan: &KillingPlan,
    seed: u64,
    count: usize,
    opts: &SamplerOptions,
) -> Vec<SampleReport> {
    sample_map(graph, plan, seed, count, opts, |r| r)
}

/// Like [`sample_batch`] but maps each report before collecting, so large
/// batches need not keep whole forests.
pub fn sample_map<T, F>(
    graph: &Graph,
    plan: &KillingPlan,
    seed: u64,
    count: usize,
    opts: &SamplerOptions,
    f: F,
) -> Vec<T>
where
    T: Send,
    F: Fn(SampleReport) -> T + Sync,
{
    crate::parallel::install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let mut rng = RngStream::new(seed, i as u64);
                f(sample_forest_with(graph, plan, &mut rng, opts))
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, grid_graph, Topology};

    #[test]
    fn single_vertex_forest() {
        let g = build_graph(1, &[]).unwrap();
        let plan = KillingPlan::uniform(1, 1.0).unwrap();
        let r = sample_forest(&g, &plan, &mut RngStream::new(0, 0));
        assert_eq!(r.forest.roots(), &[0]);
        assert_eq!(r.n_roots, 1);
    }

    #[test]
    fn two_cycle_lerw_is_forced() {
        let g = build_graph(2, &[(0, 1, 1.0), (1, 0, 2.0)]).unwrap();
        let mut rng = RngStream::new(5, 0);
        for _ in 0..20 {
            let p = lerw_to_set(&g, &[1], 0, false, &mut rng).unwrap();
            assert_eq!(p.points, vec![0, 1]);
        }
    }

    #[test]
    fn path_graph_lerw() {
        let g = grid_graph(3, 1, Topology::Rectangle, None).unwrap();
        let mut rng = RngStream::new(9, 0);
        for uniformized in [false, true] {
            for _ in 0..50 {
                let p = lerw_to_set(&g, &[2], 0, uniformized, &mut rng).unwrap();
                assert_eq!(p.points, vec![0, 1, 2]);
            }
        }
    }

    #[test]
    fn infinite_rates_are_roots() {
        let g = grid_graph(4, 4, Topology::Torus, None).unwrap();
        let plan = KillingPlan::set_restricted(16, 0.0, &[3, 9]).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..50 {
            let r = sample_forest(&g, &plan, &mut rng);
            assert_eq!(r.forest.roots(), &[3, 9]);
        }
    }

    #[test]
    fn batch_is_reproducible() {
        let g = grid_graph(5, 5, Topology::Torus, None).unwrap();
        let plan = KillingPlan::uniform(25, 0.2).unwrap();
        let opts = SamplerOptions::default();
        let a = sample_map(&g, &plan, 3, 16, &opts, |r| r.forest);
        let b = sample_map(&g, &plan, 3, 16, &opts, |r| r.forest);
        assert_eq!(a, b);
        let mut rng = RngStream::new(3, 7);
        assert_eq!(sample_forest(&g, &plan, &mut rng).forest, a[7]);
    }

    #[test]
    fn running_time_is_tracked() {
        let g = grid_graph(3, 3, Topology::Torus, None).unwrap();
        let plan = KillingPlan::uniform(9, 0.5).unwrap();
        let opts = SamplerOptions {
            track_time: true,
            ..Default::default()
        };
        let r = sample_forest_with(&g, &plan, &mut RngStream::new(2, 0), &opts);
        assert!(r.wilson_time.unwrap() > 0.0);
        assert!(r.steps_walked >= 9);
    }
}
