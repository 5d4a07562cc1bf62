use rayon::prelude::*;
use serde::Serialize;

use super::coalescence::{CoalescenceOptions, CoalescenceState};
use crate::error::Result;
use crate::graph::{Graph, KillingPlan};
use crate::oracle::stats::{chi_square, ChiSquare};
use crate::oracle::ForestTable;
use crate::rng::RngStream;

#[derive(Clone, Debug, Serialize)]
pub struct MarginalReport {
    pub t: f64,
    pub runs: usize,
    pub chi_square: ChiSquare,
    /// Events over all runs.
    pub events: u64,
    /// Largest drop of the root count at a single event.
    pub max_decrement: usize,
}

impl MarginalReport {
    pub fn pass(&self, alpha: f64) -> bool {
        self.chi_square.p_value > alpha && self.max_decrement <= 1
    }
}

/// Law of `ξ(t)` over `runs` independent trajectories (run `i` uses stream
/// `i` of `seed`) against `ν_{1/t}` by enumeration.
pub fn coalescence_marginal_test(
    graph: &Graph,
    t: f64,
    runs: usize,
    seed: u64,
    opts: CoalescenceOptions,
) -> Result<MarginalReport> {
    let table = ForestTable::enumerate(graph)?;
    let q = if t == 0.0 { f64::INFINITY } else { 1.0 / t };
    let probs = if q.is_infinite() {
        (0..table.len())
            .map(|i| (table.n_roots(i) == graph.n()) as u8 as f64)
            .collect()
    } else {
        table.probabilities(&KillingPlan::uniform(graph.n(), q)?)
    };
    let outcomes: Vec<Result<(usize, u64, usize)>> = crate::parallel::install(|| {
        (0..runs)
            .into_par_iter()
            .map(|i| {
                let mut s = CoalescenceState::new(graph, RngStream::new(seed, i as u64), opts);
                let mut prev = s.n_roots();
                let mut worst = 0usize;
                s.advance_to(t, |e| {
                    worst = worst.max(prev.saturating_sub(e.root_count));
                    prev = e.root_count;
                })?;
                let idx = table.index_of(s.parents()).expect("state is an enumerated forest");
                Ok((idx, s.events(), worst))
            })
            .collect()
    });
    let mut counts = vec![0u64; table.len()];
    let (mut events, mut max_decrement) = (0, 0);
    for o in outcomes {
        let (idx, ev, worst) = o?;
        counts[idx] += 1;
        events += ev;
        max_decrement = max_decrement.max(worst);
    }
    Ok(MarginalReport {
        t,
        runs,
        chi_square: chi_square(&counts, &probs),
        events,
        max_decrement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::WakeRule;
    use crate::graph::build_graph;

    #[test]
    fn two_cycle_marginal() {
        let g = build_graph(2, &[(0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        for wake in [WakeRule::Cornice, WakeRule::StackCoupled] {
            let opts = CoalescenceOptions {
                wake,
                ..Default::default()
            };
            let r = coalescence_marginal_test(&g, 1.0, 20_000, 5, opts).unwrap();
            assert!(r.pass(1e-4), "{wake:?} {r:?}");
        }
    }

    #[test]
    fn tiny_time_is_all_roots() {
        let g = build_graph(2, &[(0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        let r = coalescence_marginal_test(&g, 1e-9, 2_000, 1, CoalescenceOptions::default()).unwrap();
        assert!(r.events <= 5);
    }
}
