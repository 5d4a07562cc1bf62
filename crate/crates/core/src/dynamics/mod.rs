//! Coalescence–fragmentation dynamics on rooted forests: the process
//! coupling all `ν_q` through site-indexed arrow stacks, and the
//! add/swap/remove forest chain with its exact stationarity check.

mod chain;
mod coalescence;
mod marginal;
mod stacks;

pub use chain::{
    chain_stationarity_exact, chain_transitions, root_jump_counts, simulate_chain, tree_chain_root_marginal,
    ChainTrajectory, Rule, Transition,
};
pub use coalescence::{
    crossing_times, run_trajectory, tree_count_csv, wake_time_cornice, write_events_jsonl, CoalescenceEvent,
    CoalescenceOptions, CoalescenceState, EventKind, Trajectory, WakeRule,
};
pub use marginal::{coalescence_marginal_test, MarginalReport};
pub use stacks::{delta_threshold, reactivation_probability, stack_wilson, ArrowStacks, Entry, StackStorage};
