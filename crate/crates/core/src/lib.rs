//! Random rooted spanning forests of weighted directed graphs.
//!
//! The crate samples forests with Wilson's algorithm under per-vertex killing
//! rates, computes the associated determinantal quantities exactly on small
//! graphs, simulates the coalescence–fragmentation dynamics built on top of
//! the sampler, and renders grid samples to images.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod mw;
pub mod oracle;
pub mod parallel;
pub mod render;
pub mod rng;
pub mod verify;
pub mod wilson;

pub use error::{Error, Result};
pub use graph::{build_graph, Forest, Graph, GraphBuilder, KillingPlan};
pub use rng::RngStream;
