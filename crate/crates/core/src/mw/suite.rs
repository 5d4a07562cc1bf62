use super::local::local_equilibria_check;
use super::wmatrix::{induction_grid_check, w_identities_check_with, WCheckOptions};
use crate::error::Result;
use crate::graph::Graph;
use crate::oracle::Report;

/// Killing rates at which the absorption decomposition is compared.
pub const RECONSTRUCTION_QS: [f64; 3] = [0.1, 1.0, 10.0];

#[derive(Clone, Copy, Debug)]
pub struct MwOptions {
    /// Coefficient-wise recursions of `W_R` over the rationals.
    pub exact_recursions: bool,
    /// Enumerated forest sums for `W_R`.
    pub forest_sum: bool,
    /// Random `ξ` grids for the induction statement; 0 skips.
    pub grids: usize,
    pub seed: u64,
}

impl Default for MwOptions {
    fn default() -> Self {
        Self {
            exact_recursions: true,
            forest_sum: false,
            grids: 0,
            seed: 0,
        }
    }
}

/// Everything checkable on one reversible instance `(graph, R)`: local
/// equilibria nonnegativity and the absorption decomposition, the `W_R`
/// recursions, spectral divided differences and optional grid checks.
pub fn mw_instance_check(graph: &Graph, r: &[usize], opts: MwOptions) -> Result<Report> {
    let mut rep = local_equilibria_check(graph, r, &RECONSTRUCTION_QS)?;
    rep.identity = "micchelli_willoughby".into();
    let w = WCheckOptions {
        exact: opts.exact_recursions,
        forest_sum: opts.forest_sum,
        spectral: true,
    };
    rep.extend(w_identities_check_with(graph, r, w)?);
    if opts.grids > 0 {
        rep.extend(induction_grid_check(graph, r, opts.grids, 2, opts.seed)?);
    }
    Ok(rep)
}
