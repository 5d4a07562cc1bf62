//! Divided differences, local equilibria of absorbed reversible chains and
//! the polynomial matrix `W_R(q)` with its combinatorial identities.

mod divdiff;
mod local;
mod suite;
mod wmatrix;

pub use divdiff::{
    definitions_agree, direct_divided_difference, divdiff_nonneg_check, divided_difference, monic_from_roots,
    random_divdiff_instance, DividedDiffTable, NonnegReport,
};
pub use local::{
    absorbed_spectrum, jittered, local_equilibria, local_equilibria_check, LocalEquilibriaSeq, DEGENERACY_GAP, JITTER,
    NONNEG_TOL,
};
pub use suite::{mw_instance_check, MwOptions, RECONSTRUCTION_QS};
pub use wmatrix::{
    forest_sum_check, induction_grid_check, spectral_check, w_identities_check, w_identities_check_with, w_matrix,
    WCheckOptions, WMatrix, SPECTRAL_TOL,
};
