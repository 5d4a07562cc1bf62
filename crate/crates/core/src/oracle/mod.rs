//! Brute-force enumeration of rooted forests on small graphs and exact
//! verification of the closed-form identities.

mod checks;
mod enumerate;
mod gff;
pub mod instances;
mod report;
pub mod stats;

pub use checks::{
    cycle_cumulant, generator_spectrum, moebius_cumulant, restricted_stationary, tree_sum_measure, Oracle, RootLaw,
    TIGHT_TOL, TOL,
};
pub use enumerate::{mask_of, members, ForestTable, ENUMERATION_CAP};
pub use gff::{gff_covariance_check, GffReport, GFF_CAP, GFF_PASS_FRACTION, GFF_SIGMAS};
pub use report::{Check, Report, ReportSummary};
