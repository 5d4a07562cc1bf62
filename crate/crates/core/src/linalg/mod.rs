//! Dense linear algebra over `f64` and exact rationals.

mod eigen;
mod kernel;
mod lu;
mod matrix;
mod poly;
mod scalar;
mod schur;

pub use eigen::{eigenvalues, Spectrum};
pub use kernel::{
    generator_block, kernel, kernel_exact, q_minus_l, shifted_generator_block, trace_generator, Absorption, Kernel,
};
pub use lu::{det, det_sub, inverse, inverse_exact, norm1, solve, Lu};
pub use matrix::{ExactMatrix, Matrix};
pub use poly::{char_poly, faddeev_leverrier, FaddeevLeverrier, MatrixPoly, Poly};
pub use scalar::{mixed_err, rel_err, Scalar};
pub use schur::{complement, inverse_minor_identity, schur_complement, schur_det_identity};

pub use nalgebra::Complex;
pub use num_rational::BigRational;
