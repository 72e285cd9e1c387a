//! Joint-matrix-diagonalization laboratory.
//!
//! The crate builds structured ensembles of near-commuting matrices, measures
//! how far a candidate unitary is from jointly diagonalizing them, predicts
//! how the exact diagonalizer moves under a small perturbation, and checks
//! that prediction against a Jacobi-rotation minimizer.
//!
//! Modules:
//! - [`matrix`]: dense complex matrices and seeded random generators
//! - [`cost`]: the off-norm, the joint cost Y, and the gamma entries
//! - [`ensemble`]: diagonal sets, transvections, perturbation setups
//! - [`perturbation`]: the first-order correction G and alignment
//! - [`stationarity`]: the stationarity map S and its linearization
//! - [`solver`]: Jacobi minimization and the lambda sweep

// index-driven loops mirror the summation formulas and stay
#![allow(clippy::needless_range_loop)]

pub mod cost;
pub mod ensemble;
pub mod error;
pub mod matrix;
pub mod perturbation;
pub mod solver;
pub mod stationarity;

pub use cost::{cost_via_gamma, cost_y, cost_y_at, cost_y_unchecked, gamma, off, COST_UNITARY_TOL};
pub use ensemble::{
    build_m0, build_m_a_lambda, build_m_lambda, build_n_a_lambda, decompose_transvections,
    min_pair_denominator, product_ensemble, random_setup, random_sl, separation_condition,
    separation_condition_eps, transvection_matrix, transvection_product, DiagonalSet, Ensemble,
    PerturbationSetup, Transvection,
};
pub use error::{JdError, Result};
pub use matrix::{
    fro_dist, is_antihermitian, is_unitary, orthonormalize, random_gaussian, random_unitary,
    unit_basis, unitary_defect, Mat, RngSeed, Scalar,
};
pub use perturbation::{align, build_g, f_coeff, predicted_diagonalizer, AlignmentJ};
pub use solver::{jacobi_minimize, lambda_sweep, SolveResult, SolverConfig, SweepReport, SweepRow};
pub use stationarity::{
    first_order_terms, s_first_order, s_map, stationarity_residual, t_map, CenteredParams,
};
