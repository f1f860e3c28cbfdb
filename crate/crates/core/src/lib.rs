//! Cross-component registration (XCR) for multivariate functional data.
//!
//! Each component of a multivariate curve is modelled as a time-shifted copy
//! of a common latent shape. Pairwise shifts are estimated by minimizing a
//! mean L2 criterion over an integration window ([`pairwise`]), then combined
//! into one global shift per component by least squares under a sum-zero
//! constraint ([`global`]).
//!
//! ```
//! use std::sync::Arc;
//! use xcreg_core::fcurve::{Grid, Quadrature, SubintervalSpec};
//! use xcreg_core::pairwise::MinimizerOpts;
//! use xcreg_core::simgen::{generate_pure_shift, latent_curve};
//!
//! let grid = Arc::new(Grid::uniform(0.0, 50.0, 0.5).unwrap());
//! let theta = [-5.0, -2.5, 2.5, 5.0];
//! let sample = generate_pure_shift(10, &theta, &latent_curve, grid, None, 0).unwrap();
//! let window = SubintervalSpec::new(10.0, 40.0, 0.0, 50.0).unwrap();
//! let reg = xcreg_core::register(&sample, window, Quadrature::default(), &MinimizerOpts::default()).unwrap();
//! for (est, truth) in reg.theta_hat().iter().zip(theta) {
//!     assert!((est - truth).abs() < 1e-2);
//! }
//! ```

// Negated comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod fcurve;
pub mod fpca;
pub mod global;
pub mod pairwise;
pub mod pipeline;
pub mod simgen;
pub mod stats;

pub use error::{ErrorCategory, Result, XcrError};
pub use fcurve::{Curve, Extension, Grid, Interp, MultiCurveSample, QuadRule, Quadrature, SubintervalSpec};
pub use fpca::{fit_fpca, imse, reconstruct, FpcaModel};
pub use global::{
    apply_shifts, cross_component_distance, register, solve_global_shifts, ContrastMatrix, GlobalShiftResult,
    Registration,
};
pub use pairwise::{MinimizerOpts, PairwiseCriterion, PairwiseShift};
pub use simgen::{generate_contaminated, generate_pure_shift, latent_curve, SimConfig, SimSample};
