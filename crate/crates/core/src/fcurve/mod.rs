//! Sampled functional data: grids, interpolated curves, quadrature,
//! derivative estimation and area normalization.

mod curve;
mod grid;
pub mod io;
mod quadrature;
mod sample;
mod smoothing;
mod window;

pub use curve::{Curve, Extension, Interp};
pub use grid::{Grid, GridLocation};
pub use quadrature::{integrate, QuadRule, Quadrature, QuadratureNodes};
pub use sample::{default_component_names, default_subject_ids, MultiCurveSample};
pub use smoothing::{default_bandwidth, estimate_derivative, normalize_auc};
pub use window::SubintervalSpec;
