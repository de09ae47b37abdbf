//! Numerical toolkit for skew products of the unit square with uniformly
//! contracting fibers: anisotropic measure norms built on a fiberwise
//! bounded-Lipschitz norm, the associated transfer operator, explicit
//! spectral-gap constant chains, and quantitative statistical-stability
//! experiments for Lorenz-like base maps.

pub mod atoms;
pub mod base_constants;
pub mod config;
pub mod density;
pub mod error;
pub mod experiments;
pub mod fibered;
pub mod interval_map;
pub mod perron;
pub mod plot;
pub mod poly;
pub mod sampling;
pub mod spectral;
pub mod stability;
pub mod systems;
pub mod transfer;
mod util;

pub use atoms::{bl_diff, bl_distance_equal_mass, bl_norm_oracle, Sign, SignedAtoms};
pub use density::{cell_index, GridDensity};
pub use error::{Error, Result};
pub use fibered::{var_diamond, DisintegratedMeasure, FiberSystem, VarDiamond};
pub use interval_map::{doubling, identity_stub, lorenz_cusp, PiecewiseExpandingMap};
pub use perron::{pf_density, ulam_matrix, BaseKernel};
