//! The bundled skew-product families.
//!
//! System A (`doubling_affine`): doubling base with the affine fiber
//! `G(x, y) = alpha y + (1 - alpha) x`. System B (`trivial_product`):
//! doubling base with `G(x, y) = alpha y`, whose invariant measure is
//! Lebesgue x delta_0. The Lorenz cusp family keeps the affine fiber but
//! drives it over a base with singular branch derivatives.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fibered::FiberSystem;
use crate::interval_map::{doubling, identity_stub, lorenz_cusp, PiecewiseExpandingMap};
use crate::poly::Poly;

pub const DEFAULT_ALPHA_AFFINE: f64 = 1.0 / 3.0;
pub const DEFAULT_ALPHA_TRIVIAL: f64 = 0.5;
pub const DEFAULT_KAPPA: f64 = 0.75;

/// Grid configuration shared by the constructors.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub n: usize,
    pub fiber_atoms: usize,
    pub atom_budget: usize,
    pub merge_radius: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n: 64,
            fiber_atoms: 32,
            atom_budget: 16384,
            merge_radius: 1e-5,
        }
    }
}

/// Skew product with fiber `G(x, y) = alpha y + drive(x)`; requires the
/// drive to keep `G` inside [0,1] and uses `sup |drive'|` as the
/// horizontal Lipschitz constant.
pub fn affine_fiber_system(
    name: impl Into<String>,
    map: PiecewiseExpandingMap,
    alpha: f64,
    drive: Poly,
    grid: GridSpec,
) -> Result<FiberSystem> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::BadInput {
            name: "alpha",
            value: alpha,
        });
    }
    let h_lip = drive.derivative().sup_abs_on_unit(512);
    let drive_fn = drive.clone();
    let system = FiberSystem::new(
        name,
        map,
        Arc::new(move |x: f64, y: f64| alpha * y + drive_fn.eval(x)),
        alpha,
        h_lip,
        grid.n,
        grid.fiber_atoms,
        grid.atom_budget,
        grid.merge_radius,
    );
    system.validate(64)?;
    Ok(system)
}

/// System A: doubling base, `G(x, y) = alpha y + (1 - alpha) x`.
pub fn doubling_affine(alpha: f64, grid: GridSpec) -> Result<FiberSystem> {
    affine_fiber_system(
        "doubling_affine",
        doubling(),
        alpha,
        Poly(vec![0.0, 1.0 - alpha]),
        grid,
    )
}

/// System B: doubling base, `G(x, y) = alpha y`; the fibers contract to 0
/// independently of the base point.
pub fn trivial_product(alpha: f64, grid: GridSpec) -> Result<FiberSystem> {
    affine_fiber_system(
        "trivial_product",
        doubling(),
        alpha,
        Poly::constant(0.0),
        grid,
    )
}

/// Lorenz cusp base with the affine fiber drive.
pub fn lorenz_cusp_system(kappa: f64, alpha: f64, grid: GridSpec) -> Result<FiberSystem> {
    affine_fiber_system(
        format!("lorenz_cusp(kappa={kappa})"),
        lorenz_cusp(kappa),
        alpha,
        Poly(vec![0.0, 1.0 - alpha]),
        grid,
    )
}

/// Identity base with a per-cell fiber contraction; the transfer operator
/// reduces to an independent push-forward on each fiber. Test fixture.
pub fn frozen_base_system(alpha: f64, grid: GridSpec) -> Result<FiberSystem> {
    affine_fiber_system(
        "frozen_base",
        identity_stub(),
        alpha,
        Poly(vec![0.1, 0.5 * (1.0 - alpha)]),
        grid,
    )
}

/// The three bundled systems at their default parameters.
pub fn bundled_systems(grid: GridSpec) -> Vec<FiberSystem> {
    vec![
        doubling_affine(DEFAULT_ALPHA_AFFINE, grid).expect("system A parameters are valid"),
        trivial_product(DEFAULT_ALPHA_TRIVIAL, grid).expect("system B parameters are valid"),
        lorenz_cusp_system(DEFAULT_KAPPA, DEFAULT_ALPHA_AFFINE, grid)
            .expect("cusp parameters are valid"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_systems_pass_structural_checks() {
        for system in bundled_systems(GridSpec::default()) {
            system.validate(64).unwrap();
            assert!(system.alpha < 1.0);
        }
    }

    #[test]
    fn affine_drive_out_of_range_is_rejected() {
        // drive(1) = 0.9 makes G(1, 1) = 0.5 + 0.9 > 1.
        let err = affine_fiber_system(
            "bad",
            doubling(),
            0.5,
            Poly(vec![0.0, 0.9]),
            GridSpec::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn system_a_matches_its_definition() {
        let sys = doubling_affine(1.0 / 3.0, GridSpec::default()).unwrap();
        assert!((sys.g(0.3, 0.6) - (0.2 + 0.2)).abs() < 1e-15);
        assert!((sys.h_lip - 2.0 / 3.0).abs() < 1e-12);
    }
}
