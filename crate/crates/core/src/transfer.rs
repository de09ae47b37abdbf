//! The transfer operator of the skew product on disintegrated measures.
//!
//! One step pulls every target fiber back through the base kernel: each
//! preimage piece contributes the source restriction pushed through the
//! fiber map at the piece representative, scaled by the exact piece mass.
//! The new base weights are the accumulated per-sign masses, which
//! reproduce the Perron-Frobenius image of the marginal by construction.
//! Atom compaction with the configured merge radius runs after every
//! step; its norm cost is bounded by the radius times the total variation
//! mass and enters the declared grid slack of the inequality tests.

use rayon::prelude::*;

use crate::atoms::{Atom, Sign, SignedAtoms};
use crate::error::{Error, Result};
use crate::fibered::{DisintegratedMeasure, FiberCell, FiberSystem};

#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub step: usize,
    pub norm_l1: f64,
    pub norm_linf: f64,
    pub var: f64,
    pub s1: f64,
    pub atoms_total: usize,
    pub singular_preimages: usize,
}

impl StepDiagnostics {
    pub fn csv_header() -> &'static str {
        "step,norm_l1,norm_linf,var,s1,atoms_total,singular_preimages"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.step,
            self.norm_l1,
            self.norm_linf,
            self.var,
            self.s1,
            self.atoms_total,
            self.singular_preimages
        )
    }
}

fn push_atoms(
    out: &mut Vec<(f64, f64, Sign)>,
    atoms: &[Atom],
    scale: f64,
    sign: Sign,
    g: impl Fn(f64) -> f64,
) {
    if scale == 0.0 {
        return;
    }
    for a in atoms {
        out.push((g(a.position).clamp(0.0, 1.0), a.weight * scale, sign));
    }
}

/// One application of the transfer operator.
pub fn transfer_once(system: &FiberSystem, mu: &DisintegratedMeasure) -> Result<DisintegratedMeasure> {
    if mu.n() != system.n {
        return Err(Error::GridMismatch(mu.n(), system.n));
    }
    let kernel = system.kernel();
    let cells: Vec<Result<FiberCell>> = (0..system.n)
        .into_par_iter()
        .map(|j| {
            let mut plus: Vec<(f64, f64, Sign)> = Vec::new();
            let mut minus: Vec<(f64, f64, Sign)> = Vec::new();
            for piece in kernel.pieces_for(j) {
                let source = &mu.cells()[piece.source];
                let fiber_map = |y: f64| system.g(piece.x_rep, y);
                push_atoms(
                    &mut plus,
                    source.fiber_plus.plus_part(),
                    piece.weight * source.phi_plus,
                    Sign::Plus,
                    fiber_map,
                );
                push_atoms(
                    &mut minus,
                    source.fiber_minus.plus_part(),
                    piece.weight * source.phi_minus,
                    Sign::Plus,
                    fiber_map,
                );
            }
            let fiber_plus = SignedAtoms::new(plus)?.compact(system.merge_radius);
            let fiber_minus = SignedAtoms::new(minus)?.compact(system.merge_radius);
            let count = fiber_plus.atom_count() + fiber_minus.atom_count();
            if count > system.atom_budget {
                return Err(Error::AtomBudgetExceeded {
                    count,
                    budget: system.atom_budget,
                });
            }
            let phi_plus = fiber_plus.mass();
            let phi_minus = fiber_minus.mass();
            Ok(FiberCell {
                phi_plus,
                phi_minus,
                fiber_plus: to_probability(fiber_plus, phi_plus),
                fiber_minus: to_probability(fiber_minus, phi_minus),
            })
        })
        .collect();
    let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DisintegratedMeasure::from_parts(
        cells
            .into_iter()
            .map(|c| (c.phi_plus, c.phi_minus, c.fiber_plus, c.fiber_minus))
            .collect(),
    )
    .with_norm_params(mu.p, mu.a1))
}

fn to_probability(atoms: SignedAtoms, mass: f64) -> SignedAtoms {
    if mass > 0.0 {
        atoms.scaled(1.0 / mass)
    } else {
        crate::fibered::canonical_fiber()
    }
}

/// Count of singular inverse-branch evaluations over the image-cell
/// midpoints; constant for a fixed system, reported per step.
pub fn singular_preimage_count(system: &FiberSystem) -> usize {
    (0..system.n)
        .map(|j| {
            let y = (j as f64 + 0.5) / system.n as f64;
            system
                .map
                .inverse_branches(y)
                .map(|inv| inv.singular_dropped)
                .unwrap_or(0)
        })
        .sum()
}

/// Iterates the transfer operator `steps` times, recording the norm and
/// atom diagnostics after every step (row 0 describes the input).
pub fn transfer_n(
    system: &FiberSystem,
    mu: &DisintegratedMeasure,
    steps: usize,
) -> Result<(DisintegratedMeasure, Vec<StepDiagnostics>)> {
    let singular = singular_preimage_count(system);
    let mut diagnostics = Vec::with_capacity(steps + 1);
    let mut current = mu.clone();
    diagnostics.push(diagnose(0, &current, singular)?);
    for step in 1..=steps {
        current = transfer_once(system, &current)?;
        diagnostics.push(diagnose(step, &current, singular)?);
    }
    Ok((current, diagnostics))
}

fn diagnose(step: usize, mu: &DisintegratedMeasure, singular: usize) -> Result<StepDiagnostics> {
    let fiber_norms = mu.fiber_norms();
    let norm_l1 = fiber_norms.iter().sum::<f64>() / mu.n() as f64;
    let norm_linf = fiber_norms.iter().fold(0.0f64, |a, &b| a.max(b));
    let strong = mu.marginal().var_norm(mu.p, mu.a1)?.norm;
    Ok(StepDiagnostics {
        step,
        norm_l1,
        norm_linf,
        var: mu.path_variation(),
        s1: strong + norm_l1,
        atoms_total: mu.total_atoms(),
        singular_preimages: singular,
    })
}

/// Declared discretization slack for one transfer step: the compaction
/// cost `2 eta M` (with `M` the total variation mass) plus a rounding
/// epsilon. The kernel transfers exact piece masses, so no quadrature
/// term enters.
pub fn transfer_step_slack(system: &FiberSystem, mu: &DisintegratedMeasure) -> f64 {
    let tv: f64 = mu
        .cells()
        .iter()
        .map(|c| c.phi_plus + c.phi_minus)
        .sum::<f64>()
        / mu.n() as f64;
    2.0 * system.merge_radius * tv + 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::bl_diff;
    use crate::density::GridDensity;
    use crate::perron::pf_density;
    use crate::sampling;
    use crate::systems::{doubling_affine, frozen_base_system, trivial_product, GridSpec};
    use crate::SignedAtoms;

    fn grid() -> GridSpec {
        GridSpec {
            n: 64,
            fiber_atoms: 32,
            atom_budget: 16384,
            merge_radius: 1e-5,
        }
    }

    #[test]
    fn trivial_product_halves_fiber_positions() {
        let system = trivial_product(0.5, grid()).unwrap();
        let mu = system.lebesgue2();
        let out = transfer_once(&system, &mu).unwrap();
        for j in 0..out.n() {
            let cell = &out.cells()[j];
            assert!((cell.phi_plus - 1.0).abs() < 1e-12, "marginal stays flat");
            for a in cell.fiber_plus.plus_part() {
                assert!(a.position <= 0.5 + 1e-12);
            }
        }
        assert!((out.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn doubling_affine_fiber_formula() {
        // The image fiber at gamma is (1/2) delta_G(gamma/2, 0) +
        // (1/2) delta_G(gamma/2 + 1/2, 0).
        let system = doubling_affine(1.0 / 3.0, grid()).unwrap();
        let mu = DisintegratedMeasure::from_product(
            system.n,
            &GridDensity::constant(system.n, 1.0),
            |_| SignedAtoms::dirac(0.0),
        )
        .unwrap();
        let out = transfer_once(&system, &mu).unwrap();
        for j in 0..out.n() {
            let gamma = (j as f64 + 0.5) / out.n() as f64;
            let expected = SignedAtoms::new([
                (system.g(gamma / 2.0, 0.0), 0.5, crate::Sign::Plus),
                (system.g(gamma / 2.0 + 0.5, 0.0), 0.5, crate::Sign::Plus),
            ])
            .unwrap();
            let diff = bl_diff(&out.restriction(j), &expected);
            assert!(diff < 1e-9, "cell {j}: diff {diff}");
            assert!((out.cells()[j].phi_plus - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_steps_return_the_input() {
        let system = trivial_product(0.5, grid()).unwrap();
        let mu = system.lebesgue2();
        let (out, diag) = transfer_n(&system, &mu, 0).unwrap();
        assert_eq!(out, mu);
        assert_eq!(diag.len(), 1);
    }

    #[test]
    fn probabilities_stay_probabilities() {
        for system in [
            doubling_affine(1.0 / 3.0, grid()).unwrap(),
            trivial_product(0.5, grid()).unwrap(),
        ] {
            let (out, diag) = transfer_n(&system, &system.lebesgue2(), 10).unwrap();
            assert!((out.total_mass() - 1.0).abs() < 1e-9);
            for d in &diag {
                assert!((d.norm_l1 - 1.0).abs() < 1e-9, "step {}: {}", d.step, d.norm_l1);
            }
        }
    }

    #[test]
    fn marginal_matches_perron_frobenius() {
        let system = doubling_affine(1.0 / 3.0, grid()).unwrap();
        let mut rng = sampling::rng(51);
        let mu = sampling::random_signed_measure(&mut rng, system.n, 5);
        let out = transfer_once(&system, &mu).unwrap();
        let expected = pf_density(&system.map, &mu.marginal());
        let gap = out.marginal().sub(&expected).unwrap().l1_norm();
        assert!(gap < 1e-6, "marginal gap {gap}");
    }

    #[test]
    fn weak_norm_is_weakly_contracted() {
        let mut rng = sampling::rng(53);
        for system in [
            doubling_affine(1.0 / 3.0, grid()).unwrap(),
            trivial_product(0.5, grid()).unwrap(),
        ] {
            for _ in 0..20 {
                let mu = sampling::random_signed_measure(&mut rng, system.n, 4);
                let out = transfer_once(&system, &mu).unwrap();
                let slack = transfer_step_slack(&system, &mu);
                assert!(
                    out.norm_weak_l1() <= mu.norm_weak_l1() + slack,
                    "{} vs {}",
                    out.norm_weak_l1(),
                    mu.norm_weak_l1()
                );
            }
        }
    }

    #[test]
    fn strong_weak_transfer_bound_holds() {
        // ||F* mu||_1 <= alpha ||mu||_1 + (alpha + 1) |phi_x|_1 + slack.
        let mut rng = sampling::rng(59);
        let system = doubling_affine(1.0 / 3.0, grid()).unwrap();
        for _ in 0..20 {
            let mu = sampling::random_signed_measure(&mut rng, system.n, 4);
            let out = transfer_once(&system, &mu).unwrap();
            let bound = system.alpha * mu.norm_weak_l1()
                + (system.alpha + 1.0) * mu.marginal_l1()
                + transfer_step_slack(&system, &mu);
            assert!(out.norm_weak_l1() <= bound);
        }
    }

    #[test]
    fn frozen_base_reduces_to_fiber_push_forward() {
        let system = frozen_base_system(0.4, grid()).unwrap();
        let mut rng = sampling::rng(61);
        let mu = sampling::random_signed_measure(&mut rng, system.n, 4);
        let out = transfer_once(&system, &mu).unwrap();
        for j in 0..mu.n() {
            let x_rep = (j as f64 + 0.5) / mu.n() as f64;
            let expected = mu
                .restriction(j)
                .push_forward(|y| system.g(x_rep, y))
                .unwrap();
            let diff = bl_diff(&out.restriction(j), &expected);
            assert!(diff <= 2.0 * system.merge_radius * expected.tv_mass() + 1e-10);
        }
    }

    #[test]
    fn atom_budget_is_enforced() {
        let mut spec = grid();
        spec.atom_budget = 8;
        spec.fiber_atoms = 16;
        let system = doubling_affine(1.0 / 3.0, spec).unwrap();
        let err = transfer_n(&system, &system.lebesgue2(), 3);
        assert!(matches!(err, Err(Error::AtomBudgetExceeded { .. })));
    }

    #[test]
    fn trivial_product_converges_to_bottom_layer() {
        let system = trivial_product(0.5, grid()).unwrap();
        let target = DisintegratedMeasure::from_product(
            system.n,
            &GridDensity::constant(system.n, 1.0),
            |_| SignedAtoms::dirac(0.0),
        )
        .unwrap();
        let mut current = system.lebesgue2();
        for step in 1..=12 {
            current = transfer_once(&system, &current).unwrap();
            let dist = current.sub(&target).unwrap().norm_weak_l1();
            let bound = (0.5f64.powi(step + 1) + step as f64 * system.merge_radius) * 1.2;
            assert!(dist <= bound, "step {step}: {dist} > {bound}");
        }
    }

    #[test]
    fn diagnostics_track_atoms_and_norms() {
        let system = doubling_affine(1.0 / 3.0, grid()).unwrap();
        let (_, diag) = transfer_n(&system, &system.lebesgue2(), 4).unwrap();
        assert_eq!(diag.len(), 5);
        assert!(diag.iter().all(|d| d.atoms_total > 0));
        assert!(diag.iter().all(|d| d.s1 >= d.norm_l1));
        let row = diag[1].csv_row();
        assert_eq!(row.split(',').count(), 7);
    }
}
