//! Deterministic sample generators: the fixed density library behind the
//! empirical Lasota-Yorke constants and seeded random measures for the
//! property suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::atoms::{Sign, SignedAtoms};
use crate::density::GridDensity;
use crate::fibered::DisintegratedMeasure;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fixed 20-entry library of test densities: steps, ramps, trigonometric
/// profiles and seeded random BV staircases. Used to estimate the weak
/// constant `C` and the bounded-power constant `M1`.
pub fn density_library(n: usize) -> Vec<GridDensity> {
    let mut lib = vec![
        GridDensity::constant(n, 1.0),
        GridDensity::step(n, 0.0, 0.5, 2.0),
        GridDensity::step(n, 0.25, 0.75, 2.0),
        GridDensity::step(n, 0.0, 0.25, 4.0),
        GridDensity::from_fn(n, |x| 2.0 * x),
        GridDensity::from_fn(n, |x| 2.0 - 2.0 * x),
        GridDensity::from_fn(n, |x| 1.0 + 0.5 * (std::f64::consts::TAU * x).sin()),
        GridDensity::from_fn(n, |x| 1.0 + 0.5 * (2.0 * std::f64::consts::TAU * x).cos()),
        // Zero-mean profiles.
        GridDensity::from_fn(n, |x| x - 0.5),
        GridDensity::from_fn(n, |x| (std::f64::consts::TAU * x).sin()),
        GridDensity::from_fn(n, |x| (3.0 * std::f64::consts::TAU * x).cos()),
        GridDensity::step(n, 0.0, 0.5, 1.0)
            .zip_values(&GridDensity::step(n, 0.5, 1.0, 1.0), |a, b| a - b)
            .expect("same grid"),
    ];
    let mut generator = rng(0x5eed);
    for _ in 0..8 {
        lib.push(random_bv_density(&mut generator, n, 12));
    }
    lib
}

/// Random piecewise-constant density with `pieces` plateaus.
pub fn random_bv_density(rng: &mut ChaCha8Rng, n: usize, pieces: usize) -> GridDensity {
    let mut cuts: Vec<usize> = (0..pieces - 1).map(|_| rng.random_range(0..n)).collect();
    cuts.push(0);
    cuts.push(n);
    cuts.sort_unstable();
    let mut values = vec![0.0f64; n];
    for w in cuts.windows(2) {
        let level = rng.random::<f64>() * 2.0 - 0.5;
        for v in values.iter_mut().take(w[1]).skip(w[0]) {
            *v = level;
        }
    }
    GridDensity::from_values(values)
}

/// Random zero-mean BV density (exactly zero grid integral).
pub fn random_zero_mean_density(rng: &mut ChaCha8Rng, n: usize, pieces: usize) -> GridDensity {
    let phi = random_bv_density(rng, n, pieces);
    let mean = phi.integral();
    phi.map_values(|v| v - mean)
}

/// Random signed atomic measure with `atoms` point masses.
pub fn random_signed_atoms(rng: &mut ChaCha8Rng, atoms: usize) -> SignedAtoms {
    SignedAtoms::new((0..atoms).map(|_| {
        (
            rng.random::<f64>(),
            rng.random::<f64>() + 0.05,
            if rng.random::<bool>() { Sign::Plus } else { Sign::Minus },
        )
    }))
    .expect("positions in [0,1]")
}

/// Random fiber probability with `atoms` point masses.
pub fn random_probability_atoms(rng: &mut ChaCha8Rng, atoms: usize) -> SignedAtoms {
    let raw: Vec<(f64, f64)> = (0..atoms.max(1))
        .map(|_| (rng.random::<f64>(), rng.random::<f64>() + 0.05))
        .collect();
    let total: f64 = raw.iter().map(|a| a.1).sum();
    SignedAtoms::new(raw.into_iter().map(|(p, w)| (p, w / total, Sign::Plus)))
        .expect("positions in [0,1]")
}

/// Random signed disintegrated measure on `n` base cells.
pub fn random_signed_measure(rng: &mut ChaCha8Rng, n: usize, fiber_atoms: usize) -> DisintegratedMeasure {
    DisintegratedMeasure::from_parts(
        (0..n)
            .map(|_| {
                let phi_plus = rng.random::<f64>() * 1.5;
                let phi_minus = rng.random::<f64>() * 1.5;
                let k_plus = 1 + rng.random_range(0..fiber_atoms);
                let k_minus = 1 + rng.random_range(0..fiber_atoms);
                (
                    phi_plus,
                    phi_minus,
                    random_probability_atoms(rng, k_plus),
                    random_probability_atoms(rng, k_minus),
                )
            })
            .collect(),
    )
}

/// Random zero-total-mass disintegrated measure: the plus and minus weight
/// columns are rescaled to share the same mean.
pub fn random_zero_mass_measure(
    rng: &mut ChaCha8Rng,
    n: usize,
    fiber_atoms: usize,
) -> DisintegratedMeasure {
    let mut parts: Vec<(f64, f64, SignedAtoms, SignedAtoms)> = (0..n)
        .map(|_| {
            let phi_plus = rng.random::<f64>() + 0.05;
            let phi_minus = rng.random::<f64>() + 0.05;
            let k_plus = 1 + rng.random_range(0..fiber_atoms);
            let k_minus = 1 + rng.random_range(0..fiber_atoms);
            (
                phi_plus,
                phi_minus,
                random_probability_atoms(rng, k_plus),
                random_probability_atoms(rng, k_minus),
            )
        })
        .collect();
    let plus_total: f64 = parts.iter().map(|p| p.0).sum();
    let minus_total: f64 = parts.iter().map(|p| p.1).sum();
    for p in &mut parts {
        p.1 *= plus_total / minus_total;
    }
    DisintegratedMeasure::from_parts(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_has_twenty_entries() {
        let lib = density_library(64);
        assert_eq!(lib.len(), 20);
        assert!(lib.iter().all(|d| d.values().iter().all(|v| v.is_finite())));
    }

    #[test]
    fn zero_mean_density_integrates_to_zero() {
        let mut r = rng(3);
        for _ in 0..10 {
            let phi = random_zero_mean_density(&mut r, 128, 9);
            assert!(phi.integral().abs() < 1e-12);
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let a = random_signed_atoms(&mut rng(42), 10);
        let b = random_signed_atoms(&mut rng(42), 10);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_mass_measure_has_zero_mass() {
        let mut r = rng(9);
        let mu = random_zero_mass_measure(&mut r, 32, 4);
        assert!(mu.total_mass().abs() < 1e-12);
    }
}
