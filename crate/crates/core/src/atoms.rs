//! Signed measures on [0,1] represented as weighted point masses.
//!
//! The central quantity is the bounded-Lipschitz norm
//! `||mu||_W = sup { |integral g dmu| : Lip(g) <= 1, |g|_inf <= 1 }`.
//! For atomic measures the supremum is a finite linear program over the
//! test-function values at the atom positions; on the line the pairwise
//! Lipschitz constraints reduce to adjacent ones, so the program is solved
//! exactly by propagating a concave piecewise-linear value function from
//! left to right. An independent value-grid dynamic program and a CDF
//! formula for equal-mass positive pairs serve as cross-checks.

use crate::error::{Error, Result};
use crate::util::sliding_window_max;

const POSITION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// One weighted point mass. Weights are kept strictly positive; the sign
/// lives in the containing part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub position: f64,
    pub weight: f64,
}

/// A signed measure `mu = mu^+ - mu^-` with both parts stored separately
/// as position-sorted atom lists.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SignedAtoms {
    plus: Vec<Atom>,
    minus: Vec<Atom>,
}

fn sort_atoms(atoms: &mut Vec<Atom>) {
    atoms.retain(|a| a.weight != 0.0);
    atoms.sort_by(|a, b| a.position.total_cmp(&b.position));
}

fn check_position(p: f64) -> Result<f64> {
    if p >= -POSITION_SLACK && p <= 1.0 + POSITION_SLACK {
        Ok(p.clamp(0.0, 1.0))
    } else {
        Err(Error::RangeViolation(p))
    }
}

impl SignedAtoms {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a signed measure from `(position, weight, sign)` triples.
    /// Negative weights flip the sign tag.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64, Sign)>) -> Result<Self> {
        let mut out = Self::default();
        for (p, w, s) in atoms {
            out.push(p, w, s)?;
        }
        sort_atoms(&mut out.plus);
        sort_atoms(&mut out.minus);
        Ok(out)
    }

    pub fn dirac(position: f64) -> Self {
        Self::new([(position, 1.0, Sign::Plus)]).expect("dirac position in [0,1]")
    }

    /// Probability made of `k` equally weighted atoms at cell midpoints.
    pub fn uniform_probability(k: usize) -> Self {
        let k = k.max(1);
        Self::new((0..k).map(|i| ((i as f64 + 0.5) / k as f64, 1.0 / k as f64, Sign::Plus)))
            .expect("midpoints in [0,1]")
    }

    fn push(&mut self, position: f64, weight: f64, sign: Sign) -> Result<()> {
        let position = check_position(position)?;
        if weight == 0.0 {
            return Ok(());
        }
        let (weight, sign) = if weight < 0.0 {
            let flipped = match sign {
                Sign::Plus => Sign::Minus,
                Sign::Minus => Sign::Plus,
            };
            (-weight, flipped)
        } else {
            (weight, sign)
        };
        let atom = Atom { position, weight };
        match sign {
            Sign::Plus => self.plus.push(atom),
            Sign::Minus => self.minus.push(atom),
        }
        Ok(())
    }

    pub fn plus_part(&self) -> &[Atom] {
        &self.plus
    }

    pub fn minus_part(&self) -> &[Atom] {
        &self.minus
    }

    pub fn atom_count(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    pub fn plus_mass(&self) -> f64 {
        self.plus.iter().map(|a| a.weight).sum()
    }

    pub fn minus_mass(&self) -> f64 {
        self.minus.iter().map(|a| a.weight).sum()
    }

    /// Total signed mass, summed in index order (plus part first).
    pub fn mass(&self) -> f64 {
        self.plus_mass() - self.minus_mass()
    }

    /// Total variation mass `mu^+([0,1]) + mu^-([0,1])`.
    pub fn tv_mass(&self) -> f64 {
        self.plus_mass() + self.minus_mass()
    }

    pub fn is_positive(&self) -> bool {
        self.minus.is_empty()
    }

    /// `self + other`, merging the sorted parts.
    pub fn add(&self, other: &Self) -> Self {
        fn merge(a: &[Atom], b: &[Atom]) -> Vec<Atom> {
            let mut out = Vec::with_capacity(a.len() + b.len());
            let (mut i, mut j) = (0, 0);
            while i < a.len() && j < b.len() {
                if a[i].position <= b[j].position {
                    out.push(a[i]);
                    i += 1;
                } else {
                    out.push(b[j]);
                    j += 1;
                }
            }
            out.extend_from_slice(&a[i..]);
            out.extend_from_slice(&b[j..]);
            out
        }
        SignedAtoms {
            plus: merge(&self.plus, &other.plus),
            minus: merge(&self.minus, &other.minus),
        }
    }

    pub fn neg(&self) -> Self {
        SignedAtoms {
            plus: self.minus.clone(),
            minus: self.plus.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Scales all weights by `c`; a negative `c` swaps the parts.
    pub fn scaled(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::default();
        }
        let scale_part = |part: &[Atom], f: f64| -> Vec<Atom> {
            part.iter()
                .map(|a| Atom {
                    position: a.position,
                    weight: a.weight * f,
                })
                .collect()
        };
        if c > 0.0 {
            SignedAtoms {
                plus: scale_part(&self.plus, c),
                minus: scale_part(&self.minus, c),
            }
        } else {
            SignedAtoms {
                plus: scale_part(&self.minus, -c),
                minus: scale_part(&self.plus, -c),
            }
        }
    }

    /// Pushes every atom through `g`, keeping weights and signs.
    pub fn push_forward(&self, g: impl Fn(f64) -> f64) -> Result<Self> {
        let map_part = |part: &[Atom]| -> Result<Vec<Atom>> {
            let mut out = Vec::with_capacity(part.len());
            for a in part {
                out.push(Atom {
                    position: check_position(g(a.position))?,
                    weight: a.weight,
                });
            }
            sort_atoms(&mut out);
            Ok(out)
        };
        Ok(SignedAtoms {
            plus: map_part(&self.plus)?,
            minus: map_part(&self.minus)?,
        })
    }

    /// Merges same-sign atoms lying within distance `eta` of each other at
    /// their weighted mean. Clusters are grown left to right and capped at
    /// diameter `eta`, so no atom moves by more than `eta` and the signed
    /// mass is preserved exactly.
    pub fn compact(&self, eta: f64) -> Self {
        let compact_part = |part: &[Atom]| -> Vec<Atom> {
            let mut out: Vec<Atom> = Vec::with_capacity(part.len());
            let mut i = 0;
            while i < part.len() {
                let anchor = part[i].position;
                let mut weight = 0.0;
                let mut first_moment = 0.0;
                let mut j = i;
                while j < part.len() && part[j].position - anchor <= eta {
                    weight += part[j].weight;
                    first_moment += part[j].weight * part[j].position;
                    j += 1;
                }
                out.push(Atom {
                    position: (first_moment / weight).clamp(0.0, 1.0),
                    weight,
                });
                i = j;
            }
            out
        };
        SignedAtoms {
            plus: compact_part(&self.plus),
            minus: compact_part(&self.minus),
        }
    }

    /// Net signed weight per distinct position, sorted by position.
    fn net_coefficients(&self) -> Vec<(f64, f64)> {
        let mut events: Vec<(f64, f64)> = self
            .plus
            .iter()
            .map(|a| (a.position, a.weight))
            .chain(self.minus.iter().map(|a| (a.position, -a.weight)))
            .collect();
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(events.len());
        for (p, w) in events {
            match merged.last_mut() {
                Some(last) if last.0 == p => last.1 += w,
                _ => merged.push((p, w)),
            }
        }
        merged
    }

    /// Exact bounded-Lipschitz norm, solving the dual linear program over
    /// the test-function values at the atom positions.
    pub fn bl_norm(&self) -> f64 {
        let coeffs = self.net_coefficients();
        if coeffs.is_empty() {
            return 0.0;
        }
        let mut env = Envelope::linear(coeffs[0].1);
        for window in coeffs.windows(2) {
            let gap = window[1].0 - window[0].0;
            env = env.window_max(gap).add_linear(window[1].1);
        }
        env.max()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("position,weight,sign\n");
        for a in &self.plus {
            out.push_str(&format!("{},{},plus\n", a.position, a.weight));
        }
        for a in &self.minus {
            out.push_str(&format!("{},{},minus\n", a.position, a.weight));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut triples = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (idx == 0 && line.starts_with("position")) {
                continue;
            }
            let mut parts = line.split(',');
            let bad = || Error::Config(format!("bad atoms csv line: {line:?}"));
            let position: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let weight: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let sign = match parts.next().ok_or_else(bad)? {
                "plus" => Sign::Plus,
                "minus" => Sign::Minus,
                _ => return Err(bad()),
            };
            triples.push((position, weight, sign));
        }
        Self::new(triples)
    }
}

/// `||a - b||_W` without materializing the difference measure.
pub fn bl_diff(a: &SignedAtoms, b: &SignedAtoms) -> f64 {
    a.sub(b).bl_norm()
}

/// Equal-mass fast path: for positive measures of equal total mass the
/// norm equals the CDF distance `integral_0^1 |F_a - F_b| dt` (a Lipschitz
/// optimizer can be recentered below the sup-cap on a unit-diameter space).
pub fn bl_distance_equal_mass(a: &SignedAtoms, b: &SignedAtoms) -> Result<f64> {
    debug_assert!(a.is_positive() && b.is_positive(), "positive measures only");
    let gap = (a.mass() - b.mass()).abs();
    if gap > 1e-12 {
        return Err(Error::MassMismatch(gap));
    }
    let mut events: Vec<(f64, f64)> = a
        .plus_part()
        .iter()
        .map(|at| (at.position, at.weight))
        .chain(b.plus_part().iter().map(|at| (at.position, -at.weight)))
        .collect();
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut total = 0.0f64;
    let mut cdf = 0.0f64;
    let mut prev = 0.0f64;
    for (p, w) in events {
        total += cdf.abs() * (p - prev);
        cdf += w;
        prev = p;
    }
    total += cdf.abs() * (1.0 - prev);
    Ok(total)
}

/// Value-grid dynamic program for the same norm: test functions are
/// piecewise linear between `grid_n + 1` nodes with node values on a grid
/// of spacing `1/grid_n` and adjacent node steps of at most one spacing.
/// Every such function is feasible for the dual program, so the result
/// converges to `bl_norm` from below as the grid is refined.
pub fn bl_norm_oracle(mu: &SignedAtoms, grid_n: usize) -> f64 {
    let n = grid_n.max(16);
    let coeffs = mu.net_coefficients();
    if coeffs.is_empty() {
        return 0.0;
    }
    // Linear-interpolation split of each atom onto the two enclosing nodes.
    let mut node_coeff = vec![0.0f64; n + 1];
    for &(p, w) in &coeffs {
        let t = p * n as f64;
        let j = (t.floor() as usize).min(n - 1);
        let frac = t - j as f64;
        node_coeff[j] += w * (1.0 - frac);
        node_coeff[j + 1] += w * frac;
    }
    let active: Vec<usize> = (0..=n).filter(|&j| node_coeff[j] != 0.0).collect();
    let h = 1.0 / n as f64;
    let values: Vec<f64> = (0..=2 * n).map(|k| -1.0 + k as f64 * h).collect();
    let mut dp: Vec<f64> = values.iter().map(|v| node_coeff[active[0]] * v).collect();
    for pair in active.windows(2) {
        let steps = pair[1] - pair[0];
        sliding_window_max(&mut dp, steps);
        let c = node_coeff[pair[1]];
        for (d, v) in dp.iter_mut().zip(values.iter()) {
            *d += c * v;
        }
    }
    dp.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Concave piecewise-linear function on [-1, 1], stored as breakpoints.
#[derive(Debug, Clone)]
struct Envelope {
    points: Vec<(f64, f64)>,
}

impl Envelope {
    fn linear(c: f64) -> Self {
        Envelope {
            points: vec![(-1.0, -c), (1.0, c)],
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let pts = &self.points;
        if x <= pts[0].0 {
            return pts[0].1;
        }
        if x >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        let mut hi = pts.partition_point(|p| p.0 <= x);
        hi = hi.clamp(1, pts.len() - 1);
        let (x0, y0) = pts[hi - 1];
        let (x1, y1) = pts[hi];
        if x1 == x0 {
            return y0.max(y1);
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    fn max(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `W(x) = max over |t| <= d of self(x + t)`, clipped back to [-1, 1]:
    /// the plateau around the maximizer widens by `d` and the outer slopes
    /// shift outward. Concavity is preserved.
    fn window_max(&self, d: f64) -> Self {
        if d <= 0.0 {
            return self.clone();
        }
        let vmax = self.max();
        let lo = self.points.iter().position(|p| p.1 == vmax).unwrap();
        let hi = self.points.iter().rposition(|p| p.1 == vmax).unwrap();
        let mut wide: Vec<(f64, f64)> = Vec::with_capacity(self.points.len() + 2);
        for &(x, y) in &self.points[..lo] {
            wide.push((x - d, y));
        }
        wide.push((self.points[lo].0 - d, vmax));
        wide.push((self.points[hi].0 + d, vmax));
        for &(x, y) in &self.points[hi + 1..] {
            wide.push((x + d, y));
        }
        let widened = Envelope { points: wide };
        let mut clipped: Vec<(f64, f64)> = Vec::with_capacity(widened.points.len() + 2);
        clipped.push((-1.0, widened.eval(-1.0)));
        for &(x, y) in &widened.points {
            if x > -1.0 && x < 1.0 {
                clipped.push((x, y));
            }
        }
        clipped.push((1.0, widened.eval(1.0)));
        Envelope { points: clipped }
    }

    fn add_linear(mut self, c: f64) -> Self {
        for p in &mut self.points {
            p.1 += c * p.0;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn atoms(list: &[(f64, f64, Sign)]) -> SignedAtoms {
        SignedAtoms::new(list.iter().copied()).unwrap()
    }

    #[test]
    fn norm_of_single_dirac_is_mass() {
        assert_eq!(SignedAtoms::dirac(0.3).bl_norm(), 1.0);
        assert_eq!(atoms(&[(0.5, 2.0, Sign::Plus)]).bl_norm(), 2.0);
    }

    #[test]
    fn norm_of_dipole_binds_lipschitz_constraint() {
        let mu = atoms(&[(0.2, 1.0, Sign::Plus), (0.6, 1.0, Sign::Minus)]);
        assert!((mu.bl_norm() - 0.4).abs() < 1e-14);
    }

    #[test]
    fn norm_of_heavy_dipole_scales_with_mass() {
        let mu = atoms(&[(0.1, 3.0, Sign::Plus), (0.9, 3.0, Sign::Minus)]);
        assert!((mu.bl_norm() - 2.4).abs() < 1e-13);
    }

    #[test]
    fn zero_measure_has_zero_norm() {
        assert_eq!(SignedAtoms::empty().bl_norm(), 0.0);
        let cancel = atoms(&[(0.4, 1.0, Sign::Plus), (0.4, 1.0, Sign::Minus)]);
        assert_eq!(cancel.bl_norm(), 0.0);
    }

    #[test]
    fn positive_norm_equals_total_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let mu = atoms(
                &(0..8)
                    .map(|_| (rng.random::<f64>(), rng.random::<f64>() + 0.1, Sign::Plus))
                    .collect::<Vec<_>>(),
            );
            assert!((mu.bl_norm() - mu.mass()).abs() < 1e-12);
        }
    }

    #[test]
    fn cdf_distance_matches_examples() {
        let a = SignedAtoms::dirac(0.2);
        let b = SignedAtoms::dirac(0.9);
        assert!((bl_distance_equal_mass(&a, &b).unwrap() - 0.7).abs() < 1e-15);

        let lebesgue = SignedAtoms::uniform_probability(512);
        let mid = SignedAtoms::dirac(0.5);
        let d = bl_distance_equal_mass(&lebesgue, &mid).unwrap();
        assert!((d - 0.25).abs() < 2e-3, "got {d}");

        assert_eq!(bl_distance_equal_mass(&mid, &mid).unwrap(), 0.0);
    }

    #[test]
    fn cdf_distance_rejects_mass_mismatch() {
        let a = SignedAtoms::dirac(0.2);
        let b = atoms(&[(0.4, 1.5, Sign::Plus)]);
        assert!(matches!(
            bl_distance_equal_mass(&a, &b),
            Err(Error::MassMismatch(_))
        ));
    }

    #[test]
    fn oracle_agrees_on_dipole() {
        let mu = atoms(&[(0.2, 1.0, Sign::Plus), (0.6, 1.0, Sign::Minus)]);
        let v = bl_norm_oracle(&mu, 1024);
        assert!((v - 0.4).abs() <= 2e-3, "got {v}");
        assert_eq!(bl_norm_oracle(&SignedAtoms::empty(), 64), 0.0);
    }

    #[test]
    fn oracle_lower_bounds_lp_within_grid_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let mu = atoms(
                &(0..10)
                    .map(|_| {
                        (
                            rng.random::<f64>(),
                            rng.random::<f64>() + 0.05,
                            if rng.random::<bool>() { Sign::Plus } else { Sign::Minus },
                        )
                    })
                    .collect::<Vec<_>>(),
            );
            let lp = mu.bl_norm();
            let grid_n = 256;
            let dp = bl_norm_oracle(&mu, grid_n);
            assert!(dp <= lp + 1e-10, "oracle above LP: {dp} vs {lp}");
            let gap = 2.0 / grid_n as f64 * mu.tv_mass();
            assert!(lp - dp <= gap, "gap {} above bound {gap}", lp - dp);
        }
    }

    #[test]
    fn cdf_matches_lp_on_random_equal_mass_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a = atoms(
                &(0..6)
                    .map(|_| (rng.random::<f64>(), rng.random::<f64>() + 0.1, Sign::Plus))
                    .collect::<Vec<_>>(),
            );
            let mut b_list: Vec<(f64, f64, Sign)> = (0..5)
                .map(|_| (rng.random::<f64>(), rng.random::<f64>() + 0.1, Sign::Plus))
                .collect();
            let target = a.mass();
            let current: f64 = b_list.iter().map(|t| t.1).sum();
            for t in &mut b_list {
                t.1 *= target / current;
            }
            let b = atoms(&b_list);
            let cdf = bl_distance_equal_mass(&a, &b).unwrap();
            let lp = bl_diff(&a, &b);
            assert!((cdf - lp).abs() < 1e-9, "cdf {cdf} vs lp {lp}");
        }
    }

    #[test]
    fn push_forward_keeps_mass_and_contracts() {
        let mu = atoms(&[(0.4, 1.0, Sign::Plus)]);
        let image = mu.push_forward(|y| y / 3.0 + 0.2).unwrap();
        assert!((image.plus_part()[0].position - (0.4 / 3.0 + 0.2)).abs() < 1e-15);
        assert_eq!(image.mass(), 1.0);

        // Zero-mass contraction through an alpha-contraction.
        let alpha = 0.37;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let dip = atoms(&[
                (rng.random::<f64>(), 1.0, Sign::Plus),
                (rng.random::<f64>(), 1.0, Sign::Minus),
            ]);
            let pushed = dip.push_forward(|y| alpha * y + 0.1).unwrap();
            assert!(pushed.bl_norm() <= alpha * dip.bl_norm() + 1e-12);
        }
    }

    #[test]
    fn push_forward_rejects_out_of_range() {
        let mu = SignedAtoms::dirac(0.9);
        assert!(matches!(
            mu.push_forward(|y| y + 0.5),
            Err(Error::RangeViolation(_))
        ));
        // Drift within 1e-12 is clamped.
        let ok = mu.push_forward(|y| y + 0.1 + 5e-13).unwrap();
        assert!(ok.plus_part()[0].position <= 1.0);
    }

    #[test]
    fn compact_merges_at_weighted_mean() {
        let mu = atoms(&[(0.5, 1.0, Sign::Plus), (0.5 + 1e-9, 1.0, Sign::Plus)]);
        let merged = mu.compact(1e-6);
        assert_eq!(merged.atom_count(), 1);
        let a = merged.plus_part()[0];
        assert!((a.position - (0.5 + 5e-10)).abs() < 1e-18);
        assert_eq!(a.weight, 2.0);
    }

    #[test]
    fn compact_with_zero_radius_merges_only_duplicates() {
        let mu = atoms(&[
            (0.3, 1.0, Sign::Plus),
            (0.3, 2.0, Sign::Plus),
            (0.3 + 1e-12, 1.0, Sign::Plus),
        ]);
        let merged = mu.compact(0.0);
        assert_eq!(merged.plus_part().len(), 2);
        assert_eq!(merged.mass(), 4.0);
    }

    #[test]
    fn compact_moves_little_in_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mu = atoms(
            &(0..512)
                .map(|_| {
                    (
                        rng.random::<f64>(),
                        rng.random::<f64>() + 0.01,
                        if rng.random::<bool>() { Sign::Plus } else { Sign::Minus },
                    )
                })
                .collect::<Vec<_>>(),
        );
        let eta = 1e-4;
        let merged = mu.compact(eta);
        assert!(bl_diff(&merged, &mu) <= eta * mu.tv_mass() + 1e-12);
        assert!((merged.mass() - mu.mass()).abs() < 1e-12);
    }

    #[test]
    fn norm_axioms_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..40 {
            let random = |rng: &mut ChaCha8Rng| {
                atoms(
                    &(0..5)
                        .map(|_| {
                            (
                                rng.random::<f64>(),
                                rng.random::<f64>() + 0.05,
                                if rng.random::<bool>() { Sign::Plus } else { Sign::Minus },
                            )
                        })
                        .collect::<Vec<_>>(),
                )
            };
            let a = random(&mut rng);
            let b = random(&mut rng);
            let c = rng.random::<f64>() * 3.0;
            assert!((a.scaled(c).bl_norm() - c * a.bl_norm()).abs() < 1e-9);
            assert!(a.add(&b).bl_norm() <= a.bl_norm() + b.bl_norm() + 1e-9);
            assert!((a.scaled(-1.0).bl_norm() - a.bl_norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let mu = atoms(&[(0.25, 1.5, Sign::Plus), (0.75, 0.5, Sign::Minus)]);
        let csv = mu.to_csv();
        let back = SignedAtoms::from_csv(&csv).unwrap();
        assert_eq!(mu, back);
    }
}
