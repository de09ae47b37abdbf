//! Piecewise expanding maps of the unit interval with closed-form branch
//! inverses, including the Lorenz cusp family with unbounded derivative at
//! the branch boundary and conjugated perturbations `T0 (sigma(x))`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::poly::Poly;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One monotone branch `T_i : (lo, hi) -> T_i(P_i)` with its derivative
/// and inverse. The closures must accept the closed interval `[lo, hi]`.
#[derive(Clone)]
pub struct Branch {
    pub lo: f64,
    pub hi: f64,
    forward: ScalarFn,
    derivative: ScalarFn,
    inverse: ScalarFn,
    pub increasing: bool,
    /// Derivative unbounded at one of the domain endpoints.
    pub singular_endpoints: bool,
    image_lo: f64,
    image_hi: f64,
}

impl Branch {
    pub fn new(
        lo: f64,
        hi: f64,
        forward: ScalarFn,
        derivative: ScalarFn,
        inverse: ScalarFn,
        singular_endpoints: bool,
    ) -> Self {
        let (f_lo, f_hi) = (forward(lo), forward(hi));
        let increasing = f_hi >= f_lo;
        let (image_lo, image_hi) = if increasing { (f_lo, f_hi) } else { (f_hi, f_lo) };
        Branch {
            lo,
            hi,
            forward,
            derivative,
            inverse,
            increasing,
            singular_endpoints,
            image_lo,
            image_hi,
        }
    }

    pub fn forward(&self, x: f64) -> f64 {
        (self.forward)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        ((self.inverse)(y)).clamp(self.lo, self.hi)
    }

    pub fn image(&self) -> (f64, f64) {
        (self.image_lo, self.image_hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn image_contains(&self, y: f64) -> bool {
        y >= self.image_lo - 1e-12 && y <= self.image_hi + 1e-12
    }
}

impl fmt::Debug for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Branch")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("increasing", &self.increasing)
            .field("singular_endpoints", &self.singular_endpoints)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub struct PiecewiseExpandingMap {
    pub name: String,
    branches: Vec<Branch>,
}

/// Result of an inverse-branch query: one entry per branch whose image
/// contains the point, plus the count of entries dropped because the
/// derivative there was singular (non-finite or zero).
#[derive(Debug, Clone)]
pub struct InverseBranches {
    pub entries: Vec<PreimageEntry>,
    pub singular_dropped: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct PreimageEntry {
    pub x: f64,
    /// `1 / |T'(x)|`.
    pub g: f64,
    pub branch: usize,
}

impl PiecewiseExpandingMap {
    pub fn new(name: impl Into<String>, branches: Vec<Branch>) -> Self {
        assert!(!branches.is_empty());
        debug_assert!(branches[0].lo == 0.0 && branches[branches.len() - 1].hi == 1.0);
        PiecewiseExpandingMap {
            name: name.into(),
            branches,
        }
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Partition endpoints `a_0 = 0 < a_1 < ... < a_q = 1`.
    pub fn endpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.branches.iter().map(|b| b.lo).collect();
        pts.push(1.0);
        pts
    }

    /// Branch index, forward value and signed derivative at an interior
    /// point of a branch domain.
    pub fn branch_at(&self, x: f64) -> Result<(usize, f64, f64)> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain(x));
        }
        if self.endpoints().contains(&x) {
            return Err(Error::BoundaryPoint(x));
        }
        let idx = self
            .branches
            .iter()
            .position(|b| b.contains(x))
            .ok_or(Error::BoundaryPoint(x))?;
        let b = &self.branches[idx];
        Ok((idx, b.forward(x), b.derivative(x)))
    }

    /// All branch preimages of `y` with the Jacobian weights `1/|T'|`.
    /// Entries where the derivative evaluates as singular are dropped and
    /// counted; they sit over the measure-zero branch boundary set.
    pub fn inverse_branches(&self, y: f64) -> Result<InverseBranches> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfDomain(y));
        }
        let mut entries = Vec::with_capacity(self.branches.len());
        let mut singular_dropped = 0;
        for (idx, b) in self.branches.iter().enumerate() {
            if !b.image_contains(y) {
                continue;
            }
            let x = b.inverse(y);
            let d = b.derivative(x);
            if !d.is_finite() || d == 0.0 {
                singular_dropped += 1;
                continue;
            }
            entries.push(PreimageEntry {
                x,
                g: 1.0 / d.abs(),
                branch: idx,
            });
        }
        Ok(InverseBranches {
            entries,
            singular_dropped,
        })
    }

    /// Branch containing `x`, resolving boundary points to the right
    /// (half-open convention); used for orbit evaluation.
    pub(crate) fn branch_for(&self, x: f64) -> &Branch {
        let idx = self
            .branches
            .partition_point(|b| b.hi <= x)
            .min(self.branches.len() - 1);
        &self.branches[idx]
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.branch_for(x).forward(x).clamp(0.0, 1.0)
    }

    /// Checks that inverse(forward) is the identity at interior sample
    /// points, within 1e-12.
    pub fn validate(&self, samples_per_branch: usize) -> Result<()> {
        for b in &self.branches {
            let m = samples_per_branch.max(2);
            for t in 0..m {
                let x = b.lo + (t as f64 + 0.5) / m as f64 * (b.hi - b.lo);
                let y = b.forward(x);
                let back = b.inverse(y);
                if (back - x).abs() > 1e-12 {
                    return Err(Error::Experiment(format!(
                        "branch inverse check failed for {}: x={x}, round trip {back}",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Searches for the smallest iterate `n0 <= n0_max` with
    /// `inf |(T^n0)'| > 1` on a sample grid; returns `(n0, lambda1)`.
    pub fn check_expansion(&self, n0_max: usize, samples: usize) -> Option<(usize, f64)> {
        for n0 in 1..=n0_max {
            let mut inf: f64 = f64::INFINITY;
            for t in 0..samples {
                let mut x = (t as f64 + 0.5) / samples as f64;
                let mut product = 1.0;
                for _ in 0..n0 {
                    let b = self.branch_for(x);
                    product *= b.derivative(x).abs();
                    x = b.forward(x).clamp(0.0, 1.0);
                }
                if product.is_finite() {
                    inf = inf.min(product);
                }
            }
            if inf > 1.0 {
                return Some((n0, inf));
            }
        }
        None
    }

    /// Per-branch statistics of `g = 1/|T'|`: sup, sampled variation and
    /// branch length. Sampling avoids the branch endpoints, where cusp
    /// families have singular derivatives.
    pub fn branch_g_stats(&self, samples: usize) -> Vec<BranchGStats> {
        self.branches
            .iter()
            .map(|b| {
                let m = samples.max(8);
                let mut sup: f64 = 0.0;
                let mut var = 0.0;
                let mut prev: Option<f64> = None;
                for t in 0..m {
                    let x = b.lo + (t as f64 + 0.5) / m as f64 * (b.hi - b.lo);
                    let d = b.derivative(x);
                    if !d.is_finite() || d == 0.0 {
                        continue;
                    }
                    let g = 1.0 / d.abs();
                    sup = sup.max(g);
                    if let Some(p) = prev {
                        var += (g - p).abs();
                    }
                    prev = Some(g);
                }
                BranchGStats {
                    sup_g: sup,
                    var_g: var,
                    length: b.hi - b.lo,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BranchGStats {
    pub sup_g: f64,
    pub var_g: f64,
    pub length: f64,
}

/// The doubling map `T(x) = 2x mod 1`.
pub fn doubling() -> PiecewiseExpandingMap {
    let b1 = Branch::new(
        0.0,
        0.5,
        Arc::new(|x| 2.0 * x),
        Arc::new(|_| 2.0),
        Arc::new(|y| y / 2.0),
        false,
    );
    let b2 = Branch::new(
        0.5,
        1.0,
        Arc::new(|x| 2.0 * x - 1.0),
        Arc::new(|_| 2.0),
        Arc::new(|y| (y + 1.0) / 2.0),
        false,
    );
    PiecewiseExpandingMap::new("doubling", vec![b1, b2])
}

/// Lorenz cusp map with exponent `kappa` in (1/2, 1):
/// `T(x) = 1 - (1 - 2x)^kappa` on (0, 1/2) and `T(x) = (2x - 1)^kappa` on
/// (1/2, 1). The derivative `2 kappa u^(kappa - 1)` blows up at the cusp
/// `x = 1/2`, while `inf |T'| = 2 kappa > 1`.
pub fn lorenz_cusp(kappa: f64) -> PiecewiseExpandingMap {
    assert!(
        kappa > 0.5 && kappa < 1.0,
        "cusp exponent must lie in (1/2, 1)"
    );
    let b1 = Branch::new(
        0.0,
        0.5,
        Arc::new(move |x: f64| 1.0 - (1.0 - 2.0 * x).powf(kappa)),
        Arc::new(move |x: f64| 2.0 * kappa * (1.0 - 2.0 * x).powf(kappa - 1.0)),
        Arc::new(move |y: f64| (1.0 - (1.0 - y).powf(1.0 / kappa)) / 2.0),
        true,
    );
    let b2 = Branch::new(
        0.5,
        1.0,
        Arc::new(move |x: f64| (2.0 * x - 1.0).powf(kappa)),
        Arc::new(move |x: f64| 2.0 * kappa * (2.0 * x - 1.0).powf(kappa - 1.0)),
        Arc::new(move |y: f64| (1.0 + y.powf(1.0 / kappa)) / 2.0),
        true,
    );
    PiecewiseExpandingMap::new(format!("lorenz_cusp(kappa={kappa})"), vec![b1, b2])
}

/// Non-expanding single-branch identity; its transfer operator is the
/// identity, so norm sequences do not decay. Test fixture only.
pub fn identity_stub() -> PiecewiseExpandingMap {
    let b = Branch::new(
        0.0,
        1.0,
        Arc::new(|x| x),
        Arc::new(|_| 1.0),
        Arc::new(|y| y),
        false,
    );
    PiecewiseExpandingMap::new("identity_stub", vec![b])
}

/// Near-identity reparametrization `sigma(x) = x + delta * s(x)` with
/// `s(0) = s(1) = 0`, used to build conjugated perturbations.
#[derive(Clone, Debug)]
pub struct Conjugator {
    pub delta: f64,
    s: Poly,
    s_prime: Poly,
}

impl Conjugator {
    pub fn new(delta: f64, s: Poly) -> Result<Self> {
        let s_prime = s.derivative();
        let conj = Conjugator { delta, s, s_prime };
        if conj.s.eval(0.0).abs() > 1e-12 || conj.s.eval(1.0).abs() > 1e-12 {
            return Err(Error::Config("conjugator drift must vanish at 0 and 1".into()));
        }
        for t in 0..=512 {
            let x = t as f64 / 512.0;
            let slope = conj.prime(x);
            if slope <= 0.0 {
                return Err(Error::NotDiffeomorphism { x, slope });
            }
        }
        Ok(conj)
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x + self.delta * self.s.eval(x)).clamp(0.0, 1.0)
    }

    pub fn prime(&self, x: f64) -> f64 {
        1.0 + self.delta * self.s_prime.eval(x)
    }

    /// Inverse by bisection; sigma is strictly increasing.
    pub fn invert(&self, y: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if self.apply(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn sup_drift(&self, samples: usize) -> f64 {
        (0..=samples)
            .map(|t| {
                let x = t as f64 / samples as f64;
                (self.apply(x) - x).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn sup_inverse_slope_defect(&self, samples: usize) -> f64 {
        (0..=samples)
            .map(|t| {
                let x = t as f64 / samples as f64;
                (1.0 / self.prime(x) - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// The conjugated map `T_delta = T0 (sigma(x))`; branch domains are the
/// sigma-preimages of the base branch domains.
pub fn conjugated(base: &PiecewiseExpandingMap, sigma: &Conjugator) -> PiecewiseExpandingMap {
    let branches = base
        .branches()
        .iter()
        .map(|b| {
            let lo = if b.lo == 0.0 { 0.0 } else { sigma.invert(b.lo) };
            let hi = if b.hi == 1.0 { 1.0 } else { sigma.invert(b.hi) };
            let sig_f = sigma.clone();
            let sig_d = sigma.clone();
            let sig_i = sigma.clone();
            let base_f = b.forward.clone();
            let base_d = b.derivative.clone();
            let base_i = b.inverse.clone();
            let (b_lo, b_hi) = (b.lo, b.hi);
            Branch::new(
                lo,
                hi,
                Arc::new(move |x: f64| base_f(sig_f.apply(x).clamp(b_lo, b_hi))),
                Arc::new(move |x: f64| {
                    let u = sig_d.apply(x).clamp(b_lo, b_hi);
                    base_d(u) * sig_d.prime(x)
                }),
                Arc::new(move |y: f64| sig_i.invert(base_i(y).clamp(b_lo, b_hi))),
                b.singular_endpoints,
            )
        })
        .collect();
    PiecewiseExpandingMap::new(format!("{}~conj", base.name), branches)
}
