//! Measures on the unit square disintegrated along vertical fibers.
//!
//! A measure is a uniform grid of base cells, each carrying a weight pair
//! (cell averages of the positive/negative marginal densities) and a pair
//! of fiber probability measures. The restriction to a fiber is
//! `phi^+ pi^+ - phi^- pi^-`; integrating or maximizing its
//! bounded-Lipschitz norm over the base produces the anisotropic norms,
//! and summing consecutive fiber differences produces the path variation.

use std::sync::Arc;

use crate::atoms::{bl_diff, SignedAtoms};
use crate::density::{GridDensity, DEFAULT_A1, DEFAULT_P};
use crate::error::{Error, Result};
use crate::interval_map::PiecewiseExpandingMap;
use crate::perron::BaseKernel;

pub const CANONICAL_FIBER_ATOMS: usize = 16;

/// Fiber probability stored for a zero-weight cell so restrictions stay
/// well defined; the paper's degenerate case assigns Lebesgue, which this
/// uniform-atom profile approximates.
pub fn canonical_fiber() -> SignedAtoms {
    SignedAtoms::uniform_probability(CANONICAL_FIBER_ATOMS)
}

fn normalize_fiber(atoms: SignedAtoms) -> SignedAtoms {
    debug_assert!(atoms.is_positive(), "fiber parts are positive measures");
    let mass = atoms.mass();
    if (mass - 1.0).abs() <= 1e-9 {
        atoms
    } else if mass > 0.0 {
        atoms.scaled(1.0 / mass)
    } else {
        canonical_fiber()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberCell {
    pub phi_plus: f64,
    pub phi_minus: f64,
    /// Probability on the fiber carrying the positive part.
    pub fiber_plus: SignedAtoms,
    /// Probability on the fiber carrying the negative part.
    pub fiber_minus: SignedAtoms,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisintegratedMeasure {
    cells: Vec<FiberCell>,
    pub p: f64,
    pub a1: f64,
}

impl DisintegratedMeasure {
    /// Builds from `(phi_plus, phi_minus, fiber_plus, fiber_minus)` per
    /// cell; fibers are normalized to probabilities.
    pub fn from_parts(parts: Vec<(f64, f64, SignedAtoms, SignedAtoms)>) -> Self {
        let cells = parts
            .into_iter()
            .map(|(phi_plus, phi_minus, fp, fm)| FiberCell {
                phi_plus,
                phi_minus,
                fiber_plus: normalize_fiber(fp),
                fiber_minus: normalize_fiber(fm),
            })
            .collect();
        DisintegratedMeasure {
            cells,
            p: DEFAULT_P,
            a1: DEFAULT_A1,
        }
    }

    /// Positive product-like constructor: base density `phi` (must be
    /// nonnegative) with one fiber probability per cell.
    pub fn from_product(
        n: usize,
        phi: &GridDensity,
        sampler: impl Fn(usize) -> SignedAtoms,
    ) -> Result<Self> {
        if phi.n() != n {
            return Err(Error::GridMismatch(phi.n(), n));
        }
        if let Some(idx) = phi.values().iter().position(|&v| v < 0.0) {
            return Err(Error::BadDensity(idx));
        }
        let mut measure = Self::from_parts(
            (0..n)
                .map(|j| {
                    (
                        phi.values()[j],
                        0.0,
                        sampler(j),
                        canonical_fiber(),
                    )
                })
                .collect(),
        );
        measure.p = phi.p;
        measure.a1 = phi.a1;
        Ok(measure)
    }

    /// Signed product constructor: a zero-splitting of `phi` into its
    /// cellwise positive and negative parts, all fibers from `sampler`.
    pub fn from_signed_density(
        n: usize,
        phi: &GridDensity,
        sampler: impl Fn(usize) -> SignedAtoms,
    ) -> Result<Self> {
        if phi.n() != n {
            return Err(Error::GridMismatch(phi.n(), n));
        }
        let mut measure = Self::from_parts(
            (0..n)
                .map(|j| {
                    let v = phi.values()[j];
                    (v.max(0.0), (-v).max(0.0), sampler(j), sampler(j))
                })
                .collect(),
        );
        measure.p = phi.p;
        measure.a1 = phi.a1;
        Ok(measure)
    }

    /// Lebesgue^2 approximation: unit weights, `k` uniform fiber atoms.
    pub fn lebesgue2(n: usize, k: usize) -> Self {
        Self::from_product(n, &GridDensity::constant(n, 1.0), |_| {
            SignedAtoms::uniform_probability(k)
        })
        .expect("constant density is nonnegative")
    }

    pub fn with_norm_params(mut self, p: f64, a1: f64) -> Self {
        self.p = p;
        self.a1 = a1;
        self
    }

    pub fn n(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[FiberCell] {
        &self.cells
    }

    /// The restriction `mu|_gamma_j = phi^+_j pi^+_j - phi^-_j pi^-_j`.
    pub fn restriction(&self, j: usize) -> SignedAtoms {
        let c = &self.cells[j];
        c.fiber_plus
            .scaled(c.phi_plus)
            .sub(&c.fiber_minus.scaled(c.phi_minus))
    }

    /// Marginal density `phi_x = phi^+ - phi^-` as cell averages.
    pub fn marginal(&self) -> GridDensity {
        GridDensity::from_values(self.cells.iter().map(|c| c.phi_plus - c.phi_minus).collect())
            .with_norm_params(self.p, self.a1)
    }

    pub fn marginal_l1(&self) -> f64 {
        self.marginal().l1_norm()
    }

    pub fn total_mass(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.phi_plus - c.phi_minus)
            .sum::<f64>()
            / self.n() as f64
    }

    pub fn total_atoms(&self) -> usize {
        self.cells
            .iter()
            .map(|c| c.fiber_plus.atom_count() + c.fiber_minus.atom_count())
            .sum()
    }

    /// Fiberwise W-norms `||mu|_{gamma_j}||_W` for all cells.
    pub fn fiber_norms(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.restriction(j).bl_norm()).collect()
    }

    /// `||mu||_1`: the mean over cells of the fiberwise W-norm.
    pub fn norm_weak_l1(&self) -> f64 {
        self.fiber_norms().iter().sum::<f64>() / self.n() as f64
    }

    /// `||mu||_inf`: the max over cells of the fiberwise W-norm.
    pub fn norm_linf(&self) -> f64 {
        self.fiber_norms().iter().fold(0.0f64, |a, &b| a.max(b))
    }

    /// `||mu||_{S^1} = |phi_x|_{1,1/p} + ||mu||_1`.
    pub fn norm_s1(&self, p: f64, a1: f64) -> Result<f64> {
        Ok(self.marginal().var_norm(p, a1)?.norm + self.norm_weak_l1())
    }

    /// `||mu||_{S^inf} = |phi_x|_{1,1/p} + ||mu||_inf`.
    pub fn norm_sinf(&self, p: f64, a1: f64) -> Result<f64> {
        Ok(self.marginal().var_norm(p, a1)?.norm + self.norm_linf())
    }

    /// Grid path variation `Var = sum_j || mu|_{gamma_{j+1}} - mu|_{gamma_j} ||_W`
    /// over consecutive fibers; on the fixed grid the supremum over
    /// subsequences is attained by the consecutive sum.
    pub fn path_variation(&self) -> f64 {
        self.path_variation_range(0, self.n() - 1)
    }

    /// Variation of the path restricted to the cell index range
    /// `[lo, hi]` (inclusive); closed ranges sharing an endpoint add up
    /// to the full variation.
    pub fn path_variation_range(&self, lo: usize, hi: usize) -> f64 {
        (lo..hi)
            .map(|j| bl_diff(&self.restriction(j + 1), &self.restriction(j)))
            .sum()
    }

    pub fn neg(&self) -> Self {
        DisintegratedMeasure {
            cells: self
                .cells
                .iter()
                .map(|c| FiberCell {
                    phi_plus: c.phi_minus,
                    phi_minus: c.phi_plus,
                    fiber_plus: c.fiber_minus.clone(),
                    fiber_minus: c.fiber_plus.clone(),
                })
                .collect(),
            p: self.p,
            a1: self.a1,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n() != other.n() {
            return Err(Error::GridMismatch(self.n(), other.n()));
        }
        let cells = self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| {
                let phi_plus = a.phi_plus + b.phi_plus;
                let phi_minus = a.phi_minus + b.phi_minus;
                FiberCell {
                    phi_plus,
                    phi_minus,
                    fiber_plus: normalize_fiber(
                        a.fiber_plus
                            .scaled(a.phi_plus)
                            .add(&b.fiber_plus.scaled(b.phi_plus)),
                    ),
                    fiber_minus: normalize_fiber(
                        a.fiber_minus
                            .scaled(a.phi_minus)
                            .add(&b.fiber_minus.scaled(b.phi_minus)),
                    ),
                }
            })
            .collect();
        Ok(DisintegratedMeasure {
            cells,
            p: self.p,
            a1: self.a1,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn scaled(&self, c: f64) -> Self {
        if c < 0.0 {
            return self.neg().scaled(-c);
        }
        DisintegratedMeasure {
            cells: self
                .cells
                .iter()
                .map(|cell| FiberCell {
                    phi_plus: cell.phi_plus * c,
                    phi_minus: cell.phi_minus * c,
                    fiber_plus: cell.fiber_plus.clone(),
                    fiber_minus: cell.fiber_minus.clone(),
                })
                .collect(),
            p: self.p,
            a1: self.a1,
        }
    }

    /// Multiplies the path by a scalar grid function (cellwise weights),
    /// flipping parts where the factor is negative.
    pub fn scale_path(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.n() {
            return Err(Error::GridMismatch(factors.len(), self.n()));
        }
        let cells = self
            .cells
            .iter()
            .zip(factors)
            .map(|(c, &f)| {
                if f >= 0.0 {
                    FiberCell {
                        phi_plus: c.phi_plus * f,
                        phi_minus: c.phi_minus * f,
                        fiber_plus: c.fiber_plus.clone(),
                        fiber_minus: c.fiber_minus.clone(),
                    }
                } else {
                    FiberCell {
                        phi_plus: c.phi_minus * -f,
                        phi_minus: c.phi_plus * -f,
                        fiber_plus: c.fiber_minus.clone(),
                        fiber_minus: c.fiber_plus.clone(),
                    }
                }
            })
            .collect();
        Ok(DisintegratedMeasure {
            cells,
            p: self.p,
            a1: self.a1,
        })
    }

    /// One row per fiber atom:
    /// `cell_index,phi_plus,phi_minus,atom_position,atom_weight,atom_sign`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell_index,phi_plus,phi_minus,atom_position,atom_weight,atom_sign\n");
        for (j, c) in self.cells.iter().enumerate() {
            for a in c.fiber_plus.plus_part() {
                out.push_str(&format!(
                    "{j},{},{},{},{},plus\n",
                    c.phi_plus, c.phi_minus, a.position, a.weight
                ));
            }
            for a in c.fiber_minus.plus_part() {
                out.push_str(&format!(
                    "{j},{},{},{},{},minus\n",
                    c.phi_plus, c.phi_minus, a.position, a.weight
                ));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        use crate::atoms::Sign;
        struct Raw {
            phi_plus: f64,
            phi_minus: f64,
            plus: Vec<(f64, f64, Sign)>,
            minus: Vec<(f64, f64, Sign)>,
        }
        let mut raws: Vec<Raw> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (idx == 0 && line.starts_with("cell_index")) {
                continue;
            }
            let bad = || Error::Config(format!("bad measure csv line: {line:?}"));
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(bad());
            }
            let j: usize = fields[0].parse().map_err(|_| bad())?;
            let phi_plus: f64 = fields[1].parse().map_err(|_| bad())?;
            let phi_minus: f64 = fields[2].parse().map_err(|_| bad())?;
            let position: f64 = fields[3].parse().map_err(|_| bad())?;
            let weight: f64 = fields[4].parse().map_err(|_| bad())?;
            while raws.len() <= j {
                raws.push(Raw {
                    phi_plus: 0.0,
                    phi_minus: 0.0,
                    plus: Vec::new(),
                    minus: Vec::new(),
                });
            }
            let raw = &mut raws[j];
            raw.phi_plus = phi_plus;
            raw.phi_minus = phi_minus;
            match fields[5] {
                "plus" => raw.plus.push((position, weight, Sign::Plus)),
                "minus" => raw.minus.push((position, weight, Sign::Plus)),
                _ => return Err(bad()),
            }
        }
        if raws.is_empty() {
            return Err(Error::Config("empty measure csv".into()));
        }
        let parts = raws
            .into_iter()
            .map(|r| {
                Ok((
                    r.phi_plus,
                    r.phi_minus,
                    SignedAtoms::new(r.plus)?,
                    SignedAtoms::new(r.minus)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_parts(parts))
    }
}

type FiberMap = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// The full skew product `F(x, y) = (T(x), G(x, y))` with its grid
/// configuration: base cell count, fiber atom budget and merge radius.
#[derive(Clone)]
pub struct FiberSystem {
    pub name: String,
    pub map: PiecewiseExpandingMap,
    fiber: FiberMap,
    pub alpha: f64,
    pub h_lip: f64,
    pub n: usize,
    pub fiber_atoms: usize,
    pub atom_budget: usize,
    pub merge_radius: f64,
    kernel: BaseKernel,
}

impl FiberSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        map: PiecewiseExpandingMap,
        fiber: FiberMap,
        alpha: f64,
        h_lip: f64,
        n: usize,
        fiber_atoms: usize,
        atom_budget: usize,
        merge_radius: f64,
    ) -> Self {
        let kernel = BaseKernel::build(&map, n);
        FiberSystem {
            name: name.into(),
            map,
            fiber,
            alpha,
            h_lip,
            n,
            fiber_atoms,
            atom_budget,
            merge_radius,
            kernel,
        }
    }

    pub fn g(&self, x: f64, y: f64) -> f64 {
        (self.fiber)(x, y)
    }

    pub fn fiber_map(&self) -> FiberMap {
        self.fiber.clone()
    }

    pub fn kernel(&self) -> &BaseKernel {
        &self.kernel
    }

    pub fn lebesgue2(&self) -> DisintegratedMeasure {
        DisintegratedMeasure::lebesgue2(self.n, self.fiber_atoms)
    }

    /// Sampled structural checks: fiber contraction at rate `alpha`
    /// (assumption G1), per-branch horizontal Lipschitz constant `h_lip`,
    /// and the fiber map staying inside [0,1].
    pub fn validate(&self, samples: usize) -> Result<()> {
        let m = samples.max(8);
        let tol = 1e-9;
        for t in 0..=m {
            let x = t as f64 / m as f64;
            for u in 0..m {
                let y1 = u as f64 / m as f64;
                let y2 = (u + 1) as f64 / m as f64;
                let d = (self.g(x, y1) - self.g(x, y2)).abs();
                if d > self.alpha * (y2 - y1) + tol {
                    return Err(Error::Experiment(format!(
                        "{}: fiber contraction violated at x={x}: {d} > alpha*dy",
                        self.name
                    )));
                }
            }
            let gy = self.g(x, t as f64 / m as f64);
            if !(-tol..=1.0 + tol).contains(&gy) {
                return Err(Error::Experiment(format!(
                    "{}: fiber map leaves [0,1]: G = {gy}",
                    self.name
                )));
            }
        }
        for branch in self.map.branches() {
            for t in 0..m {
                let x1 = branch.lo + (t as f64 + 0.25) / m as f64 * (branch.hi - branch.lo);
                let x2 = branch.lo + (t as f64 + 0.75) / m as f64 * (branch.hi - branch.lo);
                for u in 0..=4 {
                    let y = u as f64 / 4.0;
                    let d = (self.g(x1, y) - self.g(x2, y)).abs();
                    if d > self.h_lip * (x2 - x1) + tol {
                        return Err(Error::Experiment(format!(
                            "{}: horizontal Lipschitz violated on a branch: {d}",
                            self.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `var_diamond` of the fiber map over default grids spanning [0,1].
    pub fn var_diamond_default(&self) -> VarDiamond {
        let xs: Vec<f64> = (0..=128).map(|i| i as f64 / 128.0).collect();
        let ys: Vec<f64> = (0..=32).map(|i| i as f64 / 32.0).collect();
        var_diamond(|x, y| self.g(x, y), &xs, &ys)
    }
}

impl std::fmt::Debug for FiberSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiberSystem")
            .field("name", &self.name)
            .field("alpha", &self.alpha)
            .field("h_lip", &self.h_lip)
            .field("n", &self.n)
            .finish()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VarDiamond {
    /// Max of the defining sum over monotone x/y subsequences of the grids.
    pub sampled: f64,
    /// Upper surrogate: per x-gap, the max over the whole y-grid.
    pub surrogate: f64,
}

/// Mixed-direction variation of `g` on the sample grids. The sampled value
/// maximizes `sum_i |g(x_{i+1}, y_i) - g(x_i, y_i)|` over nondecreasing
/// choices of `y_i` (dynamic program); the surrogate drops the
/// monotonicity constraint on the `y_i` and dominates every sampled value.
pub fn var_diamond(g: impl Fn(f64, f64) -> f64, xs: &[f64], ys: &[f64]) -> VarDiamond {
    assert!(xs.len() >= 2 && ys.len() >= 2, "grids need at least 2 points");
    let gaps = xs.len() - 1;
    let mut surrogate = 0.0;
    let mut prev = vec![0.0f64; ys.len()];
    for i in 0..gaps {
        let d: Vec<f64> = ys
            .iter()
            .map(|&y| (g(xs[i + 1], y) - g(xs[i], y)).abs())
            .collect();
        surrogate += d.iter().cloned().fold(0.0, f64::max);
        let mut cur = vec![0.0f64; ys.len()];
        for j in 0..ys.len() {
            let stay = if j > 0 { cur[j - 1] } else { f64::NEG_INFINITY };
            cur[j] = stay.max(prev[j] + d[j]);
        }
        prev = cur;
    }
    let sampled = prev.iter().cloned().fold(0.0, f64::max);
    VarDiamond { sampled, surrogate }
}
