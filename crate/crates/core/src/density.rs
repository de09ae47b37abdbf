//! Densities on [0,1] as cell averages over a uniform grid, together with
//! the averaged-oscillation seminorm `var_{1,1/p}` built from
//! `osc_1(h, eps) = integral of osc(h, B_eps(x)) dx`.

use crate::error::{Error, Result};
use crate::util::{sliding_window_max, sliding_window_min};

pub const DEFAULT_P: f64 = 1.0;
pub const DEFAULT_A1: f64 = 0.25;

/// Index of the cell containing `x` under the half-open convention
/// `[i/n, (i+1)/n)`, with the last cell closed.
pub fn cell_index(x: f64, n: usize) -> usize {
    ((x * n as f64).floor() as usize).min(n - 1)
}

/// Piecewise-constant density on the uniform `n`-cell grid. `p` and `a1`
/// carry the oscillation-norm context used when the density acts as a
/// base marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    values: Vec<f64>,
    pub p: f64,
    pub a1: f64,
}

impl GridDensity {
    pub fn from_values(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "grid needs at least one cell");
        GridDensity {
            values,
            p: DEFAULT_P,
            a1: DEFAULT_A1,
        }
    }

    /// Samples `f` at cell midpoints (exact cell averages for affine `f`).
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Self {
        Self::from_values((0..n).map(|i| f((i as f64 + 0.5) / n as f64)).collect())
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::from_values(vec![c; n])
    }

    /// Exact cell averages of `height * chi_[a, b)`.
    pub fn step(n: usize, a: f64, b: f64, height: f64) -> Self {
        let values = (0..n)
            .map(|i| {
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                let overlap = (hi.min(b) - lo.max(a)).max(0.0);
                height * overlap * n as f64
            })
            .collect();
        Self::from_values(values)
    }

    pub fn with_norm_params(mut self, p: f64, a1: f64) -> Self {
        self.p = p;
        self.a1 = a1;
        self
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, x: f64) -> f64 {
        self.values[cell_index(x, self.n())]
    }

    /// `integral of phi dm` on the uniform grid: the mean of the values.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() / self.n() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_probability(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0) && (self.l1_norm() - 1.0).abs() <= 1e-9
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        GridDensity {
            values: self.values.iter().map(|&v| f(v)).collect(),
            p: self.p,
            a1: self.a1,
        }
    }

    pub fn zip_values(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.n() != other.n() {
            return Err(Error::GridMismatch(self.n(), other.n()));
        }
        Ok(GridDensity {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            p: self.p,
            a1: self.a1,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_values(other, |a, b| a - b)
    }

    /// Classical grid variation: the sum of consecutive cell jumps.
    pub fn variation(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    /// Averaged oscillation over balls of radius `eps`, with the ball
    /// widened to whole cells: for each cell midpoint the oscillation is
    /// the value range over all cells intersecting the open ball.
    pub fn osc1(&self, eps: f64) -> Result<f64> {
        if eps <= 0.0 || eps > self.a1 {
            return Err(Error::BadRadius { eps, a1: self.a1 });
        }
        Ok(self.osc1_unchecked(eps))
    }

    fn osc1_unchecked(&self, eps: f64) -> f64 {
        let n = self.n();
        // Cells intersecting (x_c - eps, x_c + eps) span a symmetric index
        // radius around c; see the half-open cell convention.
        let radius = (eps * n as f64 - 0.5).ceil().max(0.0) as usize;
        let mut maxes = self.values.clone();
        let mut mins = self.values.clone();
        sliding_window_max(&mut maxes, radius);
        sliding_window_min(&mut mins, radius);
        maxes
            .iter()
            .zip(&mins)
            .map(|(hi, lo)| hi - lo)
            .sum::<f64>()
            / n as f64
    }

    /// `var_{1,1/p}` approximated by a geometric sweep of `eps` from one
    /// cell width up to `a1` (ratio 2, with `a1` itself included), plus
    /// the full norm `var + |phi|_1`.
    pub fn var_norm(&self, p: f64, a1: f64) -> Result<VarNorm> {
        if p < 1.0 {
            return Err(Error::BadExponent(p));
        }
        if !(a1 > 0.0 && a1 <= 1.0) {
            return Err(Error::BadRadius { eps: a1, a1 });
        }
        let n = self.n();
        let mut grid = Vec::new();
        let mut eps = 1.0 / n as f64;
        while eps < a1 {
            grid.push(eps);
            eps *= 2.0;
        }
        grid.push(a1);
        let mut var: f64 = 0.0;
        for &eps in &grid {
            let osc = self.osc1_unchecked(eps);
            var = var.max(osc / eps.powf(1.0 / p));
        }
        let l1 = self.l1_norm();
        Ok(VarNorm {
            var,
            l1,
            norm: var + l1,
        })
    }

    /// Strong norm `|phi|_{1,1/p}` with the density's own parameters.
    pub fn strong_norm(&self) -> f64 {
        self.var_norm(self.p, self.a1)
            .expect("stored norm parameters are valid")
            .norm
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell_index,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (idx == 0 && line.starts_with("cell_index")) {
                continue;
            }
            let bad = || Error::Config(format!("bad density csv line: {line:?}"));
            let mut parts = line.split(',');
            let i: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let v: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            if i != values.len() {
                return Err(bad());
            }
            values.push(v);
        }
        if values.is_empty() {
            return Err(Error::Config("empty density csv".into()));
        }
        Ok(Self::from_values(values))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VarNorm {
    pub var: f64,
    pub l1: f64,
    pub norm: f64,
}
