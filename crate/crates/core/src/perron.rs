//! The Perron-Frobenius operator on gridded densities.
//!
//! `BaseKernel` holds, per target cell, the exact decomposition of the
//! branch preimages of that cell into source-cell pieces. Applying it to
//! cell averages realizes `P_T` for piecewise-constant densities: the
//! piece masses telescope branch by branch, so total mass is conserved to
//! rounding. `ulam_matrix` builds the same transfer coefficients through
//! forward evaluation and bisection only, serving as an independent
//! cross-check of the closed-form branch inverses.

use crate::density::{cell_index, GridDensity};
use crate::interval_map::PiecewiseExpandingMap;

/// One monotone piece of a branch preimage of a target cell.
#[derive(Debug, Clone, Copy)]
pub struct KernelPiece {
    pub source: usize,
    pub branch: usize,
    /// `n * m(piece)`: the factor applied to the source cell average.
    pub weight: f64,
    /// Branch preimage of the target cell midpoint, shared by all pieces
    /// of the same branch; fiber maps are evaluated here by the fibered
    /// transfer operator.
    pub x_rep: f64,
}

#[derive(Debug, Clone)]
pub struct BaseKernel {
    pub n: usize,
    pieces: Vec<Vec<KernelPiece>>,
}

impl BaseKernel {
    pub fn build(map: &PiecewiseExpandingMap, n: usize) -> Self {
        assert!(n >= 1);
        let mut pieces: Vec<Vec<KernelPiece>> = vec![Vec::new(); n];
        for (b_idx, branch) in map.branches().iter().enumerate() {
            let (img_lo, img_hi) = branch.image();
            let img_lo = img_lo.max(0.0);
            let img_hi = img_hi.min(1.0);
            if img_hi <= img_lo {
                continue;
            }
            let j_lo = cell_index(img_lo, n);
            let j_hi = cell_index(img_hi, n).min(n - 1);
            // Inverse evaluations shared between adjacent target cells so
            // that the piece masses telescope exactly.
            let mut x_left = branch.inverse(img_lo.max(j_lo as f64 / n as f64));
            for j in j_lo..=j_hi {
                let y_hi = ((j + 1) as f64 / n as f64).min(img_hi);
                let y_lo = (j as f64 / n as f64).max(img_lo);
                if y_hi <= y_lo {
                    continue;
                }
                let y_mid = ((j as f64 + 0.5) / n as f64).clamp(img_lo, img_hi);
                let x_rep = branch.inverse(y_mid);
                let x_right = branch.inverse(y_hi);
                let (mut a, b) = if x_left <= x_right {
                    (x_left, x_right)
                } else {
                    (x_right, x_left)
                };
                x_left = branch.inverse(y_hi);
                // Split [a, b] at source-cell edges.
                while a < b {
                    let s = cell_index(a, n);
                    let edge = ((s + 1) as f64 / n as f64).min(b);
                    let end = if edge > a { edge } else { b };
                    let w = n as f64 * (end - a);
                    if w > 0.0 {
                        pieces[j].push(KernelPiece {
                            source: cell_index(0.5 * (a + end), n),
                            branch: b_idx,
                            weight: w,
                            x_rep,
                        });
                    }
                    a = end;
                }
            }
        }
        BaseKernel { n, pieces }
    }

    pub fn pieces_for(&self, target: usize) -> &[KernelPiece] {
        &self.pieces[target]
    }

    /// One application of `P_T` to cell averages.
    pub fn apply(&self, phi: &GridDensity) -> GridDensity {
        assert_eq!(phi.n(), self.n, "density grid must match the kernel");
        let values = self
            .pieces
            .iter()
            .map(|cell| {
                cell.iter()
                    .map(|p| p.weight * phi.values()[p.source])
                    .sum::<f64>()
            })
            .collect();
        GridDensity::from_values(values).with_norm_params(phi.p, phi.a1)
    }

    pub fn apply_n(&self, phi: &GridDensity, steps: usize) -> GridDensity {
        let mut out = phi.clone();
        for _ in 0..steps {
            out = self.apply(&out);
        }
        out
    }
}

/// Perron-Frobenius operator on a gridded density; builds the kernel on
/// the fly. Iterations should build the kernel once instead.
pub fn pf_density(map: &PiecewiseExpandingMap, phi: &GridDensity) -> GridDensity {
    BaseKernel::build(map, phi.n()).apply(phi)
}

/// Row-stochastic Ulam matrix `M[i][j] = m(I_i intersect T^{-1} I_j) / m(I_i)`,
/// assembled from forward evaluations only: each source cell is cut at the
/// bisected grid-line crossings of the branch image and every resulting
/// sub-segment is classified by its midpoint. Bisection refines wherever
/// the branch is steep, which handles singular cusp endpoints.
pub fn ulam_matrix(map: &PiecewiseExpandingMap, n: usize) -> Vec<Vec<f64>> {
    let mut matrix = vec![vec![0.0f64; n]; n];
    for (i, row) in matrix.iter_mut().enumerate() {
        let cell_lo = i as f64 / n as f64;
        let cell_hi = (i + 1) as f64 / n as f64;
        for branch in map.branches() {
            let lo = cell_lo.max(branch.lo);
            let hi = cell_hi.min(branch.hi);
            if hi <= lo {
                continue;
            }
            let y_a = branch.forward(lo).clamp(0.0, 1.0);
            let y_b = branch.forward(hi).clamp(0.0, 1.0);
            let (y_min, y_max) = if y_a <= y_b { (y_a, y_b) } else { (y_b, y_a) };
            let k_first = (y_min * n as f64).floor() as i64 + 1;
            let k_last = (y_max * n as f64).ceil() as i64 - 1;
            let mut cuts = vec![lo];
            let levels: Vec<f64> = (k_first..=k_last)
                .map(|k| k as f64 / n as f64)
                .filter(|&level| level > y_min && level < y_max)
                .collect();
            if branch.increasing {
                for &level in &levels {
                    cuts.push(bisect_crossing(branch, lo, hi, level));
                }
            } else {
                for &level in levels.iter().rev() {
                    cuts.push(bisect_crossing(branch, lo, hi, level));
                }
            }
            cuts.push(hi);
            for w in cuts.windows(2) {
                if w[1] <= w[0] {
                    continue;
                }
                let j = cell_index(branch.forward(0.5 * (w[0] + w[1])).clamp(0.0, 1.0), n);
                row[j] += (w[1] - w[0]) * n as f64;
            }
        }
    }
    matrix
}

/// `x` in `[lo, hi]` with `T(x) = level`; `T` is monotone on the branch.
fn bisect_crossing(
    branch: &crate::interval_map::Branch,
    mut lo: f64,
    mut hi: f64,
    level: f64,
) -> f64 {
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let below = if branch.increasing {
            branch.forward(mid) < level
        } else {
            branch.forward(mid) > level
        };
        if below {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `M^T` applied to cell averages; the Ulam oracle counterpart of
/// `BaseKernel::apply`.
pub fn ulam_apply(matrix: &[Vec<f64>], phi: &GridDensity) -> GridDensity {
    let n = matrix.len();
    assert_eq!(phi.n(), n);
    let mut values = vec![0.0f64; n];
    for (i, row) in matrix.iter().enumerate() {
        let v = phi.values()[i];
        for (j, m) in row.iter().enumerate() {
            values[j] += m * v;
        }
    }
    GridDensity::from_values(values).with_norm_params(phi.p, phi.a1)
}
