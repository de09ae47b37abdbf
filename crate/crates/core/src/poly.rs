//! Small dense polynomials used for perturbation descriptors and fiber drives.

use serde::{Deserialize, Serialize};

/// Polynomial in one variable, coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    /// Max of |p| over a uniform sample grid with `m + 1` points on [0,1].
    pub fn sup_abs_on_unit(&self, m: usize) -> f64 {
        (0..=m)
            .map(|i| self.eval(i as f64 / m as f64).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_derivative() {
        let p = Poly(vec![0.0, 1.0, -1.0]); // x - x^2
        assert_eq!(p.eval(0.0), 0.0);
        assert_eq!(p.eval(1.0), 0.0);
        assert!((p.eval(0.5) - 0.25).abs() < 1e-15);
        let d = p.derivative();
        assert_eq!(d.eval(0.0), 1.0);
        assert_eq!(d.eval(1.0), -1.0);
    }
}
