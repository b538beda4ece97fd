//! Gauss-Hermite quadrature for expectations under the standard normal.
//!
//! Nodes and weights come from the Golub-Welsch algorithm on the Jacobi matrix
//! of the probabilists' Hermite polynomials, so `expect` integrates against the
//! N(0,1) density directly. Node/weight pairs are symmetrized after the
//! eigendecomposition and the summation walks ± pairs together, which makes
//! `expect` return exactly 0.0 for odd integrands.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// A quadrature rule computing `E[f(rho)]` for `rho ~ N(0,1)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    /// Nonnegative half of the nodes, ascending; paired with their negatives.
    half_nodes: Vec<f64>,
    half_weights: Vec<f64>,
    /// Weight of the node at zero, present for odd orders.
    center_weight: Option<f64>,
    order: usize,
}

impl GaussHermite {
    /// Build a rule with the given number of nodes.
    pub fn new(order: usize) -> Result<Self> {
        if order < 1 || order > 512 {
            return Err(Error::InvalidArgument(format!(
                "quadrature order must be in 1..=512, got {order}"
            )));
        }
        // Jacobi matrix for probabilists' Hermite: zero diagonal,
        // off-diagonal sqrt(1), sqrt(2), ..., sqrt(order-1).
        let mut jacobi = DMatrix::zeros(order, order);
        for i in 1..order {
            let b = (i as f64).sqrt();
            jacobi[(i, i - 1)] = b;
            jacobi[(i - 1, i)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        // Weight of node i is the squared first component of its eigenvector
        // (total mass 1 for the normalized Gaussian weight).
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("eigenvalues are finite"));

        // Enforce exact ± symmetry: average each node with its mirror.
        let half = order / 2;
        let mut half_nodes = Vec::with_capacity(half);
        let mut half_weights = Vec::with_capacity(half);
        for i in 0..half {
            let (lo, wlo) = pairs[i];
            let (hi, whi) = pairs[order - 1 - i];
            half_nodes.push((hi - lo) / 2.0);
            half_weights.push((wlo + whi) / 2.0);
        }
        half_nodes.reverse();
        half_weights.reverse();
        let center_weight = (order % 2 == 1).then(|| pairs[half].1);
        Ok(GaussHermite { half_nodes, half_weights, center_weight, order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `E[f(rho)]` for `rho ~ N(0,1)`. Exactly zero for odd `f` that satisfies
    /// `f(-x) == -f(x)` in floating point.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = match self.center_weight {
            Some(w) => w * f(0.0),
            None => 0.0,
        };
        for (&x, &w) in self.half_nodes.iter().zip(&self.half_weights) {
            acc += w * (f(x) + f(-x));
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_moments() {
        let gh = GaussHermite::new(64).unwrap();
        assert_relative_eq!(gh.expect(|_| 1.0), 1.0, max_relative = 1e-14);
        assert_relative_eq!(gh.expect(|x| x * x), 1.0, max_relative = 1e-12);
        assert_relative_eq!(gh.expect(|x| x.powi(4)), 3.0, max_relative = 1e-12);
        assert_eq!(gh.expect(|x| x), 0.0);
        assert_eq!(gh.expect(|x| x.powi(3)), 0.0);
    }

    #[test]
    fn odd_integrand_is_exactly_zero() {
        for order in [16, 17, 64, 128] {
            let gh = GaussHermite::new(order).unwrap();
            assert_eq!(gh.expect(|x| 2.0 * x), 0.0, "order {order}");
        }
    }

    #[test]
    fn high_order_matches_known_expectation() {
        // E[exp(rho)] = exp(1/2)
        let gh = GaussHermite::new(96).unwrap();
        assert_relative_eq!(gh.expect(f64::exp), 0.5f64.exp(), max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_order() {
        assert!(GaussHermite::new(0).is_err());
        assert!(GaussHermite::new(513).is_err());
    }
}
