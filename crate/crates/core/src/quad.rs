//! Gaussian quadrature rules for the probability measures of the two
//! polynomial families: uniform density 1/2 on [-1,1] and the standard
//! Gaussian density on the real line.
//!
//! Nodes and weights come from the Golub-Welsch eigendecomposition of the
//! tridiagonal recurrence (Jacobi) matrix of the orthonormal family; the
//! weights sum to one because the measures are probability measures.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::orthopoly::{eval_poly, Family};

/// An `n`-point rule integrating polynomials of degree `2n-1` exactly
/// against the family's probability density.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Integrates by summing mirrored node pairs first, then accumulating
    /// with compensation. The node set is exactly symmetric, so odd
    /// integrands cancel exactly and the rules stay usable as reference
    /// oracles at the 1e-12 level.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let n = self.nodes.len();
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        let mut add = |v: f64| {
            let term = v - comp;
            let next = sum + term;
            comp = (next - sum) - term;
            sum = next;
        };
        for i in 0..n / 2 {
            let j = n - 1 - i;
            add(self.weights[i] * f(self.nodes[i]) + self.weights[j] * f(self.nodes[j]));
        }
        if n % 2 == 1 {
            let mid = n / 2;
            add(self.weights[mid] * f(self.nodes[mid]));
        }
        sum
    }
}

/// Builds the `n`-point Gauss rule for `family`'s probability measure.
pub fn gauss_rule(family: Family, n: usize) -> QuadratureRule {
    assert!(n >= 1);
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        let b = off_diagonal(family, i);
        jac[(i, i + 1)] = b;
        jac[(i + 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    // The eigensolver is only good to ~1e-12 here; polish each node with
    // Newton on the orthonormal polynomial and use the closed-form weights.
    for x in nodes.iter_mut() {
        for _ in 0..4 {
            let v = eval_poly(family, n as u32, *x);
            let d = poly_derivative(family, n as u32, *x);
            let step = v / d;
            *x -= step;
            if step.abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
                break;
            }
        }
    }
    // Both measures are symmetric; enforce exact +/- node pairing.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let weights = nodes.iter().map(|&x| node_weight(family, n, x)).collect();
    QuadratureRule { nodes, weights }
}

/// Derivative of the orthonormal polynomial `phi_n`.
fn poly_derivative(family: Family, n: u32, x: f64) -> f64 {
    match family {
        Family::Legendre => {
            if n == 0 {
                return 0.0;
            }
            let ln = eval_poly(family, n, x);
            let lm = eval_poly(family, n - 1, x);
            let c = ((2 * n + 1) as f64 / (2 * n - 1) as f64).sqrt();
            n as f64 * (x * ln - c * lm) / (x * x - 1.0)
        }
        Family::Hermite => {
            if n == 0 {
                return 0.0;
            }
            (n as f64).sqrt() * eval_poly(family, n - 1, x)
        }
    }
}

/// Closed-form Gauss weight at a root `x` of `phi_n`, normalized to the
/// probability measure.
fn node_weight(family: Family, n: usize, x: f64) -> f64 {
    match family {
        Family::Legendre => {
            let d = poly_derivative(family, n as u32, x);
            (2.0 * n as f64 + 1.0) / ((1.0 - x * x) * d * d)
        }
        Family::Hermite => {
            let h = eval_poly(family, n as u32 - 1, x);
            1.0 / (n as f64 * h * h)
        }
    }
}

/// Off-diagonal recurrence coefficient of the orthonormal family:
/// `y phi_i = b_i phi_{i+1} + b_{i-1} phi_{i-1}` (diagonal terms vanish for
/// both families by symmetry).
fn off_diagonal(family: Family, i: usize) -> f64 {
    let n = i as f64;
    match family {
        Family::Legendre => (n + 1.0) / ((2.0 * n + 1.0) * (2.0 * n + 3.0)).sqrt(),
        Family::Hermite => (n + 1.0).sqrt(),
    }
}
