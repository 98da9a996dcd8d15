//! 1D conforming p-FEM space on (-1,1) with homogeneous Dirichlet ends.
//!
//! Hierarchic shape functions on the reference element [-1,1]: the two
//! vertex hats plus integrated-Legendre bubbles
//! `phi_j = (P_j - P_{j-2}) / sqrt(2(2j-1))`, `j = 2..=order`.
//! With the default 20 elements of order four this gives 19 vertex and 60
//! internal unknowns, 79 in total.

use nalgebra::{DMatrix, DVector};

use crate::quad::{gauss_rule, QuadratureRule};
use crate::orthopoly::Family;
use crate::{Error, Result};

const QUAD_POINTS: usize = 20;

/// Uniform mesh, local basis tableaus and the assembled unit-coefficient
/// stiffness matrix (the V-norm Gram matrix).
#[derive(Clone, Debug)]
pub struct FemSpace {
    pub elements: usize,
    pub order: usize,
    /// Element boundaries, `elements + 1` ascending values spanning (-1,1).
    pub nodes: Vec<f64>,
    ndof: usize,
    /// Reference quadrature rule with weights summing to 2.
    ref_rule: QuadratureRule,
    /// `basis_val[q][i]`: shape function `i` at reference point `q`.
    basis_val: Vec<Vec<f64>>,
    /// `basis_der[q][i]`: reference derivative of shape function `i`.
    basis_der: Vec<Vec<f64>>,
    vnorm_gram: DMatrix<f64>,
}

impl FemSpace {
    pub fn new(elements: usize, order: usize) -> Result<Self> {
        if elements < 1 || order < 1 {
            return Err(Error::Config("need at least one element of order one".into()));
        }
        let nodes: Vec<f64> = (0..=elements)
            .map(|i| -1.0 + 2.0 * i as f64 / elements as f64)
            .collect();
        // Probability rule on [-1,1] has weights summing to one; the
        // reference element uses the plain Lebesgue measure of mass 2.
        let mut ref_rule = gauss_rule(Family::Legendre, QUAD_POINTS);
        for w in ref_rule.weights.iter_mut() {
            *w *= 2.0;
        }
        let nloc = order + 1;
        let mut basis_val = vec![vec![0.0; nloc]; ref_rule.nodes.len()];
        let mut basis_der = vec![vec![0.0; nloc]; ref_rule.nodes.len()];
        for (q, &xi) in ref_rule.nodes.iter().enumerate() {
            for i in 0..nloc {
                basis_val[q][i] = shape_value(i, order, xi);
                basis_der[q][i] = shape_derivative(i, order, xi);
            }
        }
        let nv = elements - 1;
        let ndof = nv + elements * (order - 1);
        let mut space = FemSpace {
            elements,
            order,
            nodes,
            ndof,
            ref_rule,
            basis_val,
            basis_der,
            vnorm_gram: DMatrix::zeros(0, 0),
        };
        space.vnorm_gram = space.assemble_stiffness(&|_| 1.0);
        Ok(space)
    }

    pub fn ndof(&self) -> usize {
        self.ndof
    }

    pub fn element_width(&self) -> f64 {
        2.0 / self.elements as f64
    }

    /// Global dof of local shape `i` on element `e`; `None` for the two
    /// boundary vertices.
    fn dof(&self, e: usize, i: usize) -> Option<usize> {
        let nv = self.elements - 1;
        match i {
            0 => e.checked_sub(1),
            1 if e + 1 <= nv => Some(e),
            1 => None,
            _ => Some(nv + e * (self.order - 1) + (i - 2)),
        }
    }

    /// Number of quadrature points per element.
    pub fn points_per_element(&self) -> usize {
        self.ref_rule.nodes.len()
    }

    /// Physical coordinates of the quadrature points of element `e`.
    pub fn quad_points(&self, e: usize) -> Vec<f64> {
        let mid = 0.5 * (self.nodes[e] + self.nodes[e + 1]);
        let h = self.nodes[e + 1] - self.nodes[e];
        self.ref_rule
            .nodes
            .iter()
            .map(|&xi| mid + 0.5 * h * xi)
            .collect()
    }

    /// Quadrature weight of point `q` on any element (uniform mesh), with
    /// the Jacobian included.
    pub fn quad_weight(&self, q: usize) -> f64 {
        0.5 * self.element_width() * self.ref_rule.weights[q]
    }

    /// Assembles the weighted stiffness matrix `int a(x) u' v' dx`.
    pub fn assemble_stiffness(&self, coefficient: &dyn Fn(f64) -> f64) -> DMatrix<f64> {
        let nloc = self.order + 1;
        let mut global = DMatrix::zeros(self.ndof, self.ndof);
        let scale = 2.0 / self.element_width();
        for e in 0..self.elements {
            let points = self.quad_points(e);
            let mut local = vec![0.0; nloc * nloc];
            for (q, &x) in points.iter().enumerate() {
                let c = coefficient(x) * self.ref_rule.weights[q] * scale;
                for i in 0..nloc {
                    let di = self.basis_der[q][i];
                    for j in i..nloc {
                        local[i * nloc + j] += c * di * self.basis_der[q][j];
                    }
                }
            }
            for i in 0..nloc {
                let Some(gi) = self.dof(e, i) else { continue };
                for j in i..nloc {
                    let Some(gj) = self.dof(e, j) else { continue };
                    let v = local[i * nloc + j];
                    global[(gi, gj)] += v;
                    if gi != gj {
                        global[(gj, gi)] += v;
                    }
                }
            }
        }
        global
    }

    /// Load vector for the constant unit load.
    pub fn assemble_unit_load(&self) -> DVector<f64> {
        let nloc = self.order + 1;
        let mut load = DVector::zeros(self.ndof);
        let jac = 0.5 * self.element_width();
        for e in 0..self.elements {
            for q in 0..self.ref_rule.nodes.len() {
                let w = self.ref_rule.weights[q] * jac;
                for i in 0..nloc {
                    if let Some(gi) = self.dof(e, i) {
                        load[gi] += w * self.basis_val[q][i];
                    }
                }
            }
        }
        load
    }

    /// Values of the FEM function `coeffs` at all quadrature points,
    /// element-major: `out[e * nq + q]`.
    pub fn values_at_quad_points(&self, coeffs: &DVector<f64>) -> Vec<f64> {
        let nloc = self.order + 1;
        let nq = self.ref_rule.nodes.len();
        let mut out = vec![0.0; self.elements * nq];
        for e in 0..self.elements {
            for q in 0..nq {
                let mut v = 0.0;
                for i in 0..nloc {
                    if let Some(gi) = self.dof(e, i) {
                        v += coeffs[gi] * self.basis_val[q][i];
                    }
                }
                out[e * nq + q] = v;
            }
        }
        out
    }

    /// Pointwise evaluation at an arbitrary location.
    pub fn value_at(&self, coeffs: &DVector<f64>, x: f64) -> f64 {
        let h = self.element_width();
        let e = (((x + 1.0) / h).floor() as isize).clamp(0, self.elements as isize - 1) as usize;
        let xi = (x - 0.5 * (self.nodes[e] + self.nodes[e + 1])) / (0.5 * h);
        let mut v = 0.0;
        for i in 0..=self.order {
            if let Some(gi) = self.dof(e, i) {
                v += coeffs[gi] * shape_value(i, self.order, xi);
            }
        }
        v
    }

    /// `L^2(D)` norm of a field given by its quadrature-point values.
    pub fn l2_norm_at_quad(&self, values: &[f64]) -> f64 {
        let nq = self.ref_rule.nodes.len();
        let mut acc = 0.0;
        for e in 0..self.elements {
            for q in 0..nq {
                let v = values[e * nq + q];
                acc += self.quad_weight(q) * v * v;
            }
        }
        acc.sqrt()
    }

    /// Energy (gradient) norm `||v'||_{L^2}` of a FEM function.
    pub fn v_norm(&self, coeffs: &DVector<f64>) -> f64 {
        (coeffs.dot(&(&self.vnorm_gram * coeffs))).max(0.0).sqrt()
    }
}

/// Legendre polynomial `P_n` (classical normalization).
fn legendre_p(n: usize, x: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        _ => {
            let mut prev = 1.0;
            let mut cur = x;
            for k in 1..n {
                let k = k as f64;
                let next = ((2.0 * k + 1.0) * x * cur - k * prev) / (k + 1.0);
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

fn shape_value(i: usize, order: usize, xi: f64) -> f64 {
    debug_assert!(i <= order);
    match i {
        0 => 0.5 * (1.0 - xi),
        1 => 0.5 * (1.0 + xi),
        _ => {
            let j = i; // bubble degree
            (legendre_p(j, xi) - legendre_p(j - 2, xi)) / (2.0 * (2.0 * j as f64 - 1.0)).sqrt()
        }
    }
}

fn shape_derivative(i: usize, order: usize, xi: f64) -> f64 {
    debug_assert!(i <= order);
    match i {
        0 => -0.5,
        1 => 0.5,
        _ => {
            // d/dxi (P_j - P_{j-2}) = (2j-1) P_{j-1}.
            let j = i;
            ((2.0 * j as f64 - 1.0) / 2.0).sqrt() * legendre_p(j - 1, xi)
        }
    }
}
