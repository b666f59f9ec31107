//! Gauss rules for the two analytic time measures.
//!
//! Nodes come from the Golub-Welsch eigenproblem and are then polished by
//! Newton steps on the defining polynomial; weights use the classical
//! closed forms.

use nalgebra::{DMatrix, SymmetricEigen};

use super::TimeMeasure;

/// Nodes and weights of an `n`-point rule.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn jacobi_nodes(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = off[i];
            m[(i + 1, i)] = off[i];
        }
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));
    nodes
}

// (P_n(z), P_n'(z))
fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * z * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (z * p1 - p0) / (z * z - 1.0))
}

// (L_n(u), L_n'(u))
fn laguerre_with_derivative(n: usize, u: f64) -> (f64, f64) {
    let mut l0 = 1.0;
    let mut l1 = 1.0 - u;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let l2 = ((2.0 * kf + 1.0 - u) * l1 - kf * l0) / (kf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    let nf = n as f64;
    (l1, nf * (l1 - l0) / u)
}

/// Gauss-Legendre rule for `int_0^1 f(x) dx`.
pub fn gauss_legendre_unit(n: usize) -> GaussRule {
    assert!(n >= 1);
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| {
        let k = k as f64;
        k / (4.0 * k * k - 1.0).sqrt()
    }).collect();
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for mut z in jacobi_nodes(&diag, &off) {
        for _ in 0..3 {
            let (p, dp) = legendre_with_derivative(n, z);
            z -= p / dp;
        }
        let (_, dp) = legendre_with_derivative(n, z);
        nodes.push(0.5 * (z + 1.0));
        weights.push(1.0 / ((1.0 - z * z) * dp * dp));
    }
    GaussRule { nodes, weights }
}

/// Gauss-Laguerre rule for `int_0^inf f(u) e^{-u} du`.
pub fn gauss_laguerre(n: usize) -> GaussRule {
    assert!(n >= 1);
    let diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + 1.0).collect();
    let off: Vec<f64> = (1..n).map(|k| k as f64).collect();
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for mut u in jacobi_nodes(&diag, &off) {
        for _ in 0..3 {
            let (l, dl) = laguerre_with_derivative(n, u);
            u -= l / dl;
        }
        let (_, dl) = laguerre_with_derivative(n, u);
        nodes.push(u);
        weights.push(1.0 / (u * dl * dl));
    }
    GaussRule { nodes, weights }
}

/// Rule for integrating against the measure itself, in basis abscissae.
pub fn measure_rule(measure: TimeMeasure, n: usize) -> GaussRule {
    match measure {
        TimeMeasure::Laguerre => {
            let mut r = gauss_laguerre(n);
            r.nodes.iter_mut().for_each(|u| *u = -*u);
            r
        }
        TimeMeasure::Legendre => gauss_legendre_unit(n),
    }
}
