//! Moment-level estimators built on two-point Gauss quadratures.
//!
//! Everything here takes a handful of scalar moments (or 2x2 matrices) and
//! is cheap enough to run on every tick.

mod correlation;
mod family;

pub use correlation::{
    probability_correlation, value_correlation, JointDistribution2x2, JointKind, ProbabilityCorrelation,
    ValueCorrelation,
};
pub use family::{frontrun_pnl, pf_family, FrontrunPnl, PfFamily, PfPoint};

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Price moments `pi_m = <(p - shift)^m>` of a positive (or signed) measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiMoments {
    pi: [f64; 4],
    pi4: Option<f64>,
    shift: f64,
}

impl PiMoments {
    pub fn new(pi: [f64; 4], pi4: Option<f64>) -> Self {
        PiMoments { pi, pi4, shift: 0.0 }
    }

    /// Moments of `p - shift`; results are reported in absolute prices.
    pub fn with_shift(pi: [f64; 4], pi4: Option<f64>, shift: f64) -> Self {
        PiMoments { pi, pi4, shift }
    }

    /// Builds from a slice of four or five moments.
    pub fn from_slice(pi: &[f64], shift: f64) -> Result<Self> {
        if pi.len() < 4 {
            return Err(Error::MissingMoment);
        }
        Ok(PiMoments { pi: [pi[0], pi[1], pi[2], pi[3]], pi4: pi.get(4).copied(), shift })
    }

    pub fn pi(&self, m: usize) -> Option<f64> {
        match m {
            0..=3 => Some(self.pi[m]),
            4 => self.pi4,
            _ => None,
        }
    }

    pub fn mass(&self) -> f64 {
        self.pi[0]
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn pi4(&self) -> Option<f64> {
        self.pi4
    }

    /// Weighted mean in absolute prices.
    pub fn mean(&self) -> f64 {
        self.shift + self.pi[1] / self.pi[0]
    }

    /// Same measure, moments taken about `center` instead.
    pub fn recentered(&self, center: f64) -> Self {
        let d = center - self.shift;
        let [p0, p1, p2, p3] = self.pi;
        // (y - d)^m binomial expansion
        let q1 = p1 - d * p0;
        let q2 = p2 - 2.0 * d * p1 + d * d * p0;
        let q3 = p3 - 3.0 * d * p2 + 3.0 * d * d * p1 - d * d * d * p0;
        let q4 = self
            .pi4
            .map(|p4| p4 - 4.0 * d * p3 + 6.0 * d * d * p2 - 4.0 * d * d * d * p1 + d.powi(4) * p0);
        PiMoments { pi: [p0, q1, q2, q3], pi4: q4, shift: center }
    }

    /// Adds a point mass `weight` at absolute price `at`.
    pub fn with_atom(&self, at: f64, weight: f64) -> Self {
        let y = at - self.shift;
        let mut pi = self.pi;
        let mut pw = weight;
        for v in pi.iter_mut() {
            *v += pw;
            pw *= y;
        }
        PiMoments { pi, pi4: self.pi4.map(|p4| p4 + weight * y.powi(4)), shift: self.shift }
    }

    // normalized central moments (mean, c2, c3, c4)
    fn central(&self) -> (f64, f64, f64, Option<f64>) {
        let r1 = self.pi[1] / self.pi[0];
        let c = self.recentered(self.shift + r1);
        let n = self.pi[0];
        (r1, c.pi[2] / n, c.pi[3] / n, c.pi4.map(|v| v / n))
    }
}

/// Two-point Gauss quadrature `p1 <= p2` with weights `w1, w2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussQuadrature2 {
    pub p1: f64,
    pub p2: f64,
    pub w1: f64,
    pub w2: f64,
    /// `(w1 - w2) / (w1 + w2)`.
    pub gamma: f64,
}

impl GaussQuadrature2 {
    pub fn mass(&self) -> f64 {
        self.w1 + self.w2
    }

    pub fn mean(&self) -> f64 {
        (self.p1 * self.w1 + self.p2 * self.w2) / self.mass()
    }

    /// `(2 mean - p1 - p2) / (p1 - p2)`, algebraically equal to `gamma`.
    pub fn gamma_from_nodes(&self) -> f64 {
        (2.0 * self.mean() - self.p1 - self.p2) / (self.p1 - self.p2)
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.w1 * f(self.p1) + self.w2 * f(self.p2)
    }
}

/// Two-point Gauss quadrature reproducing `pi_0 .. pi_3`.
///
/// Nodes are the roots of the monic degree-2 orthogonal polynomial of the
/// measure, computed about the mean so the quadratic is well conditioned.
pub fn quadrature2(pi: &PiMoments) -> Result<GaussQuadrature2> {
    let p0 = pi.pi[0];
    if !(p0 > 0.0) || pi.pi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoQuadrature);
    }
    let (r1, c2, c3, _) = pi.central();
    let scale = pi.pi[2] / p0;
    if c2 <= 64.0 * f64::EPSILON * scale.abs() {
        if c2 < -64.0 * f64::EPSILON * scale.abs() {
            return Err(Error::NoQuadrature);
        }
        return Err(Error::DegenerateSupport { node: pi.shift + r1, mass: p0 });
    }
    // y^2 - s y - c2 with s = c3 / c2; roots of opposite sign
    let s = c3 / c2;
    let root = (s * s + 4.0 * c2).sqrt();
    let big = 0.5 * (s + s.signum() * root);
    let big = if s == 0.0 { 0.5 * root } else { big };
    let small = -c2 / big;
    let (x1, x2) = if big < small { (big, small) } else { (small, big) };
    let gap = x2 - x1;
    let w1 = p0 * x2 / gap;
    let w2 = -p0 * x1 / gap;
    let center = pi.shift + r1;
    Ok(GaussQuadrature2 { p1: center + x1, p2: center + x2, w1, w2, gamma: (w1 - w2) / (w1 + w2) })
}

/// `<(p - q1)^2 (p - q2)^2>` for arbitrary nodes `q1, q2`.
pub fn l4_volatility_at(pi: &PiMoments, q1: f64, q2: f64) -> Result<f64> {
    if pi.pi4.is_none() {
        return Err(Error::MissingMoment);
    }
    let (r1, c2, c3, c4) = pi.central();
    let c4 = c4.ok_or(Error::MissingMoment)?;
    let mean = pi.shift + r1;
    let (a1, a2) = (q1 - mean, q2 - mean);
    let e1 = a1 + a2;
    let e2 = a1 * a2;
    Ok(pi.pi[0] * (c4 - 2.0 * e1 * c3 + (e1 * e1 + 2.0 * e2) * c2 + e2 * e2))
}

/// `<(p - p1)^2 (p - p2)^2>` at the quadrature nodes, its minimum over nodes.
pub fn l4_volatility(pi: &PiMoments, quad: &GaussQuadrature2) -> Result<f64> {
    l4_volatility_at(pi, quad.p1, quad.p2)
}

/// Eigen-decomposition of a symmetric 2x2 pencil `(s, g)`.
#[derive(Debug, Clone, Copy)]
pub struct Pencil2 {
    /// Ascending eigenvalues.
    pub values: [f64; 2],
    /// `g`-orthonormal eigenvectors matching `values`.
    pub vectors: [Vector2<f64>; 2],
}

/// Solves `s a = lambda g a` for 2x2 symmetric `s` and positive definite `g`.
pub fn pencil2(s: &Matrix2<f64>, g: &Matrix2<f64>) -> Result<Pencil2> {
    let g = (g + g.transpose()) * 0.5;
    let s = (s + s.transpose()) * 0.5;
    let chol = g.cholesky().ok_or(Error::SingularGram)?;
    let l_inv = chol.l().try_inverse().ok_or(Error::SingularGram)?;
    let m = l_inv * s * l_inv.transpose();
    let (a, b, c) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
    let mid = 0.5 * (a + c);
    let half = (0.5 * (a - c)).hypot(b);
    let values = [mid - half, mid + half];
    let mut vectors = [Vector2::zeros(); 2];
    for (k, &lam) in values.iter().enumerate() {
        // pick the better-conditioned null vector of m - lam
        let r0 = Vector2::new(b, lam - a);
        let r1 = Vector2::new(lam - c, b);
        let mut v = if r0.norm() >= r1.norm() { r0 } else { r1 };
        if v.norm() == 0.0 {
            v = if k == 0 { Vector2::new(1.0, 0.0) } else { Vector2::new(0.0, 1.0) };
        }
        v /= v.norm();
        let mut u = l_inv.transpose() * v;
        if u[0] < 0.0 || (u[0] == 0.0 && u[1] < 0.0) {
            u = -u;
        }
        vectors[k] = u;
    }
    Ok(Pencil2 { values, vectors })
}

/// Spectral min/max of an observable and the skewness-like indicators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedSkewness {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Asymmetry of `s_bar = <s Q_0>/<Q_0>` within `[lambda_min, lambda_max]`.
    pub gamma: f64,
    /// Asymmetry of the supplied reference value.
    pub gamma0: f64,
}

/// `(2 s - smin - smax) / (smin - smax)`.
pub fn skewness_like(s: f64, smin: f64, smax: f64) -> Result<f64> {
    let width = smax - smin;
    if !(width > 1e-12 * smin.abs().max(smax.abs())) {
        return Err(Error::DegenerateSpectrum);
    }
    Ok((2.0 * s - smin - smax) / (smin - smax))
}

/// Min/max estimators of `s` over states `a_0 Q_0 + a_1 Q_1`, with
/// `s_matrix = <Q_j|s|Q_k>` and `g = <Q_j|Q_k>`; `Q_0` must be constant.
pub fn generalized_skewness(s_matrix: &Matrix2<f64>, g: &Matrix2<f64>, s_ref: f64) -> Result<GeneralizedSkewness> {
    let pencil = pencil2(s_matrix, g)?;
    let [lo, hi] = pencil.values;
    let s_bar = s_matrix[(0, 0)] / g[(0, 0)];
    Ok(GeneralizedSkewness {
        lambda_min: lo,
        lambda_max: hi,
        gamma: skewness_like(s_bar, lo, hi)?,
        gamma0: skewness_like(s_ref, lo, hi)?,
    })
}
