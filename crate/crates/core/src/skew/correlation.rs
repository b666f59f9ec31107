use nalgebra::Matrix2;

use super::{pencil2, quadrature2, GaussQuadrature2, PiMoments};
use crate::error::{Error, Result};

/// Which joint distribution a 2x2 matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    /// Probability that `p = p_j` and `r = r_k`; elements sum to the total mass.
    L4Covariation,
    /// Squared eigenvector overlaps; rows and columns sum to one.
    PCorrelation,
}

/// Joint low/high distribution of two variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointDistribution2x2 {
    pub kind: JointKind,
    pub m: [[f64; 2]; 2],
}

impl JointDistribution2x2 {
    pub fn total(&self) -> f64 {
        self.m.iter().flatten().sum()
    }

    pub fn row_sum(&self, j: usize) -> f64 {
        self.m[j][0] + self.m[j][1]
    }

    pub fn col_sum(&self, k: usize) -> f64 {
        self.m[0][k] + self.m[1][k]
    }

    /// Diagonal minus off-diagonal, over the total.
    pub fn rho(&self) -> f64 {
        let m = &self.m;
        (m[0][0] + m[1][1] - m[0][1] - m[1][0]) / self.total()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueCorrelation {
    pub joint: JointDistribution2x2,
    pub rho: f64,
    /// `None` for a margin concentrated at one point.
    pub p_quadrature: Option<GaussQuadrature2>,
    pub r_quadrature: Option<GaussQuadrature2>,
}

// Nodes of one margin, or the single atom for a degenerate one.
enum Margin {
    Two(GaussQuadrature2),
    Atom,
}

fn margin(pi: &PiMoments) -> Result<Margin> {
    match quadrature2(pi) {
        Ok(q) => Ok(Margin::Two(q)),
        Err(Error::DegenerateSupport { .. }) => Ok(Margin::Atom),
        Err(e) => Err(e),
    }
}

/// Joint distribution of the quadrature levels of `p` and `r`.
///
/// `cross` is `<(p - shift_p)(r - shift_r)>` in the shifts of the two
/// moment sets. A margin supported at one point has no low/high split;
/// its mass is divided evenly, which makes the correlation zero.
pub fn value_correlation(pi_p: &PiMoments, pi_r: &PiMoments, cross: f64) -> Result<ValueCorrelation> {
    let mass = pi_p.mass();
    if (mass - pi_r.mass()).abs() > 1e-9 * mass.abs().max(pi_r.mass().abs()) {
        return Err(Error::MassMismatch(mass, pi_r.mass()));
    }
    let mp = margin(pi_p)?;
    let mr = margin(pi_r)?;
    let m = match (&mp, &mr) {
        (Margin::Two(qp), Margin::Two(qr)) => {
            // <(p - a)(r - b)> in shifted coordinates
            let (sp, sr) = (pi_p.shift(), pi_r.shift());
            let pr = |a: f64, b: f64| {
                let (a, b) = (a - sp, b - sr);
                cross - b * pi_p.pi[1] - a * pi_r.pi[1] + a * b * mass
            };
            let den = (qp.p1 - qp.p2) * (qr.p1 - qr.p2);
            [
                [pr(qp.p2, qr.p2) / den, -pr(qp.p2, qr.p1) / den],
                [-pr(qp.p1, qr.p2) / den, pr(qp.p1, qr.p1) / den],
            ]
        }
        (Margin::Two(q), Margin::Atom) => [[0.5 * q.w1, 0.5 * q.w1], [0.5 * q.w2, 0.5 * q.w2]],
        (Margin::Atom, Margin::Two(q)) => [[0.5 * q.w1, 0.5 * q.w2], [0.5 * q.w1, 0.5 * q.w2]],
        (Margin::Atom, Margin::Atom) => [[0.25 * mass; 2]; 2],
    };
    let joint = JointDistribution2x2 { kind: JointKind::L4Covariation, m };
    let q = |m: Margin| match m {
        Margin::Two(q) => Some(q),
        Margin::Atom => None,
    };
    Ok(ValueCorrelation { joint, rho: joint.rho(), p_quadrature: q(mp), r_quadrature: q(mr) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityCorrelation {
    pub joint: JointDistribution2x2,
    pub rho: f64,
    /// The same correlation from the spread of `f` across the `g` states.
    pub rho_derivative_form: f64,
    pub f_values: [f64; 2],
    pub g_values: [f64; 2],
}

/// Squared overlaps of the 2x2 eigenstates of `f` and `g`.
pub fn probability_correlation(f: &Matrix2<f64>, g_obs: &Matrix2<f64>, gram: &Matrix2<f64>) -> Result<ProbabilityCorrelation> {
    let pf = pencil2(f, gram)?;
    let pg = pencil2(g_obs, gram)?;
    let distinct = |v: [f64; 2]| v[1] - v[0] > 1e-12 * v[0].abs().max(v[1].abs());
    if !distinct(pf.values) || !distinct(pg.values) {
        return Err(Error::DegenerateSpectrum);
    }
    let mut m = [[0.0; 2]; 2];
    for (i, row) in m.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = (pf.vectors[i].transpose() * gram * pg.vectors[k])[(0, 0)].powi(2);
        }
    }
    let joint = JointDistribution2x2 { kind: JointKind::PCorrelation, m };
    let f_in = |k: usize| (pg.vectors[k].transpose() * f * pg.vectors[k])[(0, 0)];
    let derivative = (f_in(0) - f_in(1)) / (pf.values[0] - pf.values[1]);
    Ok(ProbabilityCorrelation {
        joint,
        rho: joint.rho(),
        rho_derivative_form: derivative,
        f_values: pf.values,
        g_values: pg.values,
    })
}
