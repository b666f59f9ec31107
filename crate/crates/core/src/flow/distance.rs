//! Antisymmetric time distances `d_jk` between two states.
//!
//! Positive `d_jk` means state `j` lies later in time than state `k`.

use nalgebra::DVector;

use crate::basis::gauss::{gauss_laguerre, gauss_legendre_unit};
use crate::basis::TimeMeasure;
use crate::error::{Error, Result};
use crate::moments::{after_spike_moment, cumulative_weight_factor, MomentSet};
use crate::spectral::{bilinear, SpectralSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDistanceKind {
    /// `P(j after k) - P(j before k)` under `psi_j^2 dmu x psi_k^2 dmu`.
    SignProp,
    /// Difference of the volume traded before each state.
    Volume,
    /// `psi_j(x0)^2 - psi_k(x0)^2`.
    Projection,
    /// Volume since the state per unit of its own flow, minus one.
    SecondOrder,
}

/// `d_jk` between states `j` and `k` of `sol`.
pub fn time_distance(sol: &SpectralSolution, j: usize, k: usize, kind: TimeDistanceKind, ms: &MomentSet) -> Result<f64> {
    if j == k {
        return Ok(0.0);
    }
    state_distance(&sol.state(j), &sol.state(k), kind, ms)
}

/// `d_jk` between two arbitrary states given by basis coefficients.
pub fn state_distance(a: &DVector<f64>, b: &DVector<f64>, kind: TimeDistanceKind, ms: &MomentSet) -> Result<f64> {
    Ok(match kind {
        TimeDistanceKind::SignProp => {
            let measure = ms.kind().time_measure().ok_or(Error::NoTimeShiftOperator)?;
            sign_prop(ms, measure, a, b)?
        }
        TimeDistanceKind::Volume => after_volume(ms, b)? - after_volume(ms, a)?,
        TimeDistanceKind::Projection => {
            let row = ms.x0_row();
            let at = |psi: &DVector<f64>| Ok::<_, Error>(row.dot(psi).powi(2) / norm(ms, psi)?);
            at(a)? - at(b)?
        }
        TimeDistanceKind::SecondOrder => second_order(ms, a)? - second_order(ms, b)?,
    })
}

/// The full antisymmetric matrix over the states of `sol`.
pub fn time_distance_matrix(sol: &SpectralSolution, kind: TimeDistanceKind, ms: &MomentSet) -> Result<nalgebra::DMatrix<f64>> {
    let n = sol.len();
    let mut d = nalgebra::DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..j {
            let v = time_distance(sol, j, k, kind, ms)?;
            d[(j, k)] = v;
            d[(k, j)] = -v;
        }
    }
    Ok(d)
}

fn norm(ms: &MomentSet, psi: &DVector<f64>) -> Result<f64> {
    let n = bilinear(ms.gram(), psi, psi);
    if !(n > 0.0) {
        return Err(Error::ZeroState);
    }
    Ok(n)
}

// <psi|V_{x0} - V|psi> / <psi|psi>, the volume traded after the state.
fn after_volume(ms: &MomentSet, psi: &DVector<f64>) -> Result<f64> {
    Ok(after_spike_moment(ms, psi.as_slice(), 0)? / norm(ms, psi)?)
}

fn second_order(ms: &MomentSet, psi: &DVector<f64>) -> Result<f64> {
    let nrm = norm(ms, psi)?;
    let lambda = bilinear(ms.flow(), psi, psi) / nrm;
    if !(lambda > 0.0) {
        return Err(Error::ZeroFlow);
    }
    let at_now = ms.x0_row().dot(psi).powi(2) / nrm;
    Ok(at_now * after_volume(ms, psi)? / (lambda * ms.tau()) - 1.0)
}

// int psi_a^2(x) W_b(x) dmu - (a <-> b), W the cumulative weight of psi_b^2.
fn sign_prop(ms: &MomentSet, measure: TimeMeasure, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    let basis = ms.basis();
    let (na, nb) = (norm(ms, a)?, norm(ms, b)?);
    let ga = cumulative_weight_factor(basis, a.as_slice())?;
    let gb = cumulative_weight_factor(basis, b.as_slice())?;
    let sq = |psi: &DVector<f64>, x: f64| basis.eval_poly(psi.as_slice(), x).powi(2);
    // integrands are polynomials of degree <= 4(n-1)+1 against the rule's weight
    let points = 2 * ms.n() + 2;
    let cross = |x: f64| sq(a, x) * basis.eval_poly(&gb, x) - sq(b, x) * basis.eval_poly(&ga, x);
    let total = match measure {
        // e^x W(x) e^x dx with u = -2x
        TimeMeasure::Laguerre => 0.5 * gauss_laguerre(points).integrate(|u| cross(-0.5 * u)),
        TimeMeasure::Legendre => gauss_legendre_unit(points).integrate(|x| x * cross(x)),
    };
    Ok(total / (na * nb))
}
