//! Price measures `pi_m` built from one state or a mixture of states.
//!
//! All moments are of `(p - price_ref)`; the returned [`PiMoments`] carry
//! that shift, so quadrature nodes come out in absolute prices. The future
//! term `|psi_0> P^{fm} dI <psi_0|` uses `(P^f - price_ref)^m`.

use nalgebra::DVector;

use super::{FlowState, FutureSystem};
use crate::error::{Error, Result};
use crate::moments::{after_spike_moment, MomentSet};
use crate::skew::{quadrature2, PiMoments};
use crate::spectral::bilinear;

/// Which state or mixture the moments are taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiSelector {
    /// `psi = 1`: an exponential moving average.
    MovAver,
    /// Equal mixture of the past eigenstates, `Tr(G^+ p^m I)`.
    SpurNoDI,
    /// Top eigenstate of `I`.
    PastIH,
    /// Top eigenstate of `I^f` with the future term.
    FutureIH,
    /// Top eigenstate of `I^f` with `P^{fm}` chosen so that the first
    /// variation toward `psi_0` vanishes.
    EquilibriumIH,
    /// Volume traded after the spike of the top state of `I` or `I^f`.
    AfterSpike { future: bool },
    /// Equal mixture of the eigenstates of `I^f`.
    SpurF,
    /// Mixture of the eigenstates of `I^f` weighted by `<psi_i^f|psi_0>^2`.
    MixedW0,
}

impl PiSelector {
    pub const ALL: [PiSelector; 9] = [
        PiSelector::MovAver,
        PiSelector::SpurNoDI,
        PiSelector::PastIH,
        PiSelector::FutureIH,
        PiSelector::EquilibriumIH,
        PiSelector::AfterSpike { future: false },
        PiSelector::AfterSpike { future: true },
        PiSelector::SpurF,
        PiSelector::MixedW0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PiSelector::MovAver => "mov_aver",
            PiSelector::SpurNoDI => "spur_nodi",
            PiSelector::PastIH => "past_ih",
            PiSelector::FutureIH => "future_ih",
            PiSelector::EquilibriumIH => "equilibrium_ih",
            PiSelector::AfterSpike { future: false } => "after_spike_past",
            PiSelector::AfterSpike { future: true } => "after_spike_future",
            PiSelector::SpurF => "spur_f",
            PiSelector::MixedW0 => "mixed_w0",
        }
    }
}

// Number of price powers available, 4 or 5.
fn powers(ms: &MomentSet) -> Result<usize> {
    let top = ms.max_price_power();
    if top < 3 {
        return Err(Error::MissingMoment);
    }
    Ok(top.min(4) + 1)
}

fn state_moments(ms: &MomentSet, psi: &DVector<f64>, count: usize) -> Vec<f64> {
    (0..count).map(|m| bilinear(ms.price_flow(m).expect("checked power"), psi, psi)).collect()
}

/// `pi_m` under `selector`.
///
/// `pf` is the future price estimate, the last price when `None`.
pub fn pi_measure(
    ms: &MomentSet,
    fs: &FlowState,
    fut: &FutureSystem,
    selector: PiSelector,
    pf: Option<f64>,
) -> Result<PiMoments> {
    let count = powers(ms)?;
    let q = pf.unwrap_or_else(|| ms.last_price()) - ms.price_ref();
    let future_term = |m: usize, w: f64| q.powi(m as i32) * fut.di() * w;
    let g0 = fs.g_psi0();
    let pi: Vec<f64> = match selector {
        PiSelector::MovAver => (0..count).map(|m| ms.price_flow(m).expect("checked power")[(0, 0)]).collect(),
        PiSelector::SpurNoDI => {
            let sol = fs.solution();
            let mut acc = vec![0.0; count];
            for i in 0..sol.len() {
                let psi = sol.state(i);
                for (a, v) in acc.iter_mut().zip(state_moments(ms, &psi, count)) {
                    *a += v;
                }
            }
            acc
        }
        PiSelector::PastIH => state_moments(ms, &fs.psi_high(), count),
        PiSelector::FutureIH => {
            let psi = fut.psi_high();
            let w = psi.dot(g0).powi(2);
            state_moments(ms, &psi, count).iter().enumerate().map(|(m, a)| a + future_term(m, w)).collect()
        }
        PiSelector::EquilibriumIH => {
            let psi = fut.psi_high();
            let s = psi.dot(g0);
            let den = 1.0 - s * s;
            if !(den.abs() > 1e-12) {
                return Err(Error::DegenerateFuture(den));
            }
            (0..count)
                .map(|m| {
                    let v = ms.price_flow(m).expect("checked power");
                    (bilinear(v, &psi, &psi) - bilinear(v, &psi, fs.psi0()) * s) / den
                })
                .collect()
        }
        PiSelector::AfterSpike { future } => {
            let psi = if future { fut.psi_high() } else { fs.psi_high() };
            let top = if ms.raw(crate::moments::Observable::Volume(4)).is_empty() { 4 } else { 5 };
            (0..top).map(|m| after_spike_moment(ms, psi.as_slice(), m as u8)).collect::<Result<_>>()?
        }
        PiSelector::SpurF | PiSelector::MixedW0 => {
            let sol = fut.solution();
            let mut acc = vec![0.0; count];
            for i in 0..sol.len() {
                let psi = sol.state(i);
                let w = psi.dot(g0).powi(2);
                let mix = if selector == PiSelector::MixedW0 { w } else { 1.0 };
                for (m, (a, v)) in acc.iter_mut().zip(state_moments(ms, &psi, count)).enumerate() {
                    *a += (v + future_term(m, w)) * mix;
                }
            }
            acc
        }
    };
    PiMoments::from_slice(&pi, ms.price_ref())
}

/// Result of the alternating `L^4` saddle-point search.
#[derive(Debug, Clone)]
pub struct SaddlePoint {
    pub psi: DVector<f64>,
    pub p1: f64,
    pub p2: f64,
    /// `<psi|(p - p1)^2 (p - p2)^2 I|psi>` at the returned nodes.
    pub objective: f64,
    pub converged: bool,
    /// Set when the measure of `psi` sits at a single price.
    pub degenerate: bool,
    pub iterations: usize,
}

// pi moments of psi, with the future atom when requested.
pub(crate) fn psi_moments(ms: &MomentSet, fs: &FlowState, future: Option<(f64, f64)>, psi: &DVector<f64>) -> Result<PiMoments> {
    let mut pi = state_moments(ms, psi, 5);
    if let Some((q, di)) = future {
        let w = psi.dot(fs.g_psi0()).powi(2);
        for (m, v) in pi.iter_mut().enumerate() {
            *v += q.powi(m as i32) * di * w;
        }
    }
    PiMoments::from_slice(&pi, ms.price_ref())
}

/// `<.|(p - p1)^2 (p - p2)^2 I^{(f)}|.>` in basis coordinates.
pub(crate) fn node_operator(ms: &MomentSet, fs: &FlowState, future: Option<(f64, f64)>, p1: f64, p2: f64) -> nalgebra::DMatrix<f64> {
    let (a, b) = (p1 - ms.price_ref(), p2 - ms.price_ref());
    let (e1, e2) = (a + b, a * b);
    let c = [e2 * e2, -2.0 * e1 * e2, e1 * e1 + 2.0 * e2, -2.0 * e1, 1.0];
    let mut k = ms.flow() * c[0];
    for (m, cm) in c.iter().enumerate().skip(1) {
        k += ms.price_flow(m).expect("checked power") * *cm;
    }
    if let Some((q, di)) = future {
        let g = fs.g_psi0();
        k += g * g.transpose() * ((q - a) * (q - b)).powi(2) * di;
    }
    k
}

/// Alternates (a) the top eigenstate of `(p - p1)^2 (p - p2)^2 I` and
/// (b) the two-point quadrature nodes of that state's price measure.
///
/// With `fut` the search starts from the top state of `I^f` and includes
/// the future term at price `pf` (last price by default). A quadrature
/// failure mid-iteration returns the last consistent iterate unconverged.
pub fn saddle_point_state(
    ms: &MomentSet,
    fs: &FlowState,
    fut: Option<&FutureSystem>,
    pf: Option<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<SaddlePoint> {
    if ms.n() < 2 {
        return Err(Error::InvalidParameter("saddle point needs n >= 2"));
    }
    if ms.max_price_power() < 4 {
        return Err(Error::MissingMoment);
    }
    let future = fut.map(|f| (pf.unwrap_or_else(|| ms.last_price()) - ms.price_ref(), f.di()));
    let mut psi = match fut {
        Some(f) => f.psi_high(),
        None => fs.psi_high(),
    };
    let quad = match quadrature2(&psi_moments(ms, fs, future, &psi)?) {
        Ok(q) => q,
        Err(Error::DegenerateSupport { node, .. }) => {
            return Ok(SaddlePoint { psi, p1: node, p2: node, objective: 0.0, converged: true, degenerate: true, iterations: 0 });
        }
        Err(e) => return Err(e),
    };
    // one alternation: nodes -> top state -> nodes of that state
    let step = |p: [f64; 2]| -> Result<Option<(DVector<f64>, [f64; 2])>> {
        let k = node_operator(ms, fs, future, p[0], p[1]);
        let next = fs.factor().solve(&k).highest().1;
        match quadrature2(&psi_moments(ms, fs, future, &next)?) {
            Ok(q) => Ok(Some((next, [q.p1, q.p2]))),
            Err(Error::NoQuadrature) | Err(Error::DegenerateSupport { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let size = |r: [f64; 2]| r[0].abs() + r[1].abs();
    // Plain alternation can cycle, so the fixed point p = F(p) is found by
    // Newton steps on F(p) - p with a finite-difference Jacobian, falling
    // back to the alternation step when Newton does not reduce the residual.
    let mut p = [quad.p1, quad.p2];
    let objective = |psi: &DVector<f64>, p: [f64; 2]| bilinear(&node_operator(ms, fs, future, p[0], p[1]), psi, psi);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let Some((next, fp)) = step(p)? else { break };
        let r = [fp[0] - p[0], fp[1] - p[1]];
        if size(r) < tol {
            psi = next;
            p = fp;
            converged = true;
            break;
        }
        let h = 1e-7 * (p[1] - p[0]).abs().max(1e-9 * p[0].abs().max(1.0));
        let mut jac = [[0.0; 2]; 2];
        let mut ok = true;
        for c in 0..2 {
            let mut ph = p;
            ph[c] += h;
            match step(ph)? {
                Some((_, f)) => {
                    jac[0][c] = (f[0] - ph[0] - r[0]) / h;
                    jac[1][c] = (f[1] - ph[1] - r[1]) / h;
                }
                None => ok = false,
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let mut moved = false;
        if ok && det.abs() > 1e-14 {
            let dx = [(-r[0] * jac[1][1] + r[1] * jac[0][1]) / det, (-r[1] * jac[0][0] + r[0] * jac[1][0]) / det];
            let mut t = 1.0;
            for _ in 0..20 {
                let trial = [p[0] + t * dx[0], p[1] + t * dx[1]];
                if let Some((_, ft)) = step(trial)? {
                    if size([ft[0] - trial[0], ft[1] - trial[1]]) < size(r) {
                        p = trial;
                        moved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
        }
        if !moved {
            psi = next;
            p = fp;
        }
    }
    if converged {
        return Ok(SaddlePoint { objective: objective(&psi, p), psi, p1: p[0], p2: p[1], converged, degenerate: false, iterations });
    }
    // report a consistent pair: the top state of the last nodes and its own nodes
    if let Some((next, fp)) = step(p)? {
        psi = next;
        p = fp;
    }
    let (p1, p2) = (p[0], p[1]);
    let objective = |psi: &DVector<f64>, p1: f64, p2: f64| objective(psi, [p1, p2]);
    Ok(SaddlePoint { objective: objective(&psi, p1, p2), psi, p1, p2, converged, degenerate: false, iterations })
}
