//! Execution-flow dynamics on one moment snapshot.
//!
//! The past flow operator `<Q_j|I|Q_k>` is diagonalized against the Gram
//! matrix; its largest eigenvalue serves as the estimate of the flow to
//! come, and the gap to the flow "now" (`dI`) enters a rank-one future
//! operator `I^f = I + |psi_0> dI <psi_0|`. Price estimators then read the
//! `p I` operator on these states.
//!
//! Volume operators carry prices measured from `MomentSet::price_ref`;
//! every price returned here is absolute.

mod distance;
mod measures;

pub use distance::{state_distance, time_distance, time_distance_matrix, TimeDistanceKind};
pub use measures::{pi_measure, saddle_point_state, PiSelector, SaddlePoint};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::moments::MomentSet;
use crate::spectral::{bilinear, product_moment_approx, GramFactor, SpectralSolution, DEFAULT_DEFLATION};

/// Relative guard on `|Upsilon dI|` before dividing by it.
pub const PF_GUARD: f64 = 1e-8;

/// Spectrum of the past flow operator and the state "now".
#[derive(Debug, Clone)]
pub struct FlowState {
    factor: GramFactor,
    solution: SpectralSolution,
    psi0: DVector<f64>,
    // psi_0 in the whitened frame of `factor`
    u0: DVector<f64>,
    g_psi0: DVector<f64>,
    i0: f64,
}

impl FlowState {
    /// `I_0 = <psi_0|I|psi_0>`, shares per second.
    pub fn i0(&self) -> f64 {
        self.i0
    }

    pub fn lambda_low(&self) -> f64 {
        self.solution.eigenvalue(0)
    }

    pub fn lambda_high(&self) -> f64 {
        self.solution.eigenvalue(self.solution.len() - 1)
    }

    /// `lambda_high - I_0`, the flow expected from not yet executed trades.
    pub fn di(&self) -> f64 {
        self.lambda_high() - self.i0
    }

    /// `<psi_0|psi_low>^2`.
    pub fn w_low(&self) -> f64 {
        self.projection(0)
    }

    /// `<psi_0|psi_high>^2`.
    pub fn w_high(&self) -> f64 {
        self.projection(self.solution.len() - 1)
    }

    /// `<psi_0|psi_i>^2`, taken in the whitened frame where the states are
    /// orthonormal, so the projections add up to one to rounding.
    pub fn projection(&self, i: usize) -> f64 {
        self.solution.reduced().column(i).dot(&self.u0).powi(2)
    }

    pub fn solution(&self) -> &SpectralSolution {
        &self.solution
    }

    pub fn factor(&self) -> &GramFactor {
        &self.factor
    }

    /// Coefficients of the normalized state localized at `x0`.
    pub fn psi0(&self) -> &DVector<f64> {
        &self.psi0
    }

    /// `G psi_0`, the covector of the rank-one future term.
    pub fn g_psi0(&self) -> &DVector<f64> {
        &self.g_psi0
    }

    pub fn psi_high(&self) -> DVector<f64> {
        self.solution.state(self.solution.len() - 1)
    }

    /// `(2 I_0 - lambda_low - lambda_high) / (lambda_low - lambda_high)`.
    pub fn gamma0(&self) -> Result<f64> {
        crate::skew::skewness_like(self.i0, self.lambda_low(), self.lambda_high())
    }
}

/// Solves `I a = lambda G a` and locates `psi_0`.
pub fn flow_spectrum(ms: &MomentSet) -> Result<FlowState> {
    flow_spectrum_with(ms, DEFAULT_DEFLATION)
}

/// [`flow_spectrum`] with an explicit relative deflation threshold for `G`.
pub fn flow_spectrum_with(ms: &MomentSet, deflation: f64) -> Result<FlowState> {
    let factor = GramFactor::new(ms.gram(), deflation)?;
    let solution = factor.solve(ms.flow());
    let local = factor.localized(ms.x0_row())?;
    let psi0 = local.coeffs().clone();
    let g_psi0 = ms.gram() * &psi0;
    let i0 = bilinear(ms.flow(), &psi0, &psi0);
    Ok(FlowState { factor, solution, psi0, u0: local.whitened().clone(), g_psi0, i0 })
}

/// `<Q_j|dI/dx|Q_k>` by integration by parts, `x` being the basis
/// abscissa so the rate is per unit `tau`:
/// `edge Q_j(x0) Q_k(x0) - <D Q_j|I|Q_k> - <Q_j|I|D Q_k>`.
///
/// `edge` is the unknown flow at the boundary `x = x0`; natural choices are
/// `0` (trading stops now) and `lambda_high`.
pub fn didt_operator(ms: &MomentSet, edge: f64) -> Result<DMatrix<f64>> {
    let n = ms.n();
    let d = ms.basis().time_shift_matrix(n - 1)?;
    let di = &d * ms.flow();
    let row = ms.x0_row();
    let mut out = row * row.transpose() * edge - &di - di.transpose();
    // exact symmetry
    for j in 0..n {
        for k in 0..j {
            let v = 0.5 * (out[(j, k)] + out[(k, j)]);
            out[(j, k)] = v;
            out[(k, j)] = v;
        }
    }
    Ok(out)
}

/// The future operator and its eigensystem.
#[derive(Debug, Clone)]
pub struct FutureSystem {
    operator: DMatrix<f64>,
    solution: SpectralSolution,
    di: f64,
    no_directional_info: bool,
}

impl FutureSystem {
    /// `<Q_j|I^f|Q_k> = <Q_j|I|Q_k> + dI (G psi_0)_j (G psi_0)_k`.
    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    pub fn solution(&self) -> &SpectralSolution {
        &self.solution
    }

    pub fn di(&self) -> f64 {
        self.di
    }

    pub fn lambda_low(&self) -> f64 {
        self.solution.eigenvalue(0)
    }

    pub fn lambda_high(&self) -> f64 {
        self.solution.eigenvalue(self.solution.len() - 1)
    }

    pub fn psi_high(&self) -> DVector<f64> {
        self.solution.state(self.solution.len() - 1)
    }

    /// True when `psi_0` is itself an eigenstate of `I^f`, so the past
    /// carries no directional information about the future.
    pub fn no_directional_info(&self) -> bool {
        self.no_directional_info
    }

    /// `<psi_0|psi_i^f>^2`.
    pub fn projection(&self, fs: &FlowState, i: usize) -> f64 {
        self.solution.reduced().column(i).dot(&fs.u0).powi(2)
    }

    /// Skewness-like position of `<psi_0|I^f|psi_0> = lambda_high` (past)
    /// within the future spectrum.
    pub fn gamma0(&self, fs: &FlowState) -> Result<f64> {
        crate::skew::skewness_like(fs.lambda_high(), self.lambda_low(), self.lambda_high())
    }
}

/// Rank-one future operator in basis coordinates.
pub fn future_operator(ms: &MomentSet, fs: &FlowState) -> DMatrix<f64> {
    let g = fs.g_psi0();
    ms.flow() + g * g.transpose() * fs.di()
}

/// Eigensystem of `I^f`.
pub fn solve_future(ms: &MomentSet, fs: &FlowState) -> Result<FutureSystem> {
    let operator = future_operator(ms, fs);
    // the rank-one term is built in the whitened frame, where G psi_0 is u0
    let w = fs.factor().whiten();
    let reduced = w.transpose() * ms.flow() * w + &fs.u0 * fs.u0.transpose() * fs.di();
    let solution = fs.factor().solve_reduced(reduced);
    // residual of psi_0 as an eigenvector: |G^+ I^f psi_0 - s psi_0|_G
    let psi0 = fs.psi0();
    let s = bilinear(&operator, psi0, psi0);
    let applied = fs.factor().pinv_apply(&(&operator * psi0));
    let resid = &applied - psi0 * s;
    let r2 = bilinear(ms.gram(), &resid, &resid);
    let scale = solution.eigenvalues().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let no_directional_info = r2 <= (1e-8 * scale).powi(2);
    Ok(FutureSystem { operator, solution, di: fs.di(), no_directional_info })
}

fn state_norm(ms: &MomentSet, psi: &DVector<f64>) -> Result<f64> {
    let norm = bilinear(ms.gram(), psi, psi);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ZeroState);
    }
    Ok(norm)
}

/// `<psi|dp/dt|psi> / <psi|psi>`, currency per second.
pub fn price_impact_direct(ms: &MomentSet, psi: &DVector<f64>) -> Result<f64> {
    let norm = state_norm(ms, psi)?;
    Ok(bilinear(ms.dpdt(), psi, psi) / norm)
}

/// First-order variation of `<psi|pI|psi>/<psi|I|psi>` under the time
/// shift `D`, converted to currency per second.
pub fn price_impact_var(ms: &MomentSet, psi: &DVector<f64>) -> Result<f64> {
    state_norm(ms, psi)?;
    let dpsi = DVector::from_vec(ms.basis().apply_time_shift(psi.as_slice())?);
    let pi = ms.price_flow(1).ok_or(Error::MissingMoment)?;
    let i = ms.flow();
    let ii = bilinear(i, psi, psi);
    if !(ii > 0.0) {
        return Err(Error::ZeroFlow);
    }
    let p_psi = bilinear(pi, psi, psi) / ii;
    let v = -2.0 * (bilinear(pi, &dpsi, psi) / ii - p_psi * bilinear(i, &dpsi, psi) / ii);
    Ok(v / ms.tau())
}

/// Both price-impact estimates; a large discrepancy signals a dominant
/// boundary contribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceImpact {
    pub direct: f64,
    pub variational: f64,
    pub discrepancy: f64,
}

pub fn price_impact(ms: &MomentSet, psi: &DVector<f64>) -> Result<PriceImpact> {
    let direct = price_impact_direct(ms, psi)?;
    let variational = price_impact_var(ms, psi)?;
    Ok(PriceImpact { direct, variational, discrepancy: direct - variational })
}

/// `<psi_high|pI|psi_high> / lambda_high`, a positively weighted average price.
pub fn equilibrium_price_pih(ms: &MomentSet, fs: &FlowState) -> Result<f64> {
    let lam = fs.lambda_high();
    if !(lam > 0.0) {
        return Err(Error::ZeroFlow);
    }
    let pi = ms.price_flow(1).ok_or(Error::MissingMoment)?;
    let psi = fs.psi_high();
    Ok(ms.price_ref() + bilinear(pi, &psi, &psi) / lam)
}

/// Degeneracy `Upsilon` and future price `P^f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfEstimate {
    pub upsilon: f64,
    pub pf: f64,
}

fn guard(upsilon: f64, di: f64, lambda_high: f64) -> Result<()> {
    let prod = upsilon * di;
    if !(prod.abs() > PF_GUARD * lambda_high.abs()) {
        return Err(Error::DegenerateFuture(prod));
    }
    Ok(())
}

/// Future price assuming `pI^f` is diagonal on the eigenstates of `I^f`.
pub fn pf_naive(ms: &MomentSet, fs: &FlowState, fut: &FutureSystem) -> Result<PfEstimate> {
    let pi = ms.price_flow(1).ok_or(Error::MissingMoment)?;
    let i0f = fs.lambda_high();
    let sol = fut.solution();
    let scale = sol.eigenvalues().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut upsilon = 1.0;
    let mut num = -bilinear(pi, fs.psi0(), fs.psi0());
    for i in 0..sol.len() {
        let lam = sol.eigenvalue(i);
        if lam.abs() <= 1e-12 * scale {
            continue;
        }
        let w = fut.projection(fs, i);
        let psi = sol.state(i);
        upsilon -= w * w * i0f / lam;
        num += bilinear(pi, &psi, &psi) * w * i0f / lam;
    }
    guard(upsilon, fs.di(), i0f)?;
    Ok(PfEstimate { upsilon, pf: ms.price_ref() + num / (upsilon * fs.di()) })
}

/// Skewness-matched future price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfSkew {
    pub gamma0_past: f64,
    pub gamma0_future: f64,
    pub upsilon: f64,
    pub pf: f64,
}

/// `P^f` for which `pI^f` has the same skewness on the extreme states of
/// `I^f` as `I^f` itself.
pub fn pf_skew_future(ms: &MomentSet, fs: &FlowState, fut: &FutureSystem) -> Result<PfSkew> {
    let pi = ms.price_flow(1).ok_or(Error::MissingMoment)?;
    let gamma0_past = fs.gamma0()?;
    let gf = fut.gamma0(fs)?;
    let sol = fut.solution();
    let (lo, hi) = (0, sol.len() - 1);
    let (wl, wh) = (fut.projection(fs, lo), fut.projection(fs, hi));
    let (sl, sh) = (sol.state(lo), sol.state(hi));
    let (al, ah) = (bilinear(pi, &sl, &sl), bilinear(pi, &sh, &sh));
    let a0 = bilinear(pi, fs.psi0(), fs.psi0());
    let upsilon = 2.0 - wl - wh - gf * (wl - wh);
    guard(upsilon, fs.di(), fs.lambda_high())?;
    let rhs = gf * (al - ah) - (2.0 * a0 - al - ah);
    Ok(PfSkew {
        gamma0_past,
        gamma0_future: gf,
        upsilon,
        pf: ms.price_ref() + rhs / (fs.di() * upsilon),
    })
}

/// First-order perturbative prices around `psi_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbative {
    pub p1: f64,
    pub p2: f64,
    /// Relative spread of `I` on `psi_0`.
    pub r: f64,
}

/// `phi = I psi_0 - I_0 psi_0` as a state, i.e. `G^+ I psi_0 - I_0 psi_0`.
pub fn perturbation_state(ms: &MomentSet, fs: &FlowState) -> DVector<f64> {
    fs.factor().pinv_apply(&(ms.flow() * fs.psi0())) - fs.psi0() * fs.i0()
}

pub fn perturbative_prices(ms: &MomentSet, fs: &FlowState) -> Result<Perturbative> {
    let pi = ms.price_flow(1).ok_or(Error::MissingMoment)?;
    let i = ms.flow();
    let phi = perturbation_state(ms, fs);
    let phiphi = bilinear(ms.gram(), &phi, &phi);
    let scale = fs.lambda_high().abs().max(fs.lambda_low().abs());
    if !(phiphi > (1e-8 * scale).powi(2)) {
        return Err(Error::EigenstateDegeneracy(phiphi));
    }
    let psi0 = fs.psi0();
    let p1 = ms.price_ref() + bilinear(pi, &phi, psi0) / bilinear(i, &phi, psi0);
    let p2 = ms.price_ref() + bilinear(pi, &phi, &phi) / bilinear(i, &phi, &phi);
    let ii = product_moment_approx(i, i, ms.gram())?;
    let spread = bilinear(&ii, psi0, psi0) - fs.i0() * fs.i0();
    let r = spread.max(0.0).sqrt() / fs.i0();
    Ok(Perturbative { p1, p2, r })
}
