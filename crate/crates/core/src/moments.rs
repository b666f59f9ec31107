//! Streaming accumulation of exponentially weighted tick moments.
//!
//! For every observable `f` the accumulator keeps `<Q_k f>` for
//! `k <= 2n`, the moments of `f` against the basis under the
//! exponential time weight. Advancing the clock re-expands the moments
//! in place, so each tick costs the same regardless of history length.
//!
//! Units: the time weight of a tick is `dt/tau` (seconds over seconds) and
//! the volume observables deposit `p^m dV / tau`, so that ratios of the two
//! are rates in shares per second. Prices inside the volume observables are
//! measured from a reference price to keep the higher powers well
//! conditioned. It starts at the first traded price and is moved to the
//! volume-weighted mean whenever the two drift apart by more than the price
//! spread; [`MomentSet::price_ref`] restores absolute prices.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::basis::{BasisKind, PolyBasis, PriceFrame, ProductTable, TimeMeasure};
use crate::error::{Error, Result};

const NANOS_PER_SECOND: f64 = 1e9;

/// One executed trade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeTick {
    /// Nanoseconds since midnight.
    pub t: i64,
    pub price: f64,
    pub shares: f64,
}

impl TradeTick {
    pub fn new(t: i64, price: f64, shares: f64) -> Result<Self> {
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::InvalidTick("price must be positive"));
        }
        if !(shares.is_finite() && shares > 0.0) {
            return Err(Error::InvalidTick("shares must be positive"));
        }
        Ok(TradeTick { t, price, shares })
    }
}

/// Quantities averaged against the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// `f = 1`: the time measure itself.
    Time,
    /// `f = p^m I` for `m` in `0..=4`.
    Volume(u8),
    /// `f = dp/dt`.
    PriceChange,
}

impl Observable {
    pub const COUNT: usize = 7;
    pub const MAX_PRICE_POWER: u8 = 4;

    pub fn index(self) -> usize {
        match self {
            Observable::Time => 0,
            Observable::Volume(m) => {
                assert!(m <= Self::MAX_PRICE_POWER);
                1 + m as usize
            }
            Observable::PriceChange => 6,
        }
    }
}

/// Streaming moment state for one symbol.
#[derive(Debug, Clone)]
pub struct MeasureAccumulator {
    basis: Arc<PolyBasis>,
    n: usize,
    tau: f64,
    price_frame_fixed: bool,
    price_ref: Option<f64>,
    /// The reference price stays where it was put instead of following
    /// the volume-weighted mean.
    price_ref_pinned: bool,
    t_now: Option<i64>,
    last_price: f64,
    moments: [Vec<f64>; Observable::COUNT],
    products: Arc<ProductTable>,
    q_scratch: Vec<f64>,
    companion: Option<Box<MeasureAccumulator>>,
}

impl MeasureAccumulator {
    /// Accumulator for basis dimension `n`, moments to degree `2n`.
    ///
    /// A price basis is centered at the first traded price with a half-width
    /// of one percent of it unless [`with_price_frame`](Self::with_price_frame)
    /// is used.
    pub fn new(kind: BasisKind, n: usize, tau_seconds: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::DegreeOutOfRange { degree: 0, max: 0 });
        }
        if !(tau_seconds.is_finite() && tau_seconds > 0.0) {
            return Err(Error::DegenerateScale);
        }
        let basis = PolyBasis::new(kind, 2 * n);
        let products = basis.product_table_upto(n - 1);
        let len = 2 * n + 1;
        Ok(MeasureAccumulator {
            basis: Arc::new(basis),
            n,
            tau: tau_seconds,
            price_frame_fixed: false,
            price_ref: None,
            price_ref_pinned: false,
            t_now: None,
            last_price: f64::NAN,
            moments: std::array::from_fn(|_| vec![0.0; len]),
            products: Arc::new(products),
            q_scratch: vec![0.0; len],
            companion: None,
        })
    }

    /// Also accumulates the same ticks in the graded monomial basis of the
    /// same time measure (`x^k` for Laguerre, `(1 - x)^k` for Legendre).
    ///
    /// Orthogonal bases lose the small directions of the Gram matrix to
    /// cancellation while the history is short compared to `tau`; graded
    /// monomials keep them. [`snapshot_conditioned`](Self::snapshot_conditioned)
    /// picks whichever representation is better conditioned. Must be set
    /// before the first tick; a no-op for bases that are already graded.
    pub fn with_graded_companion(mut self) -> Result<Self> {
        if self.t_now.is_some() {
            return Err(Error::InvalidParameter("companion must be attached before the first tick"));
        }
        let graded = match self.basis.kind() {
            BasisKind::LaguerreTime => Some(BasisKind::MonomialTime),
            BasisKind::ShiftedLegendreTime => Some(BasisKind::MonomialLegendreTime),
            _ => None,
        };
        if let Some(kind) = graded {
            let mut c = MeasureAccumulator::new(kind, self.n, self.tau)?;
            c.price_ref = self.price_ref;
            c.price_ref_pinned = true;
            self.companion = Some(Box::new(c));
        }
        Ok(self)
    }

    pub fn graded_companion(&self) -> Option<&MeasureAccumulator> {
        self.companion.as_deref()
    }

    /// Fixes the price-basis normalization (and the reference price) up front.
    pub fn with_price_frame(mut self, frame: PriceFrame) -> Result<Self> {
        if self.basis.kind() == BasisKind::PricePoly {
            self.basis = Arc::new(PolyBasis::price(2 * self.n, frame)?);
            self.products = Arc::new(self.basis.product_table_upto(self.n - 1));
            self.price_frame_fixed = true;
        }
        self.price_ref = Some(frame.center);
        self.price_ref_pinned = true;
        if let Some(c) = self.companion.as_mut() {
            c.price_ref = Some(frame.center);
        }
        Ok(self)
    }

    pub fn basis(&self) -> &PolyBasis {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn t_now(&self) -> Option<i64> {
        self.t_now
    }

    pub fn last_price(&self) -> f64 {
        self.last_price
    }

    /// Reference price subtracted inside the volume observables.
    pub fn price_ref(&self) -> f64 {
        self.price_ref.unwrap_or(0.0)
    }

    /// Raw moments `<Q_k f>`, `k = 0..=2n`.
    pub fn raw(&self, f: Observable) -> &[f64] {
        &self.moments[f.index()]
    }

    /// Ages every moment by `dt_seconds` without depositing anything.
    pub fn advance(&mut self, dt_seconds: f64) -> Result<()> {
        if dt_seconds < 0.0 || !dt_seconds.is_finite() {
            return Err(Error::InvalidTick("time step must be non-negative"));
        }
        if dt_seconds == 0.0 {
            return Ok(());
        }
        let delta = dt_seconds / self.tau;
        let decay = (-delta).exp();
        if decay == 0.0 {
            self.moments.iter_mut().for_each(|m| m.iter_mut().for_each(|v| *v = 0.0));
            return Ok(());
        }
        let degree = 2 * self.n;
        let expansion = match self.basis.kind() {
            BasisKind::LaguerreTime | BasisKind::MonomialTime => {
                Some(self.basis.shift_scale_expand(1.0, -delta, degree)?)
            }
            BasisKind::ShiftedLegendreTime | BasisKind::MonomialLegendreTime => {
                Some(self.basis.shift_scale_expand(decay, 0.0, degree)?)
            }
            BasisKind::PricePoly => None,
        };
        for m in self.moments.iter_mut() {
            if let Some(e) = &expansion {
                e.apply_in_place(m);
            }
            m.iter_mut().for_each(|v| *v *= decay);
        }
        Ok(())
    }

    /// Ingests one trade.
    pub fn push(&mut self, tick: TradeTick) -> Result<()> {
        if let Some(now) = self.t_now {
            if tick.t < now {
                return Err(Error::TimeRegression { t: tick.t, now });
            }
        }
        let first = self.t_now.is_none();
        if first {
            if self.price_ref.is_none() {
                self.price_ref = Some(tick.price);
            }
            if self.basis.kind() == BasisKind::PricePoly && !self.price_frame_fixed {
                let frame = PriceFrame { center: tick.price, half_width: 0.01 * tick.price };
                self.basis = Arc::new(PolyBasis::price(2 * self.n, frame)?);
                self.products = Arc::new(self.basis.product_table_upto(self.n - 1));
                self.price_frame_fixed = true;
            }
        }
        let dt = match self.t_now {
            Some(now) => (tick.t - now) as f64 / NANOS_PER_SECOND,
            None => 0.0,
        };
        self.advance(dt)?;

        let x_now = match self.basis.kind().time_measure() {
            Some(m) => m.now(),
            None => tick.price,
        };
        self.basis.eval_into(x_now, &mut self.q_scratch);
        let dp = if first { 0.0 } else { tick.price - self.last_price };
        let rel_price = tick.price - self.price_ref();
        let mut factors = [0.0; Observable::COUNT];
        factors[Observable::Time.index()] = dt / self.tau;
        let mut pm = tick.shares / self.tau;
        for m in 0..=Observable::MAX_PRICE_POWER {
            factors[Observable::Volume(m).index()] = pm;
            pm *= rel_price;
        }
        factors[Observable::PriceChange.index()] = dp / self.tau;
        for (moment, f) in self.moments.iter_mut().zip(factors) {
            if f != 0.0 {
                for (m, q) in moment.iter_mut().zip(&self.q_scratch) {
                    *m += q * f;
                }
            }
        }
        self.t_now = Some(tick.t);
        self.last_price = tick.price;
        if let Some(c) = self.companion.as_mut() {
            c.push(tick)?;
        }
        if !self.price_ref_pinned {
            if let Some(shift) = self.drifted_reference() {
                self.recenter(shift);
            }
        }
        Ok(())
    }

    /// Offset of the volume-weighted mean price from the reference, when
    /// it exceeds the weighted price spread. Past that point the centered
    /// price moments lose digits to cancellation.
    fn drifted_reference(&self) -> Option<f64> {
        let s = |m: u8| self.moments[Observable::Volume(m).index()][0];
        let (s0, s1, s2) = (s(0), s(1), s(2));
        if !(s0 > 0.0) {
            return None;
        }
        let mean = s1 / s0;
        let var = s2 / s0 - mean * mean;
        (mean * mean > var.max(0.0) && mean.is_finite()).then_some(mean)
    }

    /// Moves the reference price up by `shift`, re-expanding the stored
    /// `(p - ref)^m` moments binomially. Rounding carried over from the old
    /// frame decays with the time weight.
    fn recenter(&mut self, shift: f64) {
        const M: usize = Observable::MAX_PRICE_POWER as usize;
        let mut pow = [1.0; M + 1];
        for j in 1..=M {
            pow[j] = pow[j - 1] * -shift;
        }
        for k in 0..self.moments[0].len() {
            let old: [f64; M + 1] = std::array::from_fn(|m| self.moments[Observable::Volume(m as u8).index()][k]);
            for m in 0..=M {
                let mut binom = 1.0;
                let mut v = 0.0;
                for j in 0..=m {
                    v += binom * old[m - j] * pow[j];
                    binom = binom * (m - j) as f64 / (j + 1) as f64;
                }
                self.moments[Observable::Volume(m as u8).index()][k] = v;
            }
        }
        self.price_ref = Some(self.price_ref() + shift);
        if let Some(c) = self.companion.as_mut() {
            c.recenter(shift);
        }
    }

    /// Operator matrices for basis dimension `n` (at most the accumulator's).
    pub fn snapshot(&self, n: usize) -> Result<MomentSet> {
        if n == 0 || n > self.n {
            return Err(Error::DegreeOutOfRange { degree: 2 * n.max(1) - 1, max: 2 * self.n });
        }
        let assemble = |raw: &[f64]| -> DMatrix<f64> {
            let mut m = DMatrix::zeros(n, n);
            for j in 0..n {
                for k in j..n {
                    let v: f64 = self.products.coeffs(j, k).iter().zip(raw).map(|(c, r)| c * r).sum();
                    m[(j, k)] = v;
                    m[(k, j)] = v;
                }
            }
            m
        };
        let gram = assemble(self.raw(Observable::Time));
        let volume = (0..=Observable::MAX_PRICE_POWER)
            .map(|m| assemble(self.raw(Observable::Volume(m))))
            .collect();
        let dpdt = assemble(self.raw(Observable::PriceChange));
        let x0 = match self.basis.kind().time_measure() {
            Some(m) => m.now(),
            None => self.last_price,
        };
        let x0_row = DVector::from_vec(self.basis.eval_all(x0, n));
        Ok(MomentSet {
            basis: Arc::clone(&self.basis),
            n,
            tau: self.tau,
            gram,
            volume,
            dpdt,
            x0,
            x0_row,
            last_price: self.last_price,
            price_ref: self.price_ref(),
            raw: self.moments.iter().map(|m| m[..2 * n + 1].to_vec()).collect(),
        })
    }
}

/// How much better conditioned the native Gram matrix must be before it is
/// preferred over the graded one. Native orthogonal moments of a short
/// history carry cancellation noise well above their conditioning, while
/// graded moments are sums of positive terms with relative rounding only.
const NATIVE_MARGIN: f64 = 1.0e4;

impl MeasureAccumulator {
    /// Like [`snapshot`](Self::snapshot), but taken from the graded
    /// companion unless the native Gram matrix is clearly better
    /// conditioned (see [`NATIVE_MARGIN`]). Every
    /// basis-independent quantity is the same either way; coefficient
    /// vectors refer to the returned set's own basis.
    pub fn snapshot_conditioned(&self, n: usize) -> Result<MomentSet> {
        let native = self.snapshot(n)?;
        let Some(c) = self.companion.as_deref() else {
            return Ok(native);
        };
        let graded = c.snapshot(n)?;
        if gram_conditioning(graded.gram()).max(0.0) * NATIVE_MARGIN >= gram_conditioning(native.gram()) {
            Ok(graded)
        } else {
            Ok(native)
        }
    }
}

/// Smallest over largest eigenvalue of the diagonally equilibrated Gram
/// matrix; zero (or negative) when it is numerically singular.
pub fn gram_conditioning(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows();
    if n == 0 || (0..n).any(|i| !(g[(i, i)] > 0.0) || !g[(i, i)].is_finite()) {
        return 0.0;
    }
    let s: Vec<f64> = (0..n).map(|i| g[(i, i)].sqrt().recip()).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| g[(i, j)] * s[i] * s[j]);
    let e = scaled.symmetric_eigenvalues();
    let max = e.max();
    if !(max > 0.0) {
        return 0.0;
    }
    e.min() / max
}

/// Operator matrices `<Q_j|f|Q_k>` at one instant.
#[derive(Debug, Clone)]
pub struct MomentSet {
    basis: Arc<PolyBasis>,
    n: usize,
    tau: f64,
    gram: DMatrix<f64>,
    volume: Vec<DMatrix<f64>>,
    dpdt: DMatrix<f64>,
    x0: f64,
    x0_row: DVector<f64>,
    last_price: f64,
    price_ref: f64,
    raw: Vec<Vec<f64>>,
}

impl MomentSet {
    /// Builds a moment set from explicit matrices.
    ///
    /// `volume[m]` is the matrix of `(p - price_ref)^m I`; at least `I`
    /// itself must be present. Raw moments are left empty, which disables
    /// the after-spike machinery.
    pub fn from_parts(
        basis: PolyBasis,
        tau: f64,
        gram: DMatrix<f64>,
        volume: Vec<DMatrix<f64>>,
        dpdt: Option<DMatrix<f64>>,
        x0: f64,
        last_price: f64,
        price_ref: f64,
    ) -> Result<Self> {
        let n = gram.nrows();
        if gram.ncols() != n || volume.is_empty() {
            return Err(Error::DimensionMismatch { expected: n, got: gram.ncols() });
        }
        for m in &volume {
            if m.shape() != (n, n) {
                return Err(Error::DimensionMismatch { expected: n, got: m.nrows() });
            }
        }
        let x0_row = DVector::from_vec(basis.eval_all(x0, n));
        Ok(MomentSet {
            basis: Arc::new(basis),
            n,
            tau,
            gram,
            volume,
            dpdt: dpdt.unwrap_or_else(|| DMatrix::zeros(n, n)),
            x0,
            x0_row,
            last_price,
            price_ref,
            raw: Vec::new(),
        })
    }

    pub fn basis(&self) -> &PolyBasis {
        &self.basis
    }

    pub fn kind(&self) -> BasisKind {
        self.basis.kind()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `<Q_j|Q_k>`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `<Q_j|I|Q_k>`.
    pub fn flow(&self) -> &DMatrix<f64> {
        &self.volume[0]
    }

    /// `<Q_j|(p - price_ref)^m I|Q_k>`, `None` when the power was not supplied.
    pub fn price_flow(&self, m: usize) -> Option<&DMatrix<f64>> {
        self.volume.get(m)
    }

    pub fn max_price_power(&self) -> usize {
        self.volume.len() - 1
    }

    /// `<Q_j|dp/dt|Q_k>`.
    pub fn dpdt(&self) -> &DMatrix<f64> {
        &self.dpdt
    }

    /// Abscissa of the present: `0`, `1`, or the last price.
    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// `Q_k(x0)`.
    pub fn x0_row(&self) -> &DVector<f64> {
        &self.x0_row
    }

    pub fn last_price(&self) -> f64 {
        self.last_price
    }

    pub fn price_ref(&self) -> f64 {
        self.price_ref
    }

    /// Raw moments to degree `2n`, empty when built from parts.
    pub fn raw(&self, f: Observable) -> &[f64] {
        self.raw.get(f.index()).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Leading `n x n` blocks, i.e. the same data in a smaller basis.
    pub fn truncate(&self, n: usize) -> Result<MomentSet> {
        if n == 0 || n > self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: n });
        }
        let cut = |m: &DMatrix<f64>| m.view((0, 0), (n, n)).into_owned();
        Ok(MomentSet {
            basis: Arc::clone(&self.basis),
            n,
            tau: self.tau,
            gram: cut(&self.gram),
            volume: self.volume.iter().map(cut).collect(),
            dpdt: cut(&self.dpdt),
            x0: self.x0,
            x0_row: self.x0_row.rows(0, n).into_owned(),
            last_price: self.last_price,
            price_ref: self.price_ref,
            raw: self.raw.iter().map(|r| r[..(2 * n + 1).min(r.len())].to_vec()).collect(),
        })
    }
}

/// Coefficients of `g` with `(D + 1/2) g = psi^2`.
///
/// The cumulative weight `W(x) = int_{lower}^{x} psi^2 dmu` equals
/// `e^x g(x)` on the Laguerre measure and `x g(x)` on the Legendre one, so
/// `g(x0)` is the analytic norm of `psi`.
pub fn cumulative_weight_factor(basis: &PolyBasis, psi: &[f64]) -> Result<Vec<f64>> {
    basis.kind().time_measure().ok_or(Error::NoTimeShiftOperator)?;
    let n = psi.len();
    if n == 0 {
        return Ok(vec![0.0]);
    }
    let deg = 2 * (n - 1);
    let table = basis.product_table_upto(n - 1);
    let mut square = vec![0.0; deg + 1];
    for (j, pj) in psi.iter().enumerate() {
        for (k, pk) in psi.iter().enumerate() {
            for (l, c) in table.coeffs(j, k).iter().enumerate() {
                square[l] += pj * pk * c;
            }
        }
    }
    let shift = basis.time_shift_matrix(deg)?;
    // rows of (D + 1/2) are lower triangular; solve the transposed system
    let mut g = vec![0.0; deg + 1];
    for i in (0..=deg).rev() {
        let mut s = square[i];
        for (k, gk) in g.iter().enumerate().skip(i + 1) {
            s -= gk * shift[(k, i)];
        }
        g[i] = s / (shift[(i, i)] + 0.5);
    }
    Ok(g)
}

/// Analytic norm `int psi^2 dmu` on the time measure.
pub fn analytic_norm(basis: &PolyBasis, psi: &[f64]) -> Result<f64> {
    let measure = basis.kind().time_measure().ok_or(Error::NoTimeShiftOperator)?;
    let g = cumulative_weight_factor(basis, psi)?;
    Ok(basis.eval_poly(&g, measure.now()))
}

/// Volume-after-time moment `<psi|V_m|psi>` with
/// `V_m(t) = sum over later trades of (p - price_ref)^m dV`.
///
/// Uses `<psi|V_m|psi> = sum_i (p_i - price_ref)^m dV_i W(t_i)`, written
/// as a moment of the cumulative weight factor.
pub fn after_spike_moment(ms: &MomentSet, psi: &[f64], m: u8) -> Result<f64> {
    if m > Observable::MAX_PRICE_POWER {
        return Err(Error::MissingMoment);
    }
    if psi.len() != ms.n() {
        return Err(Error::DimensionMismatch { expected: ms.n(), got: psi.len() });
    }
    let g = cumulative_weight_factor(ms.basis(), psi)?;
    let raw = ms.raw(Observable::Volume(m));
    if raw.len() < g.len() {
        return Err(Error::MissingMoment);
    }
    Ok(ms.tau() * g.iter().zip(raw).map(|(a, b)| a * b).sum::<f64>())
}

impl MeasureAccumulator {
    /// [`after_spike_moment`] on the current state for basis dimension `psi.len()`.
    pub fn after_spike_moments(&self, psi: &[f64], m: u8) -> Result<f64> {
        let ms = self.snapshot(psi.len())?;
        after_spike_moment(&ms, psi, m)
    }
}

/// Position of a tick in basis abscissae, given its age in seconds.
pub fn time_abscissa(measure: TimeMeasure, age_seconds: f64, tau: f64) -> f64 {
    match measure {
        TimeMeasure::Laguerre => -age_seconds / tau,
        TimeMeasure::Legendre => (-age_seconds / tau).exp(),
    }
}
