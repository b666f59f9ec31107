//! Per-tick indicator evaluation.
//!
//! Each enabled [`Group`] owns a fixed block of columns. A group whose
//! computation fails with a degeneracy error fills its block (or the
//! affected cells) with NaN, written as `nan`.

use execflow::basis::BasisKind;
use execflow::flow::{
    equilibrium_price_pih, flow_spectrum_with, perturbative_prices, pf_naive, pf_skew_future, pi_measure,
    price_impact_direct, price_impact_var, saddle_point_state, solve_future, time_distance, FlowState,
    FutureSystem, PiSelector, TimeDistanceKind,
};
use execflow::moments::{MeasureAccumulator, MomentSet, TradeTick};
use execflow::skew::{frontrun_pnl, generalized_skewness, pf_family, quadrature2, GaussQuadrature2, PiMoments};
use execflow::spectral::{bilinear, GramFactor};
use execflow::{Error, Result};
use nalgebra::{DMatrix, Matrix2};

use crate::config::{Group, RunConfig};

/// Basis dimension of the `pnlss` group, whatever `--n` is.
pub const PNLSS_N: usize = 2;

const SADDLE_MAX_ITER: usize = 100;

const CATALOG: [PiSelector; 5] = [
    PiSelector::MovAver,
    PiSelector::FutureIH,
    PiSelector::EquilibriumIH,
    PiSelector::SpurF,
    PiSelector::MixedW0,
];

/// Column names contributed by `group`, in output order.
pub fn group_columns(group: Group) -> Vec<String> {
    let fixed: &[&str] = match group {
        Group::Flow => &["I.sL", "I.sH", "I.s0", "I.wL", "I.wH", "I.Gamma0", "I.dI"],
        Group::Price => &["P.sL", "P.sH", "P.s0", "P.Gamma0"],
        Group::SkPih => &["SK_P_IH.x1", "SK_P_IH.x2", "SK_P_IH.w1", "SK_P_IH.w2", "SK_P_IH.Gamma", "SK_P_IH.xa"],
        Group::Pnlss => &[
            "pnlss.SK_P.x1",
            "pnlss.SK_P.x2",
            "pnlss.SK_P.Gamma",
            "pnlss.SK_P.xa",
            "pnlss.gSK_P.sL",
            "pnlss.gSK_P.sH",
            "pnlss.gSK_P.Gamma",
            "pnlss.gSK_P.Gamma0",
            "pnlss.gSK_I.sL",
            "pnlss.gSK_I.sH",
            "pnlss.gSK_I.Gamma",
            "pnlss.gSK_I.Gamma0",
            "pnlss.dI",
            "pnlss.PnL_max",
            "pnlss.D",
        ],
        Group::Naive => &[
            "pnldidsk.SK_spur_nodI.x1",
            "pnldidsk.SK_spur_nodI.x2",
            "pnldidsk.SK_spur_nodI.Gamma",
            "pnldidsk.Upsilon",
            "pnldidsk.Pf_naive",
        ],
        Group::Future => &[
            "pnlfutureSk.Gamma0_past",
            "pnlfutureSk.Gamma0_future",
            "pnlfutureSk.Upsilon",
            "pnlfutureSk.Pf_skew",
            "pnlfutureSk.x1",
            "pnlfutureSk.x2",
            "pnlfutureSk.Gamma",
        ],
        Group::Perturbative => &["pert.P1", "pert.P2", "pert.r"],
        Group::Impact => &["impact.direct", "impact.var"],
        Group::Distance => &["dist.sign", "dist.volume", "dist.proj", "dist.second"],
        Group::Saddle => &["saddle.p1", "saddle.p2", "saddle.objective", "saddle.converged", "saddle.iterations"],
        Group::Catalog => return quad_columns("cat", &CATALOG),
        Group::AfterSpike => {
            return quad_columns("AS", &[PiSelector::AfterSpike { future: false }, PiSelector::AfterSpike { future: true }])
        }
    };
    fixed.iter().map(|s| s.to_string()).collect()
}

fn quad_columns(prefix: &str, selectors: &[PiSelector]) -> Vec<String> {
    selectors
        .iter()
        .flat_map(|s| ["x1", "x2", "Gamma"].map(|c| format!("{prefix}.{}.{c}", s.name())))
        .collect()
}

/// Full header for `groups`: `T`, `shares`, `P_last`, then each group block.
pub fn columns(groups: &[Group]) -> Vec<String> {
    let mut out: Vec<String> = ["T", "shares", "P_last"].iter().map(|s| s.to_string()).collect();
    for &g in groups {
        out.extend(group_columns(g));
    }
    out
}

/// One output line: the tick time and every other column as a number.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub t: i64,
    /// Values of `columns()[1..]`.
    pub values: Vec<f64>,
}

/// Streaming state for one run.
#[derive(Debug, Clone)]
pub struct Pipeline {
    n: usize,
    deflation: f64,
    groups: Vec<Group>,
    main: MeasureAccumulator,
    pnlss: Option<MeasureAccumulator>,
    columns: Vec<String>,
}

impl Pipeline {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let main = MeasureAccumulator::new(cfg.measure, cfg.n, cfg.tau)?.with_graded_companion()?;
        let pnlss = if cfg.groups.contains(&Group::Pnlss) {
            Some(MeasureAccumulator::new(BasisKind::LaguerreTime, PNLSS_N, cfg.tau)?)
        } else {
            None
        };
        Ok(Pipeline {
            n: cfg.n,
            deflation: cfg.thresholds.deflation,
            groups: cfg.groups.clone(),
            main,
            pnlss,
            columns: columns(&cfg.groups),
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    /// Folds in one tick and evaluates every enabled group.
    ///
    /// Errors only for ticks the accumulator rejects (time regression); the
    /// state is then unchanged.
    pub fn push(&mut self, tick: TradeTick) -> Result<Row> {
        self.main.push(tick)?;
        if let Some(acc) = self.pnlss.as_mut() {
            acc.push(tick)?;
        }
        let mut values = Vec::with_capacity(self.columns.len() - 1);
        values.push(tick.shares);
        values.push(tick.price);
        let ctx = Context::new(self.main.snapshot_conditioned(self.n), self.deflation);
        for &g in &self.groups {
            let before = values.len();
            self.eval_group(g, &ctx, &mut values);
            debug_assert_eq!(values.len() - before, group_columns(g).len(), "{g:?}");
        }
        for v in values.iter_mut() {
            if !v.is_finite() {
                *v = f64::NAN;
            }
        }
        Ok(Row { t: tick.t, values })
    }

    fn eval_group(&self, group: Group, ctx: &Context, out: &mut Vec<f64>) {
        match group {
            Group::Flow => put(out, ctx.flow_cells()),
            Group::Price => put(out, ctx.price_cells(self.deflation)),
            Group::SkPih => put(out, ctx.sk_pih_cells()),
            Group::Pnlss => {
                let ms = match &self.pnlss {
                    Some(acc) => acc.snapshot(PNLSS_N),
                    None => Err(Error::MissingMoment),
                };
                put(out, pnlss_cells(ms, self.deflation));
            }
            Group::Naive => {
                put(out, ctx.quad_cells(PiSelector::SpurNoDI, None));
                put(out, ctx.naive_cells());
            }
            Group::Future => ctx.future_cells(out),
            Group::Perturbative => put(out, ctx.perturbative_cells()),
            Group::Impact => {
                put(out, ctx.with_state(|ms, fs| price_impact_direct(ms, &fs.psi_high())).map(|v| [v]));
                put(out, ctx.with_state(|ms, fs| price_impact_var(ms, &fs.psi_high())).map(|v| [v]));
            }
            Group::Catalog => {
                for s in CATALOG {
                    put(out, ctx.quad_cells(s, None));
                }
            }
            Group::AfterSpike => {
                for future in [false, true] {
                    put(out, ctx.quad_cells(PiSelector::AfterSpike { future }, None));
                }
            }
            Group::Distance => {
                for kind in [
                    TimeDistanceKind::SignProp,
                    TimeDistanceKind::Volume,
                    TimeDistanceKind::Projection,
                    TimeDistanceKind::SecondOrder,
                ] {
                    let v = ctx.with_state(|ms, fs| {
                        let sol = fs.solution();
                        time_distance(sol, sol.len() - 1, 0, kind, ms)
                    });
                    put(out, v.map(|v| [v]));
                }
            }
            Group::Saddle => put(out, ctx.saddle_cells()),
        }
    }
}

fn put<const K: usize>(out: &mut Vec<f64>, cells: Result<[f64; K]>) {
    match cells {
        Ok(v) => out.extend_from_slice(&v),
        Err(_) => out.extend(std::iter::repeat(f64::NAN).take(K)),
    }
}

fn matrix2(m: &DMatrix<f64>) -> Matrix2<f64> {
    Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

/// Two-point quadrature; a single-atom measure becomes two coincident
/// nodes of equal weight, so `Gamma = 0`.
fn quadrature_or_atom(pi: &PiMoments) -> Result<GaussQuadrature2> {
    match quadrature2(pi) {
        Err(Error::DegenerateSupport { node, mass }) => {
            Ok(GaussQuadrature2 { p1: node, p2: node, w1: 0.5 * mass, w2: 0.5 * mass, gamma: 0.0 })
        }
        other => other,
    }
}

// Shared per-tick solves; failures are kept and surface as NaN cells.
struct Context {
    state: Result<(MomentSet, FlowState)>,
    future: Result<FutureSystem>,
}

impl Context {
    fn new(ms: Result<MomentSet>, deflation: f64) -> Self {
        let state = ms.and_then(|ms| flow_spectrum_with(&ms, deflation).map(|fs| (ms, fs)));
        let future = match &state {
            Ok((ms, fs)) => solve_future(ms, fs),
            Err(e) => Err(e.clone()),
        };
        Context { state, future }
    }

    fn with_state<T>(&self, f: impl FnOnce(&MomentSet, &FlowState) -> Result<T>) -> Result<T> {
        match &self.state {
            Ok((ms, fs)) => f(ms, fs),
            Err(e) => Err(e.clone()),
        }
    }

    fn with_future<T>(&self, f: impl FnOnce(&MomentSet, &FlowState, &FutureSystem) -> Result<T>) -> Result<T> {
        let fut = self.future.as_ref().map_err(Clone::clone)?;
        self.with_state(|ms, fs| f(ms, fs, fut))
    }

    fn flow_cells(&self) -> Result<[f64; 7]> {
        self.with_state(|_, fs| {
            let gamma0 = fs.gamma0().unwrap_or(f64::NAN);
            Ok([fs.lambda_low(), fs.lambda_high(), fs.i0(), fs.w_low(), fs.w_high(), gamma0, fs.di()])
        })
    }

    // spectrum of pI against I, solved on prices measured from price_ref
    fn price_cells(&self, deflation: f64) -> Result<[f64; 4]> {
        self.with_state(|ms, fs| {
            let pi = ms.price_flow(1).ok_or(Error::MissingMoment)?;
            let sol = GramFactor::new(ms.flow(), deflation)?.solve(pi);
            if fs.i0() <= 0.0 {
                return Err(Error::ZeroFlow);
            }
            let s0 = bilinear(pi, fs.psi0(), fs.psi0()) / fs.i0();
            let (lo, hi) = (sol.eigenvalue(0), sol.eigenvalue(sol.len() - 1));
            let gamma0 = execflow::skew::skewness_like(s0, lo, hi).unwrap_or(f64::NAN);
            let p = ms.price_ref();
            Ok([p + lo, p + hi, p + s0, gamma0])
        })
    }

    fn sk_pih_cells(&self) -> Result<[f64; 6]> {
        self.with_future(|ms, fs, fut| {
            let q = quadrature_or_atom(&pi_measure(ms, fs, fut, PiSelector::PastIH, None)?)?;
            let xa = equilibrium_price_pih(ms, fs).unwrap_or(f64::NAN);
            Ok([q.p1, q.p2, q.w1, q.w2, q.gamma, xa])
        })
    }

    fn quad_cells(&self, selector: PiSelector, pf: Option<f64>) -> Result<[f64; 3]> {
        self.with_future(|ms, fs, fut| {
            let q = quadrature_or_atom(&pi_measure(ms, fs, fut, selector, pf)?)?;
            Ok([q.p1, q.p2, q.gamma])
        })
    }

    fn naive_cells(&self) -> Result<[f64; 2]> {
        self.with_future(|ms, fs, fut| {
            let e = pf_naive(ms, fs, fut)?;
            Ok([e.upsilon, e.pf])
        })
    }

    fn future_cells(&self, out: &mut Vec<f64>) {
        let skew = self.with_future(pf_skew_future);
        put(out, skew.as_ref().map(|s| [s.gamma0_past, s.gamma0_future, s.upsilon, s.pf]).map_err(Clone::clone));
        let quad = skew.and_then(|s| self.quad_cells(PiSelector::FutureIH, Some(s.pf)));
        put(out, quad);
    }

    fn perturbative_cells(&self) -> Result<[f64; 3]> {
        self.with_state(|ms, fs| {
            let p = perturbative_prices(ms, fs)?;
            Ok([p.p1, p.p2, p.r])
        })
    }

    fn saddle_cells(&self) -> Result<[f64; 5]> {
        self.with_state(|ms, fs| {
            let tol = 1e-10 * ms.price_ref().abs().max(1.0);
            let s = saddle_point_state(ms, fs, None, None, SADDLE_MAX_ITER, tol)?;
            let converged = if s.converged { 1.0 } else { 0.0 };
            Ok([s.p1, s.p2, s.objective, converged, s.iterations as f64])
        })
    }
}

/// The n = 2 Laguerre group: regular and generalized skewness of price and
/// flow, and the frontrun bounds of the moving-average measure.
fn pnlss_cells(ms: Result<MomentSet>, deflation: f64) -> Result<[f64; 15]> {
    let ms = ms?;
    let fs = flow_spectrum_with(&ms, deflation)?;
    let fut = solve_future(&ms, &fs)?;
    let p_ref = ms.price_ref();
    let mut cells = [f64::NAN; 15];

    let pi = pi_measure(&ms, &fs, &fut, PiSelector::MovAver, None)?;
    let quad = quadrature_or_atom(&pi);
    if let Ok(q) = &quad {
        cells[..3].copy_from_slice(&[q.p1, q.p2, q.gamma]);
    }
    cells[3] = pi.mean();

    let pi_flow = ms.price_flow(1).ok_or(Error::MissingMoment)?;
    if let Ok(g) = generalized_skewness(&matrix2(pi_flow), &matrix2(ms.flow()), ms.last_price() - p_ref) {
        cells[4..8].copy_from_slice(&[p_ref + g.lambda_min, p_ref + g.lambda_max, g.gamma, g.gamma0]);
    }
    if let Ok(g) = generalized_skewness(&matrix2(ms.flow()), &matrix2(ms.gram()), fs.i0()) {
        cells[8..12].copy_from_slice(&[g.lambda_min, g.lambda_max, g.gamma, g.gamma0]);
    }

    cells[12] = fs.di();
    // di = dI <psi|psi_0>^2 with psi = Q_0 / |Q_0|
    let g00 = ms.gram()[(0, 0)];
    if let (Ok(q), true) = (quad, g00 > 0.0) {
        let di = fs.di() * fs.g_psi0()[0].powi(2) / g00;
        if let Ok(f) = pf_family(&pi, di).and_then(|fam| frontrun_pnl(&q, di, &fam)) {
            cells[13] = f.pnl_max;
            cells[14] = f.directional;
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ColumnSpec;
    use execflow::synthetic::RandomWalk;

    fn config(measure: BasisKind, groups: &[Group]) -> RunConfig {
        let cols = ColumnSpec { total: 3, time: 0, price: 1, shares: 2 };
        RunConfig::new("-", cols, "-", 5, 60.0, measure).unwrap().with_groups(groups)
    }

    #[test]
    fn column_names_are_unique() {
        let cols = columns(&Group::ALL);
        let mut sorted = cols.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), cols.len());
        assert_eq!(&cols[..3], &["T", "shares", "P_last"]);
    }

    #[test]
    fn every_row_has_the_declared_width() {
        for measure in [
            BasisKind::LaguerreTime,
            BasisKind::ShiftedLegendreTime,
            BasisKind::MonomialTime,
            BasisKind::PricePoly,
        ] {
            let mut p = Pipeline::new(&config(measure, &Group::ALL)).unwrap();
            let width = p.columns().len();
            let ticks = RandomWalk { count: 300, seed: 5, ..Default::default() }.generate();
            let mut finite_rows = 0;
            for t in ticks {
                let row = p.push(t).unwrap();
                assert_eq!(row.values.len() + 1, width);
                if row.values.iter().all(|v| v.is_finite()) {
                    finite_rows += 1;
                }
            }
            // time-basis runs fill every cell once the history is rich enough
            if measure != BasisKind::PricePoly {
                assert!(finite_rows > 0, "{measure:?}");
            }
        }
    }

    #[test]
    fn first_tick_is_all_nan_beyond_the_tick_fields() {
        let mut p = Pipeline::new(&config(BasisKind::LaguerreTime, &Group::DEFAULT)).unwrap();
        let row = p.push(TradeTick::new(0, 100.0, 10.0).unwrap()).unwrap();
        assert_eq!(&row.values[..2], &[10.0, 100.0]);
        assert!(row.values[2..].iter().all(|v| v.is_nan()));
    }

    #[test]
    fn regression_leaves_state_unchanged() {
        let mut p = Pipeline::new(&config(BasisKind::LaguerreTime, &Group::DEFAULT)).unwrap();
        p.push(TradeTick::new(10, 100.0, 10.0).unwrap()).unwrap();
        let before = p.clone();
        assert!(matches!(p.push(TradeTick::new(5, 100.0, 10.0).unwrap()), Err(Error::TimeRegression { .. })));
        let next = TradeTick::new(2_000_000_000, 100.5, 7.0).unwrap();
        let mut reference = before;
        assert_eq!(format!("{:?}", p.push(next).unwrap()), format!("{:?}", reference.push(next).unwrap()));
    }
}
