//! Streaming moments against direct sums over the whole history.

use execflow::basis::{BasisKind, PolyBasis};
use execflow::moments::{time_abscissa, MeasureAccumulator, Observable, TradeTick};
use execflow::synthetic::RandomWalk;

const OBSERVABLES: [Observable; 7] = [
    Observable::Time,
    Observable::Volume(0),
    Observable::Volume(1),
    Observable::Volume(2),
    Observable::Volume(3),
    Observable::Volume(4),
    Observable::PriceChange,
];

/// `sum_i f_i e^{-age_i/tau} Q_k(x_i)` for every observable, with the
/// volume prices taken from `price_ref`. Also returns the sums of absolute
/// terms, the scale against which rounding is judged.
fn batch(
    basis: &PolyBasis,
    ticks: &[TradeTick],
    tau: f64,
    price_ref: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let len = basis.max_degree() + 1;
    let now = ticks.last().unwrap().t;
    let mut sums = vec![vec![0.0; len]; OBSERVABLES.len()];
    let mut scale = vec![vec![0.0; len]; OBSERVABLES.len()];
    for (i, t) in ticks.iter().enumerate() {
        let age = (now - t.t) as f64 / 1e9;
        let weight = (-age / tau).exp();
        let x = match basis.kind().time_measure() {
            Some(m) => time_abscissa(m, age, tau),
            None => t.price,
        };
        let (dt, dp) = match i {
            0 => (0.0, 0.0),
            _ => ((t.t - ticks[i - 1].t) as f64 / 1e9, t.price - ticks[i - 1].price),
        };
        let rel = t.price - price_ref;
        let f = [
            dt / tau,
            t.shares / tau,
            t.shares / tau * rel,
            t.shares / tau * rel.powi(2),
            t.shares / tau * rel.powi(3),
            t.shares / tau * rel.powi(4),
            dp / tau,
        ];
        for k in 0..len {
            let q = weight * basis.eval(k, x).unwrap();
            for (o, fo) in f.iter().enumerate() {
                sums[o][k] += fo * q;
                scale[o][k] += (fo * q).abs();
            }
        }
    }
    (sums, scale)
}

fn check(kind: BasisKind, ticks: &[TradeTick], n: usize, tau: f64) -> f64 {
    let mut acc = MeasureAccumulator::new(kind, n, tau).unwrap();
    for t in ticks {
        acc.push(*t).unwrap();
    }
    let (want, scale) = batch(acc.basis(), ticks, tau, acc.price_ref());
    let mut worst: f64 = 0.0;
    for (o, f) in OBSERVABLES.iter().enumerate() {
        for (k, got) in acc.raw(*f).iter().enumerate() {
            let err = (got - want[o][k]).abs() / scale[o][k].max(f64::MIN_POSITIVE);
            worst = worst.max(err);
        }
    }
    worst
}

fn drifting_walk(seed: u64, count: usize) -> Vec<TradeTick> {
    RandomWalk { seed, count, mean_gap_s: 0.5, step_ticks: 3.0, burst_prob: 0.03, ..Default::default() }.generate()
}

#[test]
fn every_basis_matches_direct_sums() {
    let ticks = drifting_walk(11, 10_000);
    for kind in [
        BasisKind::LaguerreTime,
        BasisKind::MonomialTime,
        BasisKind::ShiftedLegendreTime,
        BasisKind::MonomialLegendreTime,
        BasisKind::PricePoly,
    ] {
        let worst = check(kind, &ticks, 7, 128.0);
        assert!(worst <= 1e-9, "{kind:?}: {worst:e}");
    }
}

#[test]
fn short_and_long_memory() {
    let ticks = drifting_walk(5, 3000);
    for tau in [2.0, 30.0, 5000.0] {
        for kind in [BasisKind::LaguerreTime, BasisKind::ShiftedLegendreTime] {
            let worst = check(kind, &ticks, 5, tau);
            assert!(worst <= 1e-9, "{kind:?} tau={tau}: {worst:e}");
        }
    }
}

#[test]
fn reference_price_follows_a_drift() {
    let ticks: Vec<TradeTick> = (0..2000)
        .map(|i| TradeTick::new(i * 500_000_000, 100.0 + 0.01 * i as f64, 100.0).unwrap())
        .collect();
    let mut acc = MeasureAccumulator::new(BasisKind::LaguerreTime, 4, 60.0).unwrap().with_graded_companion().unwrap();
    for t in &ticks {
        acc.push(*t).unwrap();
    }
    // the weighted mean trails the last price by tau/gap = 120 ticks, with a
    // spread of as much again; the reference stays within one spread of it
    let r = acc.price_ref();
    assert!(r > 118.8 - 1.2 && r < 118.8 + 1.2, "{r}");
    assert_eq!(acc.graded_companion().unwrap().price_ref(), r);
    assert!(check(BasisKind::LaguerreTime, &ticks, 4, 60.0) <= 1e-9);
}
