//! Randomized invariants over synthetic streams and measures.

use execflow::basis::BasisKind;
use execflow::flow::{time_distance, TimeDistanceKind};
use execflow::flow::{flow_spectrum, solve_future, FlowState};
use execflow::moments::{MeasureAccumulator, MomentSet};
use execflow::skew::{quadrature2, PiMoments};
use execflow::synthetic::RandomWalk;
use proptest::prelude::*;

fn stream_snapshot(seed: u64, count: usize, kind: BasisKind, n: usize, tau: f64, burst: f64) -> MomentSet {
    let ticks = RandomWalk { seed, count, mean_gap_s: 0.5, burst_prob: burst, ..Default::default() }.generate();
    let mut acc = MeasureAccumulator::new(kind, n, tau).unwrap().with_graded_companion().unwrap();
    for t in ticks {
        acc.push(t).unwrap();
    }
    acc.snapshot_conditioned(n).unwrap()
}

fn kinds() -> impl Strategy<Value = BasisKind> {
    prop_oneof![
        Just(BasisKind::LaguerreTime),
        Just(BasisKind::ShiftedLegendreTime),
        Just(BasisKind::MonomialTime),
    ]
}

fn min_eigenvalue(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

fn moments_of(atoms: &[(f64, f64)], shift: f64) -> PiMoments {
    let mut pi = [0.0; 4];
    for &(p, w) in atoms {
        for (m, v) in pi.iter_mut().enumerate() {
            *v += w * (p - shift).powi(m as i32);
        }
    }
    PiMoments::with_shift(pi, None, shift)
}

fn check_flow(fs: &FlowState) -> Result<(), TestCaseError> {
    let slack = 1e-9 * fs.lambda_high().abs().max(1.0);
    prop_assert!(fs.lambda_low() <= fs.i0() + slack, "{} > {}", fs.lambda_low(), fs.i0());
    prop_assert!(fs.i0() <= fs.lambda_high() + slack, "{} > {}", fs.i0(), fs.lambda_high());
    prop_assert!(fs.di() >= -slack);
    let total: f64 = (0..fs.solution().len()).map(|i| fs.projection(i)).sum();
    prop_assert!((total - 1.0).abs() <= 1e-10, "projections sum to {total}");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flow_spectrum_brackets_i0(
        seed in 0u64..1_000_000,
        count in 50usize..1500,
        kind in kinds(),
        n in 2usize..=7,
        tau in 5.0f64..500.0,
        burst in 0.0f64..0.1,
    ) {
        let ms = stream_snapshot(seed, count, kind, n, tau, burst);
        let fs = flow_spectrum(&ms).unwrap();
        check_flow(&fs)?;
        let fut = solve_future(&ms, &fs).unwrap();
        let slack = 1e-9 * fut.lambda_high().abs().max(1.0);
        prop_assert!(fut.lambda_high() + slack >= fs.lambda_high());
        let total: f64 = (0..fut.solution().len()).map(|i| fut.projection(&fs, i)).sum();
        prop_assert!((total - 1.0).abs() <= 1e-10, "future projections sum to {total}");
    }

    #[test]
    fn sampled_operators_are_positive(
        seed in 0u64..1_000_000,
        count in 2usize..800,
        kind in kinds(),
        n in 1usize..=7,
        tau in 1.0f64..300.0,
    ) {
        let ticks = RandomWalk { seed, count, mean_gap_s: 0.5, ..Default::default() }.generate();
        let mut acc = MeasureAccumulator::new(kind, n, tau).unwrap();
        for t in ticks {
            acc.push(t).unwrap();
        }
        let ms = acc.snapshot(n).unwrap();
        for m in [ms.gram(), ms.flow()] {
            prop_assert!(min_eigenvalue(m) >= -1e-10 * m.trace().abs());
        }
    }

    #[test]
    fn time_distances_are_antisymmetric(
        seed in 0u64..1_000_000,
        count in 200usize..1200,
        n in 2usize..=6,
        tau in 10.0f64..200.0,
    ) {
        let ms = stream_snapshot(seed, count, BasisKind::LaguerreTime, n, tau, 0.03);
        let fs = flow_spectrum(&ms).unwrap();
        let sol = fs.solution();
        for kind in [TimeDistanceKind::SignProp, TimeDistanceKind::Volume, TimeDistanceKind::Projection, TimeDistanceKind::SecondOrder] {
            for j in 0..sol.len() {
                prop_assert_eq!(time_distance(sol, j, j, kind, &ms).unwrap(), 0.0);
                for k in 0..j {
                    let a = time_distance(sol, j, k, kind, &ms).unwrap();
                    let b = time_distance(sol, k, j, kind, &ms).unwrap();
                    prop_assert!((a + b).abs() <= 1e-10 * a.abs().max(1.0), "{kind:?} {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn two_atom_measures_are_recovered(
        p1 in 50.0f64..150.0,
        gap in 0.01f64..20.0,
        w1 in 0.01f64..10.0,
        w2 in 0.01f64..10.0,
    ) {
        let p2 = p1 + gap;
        let q = quadrature2(&moments_of(&[(p1, w1), (p2, w2)], p1)).unwrap();
        prop_assert!((q.p1 - p1).abs() <= 1e-9 && (q.p2 - p2).abs() <= 1e-9, "{q:?}");
        prop_assert!((q.w1 - w1).abs() <= 1e-9 * (w1 + w2) && (q.w2 - w2).abs() <= 1e-9 * (w1 + w2), "{q:?}");
        prop_assert!((q.gamma - (w1 - w2) / (w1 + w2)).abs() <= 1e-9);
    }

    #[test]
    fn quadrature_integrates_cubics(
        atoms in prop::collection::vec((90.0f64..110.0, 0.01f64..5.0), 3..12),
        c in prop::array::uniform4(-2.0f64..2.0),
    ) {
        let center = 100.0;
        let pi = moments_of(&atoms, center);
        let q = quadrature2(&pi).unwrap();
        let f = |p: f64| {
            let y = p - center;
            c[0] + c[1] * y + c[2] * y * y + c[3] * y * y * y
        };
        let want: f64 = atoms.iter().map(|&(p, w)| w * f(p)).sum();
        let scale: f64 = atoms.iter().map(|&(p, w)| w * f(p).abs().max(1.0)).sum();
        prop_assert!((q.integrate(f) - want).abs() <= 1e-9 * scale);
        prop_assert!(q.p1 >= 90.0 - 1e-9 && q.p2 <= 110.0 + 1e-9);
    }
}
