//! Metrics checked against brute-force enumeration over raw histories.

use proptest::prelude::*;
use recal_core::{external_regret, internal_regret, LossKind, LossSpec, MetricsAccumulator};

fn history() -> impl Strategy<Value = (usize, Vec<(usize, u8)>)> {
    (1usize..=4).prop_flat_map(|n| (Just(n), prop::collection::vec((0..=n, 0u8..=1), 0..=50)))
}

fn to_pairs(n: usize, hist: &[(usize, u8)]) -> Vec<(f64, u8)> {
    hist.iter()
        .map(|&(k, y)| (k as f64 / n as f64, y))
        .collect()
}

fn brute_internal(loss: &LossSpec, n: usize, hist: &[(usize, u8)]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..=n {
        for j in 0..=n {
            let gain: f64 = hist
                .iter()
                .filter(|&&(k, _)| k == i)
                .map(|&(_, y)| {
                    loss.eval(y, i as f64 / n as f64).unwrap()
                        - loss.eval(y, j as f64 / n as f64).unwrap()
                })
                .sum();
            best = best.max(gain);
        }
    }
    best
}

fn brute_external(loss: &LossSpec, n: usize, hist: &[(usize, u8)]) -> f64 {
    let realized: f64 = hist
        .iter()
        .map(|&(k, y)| loss.eval(y, k as f64 / n as f64).unwrap())
        .sum();
    let best_fixed = (0..=n)
        .map(|j| {
            hist.iter()
                .map(|&(_, y)| loss.eval(y, j as f64 / n as f64).unwrap())
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    realized - best_fixed
}

fn brute_calibration(n: usize, hist: &[(usize, u8)], p: i32) -> f64 {
    let t = hist.len() as f64;
    (0..=n)
        .map(|i| {
            let at: Vec<u8> = hist
                .iter()
                .filter(|&&(k, _)| k == i)
                .map(|&(_, y)| y)
                .collect();
            if at.is_empty() {
                return 0.0;
            }
            let rho = at.iter().map(|&y| f64::from(y)).sum::<f64>() / at.len() as f64;
            (rho - i as f64 / n as f64).abs().powi(p) * at.len() as f64 / t
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn regrets_match_enumeration((n, hist) in history()) {
        let pairs = to_pairs(n, &hist);
        for kind in LossKind::ALL {
            let loss = LossSpec::new(kind);
            let internal = internal_regret(&pairs, &loss, n).unwrap();
            let external = external_regret(&pairs, &loss, n).unwrap();
            prop_assert!((internal - brute_internal(&loss, n, &hist)).abs() <= 1e-12);
            prop_assert!((external - brute_external(&loss, n, &hist)).abs() <= 1e-12);
            prop_assert!(internal >= 0.0);
            prop_assert!(external <= (n as f64 + 1.0) * internal + 1e-12);
        }
    }

    #[test]
    fn calibration_error_matches_enumeration((n, hist) in history()) {
        prop_assume!(!hist.is_empty());
        let mut acc = MetricsAccumulator::new(n, LossSpec::new(LossKind::L2)).unwrap();
        for (p, y) in to_pairs(n, &hist) {
            acc.record(0.5, p, y).unwrap();
        }
        for norm in [1u32, 2] {
            let got = acc.calibration_error(norm).unwrap();
            prop_assert!((got - brute_calibration(n, &hist, norm as i32)).abs() <= 1e-12);
        }
        let loss = LossSpec::new(LossKind::L2);
        prop_assert!((acc.internal_regret(&loss) - brute_internal(&loss, n, &hist)).abs() <= 1e-12);
    }

    #[test]
    fn cumulative_losses_never_decrease(
        (n, hist) in history(),
        forecasts in prop::collection::vec(0.0f64..=1.0, 50),
    ) {
        for kind in LossKind::ALL {
            let mut acc = MetricsAccumulator::new(n, LossSpec::new(kind)).unwrap();
            let (mut recal, mut base) = (0.0, 0.0);
            for ((p, y), &pf) in to_pairs(n, &hist).into_iter().zip(&forecasts) {
                acc.record(pf, p, y).unwrap();
                prop_assert!(acc.cum_loss_recal() >= recal && acc.cum_loss_baseline() >= base);
                recal = acc.cum_loss_recal();
                base = acc.cum_loss_baseline();
            }
        }
    }
}

#[test]
fn worked_examples() {
    let l2 = LossSpec::new(LossKind::L2);
    assert_eq!(internal_regret(&[(0.5, 0), (0.5, 1)], &l2, 2).unwrap(), 0.0);
    assert_eq!(internal_regret(&[(0.0, 1)], &l2, 1).unwrap(), 1.0);
    assert_eq!(internal_regret(&[], &l2, 3).unwrap(), 0.0);
    assert_eq!(external_regret(&[(1.0, 0), (1.0, 0)], &l2, 1).unwrap(), 2.0);
    assert_eq!(external_regret(&[(1.0, 1), (1.0, 1)], &l2, 1).unwrap(), 0.0);
    assert!(internal_regret(&[(0.3, 1)], &l2, 2).is_err());
}
