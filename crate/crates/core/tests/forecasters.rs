use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use recal_core::rng::substream;
use recal_core::{CalibrationCurve, LinearKind, OnlineLinearForecaster};

#[test]
fn separable_gaussians_are_learned_online() {
    for kind in [LinearKind::Logistic, LinearKind::Hinge] {
        let mut rng = substream(5, 0);
        let mut f = OnlineLinearForecaster::new(2, kind).unwrap();
        let mut correct = 0;
        let t = 5000;
        for _ in 0..t {
            let y: u8 = rng.random_range(0..=1);
            let sign = 2.0 * f64::from(y) - 1.0;
            let x: Vec<f64> = (0..2)
                .map(|_| 2.5 * sign + rng.sample::<f64, _>(StandardNormal))
                .collect();
            let (_, p) = f.predict(&x).unwrap();
            correct += u32::from(u8::from(p >= 0.5) == y);
            f.update(&x, y).unwrap();
        }
        let accuracy = f64::from(correct) / f64::from(t);
        assert!(accuracy >= 0.9, "{kind:?}: {accuracy}");
    }
}

proptest! {
    #[test]
    fn hinge_probabilities_and_running_max(
        xs in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 1..100),
        ys in prop::collection::vec(0u8..=1, 100),
    ) {
        let mut f = OnlineLinearForecaster::new(3, LinearKind::Hinge).unwrap();
        let mut prev = 0.0;
        for (x, &y) in xs.iter().zip(&ys) {
            let (s, p) = f.predict(x).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(f.abs_max() >= prev && f.abs_max() >= s.abs());
            prev = f.abs_max();
            f.update(x, y).unwrap();
        }
    }
}

#[test]
fn curve_of_calibrated_data_is_diagonal() {
    let mut rng = substream(11, 0);
    let pairs: Vec<(f64, u8)> = (0..100_000)
        .map(|_| {
            let p: f64 = rng.random();
            (p, u8::from(rng.random_bool(p)))
        })
        .collect();
    let curve = CalibrationCurve::from_pairs(&pairs, 10).unwrap();
    assert_eq!(curve.total_count(), 100_000);
    assert!(curve.max_gap(100) <= 0.05, "{}", curve.max_gap(100));
}
