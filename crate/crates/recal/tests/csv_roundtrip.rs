use proptest::prelude::*;
use recal::csv_io::{read_records_from, write_records_to};
use recal_core::StreamRecord;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        -1e3f64..1e3,
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
        Just(5e-324),
    ]
}

fn probability() -> impl Strategy<Value = f64> {
    prop_oneof![
        0.0f64..=1.0,
        Just(0.0),
        Just(1.0),
        Just(1e-300),
        Just(1.0 - f64::EPSILON)
    ]
}

fn records() -> impl Strategy<Value = Vec<StreamRecord>> {
    (0usize..4, any::<bool>()).prop_flat_map(|(dim, with_forecast)| {
        let with_forecast = with_forecast || dim == 0;
        prop::collection::vec(
            (prop::collection::vec(finite(), dim), probability(), 0u8..=1),
            0..40,
        )
        .prop_map(move |rows| {
            rows.into_iter()
                .map(|(x, p, y)| {
                    let features = (dim > 0).then_some(x);
                    StreamRecord::new(features, with_forecast.then_some(p), y).unwrap()
                })
                .collect()
        })
    })
}

proptest! {
    #[test]
    fn write_then_read_is_exact(recs in records(), extra in prop::collection::vec(probability(), 40)) {
        let mut buf = Vec::new();
        write_records_to(&mut buf, &recs, None).unwrap();
        let back = read_records_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), recs.len());
        for (a, b) in recs.iter().zip(&back) {
            prop_assert_eq!(a.outcome, b.outcome);
            prop_assert_eq!(a.forecast.map(f64::to_bits), b.forecast.map(f64::to_bits));
            prop_assert_eq!(
                a.features.as_ref().map(|v| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>()),
                b.features.as_ref().map(|v| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>())
            );
        }

        let mut annotated = Vec::new();
        write_records_to(&mut annotated, &recs, Some(("p_cal", &extra[..recs.len()]))).unwrap();
        prop_assert_eq!(read_records_from(annotated.as_slice()).unwrap(), recs);
    }
}
