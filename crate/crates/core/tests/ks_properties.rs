use hearingkit_core::stats::{ks_series_p, ks_two_sample};
use proptest::prelude::*;

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 1..40)
}

proptest! {
    #[test]
    fn swapping_samples_keeps_d_and_p(a in sample(), b in sample()) {
        let ab = ks_two_sample(&a, &b).unwrap();
        let ba = ks_two_sample(&b, &a).unwrap();
        prop_assert_eq!(ab.statistic_d, ba.statistic_d);
        prop_assert_eq!(ab.p_value, ba.p_value);
        // Direction is mean_a - mean_b, so it flips sign.
        prop_assert_eq!(ab.mean_a - ab.mean_b, -(ba.mean_a - ba.mean_b));
        prop_assert!((0.0..=1.0).contains(&ab.statistic_d));
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn d_is_rank_invariant(a in sample(), b in sample()) {
        let f = |x: &f64| (x / 10.0).exp() * 2.0 - 5.0;
        let ta: Vec<f64> = a.iter().map(f).collect();
        let tb: Vec<f64> = b.iter().map(f).collect();
        prop_assert_eq!(ks_two_sample(&a, &b).unwrap().statistic_d, ks_two_sample(&ta, &tb).unwrap().statistic_d);
    }
}

#[test]
fn series_is_monotone_on_a_grid() {
    let mut prev = 1.0;
    for i in 0..=600 {
        let p = ks_series_p(i as f64 * 0.005);
        assert!(p <= prev + 1e-15, "lambda {}", i as f64 * 0.005);
        prev = p;
    }
}
