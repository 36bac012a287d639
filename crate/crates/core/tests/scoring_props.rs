use proptest::prelude::*;
use sploc::scoring::{
    aggregate_selection, cluster_quality, consensus_logistic, consensus_power, mode_efficacy,
    pair_selection_power, ModeTraits,
};
use sploc::{BiasMode, Thresholds};

fn traits() -> impl Strategy<Value = ModeTraits> {
    (-10.0..10.0f64, 0.01..10.0f64).prop_map(|(mean, std)| ModeTraits { mean, std })
}

proptest! {
    #[test]
    fn selection_is_at_least_one_and_branches_are_exclusive(a in traits(), b in traits()) {
        let th = Thresholds::default();
        let s = pair_selection_power(a, b, &th).unwrap();
        prop_assert!(s >= 1.0);
        prop_assert!(s < th.s_i || s > th.s_d || s == th.s_o());
    }

    #[test]
    fn selection_is_symmetric_and_scale_free(a in traits(), b in traits(), c in 0.1..10.0f64) {
        let th = Thresholds::default();
        let s = pair_selection_power(a, b, &th).unwrap();
        prop_assert_eq!(s, pair_selection_power(b, a, &th).unwrap());
        let scale = |t: ModeTraits| ModeTraits { mean: t.mean * c, std: t.std * c };
        let scaled = pair_selection_power(scale(a), scale(b), &th).unwrap();
        prop_assert!((s - scaled).abs() < 1e-9 * s);
    }

    #[test]
    fn consensus_is_monotone(f in 0.0..1.0f64, g in 0.0..1.0f64) {
        let (lo, hi) = if f < g { (f, g) } else { (g, f) };
        prop_assert!(consensus_logistic(lo) <= consensus_logistic(hi));
    }

    #[test]
    fn consensus_in_unit_interval(scores in prop::collection::vec(1.0..5.0f64, 1..40)) {
        let c = consensus_power(&scores, &Thresholds::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn median_is_bounded_by_extremes(scores in prop::collection::vec(1.0..5.0f64, 1..40)) {
        let m = aggregate_selection(&scores).unwrap();
        let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= m && m <= hi);
    }

    #[test]
    fn quality_is_antisymmetric_and_bounded(
        f in prop::collection::vec(traits(), 1..8),
        n in prop::collection::vec(traits(), 1..8),
    ) {
        let (qd, qi) = cluster_quality(&f, &n).unwrap();
        prop_assert_eq!(qd + qi, 0.0);
        prop_assert!((-1.0..=1.0).contains(&qd));
    }

    #[test]
    fn unbiased_efficacy_grows_away_from_reference(x in 0.01..3.0f64, dx in 0.01..1.0f64) {
        let th = Thresholds::default();
        let s_o = th.s_o();
        let bias = BiasMode::Zero;
        let up = |x: f64| mode_efficacy(s_o * x.exp(), 1.0, 1.0, &bias, &th).unwrap();
        prop_assert!(up(x + dx) > up(x));
        let x_low = x.min(s_o.ln() - 1e-3);
        let down = |x: f64| mode_efficacy(s_o * (-x).exp(), 1.0, 1.0, &bias, &th).unwrap();
        let x2 = (x_low + dx).min(s_o.ln());
        if x2 > x_low {
            prop_assert!(down(x2) > down(x_low));
        }
    }
}

#[test]
fn weak_biases_scale_only_one_side() {
    let th = Thresholds::default();
    let s_o = th.s_o();
    let zero = |s, b: BiasMode| mode_efficacy(s, 0.5, -0.5, &b, &th).unwrap();
    let hi = 2.0 * s_o;
    let lo = s_o / 1.2;
    assert!((zero(hi, BiasMode::ZeroMinus) - 0.1 * zero(hi, BiasMode::Zero)).abs() < 1e-12);
    assert_eq!(zero(lo, BiasMode::ZeroMinus), zero(lo, BiasMode::Zero));
    assert_eq!(zero(hi, BiasMode::ZeroPlus), zero(hi, BiasMode::Zero));
    let flip = |s, b: BiasMode| mode_efficacy(s, -0.5, 0.5, &b, &th).unwrap();
    assert!((flip(lo, BiasMode::ZeroPlus) - 0.1 * flip(lo, BiasMode::Zero)).abs() < 1e-12);
}
