use gkp_repeater::link::{LinkStats, QuadratureStats};
use gkp_repeater::planner::*;
use gkp_repeater::rate::{end_to_end_rate, plob_bound, DEFAULT_CUTOFF};
use gkp_repeater::ModelError;
use proptest::prelude::*;

fn quad(q: f64, k: usize) -> QuadratureStats {
    let q_outer = (0..k).map(|i| q * (1.0 + i as f64)).collect();
    QuadratureStats { q_outer, se_outer: vec![0.0; k], q_inner: [q / 10.0, q], se_inner: [0.0; 2], t: 0.03, se_t: 0.0 }
}

fn stats(q: f64, k: usize) -> LinkStats {
    LinkStats { k, trials: 1, x: quad(q, k), z: quad(q, k), converged: true, max_rel_error_q: 0.0, max_rel_error_t: 0.0 }
}

fn device() -> DeviceSpec {
    DeviceSpec { sigma_gkp: 0.12, eta_d: 0.99, k: 20, v: None }
}

/// Flip level per spacing: longer segments are noisier.
fn cache(base: f64) -> StatsCache {
    let entries = SPACING_GRID.iter().enumerate().map(|(i, &l)| (l, stats(base * (1.0 + i as f64), 4))).collect();
    StatsCache { device: device(), n_per_km: DEFAULT_N_PER_KM, entries }
}

#[test]
fn window_decreases_with_spacing() {
    let w: Vec<f64> = SPACING_GRID.iter().map(|&l| discard_window_for(l).unwrap()).collect();
    assert!(w.windows(2).all(|p| p[1] < p[0]));
}

#[test]
fn chain_config_validation() {
    assert!(ChainConfig::new(0.5, 100.0, 4).is_ok());
    assert!(ChainConfig::new(2.5, 10.0, 4).is_ok());
    assert!(matches!(ChainConfig::new(0.7, 7.0, 4), Err(ModelError::OffGrid(_))));
    assert!(ChainConfig::new(2.0, 5.0, 4).is_err());
    assert!(ChainConfig::new(0.5, 10.0, 1).is_err());
    let c = ChainConfig::new(2.0, 100.0, 4).unwrap();
    assert_eq!((c.segments(), c.repeaters()), (50, 49));
}

#[test]
fn zero_noise_reaches_the_cap_at_the_largest_spacing() {
    let c = cache(0.0);
    for crit in [DistanceCriterion::MinRate(1e-6), DistanceCriterion::BeatsPlob] {
        let d = achievable_distance(&c, crit).unwrap();
        assert_eq!(d.distance_km, DISTANCE_CAP_KM);
        assert_eq!(d.spacing_km, 5.0);
        assert!((d.rate - 1.0).abs() < 1e-9);
    }
}

#[test]
fn hopeless_link_gives_zero_distance() {
    let mut s = stats(0.0, 2);
    s.x.t = 0.5;
    s.x.q_inner = [0.5, 0.5];
    s.z = s.x.clone();
    let d = achievable_distance_at(&s, 1.0, DistanceCriterion::MinRate(1e-6));
    assert_eq!(d.distance_km, 0.0);
}

#[test]
fn distance_search_finds_the_boundary() {
    let s = stats(2e-4, 4);
    let d = achievable_distance_at(&s, 1.0, DistanceCriterion::MinRate(0.5));
    let n = d.distance_km as u64;
    assert!(n > 1 && (n as f64) < DISTANCE_CAP_KM);
    assert!(end_to_end_rate(&s, n, DEFAULT_CUTOFF).rate >= 0.5);
    assert!(end_to_end_rate(&s, n + 1, DEFAULT_CUTOFF).rate < 0.5);
    assert_eq!(d.rate, end_to_end_rate(&s, n, DEFAULT_CUTOFF).rate);
}

#[test]
fn plob_criterion_reaches_at_least_as_far() {
    let s = stats(2e-5, 4);
    let weak = achievable_distance_at(&s, 0.5, DistanceCriterion::MinRate(1e-6));
    let plob = achievable_distance_at(&s, 0.5, DistanceCriterion::BeatsPlob);
    assert!(plob_bound(weak.distance_km) < 1e-6);
    assert!(plob.distance_km >= weak.distance_km);
    assert!(plob.rate > plob_bound(plob.distance_km));
}

#[test]
fn spacing_choice_minimizes_cost() {
    let c = cache(1e-4);
    let choice = optimize_spacing(&c, 100.0, DEFAULT_SUCCESS_THRESHOLD).unwrap();
    assert_eq!(choice.options.len(), SPACING_GRID.len());
    for o in &choice.options {
        assert!(choice.best.cost <= o.cost);
        assert_eq!(o.cost, cost(o.resources.total_end_to_end, o.rate));
    }
    // 7.5 km fits only 2.5 km spacing with n >= 2.
    let choice = optimize_spacing(&c, 7.5, DEFAULT_SUCCESS_THRESHOLD).unwrap();
    assert_eq!(choice.best.spacing_km, 2.5);
    assert!(optimize_spacing(&c, 0.3, DEFAULT_SUCCESS_THRESHOLD).is_err());
}

#[test]
fn no_key_is_reported() {
    let mut c = cache(0.0);
    for (_, s) in &mut c.entries {
        s.x.q_outer.iter_mut().for_each(|q| *q = 0.5);
        s.z = s.x.clone();
    }
    assert!(matches!(optimize_spacing(&c, 100.0, DEFAULT_SUCCESS_THRESHOLD), Err(ModelError::NoKey { .. })));
}

#[test]
fn cache_lookup() {
    let c = cache(1e-4);
    assert!(c.get(2.5).is_some());
    assert!(c.rate(0.7, 7.0).is_err());
    assert!(c.rate(2.0, 5.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn distance_is_monotone_in_link_quality(q in 1e-5f64..5e-3, worse in 1.0f64..4.0) {
        let good = achievable_distance_at(&stats(q, 4), 1.0, DistanceCriterion::MinRate(1e-6));
        let bad = achievable_distance_at(&stats(q * worse, 4), 1.0, DistanceCriterion::MinRate(1e-6));
        prop_assert!(bad.distance_km <= good.distance_km);
    }
}
