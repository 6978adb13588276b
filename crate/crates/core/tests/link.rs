use gkp_repeater::gkp::{rounding_error_probability, HardwareParams, SQRT_PI};
use gkp_repeater::link::*;
use gkp_repeater::stream::{domain, StreamFactory};
use proptest::prelude::*;

fn model(sigma: f64, eta_d: f64, k: usize, l: f64, inner: InnerMode) -> SegmentModel {
    let v = if sigma == 0.0 { 0.0 } else { 7.0 * SQRT_PI / 20.0 };
    let hw = HardwareParams::new(sigma, eta_d, k, v).unwrap();
    SegmentModel::new(hw, Segment::new(l, 4).unwrap(), inner).unwrap()
}

fn three_se(p: f64, n: f64) -> f64 {
    3.0 * (p * (1.0 - p) / n).sqrt()
}

#[test]
fn outer_schedule_lists_preparation_and_channel() {
    let hw = HardwareParams::new(0.13, 0.99, 20, 0.6).unwrap();
    let seg = Segment::new(0.5, 4).unwrap();
    let s = outer_schedule(&hw, &seg).unwrap();
    let repeats: Vec<u32> = s.entries.iter().map(|e| e.repeat).collect();
    assert_eq!(repeats, vec![2, 6, 1]);
    assert!(s.entries[0].post_selected && s.entries[1].post_selected);
    let eta = (-0.5f64 / 44.0).exp();
    let cc = (1.0 - eta * 0.99) / (eta * 0.99);
    match s.entries[2].kind {
        ErrorKind::Shift(ch) => {
            assert!((ch.sigma2_p - (4.0 * 0.13f64.powi(2) + cc)).abs() < 1e-15);
            assert!((ch.sigma2_q - (2.0 * 0.13f64.powi(2) + cc)).abs() < 1e-15);
        }
        _ => panic!("expected the communication channel"),
    }
    assert!(s.entries[2].analog_record);
}

fn shift_repeats(s: &ChannelSchedule, label: &str) -> u32 {
    s.entries.iter().filter(|e| e.label == label).map(|e| e.repeat).sum()
}

#[test]
fn inner_schedule_storage_counts() {
    let hw = HardwareParams::new(0.13, 0.99, 20, 0.6).unwrap();
    for (l, n) in [(0.5, 2u32), (1.0, 4), (2.5, 10)] {
        let s = inner_schedule(&hw, &Segment::new(l, 4).unwrap()).unwrap();
        assert_eq!(shift_repeats(&s, "first storage correction"), 7);
        assert_eq!(shift_repeats(&s, "storage correction"), 7 * (n - 2));
        assert_eq!(shift_repeats(&s, "swap"), 7);
    }
    let s = inner_schedule(&hw, &Segment::new(0.25, 4).unwrap()).unwrap();
    assert_eq!(shift_repeats(&s, "swap, native"), 7);
    assert_eq!(shift_repeats(&s, "first storage correction"), 0);
}

#[test]
fn inner_schedule_hadamard_and_correlations() {
    let hw = HardwareParams::new(0.13, 0.99, 20, 0.6).unwrap();
    let s = inner_schedule(&hw, &Segment::new(1.0, 4).unwrap()).unwrap();
    let first = |q: usize| {
        s.entries
            .iter()
            .find(|e| e.label == "first storage correction" && e.qubits == vec![q])
            .map(|e| match e.kind {
                ErrorKind::Shift(ch) => ch,
                _ => unreachable!(),
            })
            .unwrap()
    };
    // 3σ² term lands on q for Hadamard qubits and on p otherwise.
    assert!(first(1).sigma2_q > first(1).sigma2_p);
    assert!(first(5).sigma2_p > first(5).sigma2_q);
    let pair = s.entries.iter().find(|e| e.qubits == vec![1, 2]).unwrap();
    assert_eq!(pair.repeat, 2);
    assert!(matches!(pair.kind, ErrorKind::Flip { quadrature: Quadrature::X, .. }));
    let pair = s.entries.iter().find(|e| e.qubits == vec![5, 6]).unwrap();
    assert!(matches!(pair.kind, ErrorKind::Flip { quadrature: Quadrature::Z, .. }));
}

#[test]
fn ideal_hardware_never_flips() {
    let m = SegmentModel::new(HardwareParams::ideal(3), Segment::new(0.25, 4).unwrap(), InnerMode::Simulated)
        .unwrap();
    let c = run_trials(&m, 0, 2000, 1);
    assert_eq!(c.syndrome, [0, 0]);
    assert!(c.outer_flips.iter().all(|v| v.iter().all(|&x| x == 0)));
}

#[test]
fn outer_flip_rate_matches_gaussian_tail() {
    // Noise-free preparation, so only the communication channel acts.
    let m = model(0.0, 1.0, 1, 5.0, InnerMode::Perfect);
    let n = 400_000u64;
    let c = run_trials(&m, 0, n, 2);
    let eta = (-5.0f64 / 44.0).exp();
    let want = rounding_error_probability((1.0 - eta) / eta);
    for q in 0..2 {
        let got = c.outer_flips[q][0] as f64 / n as f64;
        assert!((got - want).abs() < three_se(want, n as f64), "quadrature {q}: {got} vs {want}");
    }
}

#[test]
fn counts_do_not_depend_on_worker_count() {
    let m = model(0.15, 0.98, 5, 1.0, InnerMode::Simulated);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| run_trials(&m, 0, 3000, 5))
    };
    assert_eq!(run(1), run(3));
    let split = run_trials(&m, 0, 1200, 5).merge(&run_trials(&m, 1200, 3000, 5));
    assert_eq!(split, run(2));
}

#[test]
fn ranking_orders_flip_rates() {
    let m = model(0.15, 0.97, 6, 2.0, InnerMode::Perfect);
    let n = 100_000.0;
    let s = LinkStats::from_counts(&run_trials(&m, 0, n as u64, 6));
    for q in [&s.x, &s.z] {
        let (a, b) = (q.q_outer[0], q.q_outer[5]);
        assert!(b - a > three_se(a, n) + three_se(b, n), "{a} vs {b}");
    }
}

#[test]
fn unranked_links_are_exchangeable() {
    let m = model(0.15, 0.97, 6, 2.0, InnerMode::Perfect).unranked();
    let n = 100_000.0;
    let s = LinkStats::from_counts(&run_trials(&m, 0, n as u64, 6));
    for q in [&s.x, &s.z] {
        let mean = q.q_outer.iter().sum::<f64>() / 6.0;
        for &p in &q.q_outer {
            assert!((p - mean).abs() < 4.0 * (mean * (1.0 - mean) / n).sqrt(), "{p} vs {mean}");
        }
    }
}

#[test]
fn flagged_swaps_are_less_reliable() {
    let m = model(0.15, 0.97, 1, 0.5, InnerMode::Simulated);
    let s = LinkStats::from_counts(&run_trials(&m, 0, 200_000, 8));
    for q in [&s.x, &s.z] {
        assert!(q.t > 0.0);
        assert!(q.q_inner[1] > q.q_inner[0], "{:?}", q.q_inner);
    }
}

#[test]
fn syndrome_rates_at_sigma_015() {
    let m = model(0.15, 0.99, 1, 0.5, InnerMode::Simulated);
    let s = LinkStats::from_counts(&run_trials(&m, 0, 100_000, 4));
    assert!((s.z.t / 0.026 - 1.0).abs() < 0.1, "t_z = {}", s.z.t);
    assert!((s.x.t / 0.031 - 1.0).abs() < 0.1, "t_x = {}", s.x.t);
}

#[test]
fn zero_error_hardware_converges_immediately() {
    let m = SegmentModel::new(HardwareParams::ideal(4), Segment::new(0.5, 4).unwrap(), InnerMode::Perfect).unwrap();
    let acc = Accuracy { min_trials: 100, ..Accuracy::default() };
    let s = estimate_link_stats(&m, &acc, 1).unwrap();
    assert!(s.converged);
    assert_eq!(s.trials, 100);
    assert!(s.x.q_outer.iter().chain(&s.z.q_outer).all(|&q| q == 0.0));
}

#[test]
fn trial_cap_flags_partial_result() {
    let m = model(0.15, 0.97, 2, 0.5, InnerMode::Simulated);
    let acc = Accuracy { max_trials: 1000, ..Accuracy::default() };
    let s = estimate_link_stats(&m, &acc, 1).unwrap();
    assert!(!s.converged);
    assert_eq!(s.trials, 1000);
    assert!(Accuracy { b: 0.0, ..Accuracy::default() }.validate().is_err());
}

#[test]
fn adaptive_run_equals_single_run() {
    let m = model(0.15, 0.97, 2, 0.5, InnerMode::Simulated);
    let acc = Accuracy { max_trials: 10_000, ..Accuracy::default() };
    let s = estimate_link_stats(&m, &acc, 3).unwrap();
    let direct = LinkStats::from_counts(&run_trials(&m, 0, s.trials, 3));
    assert_eq!(s.x, direct.x);
    assert_eq!(s.z, direct.z);
}

#[test]
fn syndrome_conditioned_sample_sizes() {
    let m = model(0.15, 0.97, 2, 0.5, InnerMode::Simulated);
    let c = run_trials(&m, 0, 20_000, 3);
    let s = LinkStats::from_counts(&c);
    let n1 = c.syndrome[1] as f64;
    assert!((n1 - 20_000.0 * s.z.t).abs() < 1e-9);
    let q = s.z.q_inner[1];
    assert!((s.z.se_inner[1] - (q * (1.0 - q) / n1).sqrt()).abs() < 1e-15);
}

#[test]
fn single_trial_streams_are_independent_of_order() {
    let m = model(0.13, 0.99, 3, 0.5, InnerMode::Simulated);
    let f = StreamFactory::new(4, domain::OUTER);
    let a = m.simulate_outer_pair(&mut f.stream(17));
    let b = m.simulate_outer_pair(&mut f.stream(17));
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn rank_is_a_sorted_permutation(p in prop::collection::vec(0.0f64..1.0, 1..30)) {
        let perm = rank_links(&p);
        let mut seen = perm.clone();
        seen.sort();
        prop_assert_eq!(seen, (0..p.len()).collect::<Vec<_>>());
        for w in perm.windows(2) {
            prop_assert!(p[w[0]] > p[w[1]] || (p[w[0]] == p[w[1]] && w[0] < w[1]));
        }
    }

    #[test]
    fn counts_merge_is_commutative(a in 0u64..50, b in 0u64..50) {
        let m = model(0.15, 0.97, 2, 0.5, InnerMode::Simulated);
        let x = run_trials(&m, 0, a, 1);
        let y = run_trials(&m, a, a + b, 1);
        prop_assert_eq!(x.clone().merge(&y), y.merge(&x));
    }
}
