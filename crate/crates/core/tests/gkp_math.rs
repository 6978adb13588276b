use gkp_repeater::gkp::*;
use proptest::prelude::*;

fn gaussian_density(x: f64, sigma2: f64) -> f64 {
    (-x * x / (2.0 * sigma2)).exp() / (2.0 * std::f64::consts::PI * sigma2).sqrt()
}

/// Adaptive Simpson integration.
fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let m = 0.5 * (a + b);
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, left, tol / 2.0, depth - 1) + rec(f, m, b, right, tol / 2.0, depth - 1)
    }
    rec(f, a, b, simpson(f, a, b), tol, 50)
}

/// Pass and error masses by direct integration of the Gaussian density over
/// the central window and the two nearest odd windows.
fn flip_oracle(v: f64, sigma2: f64) -> (f64, f64) {
    let h = SQRT_PI / 2.0;
    let f = |x: f64| gaussian_density(x, sigma2);
    let e0 = integrate(&f, -(h - v), h - v, 1e-14);
    let e1 = 2.0 * integrate(&f, h + v, 3.0 * h - v, 1e-14);
    (e0, e1)
}

/// Odd-lattice share of the Gaussian weights at `r + m*sqrt(pi)`, |m| <= 60.
fn likelihood_oracle(r: f64, sigma: f64) -> f64 {
    let (mut odd, mut all) = (0.0, 0.0);
    for m in -60i32..=60 {
        let d = r - m as f64 * SQRT_PI;
        let w = (-d * d / (2.0 * sigma * sigma)).exp();
        all += w;
        if m.rem_euclid(2) == 1 {
            odd += w;
        }
    }
    odd / all
}

#[test]
fn flip_probs_match_quadrature() {
    for &sigma2 in &[0.005, 0.02, 0.05, 0.1, 0.3] {
        for &v in &[0.0, 0.1, 0.3, 0.6, 0.85] {
            let ps = flip_probs(v, sigma2).unwrap();
            let (e0, e1) = flip_oracle(v, sigma2);
            assert!((ps.e0 - e0).abs() < 1e-10, "e0 v={v} s2={sigma2}: {} vs {e0}", ps.e0);
            assert!((ps.e1 - e1).abs() < 1e-10, "e1 v={v} s2={sigma2}: {} vs {e1}", ps.e1);
        }
    }
}

#[test]
fn flip_probs_examples() {
    let ps = flip_probs(0.0, 0.0).unwrap();
    assert_eq!((ps.e0, ps.e1, ps.p_ps, ps.e_ps), (1.0, 0.0, 1.0, 0.0));
    assert!(matches!(flip_probs(SQRT_PI / 2.0, 0.1), Err(gkp_repeater::ModelError::EmptyWindow { .. })));
}

#[test]
fn likelihood_matches_lattice_sum() {
    for &sigma in &[0.15, 0.25, 0.4, 0.6, 1.0] {
        for i in 0..=40 {
            let r = -SQRT_PI / 2.0 + i as f64 * SQRT_PI / 40.0 * 0.999;
            let got = analog_likelihood(r, sigma);
            let want = likelihood_oracle(r, sigma);
            assert!((got - want).abs() < 1e-12, "r={r} sigma={sigma}: {got} vs {want}");
        }
    }
}

#[test]
fn likelihood_examples() {
    assert!((analog_likelihood(SQRT_PI / 2.0 - 1e-15, 0.3) - 0.5).abs() < 1e-6);
    assert!(analog_likelihood(0.0, 0.2) < 1e-10);
    assert_eq!(analog_likelihood(0.3, 0.0), 0.0);
}

#[test]
fn rounding_error_matches_lattice_integral() {
    for &sigma2 in &[0.01, 0.05, 0.2] {
        let sigma = f64::sqrt(sigma2);
        let f = |x: f64| gaussian_density(x, sigma2);
        let mut want = 0.0;
        for m in (1..40).step_by(2) {
            let c = m as f64 * SQRT_PI;
            want += 2.0 * integrate(&f, c - SQRT_PI / 2.0, c + SQRT_PI / 2.0, 1e-15);
            if c - SQRT_PI > 12.0 * sigma {
                break;
            }
        }
        let got = rounding_error_probability(sigma2);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn squeezing_round_trip() {
    assert!((squeezing_db(0.13).unwrap() - 14.7).abs() < 0.05);
    for &db in &[8.0, 10.0, 14.7, 20.0] {
        assert!((squeezing_db(sigma_from_db(db)).unwrap() - db).abs() < 1e-12);
    }
    assert!(squeezing_db(0.0).is_err());
}

#[test]
fn channel_variances() {
    let hw = HardwareParams::new(0.1, 0.98, 1, 0.0).unwrap();
    let eta = transmissivity(1.0);
    assert!((channel_sigma2(ChannelKind::Preamp, eta, &hw).unwrap() - (1.0 - eta)).abs() < 1e-15);
    let cc = channel_sigma2(ChannelKind::CcampLossyDet, eta, &hw).unwrap();
    assert!((cc - (1.0 - eta * 0.98) / (eta * 0.98)).abs() < 1e-15);
    assert_eq!(channel_sigma2(ChannelKind::Preamp, 1.0, &hw).unwrap(), 0.0);
    assert!(channel_sigma2(ChannelKind::Preamp, 0.0, &hw).is_err());
}

#[test]
fn bsm_decoding() {
    assert!(!decode_bsm(0.1).bit);
    assert!(decode_bsm(SQRT_PI + 0.1).bit);
    assert!(!decode_bsm(2.0 * SQRT_PI - 0.2).bit);
    assert!((decode_bsm(SQRT_PI + 0.1).syndrome - 0.1).abs() < 1e-12);
}

fn parity_oracle(p: f64, count: u32) -> f64 {
    let mut odd = 0.0;
    for mask in 0u32..(1 << count) {
        let w = mask.count_ones();
        if w % 2 == 1 {
            odd += p.powi(w as i32) * (1.0 - p).powi((count - w) as i32);
        }
    }
    odd
}

proptest! {
    #[test]
    fn remainder_in_window_and_idempotent(x in -100.0f64..100.0, s in 0.1f64..10.0) {
        let r = remainder(x, s);
        prop_assert!(r >= -s / 2.0 && r < s / 2.0);
        prop_assert_eq!(remainder(r, s), r);
        let k = ((x - r) / s).round();
        prop_assert!((x - r - k * s).abs() < 1e-9 * (1.0 + x.abs()));
    }

    #[test]
    fn flip_probs_consistent(v in 0.0f64..0.88, sigma2 in 1e-4f64..1.0) {
        let ps = flip_probs(v, sigma2).unwrap();
        prop_assert!(ps.e0 >= 0.0 && ps.e1 >= 0.0 && ps.p_ps <= 1.0);
        prop_assert!((ps.p_ps - ps.e0 - ps.e1).abs() < 1e-15);
        prop_assert!(ps.e1 <= flip_tail_bound(v, sigma2));
    }

    #[test]
    fn likelihood_is_a_probability(r in -0.886f64..0.886, sigma in 0.01f64..2.0) {
        let p = analog_likelihood(r, sigma);
        prop_assert!((0.0..=0.5 + 1e-12).contains(&p));
    }

    #[test]
    fn parity_matches_enumeration(p in 0.0f64..0.5, count in 0u32..10) {
        prop_assert!((parity_probability(p, count) - parity_oracle(p, count)).abs() < 1e-13);
    }
}
