//! Reference strategies evaluated in closed form: post-selected multiplexing,
//! a chain of single GKP Bell pairs, and an analytic model of the per-repeater
//! inner-leaf error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{ModelError, Result};
use crate::gkp::{flip_probs, HardwareParams, ATTENUATION_LENGTH_KM, SQRT_PI};
use crate::link::LinkStats;
use crate::rate::{bell_from_flips, end_to_end_flip, secret_fraction};

/// Number of discard windows tried by the optimizers.
pub const V_GRID_POINTS: usize = 200;

/// Exponent used by the analytic error model unless overridden.
pub const DEFAULT_ANALYTIC_EXPONENT: f64 = 2.45;

/// `V_GRID_POINTS` evenly spaced windows on `[0, sqrt(pi)/2)`.
pub fn v_grid() -> Vec<f64> {
    let step = SQRT_PI / 2.0 / V_GRID_POINTS as f64;
    (0..V_GRID_POINTS).map(|i| i as f64 * step).collect()
}

/// Probability that exactly `m` of `k` links pass in both quadratures.
pub fn elementary_pass_distribution(k: usize, p: f64) -> Vec<f64> {
    let both = p * p;
    (0..=k)
        .map(|m| {
            let ln_c = ln_gamma(k as f64 + 1.0) - ln_gamma(m as f64 + 1.0) - ln_gamma((k - m) as f64 + 1.0);
            let a = if m == 0 { 0.0 } else { m as f64 * both.ln() };
            let b = if m == k { 0.0 } else { (k - m) as f64 * (-both).ln_1p() };
            (ln_c + a + b).exp()
        })
        .collect()
}

/// Expected number of end-to-end links, the minimum over `n` segments of the
/// per-segment pass counts.
pub fn expected_end_to_end_links(k: usize, n: u64, p: f64) -> f64 {
    let elem = elementary_pass_distribution(k, p);
    let mut above = 0.0;
    let mut mean = 0.0;
    for m in (0..=k).rev() {
        let exactly = elem[m];
        let at_least = (exactly + above).min(1.0);
        let p_end = at_least.powf(n as f64) - above.powf(n as f64);
        mean += m as f64 * p_end;
        above = at_least;
    }
    mean
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostselectionRate {
    pub rate: f64,
    pub v: f64,
    pub expected_links: f64,
    pub qber: f64,
}

/// Rate per mode of post-selected multiplexing over `n` segments with
/// per-quadrature noise variance `sigma2` and window `v`.
pub fn postselection_multiplex_rate(k: usize, n: u64, v: f64, sigma2: f64) -> Result<PostselectionRate> {
    if k == 0 || n == 0 {
        return Err(ModelError::invalid("k", "k and n must be at least 1"));
    }
    let ps = flip_probs(v, sigma2)?;
    let expected_links = expected_end_to_end_links(k, n, ps.p_ps);
    let qber = end_to_end_flip(ps.e_ps, ps.e_ps, 0, n);
    let r = secret_fraction(&bell_from_flips(qber, qber)).r;
    Ok(PostselectionRate { rate: expected_links / k as f64 * r, v, expected_links, qber })
}

/// [`postselection_multiplex_rate`] maximized over [`v_grid`].
pub fn optimize_postselection(k: usize, n: u64, sigma2: f64) -> Result<PostselectionRate> {
    let rates: Vec<PostselectionRate> = v_grid()
        .into_par_iter()
        .map(|v| postselection_multiplex_rate(k, n, v, sigma2))
        .collect::<Result<_>>()?;
    Ok(best_by_rate(rates, |r| r.rate))
}

/// First maximum, so results do not depend on evaluation order.
fn best_by_rate<T: Copy>(items: Vec<T>, rate: impl Fn(&T) -> f64) -> T {
    let mut best = items[0];
    for it in &items[1..] {
        if rate(it) > rate(&best) {
            best = *it;
        }
    }
    best
}

/// Noise variance of one CC-amplified GKP Bell pair across a segment.
pub fn single_chain_sigma2(hw: &HardwareParams, spacing_km: f64) -> f64 {
    let t = hw.eta_d * (-spacing_km / (2.0 * ATTENUATION_LENGTH_KM)).exp();
    (1.0 - t) / t + 2.0 * hw.sigma2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleChainRate {
    pub rate: f64,
    pub spacing_km: f64,
    pub v: f64,
    pub qber: f64,
}

/// Rate of a non-multiplexed chain of post-selected GKP Bell pairs.
pub fn single_gkp_chain_rate(hw: &HardwareParams, spacing_km: f64, l_tot_km: f64, v: f64) -> Result<SingleChainRate> {
    let n = segments(spacing_km, l_tot_km)?;
    let ps = flip_probs(v, single_chain_sigma2(hw, spacing_km))?;
    let qber = end_to_end_flip(ps.e_ps, ps.e_ps, 0, n);
    let r = secret_fraction(&bell_from_flips(qber, qber)).r;
    let pass = (2.0 * n as f64 * ps.p_ps.ln()).exp();
    Ok(SingleChainRate { rate: pass * r, spacing_km, v, qber })
}

/// [`single_gkp_chain_rate`] maximized over [`v_grid`] and the spacings that
/// divide `l_tot_km`.
pub fn optimize_single_chain(hw: &HardwareParams, spacings: &[f64], l_tot_km: f64) -> Result<SingleChainRate> {
    let mut candidates = vec![];
    for &l in spacings {
        if segments(l, l_tot_km).is_err() {
            continue;
        }
        for v in v_grid() {
            candidates.push((l, v));
        }
    }
    if candidates.is_empty() {
        return Err(ModelError::invalid("l_tot", format!("{l_tot_km} km is not a multiple of any spacing")));
    }
    let rates: Vec<SingleChainRate> = candidates
        .into_par_iter()
        .map(|(l, v)| single_gkp_chain_rate(hw, l, l_tot_km, v))
        .collect::<Result<_>>()?;
    Ok(best_by_rate(rates, |r| r.rate))
}

/// Number of segments of length `spacing_km` in `l_tot_km`.
pub fn segments(spacing_km: f64, l_tot_km: f64) -> Result<u64> {
    let n = l_tot_km / spacing_km;
    if !(spacing_km > 0.0) || !(n >= 1.0 - 1e-9) || (n - n.round()).abs() > 1e-9 {
        return Err(ModelError::invalid(
            "l_tot",
            format!("{l_tot_km} km is not a positive multiple of {spacing_km} km"),
        ));
    }
    Ok(n.round() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticModelParams {
    /// Exponent for uncorrected two-qubit errors.
    pub c: f64,
    pub spacing_km: f64,
    pub hw: HardwareParams,
}

impl AnalyticModelParams {
    pub fn new(c: f64, spacing_km: f64, hw: HardwareParams) -> Result<Self> {
        if !(c > 2.0 && c < 3.0) {
            return Err(ModelError::invalid("c", format!("{c} is not in (2, 3)")));
        }
        if !(spacing_km >= 0.5) {
            return Err(ModelError::invalid("spacing_km", format!("{spacing_km} is below 0.5 km")));
        }
        Ok(AnalyticModelParams { c, spacing_km, hw })
    }
}

/// Mean weight of the GKP noise term over the uncorrected inner channels.
pub fn gkp_noise_weight(spacing_km: f64) -> f64 {
    (32.0 * spacing_km - 2.0) / (16.0 * spacing_km - 2.0)
}

/// Analytic per-repeater logical error of a pair of inner leaves, per
/// quadrature.
pub fn analytic_inner_error(p: &AnalyticModelParams) -> f64 {
    let l = p.spacing_km;
    let eta = (-1.0 / (4.0 * ATTENUATION_LENGTH_KM)).exp();
    let sigma2 = gkp_noise_weight(l) * p.hw.sigma2() + (1.0 - eta) + (1.0 - p.hw.eta_d);
    if sigma2 == 0.0 {
        return 0.0;
    }
    let sigma = sigma2.sqrt();
    let single = 2.0 * 2f64.sqrt() * sigma / std::f64::consts::PI * (-std::f64::consts::PI / (8.0 * sigma2)).exp();
    21.0 * ((8.0 * l - 1.0) * single).powf(p.c)
}

/// Simulated counterpart of [`analytic_inner_error`]: the best-ranked link's
/// flip probability with syndrome information ignored, averaged over X and Z.
pub fn simulated_inner_error(stats: &LinkStats) -> f64 {
    let per = |q: &crate::link::QuadratureStats| {
        let inner = q.pooled_inner();
        inner + q.q_outer[0] - 2.0 * inner * q.q_outer[0]
    };
    (per(&stats.x) + per(&stats.z)) / 2.0
}
