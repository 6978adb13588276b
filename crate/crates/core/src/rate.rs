//! End-to-end secret-key rates from per-segment link statistics.
//!
//! A chain of `n` identical segments is composed analytically: for every
//! rank `j` and every count `m` of swaps that flagged a non-zero syndrome,
//! the end-to-end flip probability follows from the parity of independent
//! flips. Each (j, m_x, m_z) bin is distilled on its own.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::gkp::ATTENUATION_LENGTH_KM;
use crate::link::{LinkStats, QuadratureStats};

/// Bins whose total mass is below this are dropped.
pub const DEFAULT_CUTOFF: f64 = 1e-30;

/// Probability of an odd number of flips among `m` links flipping with
/// probability `q1` and `n - m` links flipping with probability `q0`.
pub fn end_to_end_flip(q0: f64, q1: f64, m: u64, n: u64) -> f64 {
    debug_assert!(m <= n);
    let mut log_bias = 0.0;
    if m > 0 {
        log_bias += m as f64 * (-2.0 * q1).ln_1p();
    }
    if n > m {
        log_bias += (n - m) as f64 * (-2.0 * q0).ln_1p();
    }
    -0.5 * log_bias.exp_m1()
}

/// Natural log of the Binomial(n, t) mass at m.
pub fn ln_bin_probability(n: u64, m: u64, t: f64) -> f64 {
    if m > n {
        return f64::NEG_INFINITY;
    }
    let ln_choose = ln_gamma(n as f64 + 1.0) - ln_gamma(m as f64 + 1.0) - ln_gamma((n - m) as f64 + 1.0);
    let a = if m == 0 { 0.0 } else { m as f64 * t.ln() };
    let b = if m == n { 0.0 } else { (n - m) as f64 * (-t).ln_1p() };
    ln_choose + a + b
}

pub fn bin_probability(n: u64, m: u64, t: f64) -> f64 {
    ln_bin_probability(n, m, t).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellDiagonal {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl BellDiagonal {
    pub fn probs(&self) -> [f64; 4] {
        [self.p00, self.p01, self.p10, self.p11]
    }
}

/// Bell-diagonal state of a pair whose X and Z flips are independent.
/// `p_xz` is the probability of an X flip `x` and a Z flip `z`.
pub fn bell_from_flips(qx: f64, qz: f64) -> BellDiagonal {
    let p10 = qx * (1.0 - qz);
    let p01 = qz * (1.0 - qx);
    let p11 = qx * qz;
    BellDiagonal { p00: 1.0 - p10 - p01 - p11, p01, p10, p11 }
}

/// Shannon entropy in bits.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    OneWay,
    AdvantageDistillation,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecretFraction {
    pub r: f64,
    pub protocol: Protocol,
}

/// One-way six-state key fraction, `1 - H(p)`.
pub fn one_way_fraction(b: &BellDiagonal) -> f64 {
    1.0 - shannon_entropy(&b.probs())
}

/// Six-state key fraction after two-bit advantage distillation in the Y basis.
pub fn advantage_distillation_fraction(b: &BellDiagonal) -> f64 {
    let even = b.p00 + b.p11;
    let odd = b.p10 + b.p01;
    let success = even * even + odd * odd;
    if success <= 0.0 {
        return 0.0;
    }
    let distilled = [
        (b.p00 * b.p00 + b.p11 * b.p11) / success,
        2.0 * b.p00 * b.p11 / success,
        (b.p10 * b.p10 + b.p01 * b.p01) / success,
        2.0 * b.p10 * b.p01 / success,
    ];
    success / 2.0 * (1.0 - shannon_entropy(&distilled))
}

/// Best of one-way, advantage distillation and zero.
pub fn secret_fraction(b: &BellDiagonal) -> SecretFraction {
    let one_way = one_way_fraction(b);
    let ad = advantage_distillation_fraction(b);
    if one_way <= 0.0 && ad <= 0.0 {
        SecretFraction { r: 0.0, protocol: Protocol::Zero }
    } else if one_way >= ad {
        SecretFraction { r: one_way.min(1.0), protocol: Protocol::OneWay }
    } else {
        SecretFraction { r: ad, protocol: Protocol::AdvantageDistillation }
    }
}

/// Repeaterless bound `-log2(1 - e^{-L/22})`; infinite at zero distance.
pub fn plob_bound(l_tot_km: f64) -> f64 {
    -(-(-l_tot_km / ATTENUATION_LENGTH_KM).exp_m1()).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinEntry {
    /// Rank, 1-based.
    pub j: usize,
    pub m_x: u64,
    pub m_z: u64,
    pub probability: f64,
    pub r: f64,
    pub protocol: Protocol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    /// Secret bits per mode with syndrome binning.
    pub rate: f64,
    /// Secret bits per mode when syndrome information is ignored.
    pub pooled_rate: f64,
    /// Part of `rate` coming from one-way bins.
    pub one_way_rate: f64,
    /// Part of `rate` coming from advantage-distillation bins.
    pub ad_rate: f64,
    /// Bin mass actually summed, per rank (ideally 1).
    pub retained_mass: f64,
    /// Retained bins; empty unless requested.
    pub bins: Vec<BinEntry>,
}

/// Index window of a binomial pmf whose two tails each hold at most `tail`.
struct Window {
    lo: usize,
    pmf: Vec<f64>,
}

fn window(n: u64, t: f64, tail: f64) -> Window {
    if t <= 0.0 {
        return Window { lo: 0, pmf: vec![1.0] };
    }
    if t >= 1.0 {
        return Window { lo: n as usize, pmf: vec![1.0] };
    }
    let pmf: Vec<f64> = (0..=n).map(|m| bin_probability(n, m, t)).collect();
    let mut lo = 0;
    let mut acc = 0.0;
    while lo < pmf.len() - 1 && acc + pmf[lo] <= tail {
        acc += pmf[lo];
        lo += 1;
    }
    let mut hi = pmf.len() - 1;
    acc = 0.0;
    while hi > lo && acc + pmf[hi] <= tail {
        acc += pmf[hi];
        hi -= 1;
    }
    Window { lo, pmf: pmf[lo..=hi].to_vec() }
}

/// Flip probability after `n` segments for every m in the window, rank `j`.
fn composed_flips(q: &QuadratureStats, j: usize, n: u64, w: &Window) -> Vec<f64> {
    let q0 = q.combined(0, j);
    let q1 = q.combined(1, j);
    (0..w.pmf.len()).map(|i| end_to_end_flip(q0, q1, (w.lo + i) as u64, n)).collect()
}

#[derive(Default, Clone, Copy)]
struct Partial {
    rate: f64,
    one_way: f64,
    ad: f64,
    mass: f64,
}

/// Restricts which (m_x, m_z) bins are summed.
type BinFilter<'a> = &'a (dyn Fn(u64, u64) -> bool + Sync);

fn binned_rate(stats: &LinkStats, n: u64, cutoff: f64, keep_bins: bool, filter: BinFilter) -> RateBreakdown {
    let wx = window(n, stats.x.t, cutoff / 4.0);
    let wz = window(n, stats.z.t, cutoff / 4.0);
    let floor = cutoff / (wx.pmf.len() * wz.pmf.len()) as f64;
    let per_rank: Vec<(Partial, Vec<BinEntry>)> = (0..stats.k)
        .into_par_iter()
        .map(|j| {
            let fx = composed_flips(&stats.x, j, n, &wx);
            let fz = composed_flips(&stats.z, j, n, &wz);
            let mut part = Partial::default();
            let mut bins = vec![];
            for (ix, &px) in wx.pmf.iter().enumerate() {
                let m_x = (wx.lo + ix) as u64;
                for (iz, &pz) in wz.pmf.iter().enumerate() {
                    let m_z = (wz.lo + iz) as u64;
                    let prob = px * pz;
                    if prob < floor || !filter(m_x, m_z) {
                        continue;
                    }
                    let sf = secret_fraction(&bell_from_flips(fx[ix], fz[iz]));
                    part.mass += prob;
                    part.rate += prob * sf.r;
                    match sf.protocol {
                        Protocol::OneWay => part.one_way += prob * sf.r,
                        Protocol::AdvantageDistillation => part.ad += prob * sf.r,
                        Protocol::Zero => {}
                    }
                    if keep_bins {
                        bins.push(BinEntry { j: j + 1, m_x, m_z, probability: prob, r: sf.r, protocol: sf.protocol });
                    }
                }
            }
            (part, bins)
        })
        .collect();
    let k = stats.k as f64;
    let mut out = RateBreakdown {
        rate: 0.0,
        pooled_rate: pooled_rate(stats, n),
        one_way_rate: 0.0,
        ad_rate: 0.0,
        retained_mass: 0.0,
        bins: vec![],
    };
    for (p, bins) in per_rank {
        out.rate += p.rate / k;
        out.one_way_rate += p.one_way / k;
        out.ad_rate += p.ad / k;
        out.retained_mass += p.mass / k;
        out.bins.extend(bins);
    }
    out
}

/// Rate ignoring syndrome information: every swap uses the inner flip
/// probability averaged over the flag.
pub fn pooled_rate(stats: &LinkStats, n: u64) -> f64 {
    let flip = |q: &QuadratureStats, j: usize| {
        let inner = q.pooled_inner();
        let link = inner + q.q_outer[j] - 2.0 * inner * q.q_outer[j];
        end_to_end_flip(link, link, 0, n)
    };
    let sum: f64 = (0..stats.k)
        .map(|j| secret_fraction(&bell_from_flips(flip(&stats.x, j), flip(&stats.z, j))).r)
        .sum();
    sum / stats.k as f64
}

/// Binned secret-key rate per mode over `n` segments.
pub fn end_to_end_rate(stats: &LinkStats, n: u64, cutoff: f64) -> RateBreakdown {
    binned_rate(stats, n, cutoff, false, &|_, _| true)
}

/// As [`end_to_end_rate`], also returning every retained bin.
pub fn end_to_end_rate_with_bins(stats: &LinkStats, n: u64, cutoff: f64) -> RateBreakdown {
    binned_rate(stats, n, cutoff, true, &|_, _| true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypicalSetRate {
    pub rate: f64,
    /// Probability that at least one weight falls outside the typical set.
    pub prob_outside: f64,
    /// `z` was out of range and the full set was used.
    pub fallback: bool,
}

/// Rate restricted to bins with `|m/n - t| <= z` in both quadratures.
pub fn typical_set_rate(stats: &LinkStats, n: u64, z: f64, cutoff: f64) -> TypicalSetRate {
    let (tx, tz) = (stats.x.t, stats.z.t);
    let valid = z >= 0.0 && z < tx.min(1.0 - tx) && z < tz.min(1.0 - tz);
    if !valid {
        let full = end_to_end_rate(stats, n, cutoff);
        return TypicalSetRate { rate: full.rate, prob_outside: 0.0, fallback: true };
    }
    let nf = n as f64;
    let typical = |m: u64, t: f64| ((m as f64 / nf) - t).abs() <= z + 1e-12;
    let inside = |t: f64| -> f64 { (0..=n).filter(|&m| typical(m, t)).map(|m| bin_probability(n, m, t)).sum() };
    let prob_outside = 1.0 - inside(tx) * inside(tz);
    let b = binned_rate(stats, n, cutoff, false, &|mx, mz| typical(mx, tx) && typical(mz, tz));
    TypicalSetRate { rate: b.rate, prob_outside, fallback: false }
}
