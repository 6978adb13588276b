//! Single-mode GKP arithmetic.
//!
//! Everything here works on one bosonic mode at a time: the remainder map that
//! turns a homodyne outcome into a syndrome, logical error probabilities of a
//! Gaussian displacement under post-selection, the analog error likelihood of
//! a syndrome, and the effective variances of the loss channels used by the
//! repeater model. All functions are pure.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use crate::error::{ModelError, Result};

pub const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Fiber attenuation length in km.
pub const ATTENUATION_LENGTH_KM: f64 = 22.0;

/// Windows for 2σ²-class measurements are this fraction of the 3σ²-class window.
pub const INNER_WINDOW_RATIO: f64 = 0.7;

/// Lattice terms smaller than this fraction of the running sum are dropped.
const LATTICE_TAIL: f64 = 1e-17;

/// Hardware of every node in the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareParams {
    /// Standard deviation of the GKP squeezing noise per quadrature.
    pub sigma_gkp: f64,
    /// Homodyne detection efficiency.
    pub eta_d: f64,
    /// Number of multiplexed links per segment.
    pub k: usize,
    /// Discard window for 3σ²-class fusion measurements.
    pub v: f64,
}

impl HardwareParams {
    pub fn new(sigma_gkp: f64, eta_d: f64, k: usize, v: f64) -> Result<Self> {
        if !(sigma_gkp >= 0.0) || !sigma_gkp.is_finite() {
            return Err(ModelError::invalid("sigma_gkp", format!("{sigma_gkp} is not >= 0")));
        }
        if !(eta_d > 0.0 && eta_d <= 1.0) {
            return Err(ModelError::invalid("eta_d", format!("{eta_d} is not in (0, 1]")));
        }
        if k == 0 {
            return Err(ModelError::invalid("k", "must be at least 1"));
        }
        if !(v >= 0.0) {
            return Err(ModelError::invalid("v", format!("{v} is not >= 0")));
        }
        if v >= SQRT_PI / 2.0 {
            return Err(ModelError::EmptyWindow { v });
        }
        Ok(HardwareParams { sigma_gkp, eta_d, k, v })
    }

    /// Noise-free devices with no post-selection.
    pub fn ideal(k: usize) -> Self {
        HardwareParams { sigma_gkp: 0.0, eta_d: 1.0, k, v: 0.0 }
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma_gkp * self.sigma_gkp
    }

    /// Variance added by an inefficient homodyne detector, (1-η_d)/η_d.
    pub fn detector_variance(&self) -> f64 {
        (1.0 - self.eta_d) / self.eta_d
    }

    /// Variance seen by a fusion measurement on a qubit that went through a CZ.
    pub fn fusion_variance_high(&self) -> f64 {
        3.0 * self.sigma2() + self.detector_variance()
    }

    /// Variance seen by a fusion measurement on an untouched qubit.
    pub fn fusion_variance_low(&self) -> f64 {
        2.0 * self.sigma2() + self.detector_variance()
    }

    /// Window used together with [`Self::fusion_variance_low`].
    pub fn v_low(&self) -> f64 {
        INNER_WINDOW_RATIO * self.v
    }
}

/// Random displacement channel with independent Gaussian shifts per quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianChannel {
    pub sigma2_q: f64,
    pub sigma2_p: f64,
}

impl GaussianChannel {
    pub fn new(sigma2_q: f64, sigma2_p: f64) -> Self {
        debug_assert!(sigma2_q >= 0.0 && sigma2_p >= 0.0);
        GaussianChannel { sigma2_q, sigma2_p }
    }

    pub fn symmetric(sigma2: f64) -> Self {
        GaussianChannel::new(sigma2, sigma2)
    }

    /// Sequential application of two channels.
    pub fn then(self, other: GaussianChannel) -> Self {
        GaussianChannel::new(self.sigma2_q + other.sigma2_q, self.sigma2_p + other.sigma2_p)
    }

    /// Conjugation by a Hadamard exchanges the quadratures.
    pub fn swapped(self) -> Self {
        GaussianChannel::new(self.sigma2_p, self.sigma2_q)
    }
}

/// Outcome probabilities of a post-selected GKP measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostSelectionStats {
    /// Pass and decode correctly.
    pub e0: f64,
    /// Pass and decode to the wrong logical value.
    pub e1: f64,
    pub p_ps: f64,
    /// Logical error probability conditioned on passing.
    pub e_ps: f64,
}

/// `x - s*floor(x/s + 1/2)`, folded into `[-s/2, s/2)`.
pub fn remainder(x: f64, s: f64) -> f64 {
    assert!(s > 0.0, "remainder modulus must be positive, got {s}");
    let mut r = x - s * (x / s + 0.5).floor();
    // Rounding in x/s can land one period off near the window edges.
    if r >= s / 2.0 {
        r -= s;
    } else if r < -s / 2.0 {
        r += s;
    }
    r
}

/// Squeezing in dB for a GKP noise standard deviation, -10·log10(2σ²).
pub fn squeezing_db(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(ModelError::invalid("sigma", format!("{sigma} is not > 0")));
    }
    Ok(-10.0 * (2.0 * sigma * sigma).log10())
}

/// Inverse of [`squeezing_db`].
pub fn sigma_from_db(db: f64) -> f64 {
    (10f64.powf(-db / 10.0) / 2.0).sqrt()
}

/// Post-selected logical error statistics of a measurement with Gaussian
/// noise of variance `sigma2` and discard window `v`.
///
/// The pass region keeps outcomes within `sqrt(pi)/2 - v` of a lattice point.
/// Only the central interval and the two nearest odd intervals are counted,
/// which is a lower bound on both probabilities.
pub fn flip_probs(v: f64, sigma2: f64) -> Result<PostSelectionStats> {
    if !(v >= 0.0) {
        return Err(ModelError::invalid("v", format!("{v} is not >= 0")));
    }
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(ModelError::invalid("sigma2", format!("{sigma2} is not >= 0")));
    }
    let half = SQRT_PI / 2.0;
    if v >= half {
        return Err(ModelError::EmptyWindow { v });
    }
    if sigma2 == 0.0 {
        return Ok(PostSelectionStats { e0: 1.0, e1: 0.0, p_ps: 1.0, e_ps: 0.0 });
    }
    let scale = (2.0 * sigma2).sqrt();
    let e0 = erf((half - v) / scale);
    let e1 = erfc((half + v) / scale) - erfc((3.0 * half - v) / scale);
    let p_ps = e0 + e1;
    Ok(PostSelectionStats { e0, e1, p_ps, e_ps: e1 / p_ps })
}

/// Two-sided tail mass beyond `sqrt(pi)/2 + v`, an upper bound on the full
/// post-selected error mass.
pub fn flip_tail_bound(v: f64, sigma2: f64) -> f64 {
    if sigma2 == 0.0 {
        return 0.0;
    }
    erfc((SQRT_PI / 2.0 + v) / (2.0 * sigma2).sqrt())
}

/// Probability that plain rounding of a Gaussian shift lands on an odd
/// multiple of sqrt(pi), summed over the whole lattice.
pub fn rounding_error_probability(sigma2: f64) -> f64 {
    if sigma2 == 0.0 {
        return 0.0;
    }
    let scale = (2.0 * sigma2).sqrt();
    let mut total = 0.0;
    let mut m = 1u32;
    loop {
        let lo = (m as f64 - 0.5) * SQRT_PI / scale;
        let hi = (m as f64 + 0.5) * SQRT_PI / scale;
        let term = erfc(lo) - erfc(hi);
        total += term;
        if term < LATTICE_TAIL * total || lo > 40.0 {
            break;
        }
        m += 2;
    }
    total
}

/// Likelihood that a syndrome `r` produced by a Gaussian shift with standard
/// deviation `sigma` hides an odd multiple of sqrt(pi).
///
/// Ratio of the odd-lattice Gaussian sum to the full-lattice sum. Terms are
/// rescaled by the central one so tiny `sigma` does not underflow.
pub fn analog_likelihood(r: f64, sigma: f64) -> f64 {
    let half = SQRT_PI / 2.0;
    debug_assert!(r.abs() <= half * (1.0 + 1e-12), "syndrome {r} outside the window");
    if sigma == 0.0 {
        return if r.abs() < half { 0.0 } else { 0.5 };
    }
    let two_s2 = 2.0 * sigma * sigma;
    let r2 = r * r;
    let mut num = 0.0;
    let mut den = 1.0;
    for dir in [1.0, -1.0] {
        let mut m = 1u32;
        loop {
            let d = r - dir * m as f64 * SQRT_PI;
            let term = (-(d * d - r2) / two_s2).exp();
            if m % 2 == 1 {
                num += term;
            }
            den += term;
            if term <= LATTICE_TAIL * den {
                break;
            }
            m += 1;
        }
    }
    num / den
}

/// Decoded two-outcome measurement: the logical bit and the analog syndrome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsmOutcome {
    pub bit: bool,
    pub syndrome: f64,
}

/// Reads a homodyne value as an even (false) or odd (true) multiple of sqrt(pi).
pub fn decode_bsm(x: f64) -> BsmOutcome {
    let bit = remainder(x, 2.0 * SQRT_PI).abs() >= SQRT_PI / 2.0;
    BsmOutcome { bit, syndrome: remainder(x, SQRT_PI) }
}

/// Effective loss channels, expressed as a Gaussian displacement variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelKind {
    /// Loss followed by a phase-insensitive amplifier.
    Preamp,
    /// Loss split symmetrically around a classically rescaled homodyne.
    CcampSymmetric,
    /// Loss and detector inefficiency absorbed by classical rescaling.
    CcampLossyDet,
    /// One storage interval followed by teleportation-based correction.
    TecComposite,
    /// Detector inefficiency alone after rescaling.
    DetectorRescaled,
}

/// Per-quadrature variance of the channel `kind` at transmissivity `eta`.
pub fn channel_sigma2(kind: ChannelKind, eta: f64, hw: &HardwareParams) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(ModelError::invalid("eta", format!("{eta} is not in (0, 1]")));
    }
    let eta_d = hw.eta_d;
    Ok(match kind {
        ChannelKind::Preamp => 1.0 - eta,
        ChannelKind::CcampSymmetric => (1.0 - eta.sqrt()) / eta.sqrt(),
        ChannelKind::CcampLossyDet => (1.0 - eta * eta_d) / (eta * eta_d),
        ChannelKind::TecComposite => 1.0 - eta + 2.0 * hw.sigma2() + hw.detector_variance(),
        ChannelKind::DetectorRescaled => (1.0 - eta_d) / (2.0 * eta_d),
    })
}

/// Fiber transmissivity over `length_km`.
pub fn transmissivity(length_km: f64) -> f64 {
    (-length_km / ATTENUATION_LENGTH_KM).exp()
}

/// One Gaussian displacement with standard deviation `sigma`.
pub fn sample_shift<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let z: f64 = rng.sample(StandardNormal);
    sigma * z
}

/// Parity of `count` independent flips each occurring with probability `p`.
pub fn parity_probability(p: f64, count: u32) -> f64 {
    if count == 0 {
        return 0.0;
    }
    -0.5 * (count as f64 * (-2.0 * p).ln_1p()).exp_m1()
}
