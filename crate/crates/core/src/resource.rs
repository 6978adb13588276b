//! Cube resource-state generation.
//!
//! Fusion success probabilities, the multiplexed fusion flowchart (as a
//! Monte-Carlo and as an exact recursion over the layer distributions),
//! the error tables of the finished cube, and qubit/squeezer counting.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{ModelError, Result};
use crate::gkp::{flip_probs, HardwareParams};
use crate::stream::{domain, StreamFactory};

/// Flowchart stages producing G2, G3, G3', G4 and G5 states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    G2,
    G3,
    G3Prime,
    G4,
    G5,
}

/// Number of fusions of type 1, 2 and 3 in one fusion set of each stage.
///
/// G2 and G3 fuse two CZ-touched qubits, G3' one touched and one untouched.
/// The error table of the cube fixes the last two layers: across the two G4
/// sets of a cube the four step-e fusions leave two errors of the 3σ² class
/// and six of the 2σ² class (one type-2 and one type-3 fusion per set), while
/// the eight step-f fusion measurements are all of the 2σ² class.
pub const STAGE_FUSIONS: [(Stage, [u32; 3]); 5] = [
    (Stage::G2, [1, 0, 0]),
    (Stage::G3, [1, 0, 0]),
    (Stage::G3Prime, [0, 1, 0]),
    (Stage::G4, [0, 1, 1]),
    (Stage::G5, [0, 0, 4]),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionProbs {
    pub fusion1: f64,
    pub fusion2: f64,
    pub fusion3: f64,
    pub g2: f64,
    pub g3: f64,
    pub g3_prime: f64,
    pub g4: f64,
    pub g5: f64,
}

impl FusionProbs {
    /// Every fusion set succeeds with the given probabilities.
    pub fn from_stages(g2: f64, g3: f64, g3_prime: f64, g4: f64, g5: f64) -> Self {
        FusionProbs { fusion1: f64::NAN, fusion2: f64::NAN, fusion3: f64::NAN, g2, g3, g3_prime, g4, g5 }
    }

    pub fn stage(&self, stage: Stage) -> f64 {
        match stage {
            Stage::G2 => self.g2,
            Stage::G3 => self.g3,
            Stage::G3Prime => self.g3_prime,
            Stage::G4 => self.g4,
            Stage::G5 => self.g5,
        }
    }
}

pub fn fusion_probs(hw: &HardwareParams) -> Result<FusionProbs> {
    let high = flip_probs(hw.v, hw.fusion_variance_high())?.p_ps;
    let low = flip_probs(hw.v_low(), hw.fusion_variance_low())?.p_ps;
    let fusion = [high * high, high * low, low * low];
    let set = |counts: [u32; 3]| -> f64 {
        counts.iter().zip(fusion).map(|(&c, p)| p.powi(c as i32)).product()
    };
    let mut stages = [0.0; 5];
    for (i, (_, counts)) in STAGE_FUSIONS.iter().enumerate() {
        stages[i] = set(*counts);
    }
    Ok(FusionProbs {
        fusion1: fusion[0],
        fusion2: fusion[1],
        fusion3: fusion[2],
        g2: stages[0],
        g3: stages[1],
        g3_prime: stages[2],
        g4: stages[3],
        g5: stages[4],
    })
}

/// Splits `n2` attempts into (G3, G3') so that both are produced at equal
/// expected rates, rounding by largest remainder.
pub fn split_attempts(n2: u64, fp: &FusionProbs) -> (u64, u64) {
    let denom = fp.g3 + fp.g3_prime;
    let share = if denom > 0.0 { fp.g3_prime / denom } else { 0.5 };
    let exact = n2 as f64 * share;
    let mut g3 = exact.floor() as u64;
    let rem_g3 = exact - exact.floor();
    let exact_p = n2 as f64 - exact;
    let rem_p = exact_p - exact_p.floor();
    if g3 + (exact_p.floor() as u64) < n2 && rem_g3 > rem_p {
        g3 += 1;
    }
    g3 = g3.min(n2);
    (g3, n2 - g3)
}

fn binomial_draw<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

/// One pass through the flowchart starting from `n1` G2 attempts.
/// Returns the number of cubes produced.
pub fn run_flowchart<R: Rng + ?Sized>(n1: u64, fp: &FusionProbs, rng: &mut R) -> u64 {
    let s2 = binomial_draw(n1, fp.g2, rng);
    let n2 = s2 / 2;
    let (a, b) = split_attempts(n2, fp);
    let s3 = binomial_draw(a, fp.g3, rng);
    let s3p = binomial_draw(b, fp.g3_prime, rng);
    let n3 = s3.min(s3p);
    let s4 = binomial_draw(n3, fp.g4, rng);
    let n4 = s4 / 2;
    binomial_draw(n4, fp.g5, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationEstimate {
    pub trials: u64,
    pub failures: u64,
    pub success: f64,
}

/// Monte-Carlo estimate of the per-repeater probability of producing `2k` cubes.
pub fn simulate_resource_generation(
    n1: u64,
    fp: &FusionProbs,
    k: usize,
    trials: u64,
    seed: u64,
) -> GenerationEstimate {
    let streams = StreamFactory::new(seed, domain::RESOURCE);
    let need = 2 * k as u64;
    let failures: u64 = (0..trials)
        .into_par_iter()
        .map(|i| (run_flowchart(n1, fp, &mut streams.stream(i)) < need) as u64)
        .sum();
    GenerationEstimate {
        trials,
        failures,
        success: 1.0 - failures as f64 / trials.max(1) as f64,
    }
}

/// Exact failure probability of the flowchart, by recursion over the layer
/// distributions. Tables grow on demand and are reused across `n1`.
#[derive(Debug, Clone)]
pub struct FlowchartEvaluator {
    fp: FusionProbs,
    need: u64,
    ln_fact: Vec<f64>,
    fail5: Vec<f64>,
    fail4: Vec<f64>,
    fail3: Vec<Option<f64>>,
}

impl FlowchartEvaluator {
    pub fn new(fp: FusionProbs, k: usize) -> Self {
        FlowchartEvaluator {
            fp,
            need: 2 * k as u64,
            ln_fact: vec![0.0],
            fail5: vec![],
            fail4: vec![],
            fail3: vec![],
        }
    }

    fn ensure_fact(&mut self, n: u64) {
        while (self.ln_fact.len() as u64) <= n {
            let i = self.ln_fact.len() as f64;
            self.ln_fact.push(ln_gamma(i + 1.0));
        }
    }

    fn pmf(&self, n: u64, p: f64) -> Vec<f64> {
        binomial_pmf_table(n, p, &self.ln_fact)
    }

    /// P(fewer than 2k cubes | n4 G5 attempts).
    fn fail_from_g5(&mut self, n4: u64) -> f64 {
        while (self.fail5.len() as u64) <= n4 {
            let n = self.fail5.len() as u64;
            self.ensure_fact(n);
            let pmf = self.pmf(n, self.fp.g5);
            let lim = self.need.min(n + 1) as usize;
            self.fail5.push(pmf[..lim].iter().sum());
        }
        self.fail5[n4 as usize]
    }

    fn fail_from_g4(&mut self, n3: u64) -> f64 {
        while (self.fail4.len() as u64) <= n3 {
            let n = self.fail4.len() as u64;
            self.ensure_fact(n);
            self.fail_from_g5(n / 2);
            let pmf = self.pmf(n, self.fp.g4);
            let f: f64 = pmf.iter().enumerate().map(|(s4, p)| p * self.fail5[s4 / 2]).sum();
            self.fail4.push(f);
        }
        self.fail4[n3 as usize]
    }

    fn fail_from_g3(&mut self, n2: u64) -> f64 {
        if let Some(Some(f)) = self.fail3.get(n2 as usize) {
            return *f;
        }
        self.ensure_fact(n2);
        let (a, b) = split_attempts(n2, &self.fp);
        let top = a.min(b);
        self.fail_from_g4(top);
        let sa = upper_tails(&self.pmf(a, self.fp.g3));
        let sb = upper_tails(&self.pmf(b, self.fp.g3_prime));
        // P(min = m) = P(S3 >= m) P(S3' >= m) - P(S3 >= m+1) P(S3' >= m+1)
        let both = |m: usize| sa.get(m).copied().unwrap_or(0.0) * sb.get(m).copied().unwrap_or(0.0);
        let mut f = 0.0;
        for m in 0..=top as usize {
            f += (both(m) - both(m + 1)) * self.fail4[m];
        }
        if self.fail3.len() <= n2 as usize {
            self.fail3.resize(n2 as usize + 1, None);
        }
        self.fail3[n2 as usize] = Some(f);
        f
    }

    /// Probability that `n1` G2 attempts yield fewer than `2k` cubes.
    pub fn failure(&mut self, n1: u64) -> f64 {
        self.ensure_fact(n1);
        let pmf = self.pmf(n1, self.fp.g2);
        let mut f = 0.0;
        for (s2, p) in pmf.iter().enumerate() {
            // Skipped mass bounds the error of the sum.
            if *p < NEGLIGIBLE_MASS {
                continue;
            }
            f += p * self.fail_from_g3(s2 as u64 / 2);
        }
        f.clamp(0.0, 1.0)
    }
}

fn binomial_pmf_table(n: u64, p: f64, ln_fact: &[f64]) -> Vec<f64> {
    let n_us = n as usize;
    let mut out = vec![0.0; n_us + 1];
    if p <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    if p >= 1.0 {
        out[n_us] = 1.0;
        return out;
    }
    let lp = p.ln();
    let lq = (-p).ln_1p();
    for (s, o) in out.iter_mut().enumerate() {
        let lc = ln_fact[n_us] - ln_fact[s] - ln_fact[n_us - s];
        *o = (lc + s as f64 * lp + (n_us - s) as f64 * lq).exp();
    }
    out
}

fn upper_tails(pmf: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; pmf.len()];
    let mut acc = 0.0;
    for i in (0..pmf.len()).rev() {
        acc += pmf[i];
        out[i] = acc;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceCount {
    /// G2 attempts in the first flowchart layer.
    pub n1: u64,
    pub cube_qubits_per_repeater: u64,
    pub tec_qubits_per_repeater: u64,
    pub end_node_qubits: u64,
    pub n_rep: u64,
    pub total_end_to_end: u64,
    /// Exact per-repeater failure probability at `n1`.
    pub per_repeater_failure: f64,
}

impl ResourceCount {
    pub fn per_repeater(&self) -> u64 {
        self.cube_qubits_per_repeater + self.tec_qubits_per_repeater
    }
}

/// Ancilla qubits for storage corrections: 7 qubits, 2 ancillas each, 2
/// stored blocks per level, `n_per_km·L - 1` corrections each.
pub fn tec_qubits_per_repeater(k: usize, corrections_per_qubit: u64) -> u64 {
    28 * k as u64 * corrections_per_qubit.saturating_sub(1)
}

/// Deterministic lower bound: 16k G2 attempts when every fusion succeeds.
pub fn deterministic_min_n1(k: usize) -> u64 {
    16 * k as u64
}

pub const MAX_N1: u64 = 1 << 22;

const NEGLIGIBLE_MASS: f64 = 1e-30;

/// Smallest qubit budget whose chain-wide generation success exceeds
/// `threshold` over `n_rep` repeaters.
pub fn min_qubits_per_repeater(
    fp: &FusionProbs,
    k: usize,
    n_rep: u64,
    corrections_per_qubit: u64,
    threshold: f64,
) -> Result<ResourceCount> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(ModelError::invalid("threshold", format!("{threshold} is not in (0, 1)")));
    }
    let reps = n_rep.max(1) as f64;
    let allowed = -(threshold.ln() / reps).exp_m1();
    let mut eval = FlowchartEvaluator::new(*fp, k);
    let mut lo = deterministic_min_n1(k);
    if eval.failure(lo) < allowed {
        return Ok(count(k, lo, n_rep, corrections_per_qubit, eval.failure(lo)));
    }
    let mut hi = lo * 2;
    while eval.failure(hi) >= allowed {
        lo = hi;
        hi *= 2;
        if hi > MAX_N1 {
            return Err(ModelError::Infeasible { cap_qubits: 6 * MAX_N1 });
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if eval.failure(mid) < allowed {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let f = eval.failure(hi);
    Ok(count(k, hi, n_rep, corrections_per_qubit, f))
}

fn count(k: usize, n1: u64, n_rep: u64, corrections: u64, failure: f64) -> ResourceCount {
    let cube = 6 * n1;
    let tec = tec_qubits_per_repeater(k, corrections);
    let end = 2 * k as u64;
    ResourceCount {
        n1,
        cube_qubits_per_repeater: cube,
        tec_qubits_per_repeater: tec,
        end_node_qubits: end,
        n_rep,
        total_end_to_end: n_rep * (cube + tec) + end,
        per_repeater_failure: failure,
    }
}

/// Independent Z-error counts on cube qubits 1..=8, as (3σ² class, 2σ² class).
pub const INDEPENDENT_Z_COUNTS: [(u32, u32); 8] =
    [(2, 2), (2, 2), (3, 1), (1, 3), (2, 2), (2, 2), (3, 1), (1, 3)];

/// Correlated Z errors on cube-qubit pairs and their maximum counts.
pub const CORRELATED_Z_PAIRS: [((usize, usize), u32); 6] =
    [((1, 2), 2), ((5, 6), 2), ((1, 3), 1), ((2, 3), 1), ((5, 7), 1), ((6, 7), 1)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceErrorModel {
    /// Post-selected error probability of a 3σ²-class fusion measurement.
    pub p_high: f64,
    /// Post-selected error probability of a 2σ²-class fusion measurement.
    pub p_low: f64,
    pub independent: [(u32, u32); 8],
    pub correlated: Vec<((usize, usize), u32)>,
    /// Native shift variances (q, p) of every cube qubit.
    pub native: (f64, f64),
}

impl ResourceErrorModel {
    /// Probability of an odd number of independent Z errors on `qubit` (1-based).
    pub fn independent_flip(&self, qubit: usize) -> f64 {
        let (hi, lo) = self.independent[qubit - 1];
        let a = crate::gkp::parity_probability(self.p_high, hi);
        let b = crate::gkp::parity_probability(self.p_low, lo);
        a + b - 2.0 * a * b
    }
}

pub fn resource_error_model(hw: &HardwareParams) -> Result<ResourceErrorModel> {
    let p_high = flip_probs(hw.v, hw.fusion_variance_high())?.e_ps;
    let p_low = flip_probs(hw.v_low(), hw.fusion_variance_low())?.e_ps;
    Ok(ResourceErrorModel {
        p_high,
        p_low,
        independent: INDEPENDENT_Z_COUNTS,
        correlated: CORRELATED_Z_PAIRS.to_vec(),
        native: (hw.sigma2(), 2.0 * hw.sigma2()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbsEstimate {
    pub gbs_circuits_per_qubit: u64,
    pub total_circuits: f64,
    pub total_squeezers: f64,
    pub total_pnr_detectors: f64,
}

/// Multiplexed 3-mode boson-sampling sources needed so that every GKP qubit
/// is heralded with failure below `target`.
pub fn gbs_squeezer_estimate(p0: f64, n_qubits: u64, target: f64) -> Result<GbsEstimate> {
    if !(p0 > 0.0 && p0 <= 1.0) {
        return Err(ModelError::invalid("p0", format!("{p0} is not in (0, 1]")));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(ModelError::invalid("target", format!("{target} is not in (0, 1)")));
    }
    let m = if p0 == 1.0 { 1 } else { (target.ln() / (-p0).ln_1p()).ceil() as u64 };
    let total = m as f64 * n_qubits as f64;
    Ok(GbsEstimate {
        gbs_circuits_per_qubit: m,
        total_circuits: total,
        total_squeezers: 3.0 * total,
        total_pnr_detectors: 2.0 * total,
    })
}
