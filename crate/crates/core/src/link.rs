//! Monte-Carlo simulation of one elementary segment.
//!
//! A trial generates `k` outer-leaf pairs meeting at the middle station and
//! one pair of encoded inner-leaf blocks swapped at the repeater. Outer pairs
//! are ranked by their estimated probability of a correct Bell measurement;
//! inner blocks are decoded with the analog likelihoods collected during
//! storage. Only logical flips are tracked, never quantum states.
//!
//! Every channel is written down as a [`ChannelSchedule`], and the sampler
//! is compiled from those schedules, so the tables printed by the CLI are
//! the ones being simulated.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::decode_with_analog;
use crate::error::{ModelError, Result};
use crate::gkp::{
    analog_likelihood, decode_bsm, parity_probability, sample_shift, GaussianChannel,
    HardwareParams, ATTENUATION_LENGTH_KM,
};
use crate::resource::resource_error_model;
use crate::stream::{domain, StreamFactory};

/// Qubits 1-4 of each cube receive a Hadamard after generation.
pub const HADAMARD_QUBITS: std::ops::RangeInclusive<usize> = 1..=4;

/// Cube qubit sent out as the outer leaf.
pub const OUTER_QUBIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Repeater spacing in km.
    pub spacing_km: f64,
    /// Storage corrections per km of fiber.
    pub n_per_km: u32,
}

impl Segment {
    pub fn new(spacing_km: f64, n_per_km: u32) -> Result<Self> {
        let s = Segment { spacing_km, n_per_km };
        s.corrections()?;
        Ok(s)
    }

    /// Corrections per stored qubit, including the final one at the swap.
    pub fn corrections(&self) -> Result<u32> {
        let n = self.spacing_km * self.n_per_km as f64;
        if !(self.spacing_km > 0.0) || (n - n.round()).abs() > 1e-9 || n.round() < 1.0 {
            return Err(ModelError::invalid(
                "n_per_km",
                format!("n_per_km * L = {n} must be a positive integer"),
            ));
        }
        Ok(n.round() as u32)
    }

    /// Transmissivity of the fiber between two storage corrections.
    pub fn storage_eta(&self) -> f64 {
        (-1.0 / (self.n_per_km as f64 * ATTENUATION_LENGTH_KM)).exp()
    }

    /// Transmissivity from a repeater to the middle station.
    pub fn half_link_eta(&self) -> f64 {
        (-self.spacing_km / (2.0 * ATTENUATION_LENGTH_KM)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrature {
    /// q-quadrature shifts, read as X flips.
    X,
    /// p-quadrature shifts, read as Z flips.
    Z,
}

impl Quadrature {
    pub fn swapped(self) -> Self {
        match self {
            Quadrature::X => Quadrature::Z,
            Quadrature::Z => Quadrature::X,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ErrorKind {
    /// Gaussian displacement followed by ideal GKP correction. The q variance
    /// drives X flips and the p variance Z flips.
    Shift(GaussianChannel),
    /// Logical flip with the given probability.
    Flip { prob: f64, quadrature: Quadrature },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub label: String,
    pub kind: ErrorKind,
    /// Cube qubits (1-based) hit together by one occurrence.
    pub qubits: Vec<usize>,
    pub repeat: u32,
    pub post_selected: bool,
    pub analog_record: bool,
    /// Acts once on the pair of qubits joined by a Bell measurement rather
    /// than on each cube separately.
    pub joint: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelSchedule {
    pub entries: Vec<ScheduleEntry>,
}

impl ChannelSchedule {
    fn push(&mut self, e: ScheduleEntry) {
        if e.repeat > 0 {
            self.entries.push(e);
        }
    }
}

fn flip_entry(label: &str, prob: f64, quad: Quadrature, qubits: Vec<usize>, repeat: u32) -> ScheduleEntry {
    ScheduleEntry {
        label: label.to_string(),
        kind: ErrorKind::Flip { prob, quadrature: quad },
        qubits,
        repeat,
        post_selected: true,
        analog_record: false,
        joint: false,
    }
}

fn shift_entry(label: &str, ch: GaussianChannel, qubits: Vec<usize>, repeat: u32, joint: bool) -> ScheduleEntry {
    ScheduleEntry {
        label: label.to_string(),
        kind: ErrorKind::Shift(ch),
        qubits,
        repeat,
        post_selected: false,
        analog_record: true,
        joint,
    }
}

/// Channels acting on an outer-leaf pair, with the noise of both cubes folded
/// onto one qubit.
pub fn outer_schedule(hw: &HardwareParams, seg: &Segment) -> Result<ChannelSchedule> {
    let errs = resource_error_model(hw)?;
    let eta = seg.half_link_eta();
    let cc = (1.0 - eta * hw.eta_d) / (eta * hw.eta_d);
    let s2 = hw.sigma2();
    let mut s = ChannelSchedule::default();
    s.push(flip_entry("fusion c, single", errs.p_high, Quadrature::Z, vec![OUTER_QUBIT], 2));
    s.push(flip_entry("fusions d',e,f", errs.p_low, Quadrature::Z, vec![OUTER_QUBIT], 6));
    s.push(shift_entry(
        "native + communication",
        GaussianChannel::new(2.0 * s2 + cc, 4.0 * s2 + cc),
        vec![OUTER_QUBIT],
        1,
        true,
    ));
    Ok(s)
}

/// Channels acting on the seven inner-leaf qubits of a cube, as seen at the
/// swap, after the Hadamards on qubits 1-4 have exchanged quadratures.
pub fn inner_schedule(hw: &HardwareParams, seg: &Segment) -> Result<ChannelSchedule> {
    let n = seg.corrections()?;
    let errs = resource_error_model(hw)?;
    let eta = seg.storage_eta();
    let det = hw.detector_variance();
    let s2 = hw.sigma2();
    let cc = (1.0 - eta * hw.eta_d) / (eta * hw.eta_d);
    let orient = |q: usize, ch: GaussianChannel| {
        if HADAMARD_QUBITS.contains(&q) { ch.swapped() } else { ch }
    };
    let quad = |q: usize| {
        if HADAMARD_QUBITS.contains(&q) { Quadrature::X } else { Quadrature::Z }
    };
    let mut s = ChannelSchedule::default();
    for q in 1..=7 {
        let (high, low) = errs.independent[q - 1];
        // One of the 3σ²-class errors on every qubit comes from fusion c.
        s.push(flip_entry("fusion c, single", errs.p_high, quad(q), vec![q], 1));
        s.push(flip_entry("fusions d-f, 3σ² class", errs.p_high, quad(q), vec![q], high - 1));
        s.push(flip_entry("fusions d-f, 2σ² class", errs.p_low, quad(q), vec![q], low));
    }
    for &((a, b), count) in &errs.correlated {
        debug_assert_eq!(quad(a), quad(b));
        s.push(flip_entry("fusion c, correlated", errs.p_high, quad(a), vec![a, b], count));
    }
    if n == 1 {
        for q in 1..=7 {
            let ch = GaussianChannel::new(2.0 * s2 + cc, 4.0 * s2 + cc);
            s.push(shift_entry("swap, native", orient(q, ch), vec![q], 1, true));
        }
        return Ok(s);
    }
    for q in 1..=7 {
        let first = GaussianChannel::new(2.0 * s2 + (1.0 - eta) + det, 3.0 * s2 + (1.0 - eta) + det);
        s.push(shift_entry("first storage correction", orient(q, first), vec![q], 1, false));
        let mid = GaussianChannel::symmetric(2.0 * s2 + (1.0 - eta) + det);
        s.push(shift_entry("storage correction", mid, vec![q], n - 2, false));
    }
    for q in 1..=7 {
        let last = GaussianChannel::symmetric(2.0 * s2 + cc);
        s.push(shift_entry("swap", last, vec![q], 1, true));
    }
    Ok(s)
}

/// Gaussian check used by the sampler: standard deviations per quadrature.
#[derive(Debug, Clone, Copy)]
struct Check {
    sigma_x: f64,
    sigma_z: f64,
}

impl Check {
    fn from(ch: GaussianChannel) -> Self {
        Check { sigma_x: ch.sigma2_q.sqrt(), sigma_z: ch.sigma2_p.sqrt() }
    }
}

/// One shift plus ideal correction: the flip and its analog likelihood.
fn gaussian_check<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> (bool, f64) {
    let o = decode_bsm(sample_shift(sigma, rng));
    (o.bit, analog_likelihood(o.syndrome, sigma))
}

#[derive(Debug, Clone)]
struct OuterModel {
    flip_z: f64,
    flip_x: f64,
    check: Check,
}

impl OuterModel {
    fn compile(s: &ChannelSchedule) -> Self {
        let mut flip = [0.0, 0.0];
        let mut check = None;
        for e in &s.entries {
            match e.kind {
                ErrorKind::Flip { prob, quadrature } => {
                    let i = quadrature as usize;
                    flip[i] = xor_prob(flip[i], parity_probability(prob, e.repeat));
                }
                ErrorKind::Shift(ch) => {
                    assert!(check.is_none() && e.repeat == 1, "outer leaf has one analog channel");
                    check = Some(Check::from(ch));
                }
            }
        }
        OuterModel { flip_x: flip[0], flip_z: flip[1], check: check.expect("analog channel") }
    }

    /// (flip_x, flip_z, p_no_error)
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (bool, bool, f64) {
        let pre_x = rng.gen::<f64>() < self.flip_x;
        let pre_z = rng.gen::<f64>() < self.flip_z;
        let (bx, px) = gaussian_check(self.check.sigma_x, rng);
        let (bz, pz) = gaussian_check(self.check.sigma_z, rng);
        (bx ^ pre_x, bz ^ pre_z, (1.0 - px) * (1.0 - pz))
    }
}

fn xor_prob(a: f64, b: f64) -> f64 {
    a + b - 2.0 * a * b
}

#[derive(Debug, Clone)]
struct InnerModel {
    /// Per qubit, per quadrature flip probability from single-qubit errors.
    flip: [[f64; 2]; 7],
    /// (mask, quadrature, probability) of correlated flips.
    correlated: Vec<(u8, usize, f64)>,
    /// Per-cube storage checks of each qubit.
    storage: [Vec<Check>; 7],
    /// Joint checks applied once per pair.
    joint: [Vec<Check>; 7],
}

impl InnerModel {
    fn compile(s: &ChannelSchedule) -> Self {
        let mut m = InnerModel {
            flip: [[0.0; 2]; 7],
            correlated: vec![],
            storage: Default::default(),
            joint: Default::default(),
        };
        for e in &s.entries {
            match e.kind {
                ErrorKind::Flip { prob, quadrature } => {
                    let p = parity_probability(prob, e.repeat);
                    let qi = quadrature as usize;
                    if e.qubits.len() == 1 {
                        let f = &mut m.flip[e.qubits[0] - 1][qi];
                        *f = xor_prob(*f, p);
                    } else {
                        let mask = e.qubits.iter().fold(0u8, |acc, q| acc | 1 << (q - 1));
                        m.correlated.push((mask, qi, p));
                    }
                }
                ErrorKind::Shift(ch) => {
                    let q = e.qubits[0] - 1;
                    let dst = if e.joint { &mut m.joint[q] } else { &mut m.storage[q] };
                    dst.extend(std::iter::repeat(Check::from(ch)).take(e.repeat as usize));
                }
            }
        }
        m
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> InnerOutcome {
        let mut bits = [0u8; 2];
        let mut prod = [[1.0f64; 7]; 2];
        let mut apply = |q: usize, c: &Check, rng: &mut R, bits: &mut [u8; 2]| {
            let (bx, px) = gaussian_check(c.sigma_x, rng);
            let (bz, pz) = gaussian_check(c.sigma_z, rng);
            bits[0] ^= (bx as u8) << q;
            bits[1] ^= (bz as u8) << q;
            prod[0][q] *= 1.0 - 2.0 * px;
            prod[1][q] *= 1.0 - 2.0 * pz;
        };
        for _cube in 0..2 {
            for q in 0..7 {
                for qi in 0..2 {
                    if rng.gen::<f64>() < self.flip[q][qi] {
                        bits[qi] ^= 1 << q;
                    }
                }
            }
            for &(mask, qi, p) in &self.correlated {
                if rng.gen::<f64>() < p {
                    bits[qi] ^= mask;
                }
            }
            for q in 0..7 {
                for c in &self.storage[q] {
                    apply(q, c, rng, &mut bits);
                }
            }
        }
        for q in 0..7 {
            for c in &self.joint[q] {
                apply(q, c, rng, &mut bits);
            }
        }
        let mut out = InnerOutcome { flip: [false; 2], s_flag: [false; 2] };
        for qi in 0..2 {
            let probs: [f64; 7] = std::array::from_fn(|q| (1.0 - prod[qi][q]) / 2.0);
            let d = decode_with_analog(bits[qi], &probs);
            out.flip[qi] = d.logical;
            out.s_flag[qi] = d.s_flag;
        }
        out
    }
}

/// Result of one inner-leaf swap, indexed by [`Quadrature`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InnerOutcome {
    pub flip: [bool; 2],
    pub s_flag: [bool; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InnerMode {
    Simulated,
    /// Inner leaves stored and swapped without error.
    Perfect,
}

/// Compiled sampler for one segment configuration.
#[derive(Debug, Clone)]
pub struct SegmentModel {
    pub hw: HardwareParams,
    pub segment: Segment,
    pub ranked: bool,
    outer: OuterModel,
    inner: Option<InnerModel>,
}

impl SegmentModel {
    pub fn new(hw: HardwareParams, segment: Segment, inner: InnerMode) -> Result<Self> {
        let outer = OuterModel::compile(&outer_schedule(&hw, &segment)?);
        let inner = match inner {
            InnerMode::Simulated => Some(InnerModel::compile(&inner_schedule(&hw, &segment)?)),
            InnerMode::Perfect => None,
        };
        Ok(SegmentModel { hw, segment, ranked: true, outer, inner })
    }

    /// Pair links by their original index instead of by estimated quality.
    pub fn unranked(mut self) -> Self {
        self.ranked = false;
        self
    }

    pub fn k(&self) -> usize {
        self.hw.k
    }

    /// Simulates one outer-leaf pair: (flip_x, flip_z, p_no_error).
    pub fn simulate_outer_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (bool, bool, f64) {
        self.outer.sample(rng)
    }

    /// Simulates one inner-leaf swap.
    pub fn simulate_inner_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> InnerOutcome {
        match &self.inner {
            Some(m) => m.sample(rng),
            None => InnerOutcome { flip: [false; 2], s_flag: [false; 2] },
        }
    }
}

/// Permutation of link indices (0-based) by descending `p_no_error`.
/// Stable, so ties keep their original order.
pub fn rank_links(p_no_error: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p_no_error.len()).collect();
    idx.sort_by(|&a, &b| p_no_error[b].total_cmp(&p_no_error[a]));
    idx
}

/// Raw counters of a batch of trials. Adding counters is associative and
/// commutative, so any split of the trials gives the same totals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialCounts {
    pub trials: u64,
    /// Outer flips per rank, indexed [quadrature][rank].
    pub outer_flips: [Vec<u64>; 2],
    /// Trials with a non-zero inner syndrome, per quadrature.
    pub syndrome: [u64; 2],
    /// Inner logical flips, indexed [quadrature][s].
    pub inner_flips: [[u64; 2]; 2],
}

impl TrialCounts {
    pub fn zero(k: usize) -> Self {
        TrialCounts {
            trials: 0,
            outer_flips: [vec![0; k], vec![0; k]],
            syndrome: [0; 2],
            inner_flips: [[0; 2]; 2],
        }
    }

    pub fn merge(mut self, other: &TrialCounts) -> Self {
        self.trials += other.trials;
        for qi in 0..2 {
            for (a, b) in self.outer_flips[qi].iter_mut().zip(&other.outer_flips[qi]) {
                *a += b;
            }
            self.syndrome[qi] += other.syndrome[qi];
            for s in 0..2 {
                self.inner_flips[qi][s] += other.inner_flips[qi][s];
            }
        }
        self
    }
}

fn run_trial(model: &SegmentModel, outer: &StreamFactory, inner: &StreamFactory, i: u64, acc: &mut TrialCounts) {
    let k = model.k();
    let mut rng = outer.stream(i);
    let mut links: Vec<(bool, bool, f64)> = Vec::with_capacity(k);
    for _ in 0..k {
        links.push(model.outer.sample(&mut rng));
    }
    if model.ranked {
        let p: Vec<f64> = links.iter().map(|l| l.2).collect();
        for (rank, &idx) in rank_links(&p).iter().enumerate() {
            acc.outer_flips[0][rank] += links[idx].0 as u64;
            acc.outer_flips[1][rank] += links[idx].1 as u64;
        }
    } else {
        for (rank, l) in links.iter().enumerate() {
            acc.outer_flips[0][rank] += l.0 as u64;
            acc.outer_flips[1][rank] += l.1 as u64;
        }
    }
    let o = model.simulate_inner_pair(&mut inner.stream(i));
    for qi in 0..2 {
        let s = o.s_flag[qi] as usize;
        acc.syndrome[qi] += s as u64;
        acc.inner_flips[qi][s] += o.flip[qi] as u64;
    }
    acc.trials += 1;
}

/// Runs trials `start..end` under `seed`, in parallel on the current pool.
pub fn run_trials(model: &SegmentModel, start: u64, end: u64, seed: u64) -> TrialCounts {
    let outer = StreamFactory::new(seed, domain::OUTER);
    let inner = StreamFactory::new(seed, domain::INNER);
    let k = model.k();
    (start..end)
        .into_par_iter()
        .fold(
            || TrialCounts::zero(k),
            |mut acc, i| {
                run_trial(model, &outer, &inner, i, &mut acc);
                acc
            },
        )
        .reduce(|| TrialCounts::zero(k), |a, b| a.merge(&b))
}

/// Stopping rule of the adaptive trial loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    /// Bound on the relative standard error of every combined flip probability.
    pub b: f64,
    /// Bound on the relative standard error of the syndrome rates.
    pub h: f64,
    pub initial_trials: u64,
    /// The loop never stops before this many trials.
    pub min_trials: u64,
    pub max_trials: u64,
}

impl Default for Accuracy {
    fn default() -> Self {
        Accuracy { b: 0.1, h: 0.001, initial_trials: 10, min_trials: 1000, max_trials: 10_000_000 }
    }
}

impl Accuracy {
    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b < 1.0) {
            return Err(ModelError::invalid("b", format!("{} is not in (0, 1)", self.b)));
        }
        if !(self.h > 0.0 && self.h < 1.0) {
            return Err(ModelError::invalid("h", format!("{} is not in (0, 1)", self.h)));
        }
        if self.initial_trials == 0 || self.max_trials < self.initial_trials {
            return Err(ModelError::invalid("max_trials", "must be >= initial_trials >= 1"));
        }
        Ok(())
    }
}

/// Bernoulli standard error.
pub fn standard_error(p: f64, n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    (p * (1.0 - p) / n).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureStats {
    /// Outer flip probability per rank, best rank first.
    pub q_outer: Vec<f64>,
    pub se_outer: Vec<f64>,
    /// Inner flip probability given syndrome flag s = 0, 1.
    pub q_inner: [f64; 2],
    pub se_inner: [f64; 2],
    /// Probability of a non-zero inner syndrome.
    pub t: f64,
    pub se_t: f64,
}

impl QuadratureStats {
    /// Flip probability of a rank-`j` (0-based) link whose swap saw flag `s`.
    pub fn combined(&self, s: usize, j: usize) -> f64 {
        xor_prob(self.q_inner[s], self.q_outer[j])
    }

    /// Inner flip probability ignoring the syndrome flag.
    pub fn pooled_inner(&self) -> f64 {
        self.t * self.q_inner[1] + (1.0 - self.t) * self.q_inner[0]
    }

    /// Noise-free inner leaves.
    pub fn with_perfect_inner(q_outer: Vec<f64>) -> Self {
        let k = q_outer.len();
        QuadratureStats { se_outer: vec![0.0; k], q_outer, q_inner: [0.0; 2], se_inner: [0.0; 2], t: 0.0, se_t: 0.0 }
    }
}

/// Per-segment statistics consumed by the rate engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkStats {
    pub k: usize,
    pub trials: u64,
    pub x: QuadratureStats,
    pub z: QuadratureStats,
    /// Whether the stopping rule was met before the trial cap.
    pub converged: bool,
    /// Largest relative standard error over all non-zero combined flips.
    pub max_rel_error_q: f64,
    /// Largest relative standard error of the syndrome rates.
    pub max_rel_error_t: f64,
}

impl LinkStats {
    pub fn quadrature(&self, q: Quadrature) -> &QuadratureStats {
        match q {
            Quadrature::X => &self.x,
            Quadrature::Z => &self.z,
        }
    }

    pub fn from_counts(c: &TrialCounts) -> Self {
        let n = c.trials as f64;
        let k = c.outer_flips[0].len();
        let quad = |qi: usize| {
            let q_outer: Vec<f64> = c.outer_flips[qi].iter().map(|&f| f as f64 / n).collect();
            let se_outer = q_outer.iter().map(|&q| standard_error(q, n)).collect();
            let n1 = c.syndrome[qi];
            let ns = [c.trials - n1, n1];
            let q_inner: [f64; 2] = std::array::from_fn(|s| {
                if ns[s] == 0 { 0.0 } else { c.inner_flips[qi][s] as f64 / ns[s] as f64 }
            });
            let se_inner = std::array::from_fn(|s| standard_error(q_inner[s], ns[s] as f64));
            let t = n1 as f64 / n;
            QuadratureStats { q_outer, se_outer, q_inner, se_inner, t, se_t: standard_error(t, n) }
        };
        let (x, z) = (quad(0), quad(1));
        let mut stats = LinkStats { k, trials: c.trials, x, z, converged: false, max_rel_error_q: 0.0, max_rel_error_t: 0.0 };
        let (rq, rt) = stats.relative_errors();
        stats.max_rel_error_q = rq;
        stats.max_rel_error_t = rt;
        stats
    }

    /// Largest relative standard errors of the combined flips Q(s, j) and of
    /// t. Quantities estimated as exactly zero are exempt.
    pub fn relative_errors(&self) -> (f64, f64) {
        let n = self.trials as f64;
        let mut rq: f64 = 0.0;
        let mut rt: f64 = 0.0;
        for qs in [&self.x, &self.z] {
            let ns = [n * (1.0 - qs.t), n * qs.t];
            for s in 0..2 {
                if ns[s] <= 0.0 {
                    continue;
                }
                for j in 0..self.k {
                    let q = qs.combined(s, j);
                    if q > 0.0 {
                        rq = rq.max(standard_error(q, ns[s]) / q);
                    }
                }
            }
            if qs.t > 0.0 {
                rt = rt.max(qs.se_t / qs.t);
            }
        }
        (rq, rt)
    }
}

/// Adaptive estimate: 10, 100, 1000, ... trials until the stopping rule holds
/// or the cap is hit. Earlier batches are kept, so the result equals a single
/// run with the final trial count.
pub fn estimate_link_stats(model: &SegmentModel, acc: &Accuracy, seed: u64) -> Result<LinkStats> {
    acc.validate()?;
    let mut counts = TrialCounts::zero(model.k());
    let mut target = acc.initial_trials;
    loop {
        let batch = run_trials(model, counts.trials, target, seed);
        counts = counts.merge(&batch);
        let mut stats = LinkStats::from_counts(&counts);
        let met = stats.max_rel_error_q < acc.b && stats.max_rel_error_t < acc.h;
        if met && counts.trials >= acc.min_trials {
            stats.converged = true;
            return Ok(stats);
        }
        if counts.trials >= acc.max_trials {
            return Ok(stats);
        }
        target = (target.saturating_mul(10)).min(acc.max_trials);
    }
}
