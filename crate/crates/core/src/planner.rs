//! Spacing choice, cost and achievable distance.
//!
//! One [`LinkStats`] per spacing is simulated up front; every distance is then
//! an analytic composition over the segments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::segments;
use crate::error::{ModelError, Result};
use crate::gkp::{HardwareParams, SQRT_PI};
use crate::link::{estimate_link_stats, Accuracy, InnerMode, LinkStats, Segment, SegmentModel};
use crate::rate::{end_to_end_rate, plob_bound, DEFAULT_CUTOFF};
use crate::resource::{fusion_probs, min_qubits_per_repeater, ResourceCount};

/// Repeater spacings considered, in km.
pub const SPACING_GRID: [f64; 5] = [0.5, 1.0, 2.0, 2.5, 5.0];

/// Discard windows for the spacings above, in units of sqrt(pi)/20.
const WINDOW_TWENTIETHS: [f64; 5] = [7.0, 6.0, 5.0, 4.0, 3.0];

pub const DISTANCE_CAP_KM: f64 = 10_000.0;

pub const DEFAULT_N_PER_KM: u32 = 4;

/// Chain-wide generation success required when counting resources.
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 1.0 - 1e-3;

fn grid_index(spacing_km: f64) -> Result<usize> {
    SPACING_GRID
        .iter()
        .position(|&l| (l - spacing_km).abs() < 1e-9)
        .ok_or(ModelError::OffGrid(spacing_km))
}

/// Fusion discard window used at repeater spacing `spacing_km`.
pub fn discard_window_for(spacing_km: f64) -> Result<f64> {
    Ok(WINDOW_TWENTIETHS[grid_index(spacing_km)?] * SQRT_PI / 20.0)
}

/// Qubits spent per secret bit; infinite when no key is produced.
pub fn cost(total_qubits: u64, rate: f64) -> f64 {
    if rate > 0.0 {
        total_qubits as f64 / rate
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub spacing_km: f64,
    pub l_tot_km: f64,
    pub n_per_km: u32,
}

impl ChainConfig {
    pub fn new(spacing_km: f64, l_tot_km: f64, n_per_km: u32) -> Result<Self> {
        grid_index(spacing_km)?;
        segments(spacing_km, l_tot_km)?;
        Segment::new(spacing_km, n_per_km)?;
        Ok(ChainConfig { spacing_km, l_tot_km, n_per_km })
    }

    /// Elementary segments between the end nodes.
    pub fn segments(&self) -> u64 {
        segments(self.spacing_km, self.l_tot_km).expect("validated")
    }

    pub fn repeaters(&self) -> u64 {
        self.segments() - 1
    }
}

/// Device parameters independent of spacing. Without an explicit window the
/// spacing-dependent default applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub sigma_gkp: f64,
    pub eta_d: f64,
    pub k: usize,
    pub v: Option<f64>,
}

impl DeviceSpec {
    pub fn at(&self, spacing_km: f64) -> Result<HardwareParams> {
        let v = match self.v {
            Some(v) => v,
            None => discard_window_for(spacing_km)?,
        };
        HardwareParams::new(self.sigma_gkp, self.eta_d, self.k, v)
    }
}

/// Simulated segment statistics for every spacing on the grid. Built once,
/// then only read.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsCache {
    pub device: DeviceSpec,
    pub n_per_km: u32,
    pub entries: Vec<(f64, LinkStats)>,
}

impl StatsCache {
    /// Simulates the spacings in `spacings` one after the other; each
    /// simulation is itself parallel.
    pub fn build(device: DeviceSpec, spacings: &[f64], n_per_km: u32, acc: &Accuracy, seed: u64) -> Result<Self> {
        let mut entries = vec![];
        for &l in spacings {
            grid_index(l)?;
            let model = SegmentModel::new(device.at(l)?, Segment::new(l, n_per_km)?, InnerMode::Simulated)?;
            entries.push((l, estimate_link_stats(&model, acc, seed)?));
        }
        Ok(StatsCache { device, n_per_km, entries })
    }

    pub fn get(&self, spacing_km: f64) -> Option<&LinkStats> {
        self.entries.iter().find(|(l, _)| (l - spacing_km).abs() < 1e-9).map(|(_, s)| s)
    }

    pub fn rate(&self, spacing_km: f64, l_tot_km: f64) -> Result<f64> {
        let n = segments(spacing_km, l_tot_km)?;
        let stats = self.get(spacing_km).ok_or(ModelError::OffGrid(spacing_km))?;
        Ok(end_to_end_rate(stats, n, DEFAULT_CUTOFF).rate)
    }
}

/// Resources of a chain at `spacing_km` over `l_tot_km`.
pub fn chain_resources(device: &DeviceSpec, chain: &ChainConfig, threshold: f64) -> Result<ResourceCount> {
    let hw = device.at(chain.spacing_km)?;
    let corrections = Segment::new(chain.spacing_km, chain.n_per_km)?.corrections()? as u64;
    min_qubits_per_repeater(&fusion_probs(&hw)?, hw.k, chain.repeaters(), corrections, threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingOption {
    pub spacing_km: f64,
    pub rate: f64,
    pub cost: f64,
    pub resources: ResourceCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingChoice {
    pub l_tot_km: f64,
    pub best: SpacingOption,
    /// Every spacing that divides the distance, in grid order.
    pub options: Vec<SpacingOption>,
}

/// Spacing of least cost at distance `l_tot_km`.
pub fn optimize_spacing(cache: &StatsCache, l_tot_km: f64, threshold: f64) -> Result<SpacingChoice> {
    let spacings: Vec<f64> = cache
        .entries
        .iter()
        .map(|(l, _)| *l)
        .filter(|&l| segments(l, l_tot_km).map_or(false, |n| n >= 2))
        .collect();
    if spacings.is_empty() {
        return Err(ModelError::invalid("l_tot", format!("{l_tot_km} km fits no simulated spacing")));
    }
    let options: Vec<SpacingOption> = spacings
        .par_iter()
        .map(|&l| {
            let chain = ChainConfig::new(l, l_tot_km, cache.n_per_km)?;
            let rate = cache.rate(l, l_tot_km)?;
            let resources = chain_resources(&cache.device, &chain, threshold)?;
            Ok(SpacingOption { spacing_km: l, rate, cost: cost(resources.total_end_to_end, rate), resources })
        })
        .collect::<Result<_>>()?;
    let mut best: Option<&SpacingOption> = None;
    for o in &options {
        if o.cost.is_finite() && best.map_or(true, |b| o.cost < b.cost) {
            best = Some(o);
        }
    }
    let best = best.ok_or(ModelError::NoKey { l_tot_km })?.clone();
    Ok(SpacingChoice { l_tot_km, best, options })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DistanceCriterion {
    /// Rate at least the given value.
    MinRate(f64),
    /// Rate above the repeaterless bound and at least 1e-30.
    BeatsPlob,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub distance_km: f64,
    pub spacing_km: f64,
    pub rate: f64,
}

/// Largest multiple of `spacing_km` up to the cap whose rate meets `floor`,
/// assuming the rate falls with distance.
fn reach(stats: &LinkStats, spacing_km: f64, floor: f64) -> (u64, f64) {
    let max_n = (DISTANCE_CAP_KM / spacing_km + 1e-9).floor() as u64;
    let rate = |n: u64| end_to_end_rate(stats, n, DEFAULT_CUTOFF).rate;
    let r1 = rate(1);
    if r1 < floor {
        return (0, r1);
    }
    let r_max = rate(max_n);
    if r_max >= floor {
        return (max_n, r_max);
    }
    let (mut lo, mut hi, mut r_lo) = (1u64, max_n, r1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let r = rate(mid);
        if r >= floor {
            lo = mid;
            r_lo = r;
        } else {
            hi = mid;
        }
    }
    (lo, r_lo)
}

/// Achievable distance for one spacing.
pub fn achievable_distance_at(stats: &LinkStats, spacing_km: f64, criterion: DistanceCriterion) -> DistanceResult {
    let (n, rate) = match criterion {
        DistanceCriterion::MinRate(floor) => reach(stats, spacing_km, floor),
        DistanceCriterion::BeatsPlob => {
            let (n, r) = reach(stats, spacing_km, DEFAULT_CUTOFF);
            if n > 0 && r > plob_bound(n as f64 * spacing_km) {
                (n, r)
            } else {
                (0, r)
            }
        }
    };
    DistanceResult { distance_km: n as f64 * spacing_km, spacing_km, rate }
}

/// Best achievable distance over the cached spacings. Equal distances go to
/// the larger spacing.
pub fn achievable_distance(cache: &StatsCache, criterion: DistanceCriterion) -> Result<DistanceResult> {
    let per: Vec<DistanceResult> = cache
        .entries
        .par_iter()
        .map(|(l, s)| achievable_distance_at(s, *l, criterion))
        .collect();
    let mut best: Option<DistanceResult> = None;
    for d in per {
        let better = match best {
            None => true,
            Some(b) => d.distance_km > b.distance_km + 1e-9
                || ((d.distance_km - b.distance_km).abs() <= 1e-9 && d.spacing_km > b.spacing_km),
        };
        if better {
            best = Some(d);
        }
    }
    best.ok_or_else(|| ModelError::invalid("spacings", "no spacing simulated"))
}
