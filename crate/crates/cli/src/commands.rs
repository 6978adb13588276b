use gkp_repeater::baselines::{
    analytic_inner_error, optimize_postselection, optimize_single_chain, segments, simulated_inner_error,
    single_chain_sigma2, AnalyticModelParams,
};
use gkp_repeater::gkp::HardwareParams;
use gkp_repeater::link::{estimate_link_stats, InnerMode, LinkStats, QuadratureStats, Segment, SegmentModel};
use gkp_repeater::planner::{
    achievable_distance, achievable_distance_at, chain_resources, optimize_spacing, ChainConfig, DistanceCriterion,
    StatsCache,
};
use gkp_repeater::rate::{end_to_end_rate, plob_bound, DEFAULT_CUTOFF};
use gkp_repeater::ModelError;
use serde_json::{json, Value};

use crate::config::{ConfigError, Criterion, Resolved, Strategy};

#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Runtime(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Runtime(e.into())
    }
}

/// Result of one subcommand: a table for CSV, a nested value for JSON.
#[derive(Debug, Clone)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub result: Value,
    /// False when any simulation stopped at the trial cap.
    pub converged: bool,
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite float")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn segments_for(spacing_km: f64, distance_km: f64, path: &str) -> Result<u64, ConfigError> {
    segments(spacing_km, distance_km).map_err(|_| {
        ConfigError::new(path, format!("{distance_km} km is not a positive multiple of the {spacing_km} km spacing"))
    })
}

fn simulate(r: &Resolved, hw: HardwareParams, spacing_km: f64) -> Result<LinkStats, Failure> {
    let segment = Segment::new(spacing_km, r.config.chain.n_per_km)?;
    let model = SegmentModel::new(hw, segment, InnerMode::Simulated)?;
    Ok(estimate_link_stats(&model, &r.accuracy, r.seed)?)
}

fn converged(r: &Resolved, stats: &[&LinkStats]) -> bool {
    !r.adaptive || stats.iter().all(|s| s.converged)
}

fn stats_cache(r: &Resolved) -> Result<StatsCache, Failure> {
    for (i, &l) in r.spacings().iter().enumerate() {
        r.hardware_at(l, &format!("chain.spacings_km[{i}]"))?;
    }
    Ok(StatsCache::build(r.device, &r.spacings(), r.config.chain.n_per_km, &r.accuracy, r.seed)?)
}

fn cache_converged(r: &Resolved, cache: &StatsCache) -> bool {
    converged(r, &cache.entries.iter().map(|(_, s)| s).collect::<Vec<_>>())
}

pub fn link_stats(r: &Resolved) -> Result<Report, Failure> {
    let l = r.spacing()?;
    let hw = r.hardware_at(l, "chain.spacing_km")?;
    let stats = simulate(r, hw, l)?;
    let mut rows = vec![];
    for (name, q) in [("x", &stats.x), ("z", &stats.z)] {
        push_quadrature(&mut rows, name, q);
    }
    Ok(Report {
        columns: vec!["quadrature", "quantity", "index", "value", "std_error"],
        rows,
        converged: converged(r, &[&stats]),
        result: json!({ "spacing_km": l, "hardware": hw, "stats": stats }),
    })
}

fn push_quadrature(rows: &mut Vec<Vec<String>>, name: &str, q: &QuadratureStats) {
    for (j, (p, se)) in q.q_outer.iter().zip(&q.se_outer).enumerate() {
        rows.push(vec![name.into(), "outer_flip".into(), (j + 1).to_string(), num(*p), num(*se)]);
    }
    for s in 0..2 {
        rows.push(vec![name.into(), "inner_flip".into(), s.to_string(), num(q.q_inner[s]), num(q.se_inner[s])]);
    }
    rows.push(vec![name.into(), "syndrome_rate".into(), String::new(), num(q.t), num(q.se_t)]);
}

pub fn rate_curve(r: &Resolved) -> Result<Report, Failure> {
    let l = r.spacing()?;
    let distances = r.distances()?;
    let ns = distances.iter().map(|(p, d)| segments_for(l, *d, p)).collect::<Result<Vec<_>, _>>()?;
    let hw = r.hardware_at(l, "chain.spacing_km")?;
    let stats = simulate(r, hw, l)?;
    let mut rows = vec![];
    let mut points = vec![];
    for ((_, d), n) in distances.iter().zip(ns) {
        let b = end_to_end_rate(&stats, n, DEFAULT_CUTOFF);
        let plob = plob_bound(*d);
        rows.push(vec![
            num(*d),
            n.to_string(),
            num(b.rate),
            num(b.pooled_rate),
            num(b.one_way_rate),
            num(b.ad_rate),
            num(b.retained_mass),
            num(plob),
        ]);
        points.push(json!({
            "distance_km": d, "segments": n, "rate": b.rate, "pooled_rate": b.pooled_rate,
            "one_way_rate": b.one_way_rate, "ad_rate": b.ad_rate, "retained_mass": b.retained_mass, "plob": plob,
        }));
    }
    Ok(Report {
        columns: vec!["distance_km", "segments", "rate", "pooled_rate", "one_way_rate", "ad_rate", "retained_mass", "plob"],
        rows,
        converged: converged(r, &[&stats]),
        result: json!({ "spacing_km": l, "hardware": hw, "stats": stats, "points": points }),
    })
}

pub fn resources(r: &Resolved) -> Result<Report, Failure> {
    let distances = r.distances()?;
    let spacings = match r.config.chain.spacing_km {
        Some(l) => vec![("chain.spacing_km".to_string(), l)],
        None => r.spacings().into_iter().enumerate().map(|(i, l)| (format!("chain.spacings_km[{i}]"), l)).collect(),
    };
    let mut rows = vec![];
    let mut counts = vec![];
    for (d_path, d) in &distances {
        for (path, l) in &spacings {
            segments_for(*l, *d, d_path)?;
            r.hardware_at(*l, path)?;
            let chain =
                ChainConfig::new(*l, *d, r.config.chain.n_per_km).map_err(|e| ConfigError::new(path, e.to_string()))?;
            let c = chain_resources(&r.device, &chain, r.config.planner.threshold)?;
            rows.push(vec![
                num(*d),
                num(*l),
                c.n1.to_string(),
                c.cube_qubits_per_repeater.to_string(),
                c.tec_qubits_per_repeater.to_string(),
                c.per_repeater().to_string(),
                c.end_node_qubits.to_string(),
                c.n_rep.to_string(),
                c.total_end_to_end.to_string(),
                num(c.per_repeater_failure),
            ]);
            counts.push(json!({ "distance_km": d, "spacing_km": l, "per_repeater": c.per_repeater(), "resources": c }));
        }
    }
    Ok(Report {
        columns: vec![
            "distance_km",
            "spacing_km",
            "n1",
            "cube_qubits_per_repeater",
            "tec_qubits_per_repeater",
            "qubits_per_repeater",
            "end_node_qubits",
            "repeaters",
            "total_qubits",
            "per_repeater_failure",
        ],
        rows,
        converged: true,
        result: json!({ "chains": counts }),
    })
}

pub fn optimize(r: &Resolved) -> Result<Report, Failure> {
    let distances = r.distances()?;
    let spacings = r.spacings();
    for (path, d) in &distances {
        if !spacings.iter().any(|&l| segments(l, *d).map_or(false, |n| n >= 2)) {
            return Err(ConfigError::new(path, format!("{d} km is not at least two segments of any swept spacing")).into());
        }
    }
    let cache = stats_cache(r)?;
    let mut rows = vec![];
    let mut choices = vec![];
    for (_, d) in &distances {
        match optimize_spacing(&cache, *d, r.config.planner.threshold) {
            Ok(choice) => {
                for o in &choice.options {
                    rows.push(vec![
                        num(*d),
                        num(o.spacing_km),
                        num(o.rate),
                        num(o.cost),
                        o.resources.per_repeater().to_string(),
                        o.resources.total_end_to_end.to_string(),
                        (o.spacing_km == choice.best.spacing_km).to_string(),
                    ]);
                }
                choices.push(json!({ "l_tot_km": d, "choice": choice }));
            }
            Err(ModelError::NoKey { .. }) => {
                rows.push(vec![num(*d), String::new(), num(0.0), num(f64::INFINITY), String::new(), String::new(), "false".into()]);
                choices.push(json!({ "l_tot_km": d, "choice": Value::Null }));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Report {
        columns: vec!["distance_km", "spacing_km", "rate", "cost", "qubits_per_repeater", "total_qubits", "optimal"],
        rows,
        converged: cache_converged(r, &cache),
        result: json!({ "choices": choices, "stats": cache.entries }),
    })
}

pub fn distance(r: &Resolved) -> Result<Report, Failure> {
    let criterion = match r.config.planner.criterion {
        Criterion::MinRate => DistanceCriterion::MinRate(r.config.planner.min_rate),
        Criterion::Plob => DistanceCriterion::BeatsPlob,
    };
    let cache = stats_cache(r)?;
    let best = achievable_distance(&cache, criterion)?;
    let mut rows = vec![];
    let mut per = vec![];
    for (l, s) in &cache.entries {
        let d = achievable_distance_at(s, *l, criterion);
        rows.push(vec![num(*l), num(d.distance_km), num(d.rate), (*l == best.spacing_km).to_string()]);
        per.push(d);
    }
    Ok(Report {
        columns: vec!["spacing_km", "distance_km", "rate", "best"],
        rows,
        converged: cache_converged(r, &cache),
        result: json!({ "criterion": criterion, "best": best, "per_spacing": per, "stats": cache.entries }),
    })
}

pub fn baseline(r: &Resolved) -> Result<Report, Failure> {
    let strategy = r
        .config
        .baseline
        .strategy
        .ok_or_else(|| ConfigError::new("baseline.strategy", "required (or pass --strategy)"))?;
    let hw = HardwareParams::new(r.sigma_gkp, r.device.eta_d, r.device.k, 0.0)?;
    match strategy {
        Strategy::Postselect => {
            let l = r.spacing()?;
            let distances = r.distances()?;
            let ks = r.config.baseline.k_values.clone().unwrap_or_else(|| vec![r.device.k]);
            let sigma2 = single_chain_sigma2(&hw, l);
            let mut rows = vec![];
            let mut points = vec![];
            for (path, d) in &distances {
                let n = segments_for(l, *d, path)?;
                for &k in &ks {
                    let p = optimize_postselection(k, n, sigma2)?;
                    rows.push(vec![num(*d), k.to_string(), num(p.rate), num(p.v), num(p.expected_links), num(p.qber)]);
                    points.push(json!({ "distance_km": d, "k": k, "result": p }));
                }
            }
            Ok(Report {
                columns: vec!["distance_km", "k", "rate", "v", "expected_links", "qber"],
                rows,
                converged: true,
                result: json!({ "strategy": strategy, "spacing_km": l, "sigma2": sigma2, "points": points }),
            })
        }
        Strategy::SingleChain => {
            let distances = r.distances()?;
            let spacings = r.spacings();
            let mut rows = vec![];
            let mut points = vec![];
            for (path, d) in &distances {
                let best = optimize_single_chain(&hw, &spacings, *d)
                    .map_err(|e| ConfigError::new(path, e.to_string()))?;
                rows.push(vec![num(*d), num(best.rate), num(best.spacing_km), num(best.v), num(best.qber)]);
                points.push(json!({ "distance_km": d, "result": best }));
            }
            Ok(Report {
                columns: vec!["distance_km", "rate", "spacing_km", "v", "qber"],
                rows,
                converged: true,
                result: json!({ "strategy": strategy, "points": points }),
            })
        }
        Strategy::Analytic => {
            let c = r.config.baseline.c;
            let mut errors = vec![];
            for (i, &l) in r.spacings().iter().enumerate() {
                let p = AnalyticModelParams::new(c, l, hw).map_err(|e| ConfigError::new(format!("chain.spacings_km[{i}]"), e.to_string()))?;
                errors.push((l, analytic_inner_error(&p)));
            }
            if !r.config.baseline.simulate {
                let rows = errors.iter().map(|(l, e)| vec![num(*l), num(*e)]).collect();
                let points: Vec<Value> = errors.iter().map(|(l, e)| json!({ "spacing_km": l, "analytic": e })).collect();
                return Ok(Report {
                    columns: vec!["spacing_km", "analytic_error"],
                    rows,
                    converged: true,
                    result: json!({ "strategy": strategy, "c": c, "points": points }),
                });
            }
            let cache = stats_cache(r)?;
            let mut rows = vec![];
            let mut points = vec![];
            for ((l, analytic), (_, stats)) in errors.iter().zip(&cache.entries) {
                let simulated = simulated_inner_error(stats);
                rows.push(vec![num(*l), num(*analytic), num(simulated), num(analytic / simulated)]);
                points.push(json!({ "spacing_km": l, "analytic": analytic, "simulated": simulated }));
            }
            Ok(Report {
                columns: vec!["spacing_km", "analytic_error", "simulated_error", "ratio"],
                rows,
                converged: cache_converged(r, &cache),
                result: json!({ "strategy": strategy, "c": c, "points": points, "stats": cache.entries }),
            })
        }
    }
}
