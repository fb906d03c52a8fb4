//! Reference workloads: single-class curves over life-span and volume skew,
//! the six-class mixes with their three class compositions, and the
//! eight-leaf tree used for capacity-allocation sweeps.
//!
//! Every preset takes a `scale` divisor applied jointly to the content
//! arrival rate and to cache capacities. For caches in the small-cache regime
//! the hit probability depends on `C/γ` only, so a scaled run reproduces the
//! full-size curves at a fraction of the cost.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnmError};
use crate::model::{
    CacheTopology, ContentClass, IngressModel, PopularityProfile, ProfileKind, TrafficConfig, VolumeDistribution,
};
use crate::sim::{replicate, run_seed, Admission, ClassMap, FilterPolicy, SimOptions, StackProfile};
use crate::stats::{confidence_interval_95, ConfidenceInterval};
use crate::tracegen::{generate_with_catalog, shuffle_k_slices, slices_for_duration};

pub const DEFAULT_HORIZON: f64 = 60.0;
pub const SINGLE_CLASS_GAMMA: f64 = 1e4;
pub const MULTI_CLASS_GAMMA: f64 = 1e5;
pub const SINGLE_CLASS_MEAN_VOLUME: f64 = 3.0;
pub const FIG6_LIFE_SPANS: [f64; 3] = [1.0, 7.0, 30.0];
pub const FIG6_BETAS: [f64; 2] = [2.1, 3.0];
pub const TREE_LEAVES: usize = 8;
pub const TREE_BUDGETS: [u64; 6] = [100, 400, 1600, 6400, 25600, 51200];
pub const TREE_LEAF_FRACTIONS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
/// Profile mass left unsimulated before the burn-in start.
const BURN_IN_TAIL: f64 = 1e-4;

fn check_scale(scale: f64) -> Result<()> {
    if !(scale >= 1.0 && scale.is_finite()) {
        return Err(SnmError::invalid(format!("scale divisor must be at least 1, got {scale}")));
    }
    Ok(())
}

/// `capacity / scale`, rounded, at least 1 for a non-zero capacity.
pub fn scale_capacity(capacity: f64, scale: f64) -> u64 {
    if capacity <= 0.0 {
        return 0;
    }
    ((capacity / scale).round() as u64).max(1)
}

/// Burn-in long enough that every class has all but [`BURN_IN_TAIL`] of its
/// mass inside the simulated window, and a warm-up of one horizon.
pub fn with_stationary_start(mut config: TrafficConfig) -> TrafficConfig {
    let tail = config.classes.iter().map(|c| c.profile.tail_age(BURN_IN_TAIL)).fold(0.0, f64::max);
    let burn_in = tail.max(config.horizon);
    config.burn_in = Some(burn_in);
    config.warmup = Some(config.horizon.min(burn_in));
    config
}

/// Single class, uniform profile of life-span `life_span`, Pareto volumes of
/// exponent `beta` and mean 3.
pub fn single_class(life_span: f64, beta: f64, scale: f64) -> Result<TrafficConfig> {
    check_scale(scale)?;
    Ok(with_stationary_start(TrafficConfig::single_class(
        SINGLE_CLASS_GAMMA / scale,
        PopularityProfile::uniform(life_span)?,
        VolumeDistribution::pareto_with_mean(beta, SINGLE_CLASS_MEAN_VOLUME)?,
        DEFAULT_HORIZON,
    )))
}

/// Capacities (full scale) from 100 to about 1.6·10⁶, doubling.
pub fn single_class_capacities() -> Vec<f64> {
    let mut out = Vec::new();
    let mut c = 100.0;
    while c <= 2.0e6 {
        out.push(c);
        c *= 2.0;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixScenario {
    One,
    Two,
    Three,
}

impl MixScenario {
    pub const ALL: [MixScenario; 3] = [MixScenario::One, MixScenario::Two, MixScenario::Three];

    pub fn label(&self) -> &'static str {
        match self {
            MixScenario::One => "scenario1",
            MixScenario::Two => "scenario2",
            MixScenario::Three => "scenario3",
        }
    }

    fn weights(&self) -> [f64; 6] {
        match self {
            MixScenario::One => [0.85, 0.0, 0.0, 0.02, 0.02, 0.11],
            MixScenario::Two => [0.85, 0.0, 0.02, 0.02, 0.02, 0.09],
            MixScenario::Three => [0.85, 0.01, 0.02, 0.02, 0.02, 0.08],
        }
    }
}

/// `(life-span days, mean volume)` of the six classes; class 0 is truncated
/// at 10 requests, all use exponent 2.5.
pub const MIX_CLASSES: [(f64, f64); 6] =
    [(500.0, 1.61), (2.0, 83.33), (7.0, 75.0), (30.0, 66.66), (100.0, 50.0), (1000.0, 50.0)];
pub const MIX_BETA: f64 = 2.5;
pub const MIX_CLASS0_MAX_VOLUME: f64 = 10.0;

/// Six exponential-profile classes. Classes absent from the scenario are
/// kept with weight 0 so labels stay stable.
pub fn class_mix(scenario: MixScenario, scale: f64) -> Result<TrafficConfig> {
    check_scale(scale)?;
    let mut classes = Vec::with_capacity(6);
    for (k, (&(l, mean), w)) in MIX_CLASSES.iter().zip(scenario.weights()).enumerate() {
        let volumes = if k == 0 {
            VolumeDistribution::truncated_pareto_with_mean(MIX_BETA, MIX_CLASS0_MAX_VOLUME, mean)?
        } else {
            VolumeDistribution::pareto_with_mean(MIX_BETA, mean)?
        };
        let profile = PopularityProfile::for_life_span(ProfileKind::Exponential, l, None)?;
        classes.push(ContentClass::new(k.to_string(), w, profile, volumes));
    }
    let mut config =
        TrafficConfig::single_class(MULTI_CLASS_GAMMA / scale, classes[0].profile, classes[0].volumes.clone(), DEFAULT_HORIZON);
    config.classes = classes;
    config.validate()?;
    Ok(with_stationary_start(config))
}

/// Capacities (full scale) for the class-mix curves, four per decade from
/// 10³ to 10⁸.
pub fn class_mix_capacities() -> Vec<f64> {
    (0..=20).map(|k| 10f64.powf(3.0 + k as f64 / 4.0).round()).collect()
}

/// Single class with exponential profile of life-span 7 days and Pareto
/// volumes (β = 2.5, mean 3), entering an eight-leaf tree.
pub fn tree_traffic(localized: bool, scale: f64) -> Result<TrafficConfig> {
    check_scale(scale)?;
    let mut config = TrafficConfig::single_class(
        SINGLE_CLASS_GAMMA / scale,
        PopularityProfile::for_life_span(ProfileKind::Exponential, 7.0, None)?,
        VolumeDistribution::pareto_with_mean(2.5, SINGLE_CLASS_MEAN_VOLUME)?,
        DEFAULT_HORIZON,
    );
    config.ingress = if localized {
        IngressModel::FullyLocalized { node_weights: vec![] }
    } else {
        IngressModel::Unlocalized { node_weights: vec![] }
    };
    Ok(with_stationary_start(config))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub label: String,
    pub budget: u64,
    pub leaf_fraction: f64,
    pub leaf_capacity: u64,
    pub root_capacity: u64,
    pub topology: CacheTopology,
}

/// Splits `budget` (already scaled) between eight equal leaves holding
/// `leaf_fraction` of it and the root holding the rest.
pub fn allocation(budget: u64, leaf_fraction: f64) -> Result<Allocation> {
    if !(0.0..=1.0).contains(&leaf_fraction) {
        return Err(SnmError::invalid(format!("leaf fraction {leaf_fraction} outside [0, 1]")));
    }
    let leaf_capacity = (budget as f64 * leaf_fraction / TREE_LEAVES as f64).round() as u64;
    let root_capacity = budget.saturating_sub(leaf_capacity * TREE_LEAVES as u64);
    Ok(Allocation {
        label: format!("B{budget}_f{leaf_fraction:.2}"),
        budget,
        leaf_fraction,
        leaf_capacity,
        root_capacity,
        topology: CacheTopology::two_level(TREE_LEAVES, leaf_capacity, root_capacity),
    })
}

/// Simulated single-cache hit ratio at every capacity, with one
/// stack-distance pass per replication.
pub fn simulated_curve(
    config: &TrafficConfig,
    capacities: &[u64],
    reps: usize,
    filter: Option<&FilterPolicy>,
) -> Result<Vec<ConfidenceInterval>> {
    let topology = CacheTopology::single(1);
    let runs = replicate(reps, config.seed, |seed| {
        let g = generate_with_catalog(config, &topology, seed)?;
        let classes = ClassMap::from_catalog(&g.catalog);
        let admission = match filter {
            Some(f) => Admission::filtered(f, &classes)?,
            None => Admission::all(),
        };
        let profile = StackProfile::from_trace(&g.trace, &SimOptions::with_admission(admission))?;
        Ok(capacities.iter().map(|&c| profile.hit_ratio(c)).collect::<Vec<_>>())
    })?;
    Ok((0..capacities.len())
        .map(|i| confidence_interval_95(&runs.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .collect())
}

/// Slice durations (days) of the shuffle study, coarsest first. `None`
/// stands for a single slice spanning the whole trace.
pub const SHUFFLE_SLICE_DAYS: [Option<f64>; 6] =
    [None, Some(30.0), Some(7.0), Some(1.0), Some(0.25), Some(1.0 / 12.0)];
pub const SHUFFLE_TARGET: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShuffleRow {
    pub label: String,
    /// `None` for the unshuffled trace.
    pub slice_days: Option<f64>,
    /// Mean number of slices over the replications (0 for the original).
    pub slices: f64,
    pub required_capacity: ConfidenceInterval,
}

impl ShuffleRow {
    pub const CSV_HEADER: &'static str = "label,slice_days,slices,required_capacity,ci";

    pub fn csv_line(&self) -> String {
        let days = self.slice_days.map_or_else(String::new, |d| format!("{d}"));
        format!(
            "{},{},{},{},{}",
            self.label, days, self.slices, self.required_capacity.mean, self.required_capacity.half_width
        )
    }
}

fn slice_label(days: Option<f64>) -> String {
    match days {
        None => "full".to_string(),
        Some(d) if d >= 1.0 => format!("{d}d"),
        Some(d) => format!("{}h", (d * 24.0).round()),
    }
}

/// Cache size needed for `target` on generated traces, on the original
/// request order and after shuffling content ids within slices of each
/// duration in `slice_days`. The first row is the original trace.
pub fn shuffle_study(
    config: &TrafficConfig,
    slice_days: &[Option<f64>],
    target: f64,
    reps: usize,
) -> Result<Vec<ShuffleRow>> {
    let topology = CacheTopology::single(1);
    let options = SimOptions::default();
    // Each replication yields (slices, capacity) for the original then for
    // every slice duration.
    let runs = replicate(reps, config.seed, |seed| {
        let trace = generate_with_catalog(config, &topology, seed)?.trace;
        let mut out = Vec::with_capacity(slice_days.len() + 1);
        let original = StackProfile::from_trace(&trace, &options)?.required_capacity(target)?;
        out.push((0usize, original.capacity as f64));
        for (i, days) in slice_days.iter().enumerate() {
            let k = days.map_or(1, |d| slices_for_duration(&trace, d));
            let shuffled = shuffle_k_slices(&trace, k, run_seed(seed, i + 1))?;
            let size = StackProfile::from_trace(&shuffled, &options)?.required_capacity(target)?;
            out.push((k, size.capacity as f64));
        }
        Ok(out)
    })?;
    let labels = std::iter::once(("original".to_string(), None))
        .chain(slice_days.iter().map(|&d| (slice_label(d), d)));
    Ok(labels
        .enumerate()
        .map(|(i, (label, days))| {
            let sizes: Vec<f64> = runs.iter().map(|r| r[i].1).collect();
            let slices = runs.iter().map(|r| r[i].0 as f64).sum::<f64>() / runs.len() as f64;
            ShuffleRow { label, slice_days: days, slices, required_capacity: confidence_interval_95(&sizes) }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixes_are_valid() {
        for s in MixScenario::ALL {
            let c = class_mix(s, 1.0).unwrap();
            assert_eq!(c.classes.len(), 6);
            assert!((c.classes[0].volumes.mean().unwrap() - 1.61).abs() < 1e-9);
            // Class 5 (δ = 500 days) keeps all but 1e-4 of its mass.
            assert!(c.burn_in() >= 500.0 * (1e4f64).ln() - 1e-6);
        }
        assert!(class_mix(MixScenario::One, 0.5).is_err());
    }

    #[test]
    fn allocations_respect_budget() {
        for b in TREE_BUDGETS {
            for f in TREE_LEAF_FRACTIONS {
                let a = allocation(b, f).unwrap();
                assert_eq!(a.leaf_capacity * 8 + a.root_capacity, a.budget.max(a.leaf_capacity * 8));
                assert_eq!(a.topology.leaves().len(), 8);
            }
        }
        assert_eq!(allocation(51200, 1.0).unwrap().root_capacity, 0);
        assert_eq!(allocation(51200, 0.0).unwrap().leaf_capacity, 0);
    }

    #[test]
    fn simulated_curve_is_monotone() {
        let mut cfg = single_class(1.0, 3.0, 100.0).unwrap();
        cfg.horizon = 10.0;
        let cfg = with_stationary_start(cfg);
        let caps = [0, 10, 100, 1000, 100_000];
        let curve = simulated_curve(&cfg, &caps, 2, None).unwrap();
        assert_eq!(curve[0].mean, 0.0);
        assert!(curve.windows(2).all(|w| w[0].mean <= w[1].mean));
        assert!(simulated_curve(&cfg, &caps, 2, Some(&FilterPolicy::new(["nope"]))).is_err());
    }

    #[test]
    fn shuffle_rows_line_up() {
        let mut cfg = single_class(1.0, 3.0, 100.0).unwrap();
        cfg.horizon = 10.0;
        let cfg = with_stationary_start(cfg);
        let rows = shuffle_study(&cfg, &[None, Some(1.0)], 0.1, 2).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].label, "original");
        assert_eq!(rows[1].slices, 1.0);
        assert!(rows[2].slices > 1.0);
        assert!(rows[1].required_capacity.mean >= rows[0].required_capacity.mean);
        assert_eq!(slice_label(Some(0.25)), "6h");
    }
}
