//! Independent replications with Student-t confidence intervals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::single::{Admission, ClassMap, FilterPolicy, SimOptions, SimResult};
use super::tree::simulate_tree;
use crate::error::{Result, SnmError};
use crate::model::{CacheTopology, NodeId, TrafficConfig};
use crate::stats::{confidence_interval_95, ConfidenceInterval};
use crate::tracegen::generate_with_catalog;

/// Seed of replication `run` derived from `base` (SplitMix64 finalizer), so
/// runs never share a seed.
pub fn run_seed(base: u64, run: usize) -> u64 {
    let mut z = base.wrapping_add((run as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs `measure` for `n_runs` distinct seeds in parallel, in run order.
pub fn replicate<T: Send>(n_runs: usize, base_seed: u64, measure: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    if n_runs < 2 {
        return Err(SnmError::invalid("replication needs at least two runs"));
    }
    (0..n_runs).into_par_iter().map(|i| measure(run_seed(base_seed, i))).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicatedSim {
    pub runs: Vec<SimResult>,
    pub global: ConfidenceInterval,
    pub per_node: Vec<(NodeId, ConfidenceInterval)>,
}

impl ReplicatedSim {
    pub fn from_runs(runs: Vec<SimResult>) -> Self {
        let global = confidence_interval_95(&runs.iter().map(|r| r.hit_ratio).collect::<Vec<_>>());
        let per_node = runs[0]
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.node_id, confidence_interval_95(&runs.iter().map(|r| r.nodes[i].hit_ratio).collect::<Vec<_>>())))
            .collect();
        ReplicatedSim { runs, global, per_node }
    }
}

/// Generates `n_runs` traces of `config` and replays each through
/// `topology`.
pub fn replicate_sim(
    config: &TrafficConfig,
    topology: &CacheTopology,
    n_runs: usize,
    filter: Option<&FilterPolicy>,
) -> Result<ReplicatedSim> {
    let runs = replicate(n_runs, config.seed, |seed| {
        let g = generate_with_catalog(config, topology, seed)?;
        let classes = ClassMap::from_catalog(&g.catalog);
        let admission = match filter {
            Some(f) => Admission::filtered(f, &classes)?,
            None => Admission::all(),
        };
        simulate_tree(&g.trace, topology, &SimOptions::with_admission(admission))
    })?;
    Ok(ReplicatedSim::from_runs(runs))
}
