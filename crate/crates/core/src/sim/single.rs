//! Trace replay through a single LRU cache, with optional class filtering.

use std::collections::BTreeSet;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::lru::LruCache;
use crate::error::{Result, SnmError};
use crate::model::NodeId;
use crate::tracegen::{Catalog, Request, RequestTrace};

/// Content id to class index, plus the class labels.
#[derive(Debug, Clone)]
pub struct ClassMap {
    labels: Vec<String>,
    lookup: ClassLookup,
}

#[derive(Debug, Clone)]
enum ClassLookup {
    /// Ids are `0..n`.
    Dense(Vec<u32>),
    Sparse(FxHashMap<u64, u32>),
}

impl ClassMap {
    pub fn from_catalog(catalog: &Catalog) -> Self {
        ClassMap {
            labels: catalog.class_labels.clone(),
            lookup: ClassLookup::Dense(catalog.contents.iter().map(|c| c.class_index).collect()),
        }
    }

    pub fn from_pairs(labels: Vec<String>, pairs: impl IntoIterator<Item = (u64, u32)>) -> Result<Self> {
        let mut map = FxHashMap::default();
        for (id, k) in pairs {
            if k as usize >= labels.len() {
                return Err(SnmError::invalid(format!("class index {k} out of range")));
            }
            map.insert(id, k);
        }
        Ok(ClassMap { labels, lookup: ClassLookup::Sparse(map) })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn class_of(&self, id: u64) -> Option<u32> {
        match &self.lookup {
            ClassLookup::Dense(v) => usize::try_from(id).ok().and_then(|i| v.get(i)).copied(),
            ClassLookup::Sparse(m) => m.get(&id).copied(),
        }
    }
}

/// Labels of classes whose contents are never admitted to any cache.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub labels: BTreeSet<String>,
}

impl FilterPolicy {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        FilterPolicy { labels: labels.into_iter().map(Into::into).collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Decides per content whether caches may store it.
#[derive(Debug, Clone, Default)]
pub struct Admission<'a> {
    filter: Option<(&'a ClassMap, Vec<bool>)>,
}

impl<'a> Admission<'a> {
    pub fn all() -> Self {
        Admission { filter: None }
    }

    /// Unknown labels in the policy are rejected so typos do not silently
    /// disable filtering.
    pub fn filtered(policy: &FilterPolicy, classes: &'a ClassMap) -> Result<Self> {
        for label in &policy.labels {
            if !classes.labels.contains(label) {
                return Err(SnmError::invalid(format!("filter names unknown class {label:?}")));
            }
        }
        let blocked = classes.labels.iter().map(|l| policy.labels.contains(l)).collect();
        Ok(Admission { filter: Some((classes, blocked)) })
    }

    pub fn is_filtered(&self, id: u64) -> Result<bool> {
        match &self.filter {
            None => Ok(false),
            Some((map, blocked)) => {
                let k = map.class_of(id).ok_or(SnmError::UnknownContentClass(id))?;
                Ok(blocked[k as usize])
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions<'a> {
    pub admission: Admission<'a>,
    /// Extra warm-up: requests earlier than the first request time plus this
    /// offset (days) are not measured, in addition to flagged ones.
    pub measure_offset: f64,
}

impl<'a> SimOptions<'a> {
    pub fn with_admission(admission: Admission<'a>) -> Self {
        SimOptions { admission, measure_offset: 0.0 }
    }

    pub(crate) fn measure_from(&self, trace: &RequestTrace) -> f64 {
        if self.measure_offset > 0.0 {
            trace.requests().first().map_or(f64::NEG_INFINITY, |r| r.time + self.measure_offset)
        } else {
            f64::NEG_INFINITY
        }
    }
}

#[inline]
pub(crate) fn is_measured(r: &Request, measure_from: f64) -> bool {
    !r.pre_horizon && r.time >= measure_from
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub node_id: NodeId,
    pub capacity: u64,
    pub requests: u64,
    pub hits: u64,
    pub misses: u64,
    pub hit_ratio: f64,
}

impl NodeStats {
    pub(crate) fn new(node_id: NodeId, capacity: u64, requests: u64, hits: u64) -> Self {
        NodeStats { node_id, capacity, requests, hits, misses: requests - hits, hit_ratio: ratio(hits, requests) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub nodes: Vec<NodeStats>,
    /// Measured exogenous requests.
    pub requests: u64,
    /// Measured requests served by some cache.
    pub hits: u64,
    pub hit_ratio: f64,
}

impl SimResult {
    pub fn node(&self, id: NodeId) -> Option<&NodeStats> {
        self.nodes.iter().find(|n| n.node_id == id)
    }

    pub const CSV_HEADER: &'static str = "node_id,capacity,requests,hits,hit_ratio";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for n in &self.nodes {
            out.push_str(&format!("{},{},{},{},{}\n", n.node_id, n.capacity, n.requests, n.hits, n.hit_ratio));
        }
        out
    }
}

pub(crate) fn ratio(hits: u64, requests: u64) -> f64 {
    if requests == 0 {
        0.0
    } else {
        hits as f64 / requests as f64
    }
}

/// Replays `trace` through one LRU cache of `capacity` contents. Warm-up
/// requests change the cache state but are not counted; filtered contents
/// always miss and never enter the cache.
pub fn simulate_single(trace: &RequestTrace, capacity: u64, options: &SimOptions) -> Result<SimResult> {
    let mut cache = LruCache::new(capacity);
    let from = options.measure_from(trace);
    let (mut requests, mut hits) = (0u64, 0u64);
    for r in trace {
        let hit = if options.admission.is_filtered(r.content_id)? { false } else { cache.access(r.content_id) };
        if is_measured(r, from) {
            requests += 1;
            hits += u64::from(hit);
        }
    }
    let node = NodeStats::new(0, capacity, requests, hits);
    Ok(SimResult { nodes: vec![node], requests, hits, hit_ratio: node.hit_ratio })
}

/// Hit (true) or miss for every request of the trace, warm-up included.
pub fn hit_sequence(trace: &RequestTrace, capacity: u64, admission: &Admission) -> Result<Vec<bool>> {
    let mut cache = LruCache::new(capacity);
    trace
        .iter()
        .map(|r| Ok(!admission.is_filtered(r.content_id)? && cache.access(r.content_id)))
        .collect()
}
