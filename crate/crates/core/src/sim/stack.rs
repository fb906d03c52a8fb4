//! LRU stack distances. One pass over a trace yields the hit count of an LRU
//! cache of every capacity at once: a request hits a cache of capacity `C`
//! exactly when fewer than `C` distinct other contents were requested since
//! the previous request for the same content.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::single::{is_measured, SimOptions};
use super::sizing::{required_cache_size, SizeSearch};
use crate::error::{Result, SnmError};
use crate::tracegen::RequestTrace;

/// Fenwick tree over request positions, marking the latest access of each
/// content.
struct Fenwick {
    tree: Vec<u32>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick { tree: vec![0; n + 1] }
    }

    fn add(&mut self, i: usize, delta: i32) {
        let mut i = i + 1;
        while i < self.tree.len() {
            self.tree[i] = self.tree[i].wrapping_add_signed(delta);
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over positions `0..i`.
    fn prefix(&self, i: usize) -> u64 {
        let mut i = i;
        let mut s = 0u64;
        while i > 0 {
            s += u64::from(self.tree[i]);
            i &= i - 1;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackProfile {
    /// `cumulative_hits[c]`: measured hits of a cache holding `c` contents.
    cumulative_hits: Vec<u64>,
    measured: u64,
}

impl StackProfile {
    pub fn from_trace(trace: &RequestTrace, options: &SimOptions) -> Result<Self> {
        let from = options.measure_from(trace);
        let mut fenwick = Fenwick::new(trace.len());
        let mut last: FxHashMap<u64, usize> = FxHashMap::default();
        let mut histogram: Vec<u64> = vec![0];
        let mut measured = 0u64;
        for (pos, r) in trace.iter().enumerate() {
            let counted = is_measured(r, from);
            measured += u64::from(counted);
            if options.admission.is_filtered(r.content_id)? {
                continue;
            }
            if let Some(prev) = last.insert(r.content_id, pos) {
                let distance = (fenwick.prefix(pos) - fenwick.prefix(prev + 1) + 1) as usize;
                fenwick.add(prev, -1);
                if counted {
                    if histogram.len() <= distance {
                        histogram.resize(distance + 1, 0);
                    }
                    histogram[distance] += 1;
                }
            }
            fenwick.add(pos, 1);
        }
        let mut cumulative_hits = histogram;
        for i in 1..cumulative_hits.len() {
            cumulative_hits[i] += cumulative_hits[i - 1];
        }
        Ok(StackProfile { cumulative_hits, measured })
    }

    pub fn measured(&self) -> u64 {
        self.measured
    }

    pub fn hits(&self, capacity: u64) -> u64 {
        let i = usize::try_from(capacity).unwrap_or(usize::MAX).min(self.cumulative_hits.len() - 1);
        self.cumulative_hits[i]
    }

    pub fn hit_ratio(&self, capacity: u64) -> f64 {
        super::single::ratio(self.hits(capacity), self.measured)
    }

    /// Hit ratio of an unbounded cache (only first requests miss).
    pub fn asymptote(&self) -> f64 {
        self.hit_ratio(u64::MAX)
    }

    /// Smallest capacity beyond which the hit ratio stops growing.
    pub fn saturation_capacity(&self) -> u64 {
        (self.cumulative_hits.len() - 1) as u64
    }

    pub fn required_capacity(&self, target: f64) -> Result<SizeSearch> {
        let asymptote = self.asymptote();
        if !(target <= asymptote) {
            return Err(SnmError::UnreachableTarget { target, asymptote });
        }
        required_cache_size(|c| Ok(self.hit_ratio(c)), target, Some(asymptote))
    }
}
