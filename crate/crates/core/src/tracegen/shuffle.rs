//! The K-slice shuffling transformation: the trace is cut into `k`
//! consecutive slices holding the same number of requests, and the content
//! ids are randomly permuted inside each slice. Timestamps and warm-up flags
//! stay where they were, so only the order in which contents are requested
//! changes. With `k = 1` all temporal correlation is destroyed; with one
//! request per slice the trace is unchanged.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::trace::{Request, RequestTrace};
use crate::error::{Result, SnmError};

pub fn shuffle_k_slices(trace: &RequestTrace, k: usize, seed: u64) -> Result<RequestTrace> {
    let n = trace.len();
    if k == 0 {
        return Err(SnmError::invalid("the number of slices must be at least 1"));
    }
    if n == 0 {
        return Ok(trace.clone());
    }
    if k > n {
        return Err(SnmError::invalid(format!("{k} slices requested for {n} requests")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = n / k;
    let mut pairs: Vec<(u64, u32)> = trace.iter().map(|r| (r.content_id, r.ingress_id)).collect();
    for s in 0..k {
        let start = s * base;
        let end = if s + 1 == k { n } else { start + base };
        pairs[start..end].shuffle(&mut rng);
    }
    let requests = trace
        .iter()
        .zip(pairs)
        .map(|(r, (content_id, ingress_id))| Request { content_id, ingress_id, ..*r })
        .collect();
    RequestTrace::new(requests, trace.metadata.clone())
}

/// Number of equal-count slices whose average duration over the measured
/// span is closest to `slice_days` (at least one).
pub fn slices_for_duration(trace: &RequestTrace, slice_days: f64) -> usize {
    let span = match (trace.requests().first(), trace.requests().last()) {
        (Some(a), Some(b)) => b.time - a.time,
        _ => return 1,
    };
    ((span / slice_days).round() as usize).clamp(1, trace.len().max(1))
}
