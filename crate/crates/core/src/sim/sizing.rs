//! Smallest cache achieving a target hit ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnmError};

/// Doubling stops here; larger requirements are reported as unreachable.
pub const MAX_SEARCH_CAPACITY: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeSearch {
    /// Smallest capacity whose hit ratio reaches the target.
    pub capacity: u64,
    pub hit_ratio: f64,
    /// Pair found by the doubling phase: the target lies between their hit
    /// ratios.
    pub bracket: (u64, u64),
}

/// Doubling search for a capacity reaching `target`, then bisection down to
/// the smallest one. `hit_ratio_at` must be non-decreasing in capacity.
pub fn required_cache_size(
    mut hit_ratio_at: impl FnMut(u64) -> Result<f64>,
    target: f64,
    asymptote: Option<f64>,
) -> Result<SizeSearch> {
    if !(target > 0.0 && target < 1.0) {
        return Err(SnmError::invalid(format!("target hit ratio must lie in (0, 1), got {target}")));
    }
    let mut lo = 0u64;
    let mut hi = 1u64;
    let mut h_hi = hit_ratio_at(hi)?;
    while h_hi < target {
        if hi >= MAX_SEARCH_CAPACITY {
            return Err(SnmError::UnreachableTarget { target, asymptote: asymptote.unwrap_or(h_hi) });
        }
        lo = hi;
        hi *= 2;
        h_hi = hit_ratio_at(hi)?;
    }
    let bracket = (lo, hi);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let h = hit_ratio_at(mid)?;
        if h >= target {
            hi = mid;
            h_hi = h;
        } else {
            lo = mid;
        }
    }
    Ok(SizeSearch { capacity: hi, hit_ratio: h_hi, bracket })
}
