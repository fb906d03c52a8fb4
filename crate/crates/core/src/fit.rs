//! From a request trace back to a traffic model.
//!
//! Each content gets a request count `V̂` and, when it has at least
//! [`MIN_REQUESTS_FOR_LIFE_SPAN`] requests, a life-span estimate `L̂`. The
//! estimate plugs a one-day histogram of the content's request times into
//! `L = 1/∫λ²`, which gives `L̂ = N²Δ/Σnᵢ²` for bins of width `Δ` holding
//! `nᵢ` of the `N` requests.
//!
//! Contents fall into six classes: class 0 holds the rarely requested ones
//! (`V̂ < 10`), classes 1 to 5 split the rest by `L̂` at 2, 5, 8 and 13 days.
//! [`fit_config`] turns the classes into a [`TrafficConfig`]; classes 0 and 5
//! are treated as stationary and spread uniformly over the whole horizon.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnmError};
use crate::model::{
    ContentClass, IngressModel, NodeId, PopularityProfile, ProfileKind, TrafficConfig, VolumeDistribution,
};
use crate::stats::pearson;
use crate::tracegen::{Request, RequestTrace, TraceMetadata};

pub const MIN_REQUESTS_FOR_LIFE_SPAN: u64 = 10;
pub const NUM_CLASSES: usize = 6;
/// Upper life-span bounds of classes 1 to 4, in days.
pub const LIFE_SPAN_THRESHOLDS: [f64; 4] = [2.0, 5.0, 8.0, 13.0];
const BIN_DAYS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentStats {
    pub content_id: u64,
    pub requests: u64,
    /// Days; absent below [`MIN_REQUESTS_FOR_LIFE_SPAN`] requests.
    pub life_span: Option<f64>,
    pub first: f64,
    pub last: f64,
    pub per_ingress: BTreeMap<NodeId, u64>,
}

impl ContentStats {
    pub fn class(&self) -> usize {
        match self.life_span {
            Some(l) if self.requests >= MIN_REQUESTS_FOR_LIFE_SPAN => {
                1 + LIFE_SPAN_THRESHOLDS.iter().take_while(|&&t| l > t).count()
            }
            _ => 0,
        }
    }
}

/// `N²Δ/Σnᵢ²` over bins `[kΔ, (k+1)Δ)`.
pub fn life_span_estimate(times: &[f64], bin: f64) -> f64 {
    let mut counts: FxHashMap<i64, u64> = FxHashMap::default();
    for &t in times {
        *counts.entry((t / bin).floor() as i64).or_default() += 1;
    }
    let n = times.len() as f64;
    let sq: f64 = counts.values().map(|&c| (c * c) as f64).sum();
    n * n * bin / sq
}

/// Statistics of every content with at least one measured request, ordered
/// by content id.
pub fn estimate_stats(trace: &RequestTrace) -> Result<Vec<ContentStats>> {
    let mut times: FxHashMap<u64, (Vec<f64>, BTreeMap<NodeId, u64>)> = FxHashMap::default();
    for r in trace.iter().filter(|r| !r.pre_horizon) {
        let e = times.entry(r.content_id).or_default();
        e.0.push(r.time);
        *e.1.entry(r.ingress_id).or_default() += 1;
    }
    if times.is_empty() {
        return Err(SnmError::invalid("trace has no measured requests"));
    }
    let mut out: Vec<ContentStats> = times
        .into_iter()
        .map(|(id, (ts, per_ingress))| {
            let requests = ts.len() as u64;
            ContentStats {
                content_id: id,
                requests,
                life_span: (requests >= MIN_REQUESTS_FOR_LIFE_SPAN).then(|| life_span_estimate(&ts, BIN_DAYS)),
                // The trace is time ordered.
                first: ts[0],
                last: ts[ts.len() - 1],
                per_ingress,
            }
        })
        .collect();
    out.sort_by_key(|s| s.content_id);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: usize,
    pub rule: String,
    pub contents: usize,
    pub content_share: f64,
    pub request_share: f64,
    pub mean_life_span: Option<f64>,
    pub mean_volume: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPartition {
    pub classes: Vec<ClassSummary>,
    pub membership: BTreeMap<u64, usize>,
}

pub fn class_rule(class: usize) -> String {
    let t = LIFE_SPAN_THRESHOLDS;
    match class {
        0 => format!("V<{MIN_REQUESTS_FOR_LIFE_SPAN}"),
        1 => format!("L<={}", t[0]),
        2..=4 => format!("{}<L<={}", t[class - 2], t[class - 1]),
        _ => format!("L>{}", t[3]),
    }
}

impl ClassPartition {
    pub const CSV_HEADER: &'static str = "class,rule,pct_requests,pct_videos,mean_L_days,mean_V";

    pub fn class_of(&self, content: u64) -> Option<usize> {
        self.membership.get(&content).copied()
    }

    /// One row per class: shares in percent, means blank for empty classes.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_default();
        for c in &self.classes {
            out.push_str(&format!(
                "{},{},{:.4},{:.4},{},{}\n",
                c.class,
                c.rule,
                100.0 * c.request_share,
                100.0 * c.content_share,
                opt(c.mean_life_span),
                opt(c.mean_volume)
            ));
        }
        out
    }
}

pub fn classify(stats: &[ContentStats]) -> ClassPartition {
    let total_contents = stats.len().max(1) as f64;
    let total_requests = stats.iter().map(|s| s.requests).sum::<u64>().max(1) as f64;
    let mut membership = BTreeMap::new();
    let mut acc = vec![(0usize, 0u64, 0.0f64, 0usize); NUM_CLASSES];
    for s in stats {
        let k = s.class();
        membership.insert(s.content_id, k);
        let a = &mut acc[k];
        a.0 += 1;
        a.1 += s.requests;
        if let Some(l) = s.life_span {
            a.2 += l;
            a.3 += 1;
        }
    }
    let classes = acc
        .into_iter()
        .enumerate()
        .map(|(k, (n, reqs, l_sum, l_n))| ClassSummary {
            class: k,
            rule: class_rule(k),
            contents: n,
            content_share: n as f64 / total_contents,
            request_share: reqs as f64 / total_requests,
            mean_life_span: (l_n > 0).then(|| l_sum / l_n as f64),
            mean_volume: (n > 0).then(|| reqs as f64 / n as f64),
        })
        .collect();
    ClassPartition { classes, membership }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub profile: ProfileKind,
    /// Power-law exponent; ignored for other shapes.
    pub zeta: Option<f64>,
    /// Days; defaults to the trace's own horizon.
    pub horizon: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { profile: ProfileKind::Exponential, zeta: None, horizon: None }
    }
}

/// Horizon of a trace: recorded in its metadata, else the day after the last
/// measured request.
pub fn trace_horizon(trace: &RequestTrace) -> Option<f64> {
    trace.metadata.horizon.or_else(|| trace.measured_span().map(|(_, hi)| hi.floor() + 1.0))
}

/// SNM configuration whose classes mirror the trace's six-class partition.
///
/// Per class, `γ_k` is the class's measured request rate divided by its mean
/// observed volume, so regenerated traffic keeps every class's request rate.
/// When requests enter at several ingress nodes the result uses
/// [`IngressModel::Unlocalized`] with the observed request shares, ordered
/// by ingress id.
pub fn fit_config(trace: &RequestTrace, options: &FitOptions) -> Result<TrafficConfig> {
    let stats = estimate_stats(trace)?;
    if stats.len() < 2 {
        return Err(SnmError::invalid("cannot fit a model to a trace with a single content"));
    }
    let horizon = options.horizon.or_else(|| trace_horizon(trace)).unwrap_or(1.0);
    if !(horizon > 0.0) {
        return Err(SnmError::invalid(format!("horizon must be positive, got {horizon}")));
    }
    let partition = classify(&stats);
    let mut volumes: Vec<Vec<f64>> = vec![Vec::new(); NUM_CLASSES];
    for s in &stats {
        volumes[s.class()].push(s.requests as f64);
    }
    let mut classes = Vec::new();
    let mut gammas = Vec::new();
    for (k, summary) in partition.classes.iter().enumerate() {
        if summary.contents == 0 {
            continue;
        }
        let vs = std::mem::take(&mut volumes[k]);
        let mean_v = vs.iter().sum::<f64>() / vs.len() as f64;
        let requests: f64 = vs.iter().sum();
        let profile = if k == 0 || k == NUM_CLASSES - 1 {
            PopularityProfile::uniform(horizon)?
        } else {
            let l = summary.mean_life_span.expect("classes 1-4 have life spans");
            PopularityProfile::for_life_span(options.profile, l, options.zeta)?
        };
        gammas.push(requests / horizon / mean_v);
        classes.push(ContentClass::new(format!("class{k}"), 0.0, profile, VolumeDistribution::empirical(vs)?));
    }
    let gamma: f64 = gammas.iter().sum();
    for (c, g) in classes.iter_mut().zip(&gammas) {
        c.weight = g / gamma;
    }
    let mut per_ingress: BTreeMap<NodeId, u64> = BTreeMap::new();
    for s in &stats {
        for (&n, &c) in &s.per_ingress {
            *per_ingress.entry(n).or_default() += c;
        }
    }
    let ingress = if per_ingress.len() <= 1 {
        IngressModel::SingleCache
    } else {
        let total: u64 = per_ingress.values().sum();
        IngressModel::Unlocalized { node_weights: per_ingress.values().map(|&c| c as f64 / total as f64).collect() }
    };
    let mut config = TrafficConfig::single_class(gamma, classes[0].profile, classes[0].volumes.clone(), horizon);
    config.classes = classes;
    config.ingress = ingress;
    config.seed = trace.metadata.seed.unwrap_or(0);
    config.validate()?;
    Ok(config)
}

/// `|I_a ∩ I_b| / |I_a ∪ I_b|` for the request intervals `[first, last]` of
/// one content in two traces.
pub fn time_overlap_fraction(a: &ContentStats, b: &ContentStats) -> f64 {
    let inter = (a.last.min(b.last) - a.first.max(b.first)).max(0.0);
    let union = a.last.max(b.last) - a.first.min(b.first);
    if union <= 0.0 {
        // Both intervals are the same single instant.
        return 1.0;
    }
    inter / union
}

/// [`time_overlap_fraction`] of `content` between two traces.
pub fn time_overlap(content: u64, a: &RequestTrace, b: &RequestTrace) -> Result<f64> {
    let find = |t: &RequestTrace| -> Result<ContentStats> {
        estimate_stats(&RequestTrace::from_unsorted(
            t.iter().filter(|r| r.content_id == content).copied().collect(),
            TraceMetadata::default(),
        ))
        .map_err(|_| SnmError::invalid(format!("content {content} is missing from a trace")))
        .map(|mut v| v.remove(0))
    };
    Ok(time_overlap_fraction(&find(a)?, &find(b)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossClassification {
    /// `matrix[i][j]`: share of the class-`i` contents of the first trace
    /// that belong to class `j` in the second. Rows of empty classes are 0.
    pub matrix: Vec<Vec<f64>>,
    /// Contents present in both traces, per class of the first trace.
    pub row_counts: Vec<usize>,
}

/// Compares the classes of the contents present in both partitions.
pub fn cross_classify(a: &ClassPartition, b: &ClassPartition) -> CrossClassification {
    let mut counts = vec![vec![0usize; NUM_CLASSES]; NUM_CLASSES];
    for (id, &i) in &a.membership {
        if let Some(&j) = b.membership.get(id) {
            counts[i][j] += 1;
        }
    }
    let row_counts: Vec<usize> = counts.iter().map(|r| r.iter().sum()).collect();
    let matrix = counts
        .iter()
        .zip(&row_counts)
        .map(|(row, &n)| row.iter().map(|&c| if n > 0 { c as f64 / n as f64 } else { 0.0 }).collect())
        .collect();
    CrossClassification { matrix, row_counts }
}

/// Pearson correlation of per-content measured request counts over the
/// union of both catalogues (absent contents count 0), restricted to
/// contents with at least `min_requests` requests in the two traces together.
pub fn request_count_correlation(a: &RequestTrace, b: &RequestTrace, min_requests: u64) -> Result<f64> {
    let ca = a.request_counts(false);
    let cb = b.request_counts(false);
    let mut ids: Vec<u64> = ca.keys().chain(cb.keys()).copied().collect();
    ids.sort_unstable();
    ids.dedup();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for id in ids {
        let x = ca.get(&id).copied().unwrap_or(0);
        let y = cb.get(&id).copied().unwrap_or(0);
        if x + y >= min_requests {
            xs.push(x as f64);
            ys.push(y as f64);
        }
    }
    if xs.len() < 2 {
        return Err(SnmError::invalid("need at least two contents to correlate request counts"));
    }
    Ok(pearson(&xs, &ys))
}

/// Sub-traces of the requests entering at each ingress node.
pub fn split_by_ingress(trace: &RequestTrace) -> BTreeMap<NodeId, RequestTrace> {
    let mut parts: BTreeMap<NodeId, Vec<Request>> = BTreeMap::new();
    for r in trace.iter() {
        parts.entry(r.ingress_id).or_default().push(*r);
    }
    parts
        .into_iter()
        .map(|(n, reqs)| (n, RequestTrace::new(reqs, trace.metadata.clone()).expect("subsequence stays sorted")))
        .collect()
}
