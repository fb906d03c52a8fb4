//! Replay through a tree of LRU caches with leave-copy-everywhere.
//!
//! A request enters at its ingress leaf and climbs toward the root until some
//! cache holds the content, or reaches the repository above the root, which
//! holds everything. The content is then copied into every cache on the
//! traversed part of the path, from the serving node down to the leaf.
//! Caches off the path are not touched.

use super::lru::LruCache;
use super::single::{is_measured, ratio, NodeStats, SimOptions, SimResult};
use crate::error::{Result, SnmError};
use crate::model::CacheTopology;
use crate::tracegen::RequestTrace;

pub fn simulate_tree(trace: &RequestTrace, topology: &CacheTopology, options: &SimOptions) -> Result<SimResult> {
    let nodes = topology.nodes();
    let mut caches: Vec<LruCache> = nodes.iter().map(|n| LruCache::new(n.capacity)).collect();
    // Paths as positions into `nodes`, indexed by leaf order.
    let paths: Vec<Vec<usize>> = topology
        .leaves()
        .iter()
        .map(|&l| topology.path_to_root(l).iter().map(|&id| topology.position(id).expect("known node")).collect())
        .collect();
    let leaf_slot = |id| topology.leaf_index(id).ok_or(SnmError::NotALeaf(id));
    // Most traces use few distinct leaves; a small lookup table avoids a scan.
    let max_id = nodes.iter().map(|n| n.id).max().unwrap_or(0) as usize;
    let mut slot_of = vec![usize::MAX; max_id + 1];
    for &l in topology.leaves() {
        slot_of[l as usize] = leaf_slot(l)?;
    }

    let from = options.measure_from(trace);
    let mut requests = vec![0u64; nodes.len()];
    let mut hits = vec![0u64; nodes.len()];
    let (mut total, mut served_total) = (0u64, 0u64);

    for r in trace {
        let slot = match slot_of.get(r.ingress_id as usize) {
            Some(&s) if s != usize::MAX => s,
            _ => return Err(SnmError::NotALeaf(r.ingress_id)),
        };
        let path = &paths[slot];
        let measured = is_measured(r, from);
        total += u64::from(measured);

        if options.admission.is_filtered(r.content_id)? {
            if measured {
                for &p in path {
                    requests[p] += 1;
                }
            }
            continue;
        }

        let served = path.iter().position(|&p| caches[p].touch(r.content_id)).unwrap_or(path.len());
        if measured {
            for &p in &path[..(served + 1).min(path.len())] {
                requests[p] += 1;
            }
            if served < path.len() {
                hits[path[served]] += 1;
                served_total += 1;
            }
        }
        for &p in path[..served].iter().rev() {
            caches[p].insert(r.content_id);
        }
    }

    let stats = nodes.iter().enumerate().map(|(i, n)| NodeStats::new(n.id, n.capacity, requests[i], hits[i])).collect();
    Ok(SimResult { nodes: stats, requests: total, hits: served_total, hit_ratio: ratio(served_total, total) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CacheNode;
    use crate::sim::simulate_single;
    use crate::tracegen::{Request, TraceMetadata};

    fn trace(reqs: &[(u64, u32)]) -> RequestTrace {
        let reqs = reqs
            .iter()
            .enumerate()
            .map(|(i, &(id, leaf))| Request { time: i as f64, content_id: id, ingress_id: leaf, pre_horizon: false })
            .collect();
        RequestTrace::new(reqs, TraceMetadata::default()).unwrap()
    }

    #[test]
    fn root_hit_copies_into_requesting_leaf_only() {
        let top = CacheTopology::two_level(2, 1, 4);
        // 7 fetched via leaf 1, then requested at leaf 2 (root hit), then
        // at leaf 2 again (leaf hit), then at leaf 1 (leaf hit: copy kept).
        let t = trace(&[(7, 1), (7, 2), (7, 2), (7, 1)]);
        let r = simulate_tree(&t, &top, &SimOptions::default()).unwrap();
        assert_eq!(r.node(0).unwrap().requests, 2);
        assert_eq!(r.node(0).unwrap().hits, 1);
        assert_eq!(r.node(1).unwrap().hits, 1);
        assert_eq!(r.node(2).unwrap().hits, 1);
        assert_eq!((r.requests, r.hits), (4, 3));
    }

    #[test]
    fn single_node_tree_equals_single_cache() {
        let ids: Vec<(u64, u32)> = (0..3000u64).map(|i| ((i * i + 7 * i) % 101, 0)).collect();
        let t = trace(&ids);
        for cap in [0, 1, 10, 50] {
            let a = simulate_tree(&t, &CacheTopology::single(cap), &SimOptions::default()).unwrap();
            let b = simulate_single(&t, cap, &SimOptions::default()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_non_leaf_ingress() {
        let top = CacheTopology::two_level(2, 1, 4);
        assert!(matches!(simulate_tree(&trace(&[(1, 0)]), &top, &SimOptions::default()), Err(SnmError::NotALeaf(0))));
        assert!(matches!(simulate_tree(&trace(&[(1, 9)]), &top, &SimOptions::default()), Err(SnmError::NotALeaf(9))));
    }

    #[test]
    fn three_level_path() {
        let nodes = vec![
            CacheNode { id: 10, capacity: 5, children: vec![11] },
            CacheNode { id: 11, capacity: 5, children: vec![12, 13] },
            CacheNode { id: 12, capacity: 1, children: vec![] },
            CacheNode { id: 13, capacity: 1, children: vec![] },
        ];
        let top = CacheTopology::new(nodes, 10).unwrap();
        let t = trace(&[(1, 12), (2, 12), (1, 13), (1, 12)]);
        let r = simulate_tree(&t, &top, &SimOptions::default()).unwrap();
        // second request of 1 hits at the middle node; last one at leaf 12? no:
        // leaf 12 holds 2 (capacity 1), so it hits at the middle node again.
        assert_eq!(r.node(11).unwrap().hits, 2);
        assert_eq!(r.node(10).unwrap().requests, 2);
        assert_eq!(r.hits, 2);
    }
}
