//! Trees of capacitated caches. Requests enter at the leaves; misses climb
//! toward the root and finally reach an implicit, infinite repository.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnmError};

pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheNode {
    pub id: NodeId,
    /// Capacity in contents.
    pub capacity: u64,
    #[serde(default)]
    pub children: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTopology", into = "RawTopology")]
pub struct CacheTopology {
    nodes: Vec<CacheNode>,
    root: NodeId,
    index: HashMap<NodeId, usize>,
    parent: HashMap<NodeId, NodeId>,
    leaves: Vec<NodeId>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    root: NodeId,
    nodes: Vec<CacheNode>,
}

impl TryFrom<RawTopology> for CacheTopology {
    type Error = SnmError;

    fn try_from(raw: RawTopology) -> Result<Self> {
        CacheTopology::new(raw.nodes, raw.root)
    }
}

impl From<CacheTopology> for RawTopology {
    fn from(t: CacheTopology) -> Self {
        RawTopology { root: t.root, nodes: t.nodes }
    }
}

impl CacheTopology {
    pub fn new(nodes: Vec<CacheNode>, root: NodeId) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id, i).is_some() {
                return Err(SnmError::Topology(format!("duplicate node id {}", n.id)));
            }
        }
        if !index.contains_key(&root) {
            return Err(SnmError::Topology(format!("root {root} is not a node")));
        }
        let mut parent = HashMap::new();
        for n in &nodes {
            for &c in &n.children {
                if !index.contains_key(&c) {
                    return Err(SnmError::Topology(format!("node {} lists unknown child {c}", n.id)));
                }
                if c == root || parent.insert(c, n.id).is_some() {
                    return Err(SnmError::Topology(format!("node {c} has more than one parent")));
                }
            }
        }
        // Every node must hang below the root: walk up with a step bound.
        for n in &nodes {
            let mut cur = n.id;
            let mut steps = 0;
            while cur != root {
                cur = *parent
                    .get(&cur)
                    .ok_or_else(|| SnmError::Topology(format!("node {} is not reachable from the root", n.id)))?;
                steps += 1;
                if steps > nodes.len() {
                    return Err(SnmError::Topology("cycle detected".into()));
                }
            }
        }
        let leaves = nodes.iter().filter(|n| n.children.is_empty()).map(|n| n.id).collect();
        Ok(CacheTopology { nodes, root, index, parent, leaves })
    }

    pub fn single(capacity: u64) -> Self {
        CacheTopology::new(vec![CacheNode { id: 0, capacity, children: vec![] }], 0).expect("valid")
    }

    /// Root `0` above leaves `1..=leaves`.
    pub fn two_level(leaves: usize, leaf_capacity: u64, root_capacity: u64) -> Self {
        let mut nodes = vec![CacheNode { id: 0, capacity: root_capacity, children: (1..=leaves as NodeId).collect() }];
        nodes.extend((1..=leaves as NodeId).map(|id| CacheNode { id, capacity: leaf_capacity, children: vec![] }));
        CacheTopology::new(nodes, 0).expect("valid")
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn nodes(&self) -> &[CacheNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&CacheNode> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn position(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn capacity(&self, id: NodeId) -> u64 {
        self.node(id).map_or(0, |n| n.capacity)
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parent.get(&id).copied()
    }

    /// Leaves in declaration order; ingress splits index into this list.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn leaf_index(&self, id: NodeId) -> Option<usize> {
        self.leaves.iter().position(|&l| l == id)
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.node(id).is_some_and(|n| n.children.is_empty())
    }

    /// Nodes from `leaf` up to and including the root.
    pub fn path_to_root(&self, leaf: NodeId) -> Vec<NodeId> {
        let mut path = vec![leaf];
        let mut cur = leaf;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path
    }

    /// Children before parents.
    pub fn bottom_up(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                order.push(id);
                continue;
            }
            stack.push((id, true));
            for &c in self.node(id).map(|n| n.children.as_slice()).unwrap_or(&[]).iter().rev() {
                stack.push((c, false));
            }
        }
        order
    }

    pub fn total_capacity(&self) -> u64 {
        self.nodes.iter().map(|n| n.capacity).sum()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_structure() {
        let t = CacheTopology::two_level(8, 10, 100);
        assert_eq!(t.leaves().len(), 8);
        assert_eq!(t.path_to_root(3), vec![3, 0]);
        assert_eq!(t.total_capacity(), 180);
        let order = t.bottom_up();
        assert_eq!(*order.last().unwrap(), 0);
        assert_eq!(order.len(), 9);
    }

    #[test]
    fn rejects_non_trees() {
        let n = |id, children: Vec<u32>| CacheNode { id, capacity: 1, children };
        assert!(CacheTopology::new(vec![n(0, vec![1]), n(1, vec![0])], 0).is_err());
        assert!(CacheTopology::new(vec![n(0, vec![1]), n(1, vec![]), n(2, vec![])], 0).is_err());
        assert!(CacheTopology::new(vec![n(0, vec![1, 1]), n(1, vec![])], 0).is_err());
        assert!(CacheTopology::new(vec![n(0, vec![7])], 0).is_err());
        assert!(CacheTopology::new(vec![n(0, vec![1, 2]), n(1, vec![2]), n(2, vec![])], 0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = CacheTopology::two_level(2, 5, 7);
        let back = CacheTopology::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
        assert!(CacheTopology::from_json(r#"{"root":0,"nodes":[{"id":0,"capacity":1,"children":[3]}]}"#).is_err());
    }
}
