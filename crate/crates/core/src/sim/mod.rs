//! Exact LRU simulation of single caches and cache trees.

mod lru;
mod replicate;
mod single;
mod sizing;
mod stack;
mod tree;

pub use lru::{LruCache, ReferenceLru};
pub use replicate::{replicate, replicate_sim, run_seed, ReplicatedSim};
pub use single::{hit_sequence, simulate_single, Admission, ClassMap, FilterPolicy, NodeStats, SimOptions, SimResult};
pub use sizing::{required_cache_size, SizeSearch, MAX_SEARCH_CAPACITY};
pub use stack::StackProfile;
pub use tree::simulate_tree;
