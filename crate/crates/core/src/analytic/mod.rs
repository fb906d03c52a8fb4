//! Characteristic-time (Che) approximation for LRU caches fed by shot-noise
//! traffic: single caches with class mixes and filtering, and cache trees.

mod kernel;
mod network;
mod single;

pub use kernel::VolumeKernel;
pub use network::{
    global_hit_probability, solve_network, volume_grid, AllocationRow, DEFAULT_VOLUME_NODES, NetworkMode, NetworkModel, NetworkSolution,
    NodeSolution,
};
pub use single::{
    capacity_of_tc, filtered_phit, hit_probability, large_cache_phit, phit_vs_capacity_curve, small_cache_phit,
    solve_tc, CheModel, CheSolution, ClassWeighting, CurveRow, Term,
};
