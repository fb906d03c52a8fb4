//! Synthetic traces: generation, virtual-time warps and slice shuffling.

mod generate;
mod shuffle;
mod trace;
mod warp;

pub use generate::{config_hash, generate, generate_with_catalog, Catalog, ContentInstance, GeneratedTrace};
pub use shuffle::{shuffle_k_slices, slices_for_duration};
pub use trace::{Request, RequestTrace, TraceMetadata, TRACE_HEADER};
pub use warp::{warp, VirtualTimeWarp};
