//! Domain types of the shot-noise traffic model.

pub mod mix;
pub mod profile;
pub mod topology;
pub mod volume;

pub use mix::{ContentClass, IngressModel, SplitAtom, TrafficConfig, CONFIG_SCHEMA};
pub use profile::{PopularityProfile, ProfileKind};
pub use topology::{CacheNode, CacheTopology, NodeId};
pub use volume::VolumeDistribution;
