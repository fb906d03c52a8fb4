//! Shot-noise request traffic, LRU cache simulation and analytic hit
//! probability estimates for single caches and cache trees.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the traffic description (popularity profiles, volume
//!   laws, class mixes, ingress models) and cache topologies.
//! * [`tracegen`] draws request traces from a model and perturbs them.
//! * [`sim`] replays traces through exact LRU caches.
//! * [`analytic`] evaluates the characteristic-time approximation.
//! * [`fit`] goes the other way, from a trace to a fitted model.
//! * [`scenarios`] builds the reference workloads used by the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod fit;
pub mod model;
pub mod quadrature;
pub mod scenarios;
pub mod sim;
pub mod stats;
pub mod tracegen;

pub use error::{Result, SnmError};
