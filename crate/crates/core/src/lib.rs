//! Predictive communication engine for low-altitude aerial networks.
//!
//! Pre-filed 4D flight plans and a learned large-scale radio map are fused
//! into a time-indexed channel graph. A three-layer cascade then allocates
//! resources for each data flow:
//!
//! * [`strategic`] reserves an end-to-end path on a time-expanded graph,
//!   carrying data on moving aircraft when the deadline allows it;
//! * [`tactical`] re-routes around locally detected blockages and re-times
//!   each hop into high-gain slots;
//! * [`operational`] picks the minimum outage-compliant transmit power,
//!   capped by per-node interference limits.
//!
//! [`harness`] wires the layers into a slot-driven simulation and compares
//! the predictive cascade against two reactive baselines. [`echelon`]
//! models the central/local/individual information views and their
//! accuracy-versus-range trade-off.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel_graph;
pub mod echelon;
pub mod harness;
pub mod operational;
pub mod radio_env;
pub mod rng;
pub mod scene;
pub mod strategic;
pub mod tactical;
pub mod trajectory;

pub use channel_graph::{ChannelGraph, LinkForecast, SlotGrid};
pub use radio_env::{GainModel, GroundTruth, LargeScaleStats, PathLossParams, RadioMap};
pub use scene::{NodeId, ObstacleBox, Position3, Scene};
pub use trajectory::{DeviationParams, Trajectory4D, Waypoint};

/// Converts a dB (or dBm) value to linear scale (or mW).
#[inline]
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear value (or mW) to dB (or dBm).
#[inline]
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}
