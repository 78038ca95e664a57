//! Proactive replica placement for crowdsourced live streaming on
//! geo-distributed cloud sites.
//!
//! The pipeline predicts per-region viewer counts for each incoming video
//! ([`predictor`]), picks the cheapest set of replica sites and serving sites
//! that keeps the viewer-weighted average delay under a threshold
//! ([`optimizer`]), and replays a trace period by period to account costs,
//! hits and latency ([`simulator`]).

// `!(x > 0.0)` is how validation rejects NaN along with the bad range
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod domain;
pub mod error;
pub mod geo;
pub mod optimizer;
pub mod predictor;
pub mod simulator;
pub mod workload;

pub use domain::{
    validate_decision, BroadcasterLocation, CostParams, DemandVector, PeriodLedger, PeriodMetrics,
    PlacementDecision, RawFeatures, Region, RegionId, RegionSet, RttMatrix, VideoRecord,
};
pub use error::{Error, Result};
