//! Deterministic Monte Carlo simulator for hybrid optical/acoustic
//! underwater sensor networks.
//!
//! Nodes carry multi-face LED/photodiode transceivers and an omnidirectional
//! acoustic modem. Each trial samples a deployment, builds the link graph,
//! computes the end-to-end rate of every node to the sink over its widest
//! path, and localizes the nodes by RSS ranging and multilateration.

// Range checks are written `!(x > 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acoustic;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod localization;
pub mod optical;
pub mod rng;
pub mod routing;

pub use config::Config;
pub use error::{Error, Result};
pub use experiment::{run_sweep, run_trial, Parallelism, Scenario, SweepResult, TrialRecord};
pub use geometry::{Deployment, FaceSet, Vec3};
pub use optical::{WaterKind, WaterType};
pub use routing::{NetworkGraph, NetworkMode};
