//! Embedding of signal-processing overlay graphs (feedback loops allowed) onto
//! wireless infrastructures with SINR-constrained TDMA scheduling and
//! multicast-aware routing.
//!
//! - [`model`]: instance and solution types, derived `f`/`beta` views and the slot objective.
//! - [`radio`]: attenuation and per-slot SINR feasibility.
//! - [`validator`]: constraint-by-constraint feasibility report, the ground truth for all solvers.
//! - [`exact`]: optimal iterative-deepening search and an exhaustive enumerator used as its oracle.
//! - [`emitter`]: MIQCP model generation in LP text format and a substitution checker.
//! - [`heuristic`]: link-by-link mapping search with lookahead, backtracking and a degree limit.
//! - [`scenario`]: random room instances and the canonical seven-block overlay.
//! - [`harness`]: seeded experiment sweeps with CSV, summary and SVG output.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod emitter;
pub mod error;
pub mod exact;
pub mod harness;
pub mod heuristic;
pub mod io;
pub mod model;
pub mod radio;
pub mod scenario;
pub mod validator;

pub use error::{Error, Result};
pub use model::{
    derive_forwarding, derive_used_slots, objective, BlockIdx, FlowMode, Instance, InfrastructureNetwork, NodeIdx,
    OverlayApp, Outcome, SignalModel, Slot, Solution, Transmission,
};
