//! Hardware-aware neural architecture search over inverted-bottleneck,
//! fused inverted-bottleneck and Tucker layer spaces.
//!
//! The crate is organised bottom-up:
//!
//! - [`arch`]: the architecture IR (layers, blocks, networks), shape
//!   derivation, the canonical JSON document and DOT export.
//! - [`space`]: the three search-space variants as ordered categorical
//!   decisions, plus decoding of decision vectors into networks.
//! - [`analysis`]: exact MAdds / parameter counting and cost-model features.
//! - [`cost`]: simulated devices and the linear latency regression.
//! - [`tucker`]: mode-2 Tucker decomposition of convolution kernels.
//! - [`controller`]: the REINFORCE controller with Adam.
//! - [`search`]: search loops, exhaustive and random baselines, ablations.
//! - [`report`]: CSV / SVG emission and Pareto fronts.

pub mod analysis;
pub mod arch;
pub mod controller;
pub mod cost;
pub mod error;
pub mod report;
pub mod search;
pub mod space;
pub mod tucker;

pub use error::{NasError, Result};
