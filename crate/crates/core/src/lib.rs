//! Graph fairness under distribution shift: a reverse-mode tape over dense
//! matrices, fairness metrics, bound certificates, and the adversarial /
//! generative training schedule.

#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod ndmath;
pub mod pipeline;
pub mod rng;
pub mod structure;
pub mod theory;

pub use error::{Error, Result};
pub use graph::{AttributedGraph, GroupIndex};
pub use metrics::{MetricsRecord, Predictions};
pub use model::{Backbone, FatraModel};
