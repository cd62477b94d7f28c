//! Execution-time prediction for deep-learning training workloads.
//!
//! The pipeline has three stages:
//!
//! 1. **Benchmark** atomic layer operations (dense, conv2d, max-pool) on the
//!    host with a median-of-5 timing harness ([`bench`]).
//! 2. **Learn** a regressor mapping layer/hardware features to execution time:
//!    a feed-forward network trained in log-time space, plus a linear baseline
//!    ([`featurespace`], [`dataset`], [`predictor`]).
//! 3. **Compose** per-layer predictions into whole-network batch and epoch
//!    time estimates ([`composer`]).
//!
//! The `examples/` directory has one runnable example per capability; the
//! `epoch-oracle` binary exposes the same workflows as subcommands.

#![allow(clippy::needless_range_loop)]

pub mod bench;
pub mod cli;
pub mod composer;
pub mod dataset;
pub mod error;
pub mod featurespace;
pub mod kernels;
pub mod predictor;

pub use error::{Error, Result};
