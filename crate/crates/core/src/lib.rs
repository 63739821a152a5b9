//! Cloud-edge control with an online-learning spiking network.
//!
//! A cloud controller (LQR, optionally with obstacle repulsion) supervises
//! a plant through a message link, while an efficient balanced network of
//! leaky integrate-and-fire neurons on the edge learns to reproduce its
//! command and takes over actuation. Supervision is threshold-gated, so
//! after a short warmup the edge only contacts the cloud on periodic checks.
//!
//! The modules build on each other bottom-up: [`linalg`] (dense matrices,
//! Lyapunov/Riccati solvers, matrix exponential), [`plant`], [`cloud`],
//! [`snn`], [`link`], [`telemetry`], and [`scenario`] + [`runner`] for
//! configuration and closed-loop runs.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloud;
pub mod error;
pub mod linalg;
pub mod link;
pub mod plant;
pub mod runner;
pub mod scenario;
pub mod snn;
pub mod telemetry;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use runner::{run_scenario, run_sweep, RunOutput, SweepRow, SweepSpec};
pub use scenario::{load_config, parse_config, LinkSpec, ScenarioConfig, ScenarioKind};
