//! Event-triggered sliding-mode control of a nonlinear continuous stirred
//! tank reactor.
//!
//! * [`plant`]: dimensionless reactor model, physical conversions, equilibria.
//! * [`controller`]: sliding surface and the continuous / held control laws.
//! * [`trigger`]: triggering rule, event log, Lipschitz and inter-event bounds.
//! * [`sim`]: fixed-step closed loop, verification and metrics.
//! * [`export`]: CSV writers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod error;
pub mod export;
pub mod plant;
pub mod sim;
pub mod trigger;

pub use controller::{ErrorState, HeldControl, ReferenceSignal, SlidingParams, Switching};
pub use error::{Error, Result};
pub use plant::{DimlessParams, DimlessState, Disturbance, PhysicalParams, Sinusoid, StateBox};
pub use sim::{InvariantCheck, Metrics, RunOutput, Sampling, Scenario, SimConfig, Trajectory};
pub use trigger::{EventLog, LipschitzEstimate, TriggerParams};
