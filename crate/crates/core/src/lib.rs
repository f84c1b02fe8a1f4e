//! Core library of the kea-tuner toolkit.
//!
//! The pipeline goes: ingest or synthesize machine-group telemetry
//! ([`telemetry`]), fit robust per-group performance models ([`whatif`]),
//! then feed those models into one of the planners:
//!
//! * [`yarn`] — maximize running containers under a cluster-average
//!   latency constraint by tuning per-group container limits,
//! * [`sku`] — pick SSD/RAM sizes for future machines by Monte-Carlo
//!   cost simulation,
//! * [`pricing`] — evaluate off-peak token discounts and oversubscription
//!   scenarios with a logit demand-shift model,
//! * [`flighting`] — design production experiments and compare groups
//!   with Student's t-tests.
//!
//! All operations are pure functions of their inputs plus an explicit
//! seed; repeated runs produce identical results regardless of thread
//! count.

pub mod error;
pub mod flighting;
pub mod pricing;
pub mod sku;
pub mod stats;
pub mod telemetry;
pub mod whatif;
pub mod yarn;

pub use error::{Error, Result};
