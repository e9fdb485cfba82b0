//! A desk-scale model of a multi-tenant serverless key-value store.
//!
//! The crate covers request-unit accounting, hierarchical admission control,
//! dual-layer weighted fair queueing, proxy and data-node caches, workload
//! forecasting with quota autoscaling, and replica rescheduling. A
//! deterministic discrete-event simulator ties them together; see
//! [`sim::run`] and the scenario files under `scenarios/`.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admission;
pub mod autoscale;
pub mod cache;
pub mod cli;
pub mod domain;
pub mod forecast;
pub mod hash;
pub mod reschedule;
pub mod ru;
pub mod scenario;
pub mod sim;
pub mod wfq;
