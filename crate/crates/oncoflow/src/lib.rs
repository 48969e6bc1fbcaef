//! Discrete-event simulation of a multi-stage oncology day hospital that
//! cooperates with a detached pharmacy through a batched courier service,
//! together with the statistics and experiment machinery needed to validate
//! the model and explore alternative department configurations.
//!
//! The crate is organized around the flow of one simulated working day:
//! [`scenario`] describes a department configuration, [`stochastics`] turns
//! seeds into reproducible random streams, [`engine`] and [`clinic`] execute
//! the day, [`kpi`] reduces patient traces to performance indicators, and
//! [`experiments`] runs replication campaigns, the full-factorial design and
//! the comparison/validation reports, backed by [`stats`].

pub mod clinic;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod kpi;
pub mod report;
pub mod scenario;
pub mod stats;
pub mod stochastics;

pub use error::Error;
