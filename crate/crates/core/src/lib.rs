//! Core of the ODES online examination service: the question bank, per-student
//! exam assembly, grading, result storage and the [`Odes`] service facade.

pub mod accounts;
pub mod bank;
pub mod engine;
mod error;
pub mod grading;
mod import;
pub mod model;
pub mod persistence;
pub mod points;
pub mod service;

pub use error::{ErrorKind, OdesError};
pub use import::{ImportRecord, ImportSummary, RecordError};
pub use points::Points;
pub use service::Odes;
