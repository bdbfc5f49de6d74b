//! Scenario loading, the deterministic simulation engine, and run logging.

pub mod config;
pub mod engine;
pub mod log;
pub mod tree;

pub use config::{Overrides, ScenarioConfig};
pub use engine::{Engine, ValidationReport, THREADS_ENV};
pub use log::{summarize, Event, RunLog, StepRecord, Summary};
