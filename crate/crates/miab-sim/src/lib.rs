//! System-level simulator for mobile IAB (mIAB) networks.
//!
//! The crate models a Madrid-grid urban scenario in which buses carry
//! IAB nodes (an MT facing the donor and a DU serving onboard UEs) and
//! compares that deployment against fiber-connected macro and macro+pico
//! baselines under configurable TDD frame patterns, including patterns
//! with slots of silence that trade capacity for cross-link interference
//! avoidance.

pub mod frame;
pub mod geom;
pub mod grid;
pub mod mobility;
pub mod rng;
pub mod scenario;
pub mod channel;
pub mod radio;
pub mod config;
pub mod engine;
pub mod metrics;

pub use config::{Deployment, PatternChoice, Regime, RunConfig};
pub use engine::Simulation;
pub use metrics::MetricsBundle;
