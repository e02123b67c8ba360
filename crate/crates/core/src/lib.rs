//! Analytical model and flow-level simulator for TMT optical datacenter
//! networks: a static expander, a round-robin rotor plane and a
//! demand-aware circuit plane sharing each ToR's uplinks.
//!
//! Every closed-form kernel in [`analytics`] is generic over [`Scalar`],
//! so the same code runs in `f32`, `f64` or exact rational arithmetic.

pub mod analytics;
pub mod config;
pub mod distribution;
pub mod error;
pub mod model;
pub mod scalar;
pub mod simulator;
pub mod topology;
pub mod traffic;
pub mod units;

pub use analytics::{AnalyticsReport, HybridDct, Split, System, TimingParams};
pub use config::{Profile, RunConfig};
pub use distribution::FlowSizeDistribution;
pub use error::{Error, Result};
pub use model::{ClassFilter, DemandMatrix, Flow, FlowClass, NetworkConfig, NetworkSpec};
pub use scalar::Scalar;
pub use simulator::{simulate, SimOptions, SimResult};
pub use topology::{build_expander, expected_path_length, ExpanderGraph, Matching};
pub use traffic::{generate, TrafficModel, TrafficSpec, TrafficTrace};

/// Working float type.
pub type Real = f64;
/// Arbitrary-precision rational used for exact checks.
pub type Exact = num_rational::BigRational;
/// Timing parameters in each arithmetic.
pub type RealTiming = TimingParams<Real>;
pub type ExactTiming = TimingParams<Exact>;
