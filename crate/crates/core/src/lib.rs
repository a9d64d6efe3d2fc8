//! Adaptive Kalman filtering for linear time-varying systems with unknown
//! process and measurement noise covariances.
//!
//! Noise covariances are identified on line from measurement-difference
//! autocovariances ([`mda`]) and estimated either by plain recursive least
//! squares ([`rls`]) or by a Riemannian trust-region solver on the manifold of
//! SPD matrices ([`objective`], [`solver`]), which keeps every estimate
//! positive definite. [`filter`] runs the adaptive Kalman filter on top and
//! [`sim`] provides the reference simulation study.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod filter;
pub mod mda;
pub mod objective;
pub mod rls;
pub mod sim;
pub mod solver;
pub mod spd;
pub mod symvec;
pub mod system;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use filter::{FilterConfig, Method, Rtrakf};
pub use sim::{MetricRow, BenchmarkSystem};
pub use spd::{SpdMatrix, TangentPair};
pub use system::{LtiSystem, LtvSystem};
