//! Simulation and optimization toolkit for a SWIPT-enabled multi-antenna base
//! station whose uplink front-end is a Rydberg atomic quantum receiver.
//!
//! The crate is organized bottom-up:
//!
//! - [`scenario`]: system parameters, geometry, path loss, receiver front-ends
//! - [`channel`]: Rayleigh channels, pilots, MMSE estimation
//! - [`rates`]: closed-form rate and energy bounds with Monte-Carlo oracles
//! - [`approx`]: monomial minorants for successive approximation
//! - [`gp`]: geometric-program and LP solvers
//! - [`optimizer`]: the joint power / splitting / block-length design
//! - [`harness`]: experiment runner, CSV output and CLI plumbing

pub mod approx;
pub mod channel;
pub mod error;
pub mod gp;
pub mod harness;
pub mod optimizer;
pub mod rates;
pub mod scenario;
pub mod units;

pub use error::{Error, Result};
