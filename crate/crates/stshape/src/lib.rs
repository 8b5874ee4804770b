//! Joint space-time transmit waveform shaping for a MIMO link coexisting
//! in an occupied frequency band.
//!
//! The crate senses (or synthesizes) the space-time occupancy
//! autocorrelation of a congested band, jointly optimizes the quaternary
//! pulse code and the transmit beam weights to reach a target pre-detection
//! SINR with minimum transmit energy, and provides the max-SINR receiver
//! chain plus a deterministic sweep harness for link-level studies.
//!
//! Module map:
//! - [`linalg`]: complex Kronecker / Hermitian-eigen / HPD-solve kernel
//! - [`model`]: link domain types and the analytic SINR/energy relations
//! - [`occupancy`]: interference synthesis and autocorrelation estimation
//! - [`shaper`]: the joint shaping optimizer and its degraded variants
//! - [`receiver`]: max-SINR filtering, detection, empirical SINR/BER
//! - [`sim`]: scenario configs, sweeps, CSV/plot-data emission

pub mod error;
pub mod linalg;
pub mod model;
pub mod occupancy;
pub mod qam;
pub mod receiver;
pub mod rng;
pub mod shaper;
pub mod sim;

pub use error::{Error, Result};
