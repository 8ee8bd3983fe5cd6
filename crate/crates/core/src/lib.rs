//! Energy-efficiency optimization for WPT-powered multicell massive
//! MIMO-NOMA uplinks.
//!
//! Devices harvest energy from their BS during the first `τ_k` seconds of a
//! block and spend it on the uplink for the rest. [`dinkelbach`] turns
//! max R/E into a sequence of `R − ηE` problems, each solved by the
//! cell-distributed consensus ADMM in [`admm`] or by the exhaustive search in
//! [`oracle`].
//!
//! ```no_run
//! use noma_ee::{config::NetworkConfig, experiment};
//!
//! let cfg = NetworkConfig::with_shape(2, 2, 2, 8);
//! let run = experiment::solve(&cfg, &Default::default()).unwrap();
//! println!("{:.4} bits/J", run.report.ee);
//! ```

pub mod admm;
pub mod channel;
pub mod config;
pub mod dinkelbach;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod metrics;
pub mod oracle;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
