//! Remote state estimation of Gauss–Markov sources over packet-erasure
//! broadcast and multi-access channels.
//!
//! The crate simulates encoders running Kalman filters, threshold
//! (value-of-information) and baseline scheduling policies, lossy links with
//! one-step delay, and the linear decoders at the monitors. Runs are scored
//! by a loss that adds transmission costs to weighted squared estimation
//! errors, and batches compare policies under common random numbers.

pub mod batch;
pub mod channel;
pub mod cli;
pub mod error;
pub mod estimation;
pub mod export;
pub mod linalg;
pub mod model;
pub mod policy;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod validation;

pub use batch::{run_batch, run_batch_with_threads, BatchSummary};
pub use error::{ConfigError, SimError};
pub use model::{GaussMarkovModel, Scenario, ScenarioKind};
pub use policy::PolicySpec;
pub use sim::{compute_phi, run_once, RunMetrics};
