//! System-level simulator for the downlink of multi-CPU cell-free massive MIMO.
//!
//! APs under the same CPU are phase-synchronized and can serve a user
//! coherently; APs under different CPUs cannot. A user's serving cluster is
//! therefore split into per-CPU coherent groups whose streams the user
//! separates with successive interference cancellation. The crate provides
//!
//! - [`scenario`]: deployments with wrap-around geometry and AP→CPU assignment,
//! - [`channel`]: three-slope pathloss, correlated shadowing, local scattering,
//! - [`pilot`]: random pilot assignment and MMSE estimation,
//! - [`clustering`]: CPU-aware user-centric clustering and group formation,
//! - [`spectral_efficiency`]: the closed-form SE and a Monte Carlo oracle,
//! - [`harness`]: seeded experiments, sweeps and CSV/JSON output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod clustering;
pub mod error;
pub mod harness;
pub mod instance;
pub mod linalg;
pub mod pilot;
pub mod rng;
pub mod scenario;
pub mod spectral_efficiency;

pub use channel::{ChannelRealization, ChannelStatistics, LargeScaleModelConfig, PathLossParams};
pub use clustering::{Algorithm, ClusteringParams, CoherentGroup, ServingStructure, ThresholdMode, TransmissionMode};
pub use error::{Error, Result};
pub use harness::{DropResult, ExperimentConfig, ExperimentReport, ExperimentResult};
pub use pilot::{EstimationStatistics, PilotAssignment, PowerConfig, Powers};
pub use scenario::{Deployment, ScenarioConfig};
pub use spectral_efficiency::{FrameConfig, LinkModel, RateResult, SETerms, SicOrder};
