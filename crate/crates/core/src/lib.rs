//! One-shot federated learning through prediction sharing.
//!
//! Clients train heterogeneous local classifiers once and upload a single
//! matrix of softmax predictions over a shared unlabeled public pool. The
//! server then alternates between two steps to grow a larger model:
//!
//! - pseudo-label generation by entropy-gated, class-confidence-weighted
//!   voting across all source models ([`fedol::generate_pseudo_labels`]);
//! - server training on a per-client, entropy-weighted distillation loss plus
//!   a cross-entropy term on the admitted pseudo-labels ([`fedol::server_loss`]).
//!
//! The crate also ships the substrate this needs (a small f64 MLP with
//! analytic gradients in [`nn`]), desk-scale data generation and non-IID
//! partitioning ([`data`]), reference strategies ([`baselines`]) and an
//! experiment driver with cost accounting ([`harness`]).

pub mod baselines;
pub mod client;
pub mod data;
mod error;
pub mod fedol;
pub mod harness;
pub mod nn;
pub mod seed;

pub use client::{ClientSpec, PredictionUpload};
pub use data::{Dataset, PartitionScheme, PartitionSpec, PublicPool};
pub use error::{Error, Result};
pub use fedol::{ClassConfidence, PseudoLabelSet, RhoSchedule};
pub use harness::ExperimentConfig;
pub use nn::{Activation, Matrix, MlpModel, PredictionMatrix, ProbVector, TrainConfig};
