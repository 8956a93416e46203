//! Server-side one-shot aggregation.
//!
//! The server holds one [`PredictionUpload`](crate::PredictionUpload) per
//! client and alternates two blocks:
//!
//! 1. **Pseudo-labels.** Every source model (the clients, plus the previous
//!    server model from the second iteration on) sets an entropy baseline at
//!    the `⌈ρ·N⌉`-th lowest entropy of its own predictions. On each sample only
//!    models at or below their baseline vote; a vote is `+1` for the model's
//!    argmax and `-1` elsewhere, weighted per class by the model's
//!    [`ClassConfidence`]. Samples with no reliable voter abstain.
//! 2. **Server training.** Mini-batch SGD on
//!    `L = E_x[Σ_k λ_k(x) KL(p_k(x) ‖ q(x))] + τ · E_labeled[CE(ŷ, q(x))]`
//!    where `λ(x)` is a softmax over negative client entropies.
//!
//! `ρ` grows every iteration so harder samples are admitted as the server improves.

mod labels;
mod objective;
mod run;

pub use labels::{
    admission_rank, aggregate_vote, class_confidence, entropy_baseline, generate_pseudo_labels,
    reliable_set, vote_vector, ClassConfidence, PseudoLabelSet, RhoSchedule, SourceModel,
};
pub use objective::{distill_weights, server_loss, ServerLoss, ServerObjective};
pub use run::{run_fedol, FedolParams, FedolState, IterationReport, RunOutcome};
