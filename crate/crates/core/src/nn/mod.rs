//! Dense numeric substrate: matrices, probability utilities, a small
//! multilayer perceptron with analytic backprop and a mini-batch SGD trainer.
//!
//! Everything is `f64`. Logs are natural, and probabilities are clamped below
//! by [`PROB_EPS`] before any log is taken.

mod matrix;
mod mlp;
mod prob;
mod train;

pub use matrix::Matrix;
pub use mlp::{Activation, Dense, ForwardCache, Gradients, MlpModel};
pub use prob::{
    argmax, cross_entropy, entropy, kl_divergence, softmax, softmax_into, PredictionMatrix,
    ProbVector, PROB_EPS,
};
pub use train::{
    accuracy, batch_loss_and_grad, fit, one_hot, train_supervised, Objective, Penalty,
    ProximalPenalty, SoftTargetCrossEntropy, TrainConfig, Trained,
};
