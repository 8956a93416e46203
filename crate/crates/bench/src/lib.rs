//! Deterministic inputs shared by the benchmarks.

use fedol_core::data::make_synthetic;
use fedol_core::{Activation, Dataset, Matrix, MlpModel, PredictionMatrix};

/// Gaussian-blob task sized like the desk-scale experiments.
pub fn task(classes: usize, dims: usize, per_class: usize) -> Dataset {
    make_synthetic(classes, dims, per_class, 2.0, 1).expect("valid task parameters")
}

/// A freshly initialized model over `features`.
pub fn model(features: &Matrix, hidden: &[usize], classes: usize) -> MlpModel {
    let mut arch = vec![features.cols()];
    arch.extend_from_slice(hidden);
    arch.push(classes);
    MlpModel::new(&arch, Activation::Relu, 7).expect("valid architecture")
}

/// `clients` independent random models' predictions on the same pool.
pub fn client_predictions(features: &Matrix, classes: usize, clients: usize) -> Vec<PredictionMatrix> {
    (0..clients)
        .map(|k| {
            MlpModel::new(&[features.cols(), 16, classes], Activation::Relu, 100 + k as u64)
                .and_then(|m| m.predict_proba(features))
                .expect("valid model")
        })
        .collect()
}
