//! Reference strategies: isolated local training, parameter averaging
//! (FedAvg, FedProx) and two one-shot knowledge baselines that consume the
//! same uploads as the server algorithm (uniform-mixture distillation and
//! minimum-entropy voting).

use std::fmt;

use rayon::prelude::*;

use crate::client::{local_train, ClientSpec, PredictionUpload};
use crate::data::{Dataset, PublicPool};
use crate::error::{Error, Result};
use crate::nn::{
    accuracy, argmax, entropy, fit, one_hot, Activation, Matrix, MlpModel, PredictionMatrix,
    ProximalPenalty, SoftTargetCrossEntropy, TrainConfig,
};
use crate::seed;

/// A strategy to evaluate in an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Local,
    FedAvg { rounds: usize },
    FedProx { rounds: usize, mu: f64 },
    FedDf { rounds: usize },
    MinEntropy { rounds: usize },
    FedOl,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Local => "local",
            Strategy::FedAvg { .. } => "fedavg",
            Strategy::FedProx { .. } => "fedprox",
            Strategy::FedDf { .. } => "feddf",
            Strategy::MinEntropy { .. } => "min_entropy",
            Strategy::FedOl => "fedol",
        }
    }

    /// Whether clients share predictions (one-shot) rather than parameters.
    pub fn is_knowledge_based(&self) -> bool {
        matches!(
            self,
            Strategy::FedDf { .. } | Strategy::MinEntropy { .. } | Strategy::FedOl
        )
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Strategy::FedAvg { rounds }
            | Strategy::FedDf { rounds }
            | Strategy::MinEntropy { rounds }
                if rounds == 0 =>
            {
                Err(Error::Precondition(format!("{} needs at least one round", self.name())))
            }
            Strategy::FedProx { rounds, mu } if rounds == 0 || mu.is_nan() || mu < 0.0 => Err(
                Error::Precondition(format!("fedprox needs rounds >= 1 and mu >= 0, got {rounds}, {mu}")),
            ),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-client test accuracies of isolated training.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalReport {
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub max: f64,
}

/// Trains every client alone and scores it on the shared test set.
pub fn run_local(shards: &[Dataset], specs: &[ClientSpec], test: &Dataset) -> Result<LocalReport> {
    check_fleet(shards, specs)?;
    let accuracies = shards
        .par_iter()
        .zip(specs)
        .map(|(shard, spec)| {
            let model = local_train(spec, shard)?;
            accuracy(&model, test.features(), test.labels())
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
    let max = accuracies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(LocalReport {
        accuracies,
        mean,
        max,
    })
}

fn check_fleet(shards: &[Dataset], specs: &[ClientSpec]) -> Result<()> {
    if shards.is_empty() {
        return Err(Error::Precondition("no client shards".into()));
    }
    if shards.len() != specs.len() {
        return Err(Error::Shape(format!(
            "{} shards for {} clients",
            shards.len(),
            specs.len()
        )));
    }
    if let Some((k, _)) = shards.iter().enumerate().find(|(_, s)| s.is_empty()) {
        return Err(Error::Precondition(format!("client {k} has an empty shard")));
    }
    Ok(())
}

/// Checks that every client shares one architecture and returns it.
pub fn uniform_architecture(specs: &[ClientSpec]) -> Result<(&[usize], Activation)> {
    let first = specs
        .first()
        .ok_or_else(|| Error::Precondition("empty fleet".into()))?;
    if let Some(s) = specs
        .iter()
        .find(|s| s.arch != first.arch || s.activation != first.activation)
    {
        return Err(Error::IncompatibleArchitecture(format!(
            "client {} uses {:?}/{} but client {} uses {:?}/{}",
            s.id,
            s.arch,
            s.activation.name(),
            first.id,
            first.arch,
            first.activation.name()
        )));
    }
    Ok((&first.arch, first.activation))
}

/// Shard-size weighted parameter mean, computed as offsets from the first
/// model so that averaging identical models is exact.
pub fn weighted_average(models: &[MlpModel], weights: &[usize]) -> Result<MlpModel> {
    let first = models
        .first()
        .ok_or_else(|| Error::Precondition("nothing to average".into()))?;
    if models.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{} models but {} weights",
            models.len(),
            weights.len()
        )));
    }
    if let Some(m) = models.iter().find(|m| !m.same_architecture(first)) {
        return Err(Error::IncompatibleArchitecture(format!(
            "cannot average {:?} with {:?}",
            m.layer_sizes(),
            first.layer_sizes()
        )));
    }
    let total: usize = weights.iter().sum();
    if total == 0 {
        return Err(Error::Precondition("weights sum to zero".into()));
    }
    let base = first.params();
    let mut avg = base.clone();
    for (m, &w) in models.iter().zip(weights).skip(1) {
        let share = w as f64 / total as f64;
        for ((a, p), b) in avg.iter_mut().zip(m.params()).zip(&base) {
            *a += share * (p - b);
        }
    }
    let mut out = first.clone();
    out.set_params(&avg)?;
    Ok(out)
}

fn parameter_rounds<F>(
    shards: &[Dataset],
    specs: &[ClientSpec],
    rounds: usize,
    mu: Option<f64>,
    seed: u64,
    mut observe: F,
) -> Result<MlpModel>
where
    F: FnMut(usize, &MlpModel),
{
    check_fleet(shards, specs)?;
    if rounds == 0 {
        return Err(Error::Precondition("need at least one round".into()));
    }
    let (arch, activation) = uniform_architecture(specs)?;
    let mut global = MlpModel::new(arch, activation, seed::derive(seed, "global-init", &[]))?;
    let sizes: Vec<usize> = shards.iter().map(Dataset::len).collect();
    for round in 1..=rounds {
        let penalty = mu.map(|mu| ProximalPenalty::new(mu, &global));
        let locals = shards
            .par_iter()
            .zip(specs)
            .map(|(shard, spec)| {
                let cfg = spec
                    .train
                    .with_seed(seed::derive(spec.train.seed, "round", &[round as u64]));
                let objective = SoftTargetCrossEntropy::new(shard.one_hot_labels());
                let pen = penalty.as_ref().map(|p| p as &dyn crate::nn::Penalty);
                fit(global.clone(), shard.features(), &objective, &cfg, pen).map(|t| t.model)
            })
            .collect::<Result<Vec<_>>>()?;
        global = weighted_average(&locals, &sizes)?;
        observe(round, &global);
    }
    Ok(global)
}

/// FedAvg: broadcast, local epochs, shard-size weighted average, repeated.
pub fn run_fedavg<F>(
    shards: &[Dataset],
    specs: &[ClientSpec],
    rounds: usize,
    seed: u64,
    observe: F,
) -> Result<MlpModel>
where
    F: FnMut(usize, &MlpModel),
{
    parameter_rounds(shards, specs, rounds, None, seed, observe)
}

/// FedProx: FedAvg with a `(mu/2)·||w - w_global||²` term on each client.
pub fn run_fedprox<F>(
    shards: &[Dataset],
    specs: &[ClientSpec],
    rounds: usize,
    mu: f64,
    seed: u64,
    observe: F,
) -> Result<MlpModel>
where
    F: FnMut(usize, &MlpModel),
{
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::Precondition(format!("mu must be non-negative, got {mu}")));
    }
    parameter_rounds(shards, specs, rounds, Some(mu), seed, observe)
}

fn check_uploads(uploads: &[PredictionUpload], public: &PublicPool) -> Result<(usize, usize)> {
    let first = uploads
        .first()
        .ok_or_else(|| Error::Precondition("no client uploads".into()))?;
    let (n, c) = (first.samples(), first.classes());
    if n != public.len() {
        return Err(Error::Shape(format!(
            "uploads cover {n} samples, pool has {}",
            public.len()
        )));
    }
    if let Some(u) = uploads.iter().find(|u| u.samples() != n || u.classes() != c) {
        return Err(Error::Shape(format!(
            "client {} uploaded {}x{}, expected {n}x{c}",
            u.client_id,
            u.samples(),
            u.classes()
        )));
    }
    Ok((n, c))
}

/// Uniform mean of the client distributions on every sample.
pub fn feddf_targets(uploads: &[PredictionUpload]) -> Result<PredictionMatrix> {
    let first = uploads
        .first()
        .ok_or_else(|| Error::Precondition("no client uploads".into()))?;
    let mut m = Matrix::zeros(first.samples(), first.classes());
    let share = 1.0 / uploads.len() as f64;
    for u in uploads {
        for (t, p) in m.as_mut_slice().iter_mut().zip(u.probs.matrix().as_slice()) {
            *t += share * p;
        }
    }
    PredictionMatrix::new(m)
}

/// Per sample, the argmax of the single lowest-entropy client (ties to the earliest client).
pub fn min_entropy_labels(uploads: &[PredictionUpload]) -> Result<Vec<usize>> {
    let first = uploads
        .first()
        .ok_or_else(|| Error::Precondition("no client uploads".into()))?;
    Ok((0..first.samples())
        .map(|i| {
            let mut best = 0;
            let mut best_h = entropy(uploads[0].probs.row(i));
            for (k, u) in uploads.iter().enumerate().skip(1) {
                let h = entropy(u.probs.row(i));
                if h < best_h {
                    best = k;
                    best_h = h;
                }
            }
            argmax(uploads[best].probs.row(i))
        })
        .collect())
}

/// Trains a server on fixed per-sample targets for `rounds` warm-started
/// blocks of `train.epochs` epochs.
#[allow(clippy::too_many_arguments)]
fn distill_rounds<F>(
    label: &str,
    targets: Matrix,
    public: &PublicPool,
    server_arch: &[usize],
    activation: Activation,
    rounds: usize,
    train: &TrainConfig,
    seed: u64,
    mut observe: F,
) -> Result<MlpModel>
where
    F: FnMut(usize, &MlpModel),
{
    if rounds == 0 {
        return Err(Error::Precondition("need at least one round".into()));
    }
    let mut model = MlpModel::new(server_arch, activation, seed::derive(seed, label, &[]))?;
    let objective = SoftTargetCrossEntropy::new(targets);
    for round in 1..=rounds {
        let cfg = train.with_seed(seed::derive(seed, label, &[round as u64]));
        model = fit(model, public.features(), &objective, &cfg, None)?.model;
        observe(round, &model);
    }
    Ok(model)
}

/// Distills the uniform mixture of client predictions into a server model.
#[allow(clippy::too_many_arguments)]
pub fn run_feddf<F>(
    uploads: &[PredictionUpload],
    public: &PublicPool,
    server_arch: &[usize],
    activation: Activation,
    rounds: usize,
    train: &TrainConfig,
    seed: u64,
    observe: F,
) -> Result<MlpModel>
where
    F: FnMut(usize, &MlpModel),
{
    check_uploads(uploads, public)?;
    let targets = feddf_targets(uploads)?;
    distill_rounds(
        "feddf",
        targets.matrix().clone(),
        public,
        server_arch,
        activation,
        rounds,
        train,
        seed,
        observe,
    )
}

/// Trains a server on the minimum-entropy client's hard labels.
#[allow(clippy::too_many_arguments)]
pub fn run_min_entropy<F>(
    uploads: &[PredictionUpload],
    public: &PublicPool,
    server_arch: &[usize],
    activation: Activation,
    rounds: usize,
    train: &TrainConfig,
    seed: u64,
    observe: F,
) -> Result<MlpModel>
where
    F: FnMut(usize, &MlpModel),
{
    let (_, classes) = check_uploads(uploads, public)?;
    let labels = min_entropy_labels(uploads)?;
    distill_rounds(
        "min_entropy",
        one_hot(&labels, classes),
        public,
        server_arch,
        activation,
        rounds,
        train,
        seed,
        observe,
    )
}
