use super::{
    class_confidence, generate_pseudo_labels, ClassConfidence, PseudoLabelSet, RhoSchedule,
    ServerObjective, SourceModel,
};
use crate::client::PredictionUpload;
use crate::data::PublicPool;
use crate::error::{Error, Result};
use crate::nn::{fit, Activation, MlpModel, TrainConfig};
use crate::seed;

/// Server-side settings. Defaults: τ = 0.2, 10 iterations, ρ from 0.1 in steps of 0.05.
#[derive(Debug, Clone, PartialEq)]
pub struct FedolParams {
    /// `[input, hidden..., classes]`.
    pub server_arch: Vec<usize>,
    pub activation: Activation,
    pub schedule: RhoSchedule,
    pub tau: f64,
    pub iterations: usize,
    /// Applied for every iteration; the model is warm-started between iterations.
    pub train: TrainConfig,
    pub seed: u64,
}

impl FedolParams {
    pub fn new(server_arch: Vec<usize>) -> Self {
        Self {
            server_arch,
            activation: Activation::Relu,
            schedule: RhoSchedule::default(),
            tau: 0.2,
            iterations: 10,
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

/// Diagnostics of one alternation round.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    pub rho: f64,
    pub abstain_fraction: f64,
    pub pseudo_labels: PseudoLabelSet,
    /// Distillation loss after this round's training.
    pub loss_d: f64,
    /// Pseudo-label loss after this round's training.
    pub loss_u: f64,
    pub epoch_losses: Vec<f64>,
}

/// Single-owner state of the alternating optimization.
#[derive(Debug)]
pub struct FedolState<'a> {
    iteration: usize,
    server: MlpModel,
    uploads: &'a [PredictionUpload],
    public: &'a PublicPool,
    client_confidences: Vec<ClassConfidence>,
    pseudo_labels: Option<PseudoLabelSet>,
    params: &'a FedolParams,
}

impl<'a> FedolState<'a> {
    pub fn new(
        uploads: &'a [PredictionUpload],
        public: &'a PublicPool,
        params: &'a FedolParams,
    ) -> Result<Self> {
        if uploads.is_empty() {
            return Err(Error::Precondition("no client uploads".into()));
        }
        if params.iterations == 0 {
            return Err(Error::Precondition("need at least one iteration".into()));
        }
        params.schedule.validate()?;
        params.train.validate()?;
        if let Some(u) = uploads.iter().find(|u| u.samples() != public.len()) {
            return Err(Error::Shape(format!(
                "client {} uploaded {} rows for a pool of {}",
                u.client_id,
                u.samples(),
                public.len()
            )));
        }
        let server = MlpModel::new(
            &params.server_arch,
            params.activation,
            seed::derive(params.seed, "server-init", &[]),
        )?;
        if server.input_dim() != public.dims() || server.classes() != uploads[0].classes() {
            return Err(Error::Shape(format!(
                "server architecture {:?} does not fit {} features and {} classes",
                params.server_arch,
                public.dims(),
                uploads[0].classes()
            )));
        }
        let client_confidences = uploads
            .iter()
            .map(|u| class_confidence(&u.probs))
            .collect::<Result<_>>()?;
        Ok(Self {
            iteration: 0,
            server,
            uploads,
            public,
            client_confidences,
            pseudo_labels: None,
            params,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn server(&self) -> &MlpModel {
        &self.server
    }

    pub fn pseudo_labels(&self) -> Option<&PseudoLabelSet> {
        self.pseudo_labels.as_ref()
    }

    pub fn into_server(self) -> MlpModel {
        self.server
    }

    /// Runs one round: regenerate pseudo-labels with the server fixed, then
    /// train the server with the labels fixed.
    pub fn step(&mut self) -> Result<IterationReport> {
        let t = self.iteration + 1;
        let rho = self.params.schedule.rho(t);
        let features = self.public.features();

        let mut sources: Vec<SourceModel<'_>> = self
            .uploads
            .iter()
            .zip(&self.client_confidences)
            .map(|(u, c)| SourceModel {
                probs: &u.probs,
                confidence: c,
            })
            .collect();
        // the server only votes once it has been trained
        let server_view = if t > 1 {
            let probs = self.server.predict_proba(features)?;
            let conf = class_confidence(&probs)?;
            Some((probs, conf))
        } else {
            None
        };
        if let Some((probs, conf)) = &server_view {
            sources.push(SourceModel {
                probs,
                confidence: conf,
            });
        }
        let pseudo = generate_pseudo_labels(&sources, rho)?;

        let objective = ServerObjective::new(self.uploads, &pseudo, self.params.tau)?;
        let cfg = self
            .params
            .train
            .with_seed(seed::derive(self.params.seed, "server-train", &[t as u64]));
        let trained = fit(self.server.clone(), features, &objective, &cfg, None)?;
        self.server = trained.model;
        let (loss_d, loss_u) = objective.components(&self.server, features)?;

        self.iteration = t;
        let report = IterationReport {
            iteration: t,
            rho,
            abstain_fraction: pseudo.abstain_fraction(),
            pseudo_labels: pseudo.clone(),
            loss_d,
            loss_u,
            epoch_losses: trained.epoch_losses,
        };
        self.pseudo_labels = Some(pseudo);
        Ok(report)
    }
}

/// Final server model plus the report of every round.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub model: MlpModel,
    pub reports: Vec<IterationReport>,
}

/// Runs all `params.iterations` rounds, calling `observe` after each.
pub fn run_fedol<F>(
    uploads: &[PredictionUpload],
    public: &PublicPool,
    params: &FedolParams,
    mut observe: F,
) -> Result<RunOutcome>
where
    F: FnMut(&IterationReport, &MlpModel),
{
    let mut state = FedolState::new(uploads, public, params)?;
    let mut reports = Vec::with_capacity(params.iterations);
    for _ in 0..params.iterations {
        let report = state.step()?;
        observe(&report, state.server());
        reports.push(report);
    }
    Ok(RunOutcome {
        model: state.into_server(),
        reports,
    })
}
